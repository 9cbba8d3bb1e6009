// twinguard command-line front end.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"
#include "twinguard/error.hpp"
#include "twinguard/experiment.hpp"
#include "twinguard/feature_selection.hpp"
#include "twinguard/flow_model.hpp"
#include "twinguard/harness.hpp"
#include "twinguard/mitigation.hpp"
#include "twinguard/online_selection.hpp"
#include "twinguard/twin_graph.hpp"

namespace tg = twinguard;

namespace {

std::vector<tg::FlowRecord> labeled_only(std::vector<tg::FlowRecord> records, const std::string& what) {
  for (const auto& r : records) {
    if (!r.label) throw tg::Error(tg::ErrorCode::UnknownLabel, what + " contains unlabeled rows");
  }
  return records;
}

int cmd_ingest(const std::string& profile, const std::string& in, const std::string& out) {
  const auto schema = tg::load_schema(profile);
  const auto data = tg::load_dataset(in, schema);
  std::ofstream os(out, std::ios::trunc);
  if (!os) throw tg::Error(tg::ErrorCode::Io, "cannot write " + out);
  tg::write_normalized(os, data.records, schema);
  std::cout << "rows read " << data.rows_read << ", written " << data.records.size() << ", skipped "
            << data.rows_skipped << '\n';
  return 0;
}

int cmd_train(const std::string& profile, const std::string& data_path, const std::string& classifier,
              const std::string& fs, const std::string& out, std::uint64_t seed, const std::string& timing) {
  const auto schema = tg::load_schema(profile);
  const auto records = labeled_only(tg::load_dataset(data_path, schema).records, data_path);
  auto config = tg::ExperimentSpec::default_selection();
  config.seed = seed;
  if (const auto t = tg::timing_mode_from_string(timing)) config.timing = *t;
  else throw tg::Error(tg::ErrorCode::InvalidConfig, "timing must be wall or modeled");

  tg::ProductionPair pair;
  if (classifier == "auto") {
    const std::span<const tg::FlowRecord> fs_data(records.data(), std::min(config.batch_size, records.size()));
    auto outcome = tg::run_selection_labeled(records, fs_data, config, "train", 0);
    pair = std::move(outcome.pair);
  } else {
    const auto kind = tg::classifier_kind_from_id(classifier);
    if (!kind) throw tg::Error(tg::ErrorCode::InvalidConfig, "unknown classifier '" + classifier + "'");
    const auto fs_kind = tg::fs_kind_from_id(fs);
    if (!fs_kind) throw tg::Error(tg::ErrorCode::InvalidConfig, "unknown feature selection '" + fs + "'");
    const auto ranking = tg::rank_features(*fs_kind, records, config.top_k);
    pair.fs = *fs_kind;
    pair.features = ranking.selected;
    std::sort(pair.features.begin(), pair.features.end());
    pair.model = tg::fit(*kind, records, pair.features, seed);
  }
  tg::save_pair(out, pair);
  std::cout << "trained " << tg::id(pair.model.kind()) << " with " << tg::id(pair.fs) << " features [";
  for (std::size_t i = 0; i < pair.features.size(); ++i) {
    std::cout << (i ? "," : "") << schema.feature(pair.features[i]).name;
  }
  std::cout << "] on " << records.size() << " records -> " << out << '\n';
  return 0;
}

int cmd_replay(const std::string& spec_path, std::optional<std::uint64_t> seed,
               const std::vector<std::string>& overrides, const std::string& out_dir, bool quiet) {
  if (!seed && std::getenv("CI")) {
    throw tg::Error(tg::ErrorCode::InvalidSpec, "--seed is required when CI is set");
  }
  auto spec = tg::ExperimentSpec::load(spec_path);
  const auto base = std::filesystem::path(spec_path).parent_path();
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw tg::Error(tg::ErrorCode::InvalidSpec, "--set expects key=value");
    spec.set(kv.substr(0, eq), kv.substr(eq + 1), base);
  }
  if (seed) spec.seed = *seed;
  spec.validate();

  tg::ReplayOptions options;
  options.out_dir = out_dir;
  if (!quiet) options.progress = [](std::string_view msg) { std::cerr << "[replay] " << msg << '\n'; };
  const auto result = tg::replay(spec, options);
  std::cout << result.report.render();
  std::cout << "artifacts: " << result.run_dir.string() << '\n';
  return 0;
}

int cmd_report(const std::string& dir, const std::string& run, bool last, bool as_json) {
  std::filesystem::path run_dir;
  if (!run.empty()) run_dir = run;
  else if (last) run_dir = tg::last_run(dir);
  else throw tg::Error(tg::ErrorCode::InvalidSpec, "give a run directory or --last");
  const auto report = tg::load_report(run_dir);
  if (as_json) std::cout << report.to_json().dump(2) << '\n';
  else std::cout << report.render();
  return 0;
}

int cmd_resolve(std::uint64_t request, tg::Verdict verdict, const std::string& dir, const std::string& run) {
  const std::filesystem::path run_dir = run.empty() ? tg::last_run(dir) : std::filesystem::path(run);
  const auto journal = run_dir / "journal.jsonl";
  tg::TwinGraph twin;
  twin.restore_from_journal(journal);
  twin.attach_journal(journal, true);
  std::uint64_t ts = 0;
  for (const auto& e : twin.event_log()) ts = std::max(ts, e.timestamp);

  tg::MitigationEngine engine(twin, tg::RiskPolicy::defaults());
  engine.persist_to(run_dir);
  const auto action = engine.resolve_approval(request, verdict, ts);
  const auto node = twin.node(action.target);
  std::cout << "request " << request << ": " << tg::to_string(verdict) << ", node " << node.node_id
            << " is now " << tg::to_string(node.status) << '\n';
  return 0;
}

int cmd_select(const std::string& profile, const std::string& batch_path, const std::string& pool_path,
               std::uint64_t seed, const std::string& out, const std::string& model_out,
               const std::string& timing, std::size_t threads) {
  const auto schema = tg::load_schema(profile);
  const auto batch = tg::load_dataset(batch_path, schema).records;
  const auto pool = labeled_only(tg::load_dataset(pool_path, schema).records, pool_path);
  auto config = tg::ExperimentSpec::default_selection();
  config.seed = seed;
  config.threads = threads;
  config.batch_size = batch.size();
  if (const auto t = tg::timing_mode_from_string(timing)) config.timing = *t;
  else throw tg::Error(tg::ErrorCode::InvalidConfig, "timing must be wall or modeled");

  const auto baseline = tg::sample_baseline(pool, config.baseline_size, config.baseline_attack_ratio, seed);
  const auto outcome = tg::run_selection(batch, baseline, config, "manual", 0);
  const auto& r = outcome.report;
  std::cout << "classifier scores\n";
  for (const auto& s : r.classifier_scores) {
    std::cout << "  " << s.candidate << "  sigma " << s.sigma << "  time_ms " << s.time_ms << "  combined "
              << s.combined << '\n';
  }
  std::cout << "feature selection scores\n";
  for (const auto& s : r.fs_scores) {
    std::cout << "  " << s.candidate << "  sigma " << s.sigma << "  combined " << s.combined << '\n';
  }
  std::cout << "winner " << tg::id(r.winning_classifier) << " + " << tg::id(r.winning_fs) << '\n';
  if (!out.empty()) r.write(out);
  if (!model_out.empty()) tg::save_pair(model_out, outcome.pair);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin attack detection pipeline"};
  app.require_subcommand(1);

  std::string profile, in, out, data, classifier = "auto", fs = "variance", timing = "modeled";
  std::string spec, dir = "reports", run, batch, pool, model_out;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> replay_seed;
  std::vector<std::string> overrides;
  bool quiet = false, last = false, as_json = false;
  std::uint64_t request = 0;
  std::size_t threads = 1;

  auto* ingest = app.add_subcommand("ingest", "Normalize a raw dataset CSV through a profile");
  ingest->add_option("--profile", profile, "Profile name or path")->required();
  ingest->add_option("--in", in, "Raw CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Normalized CSV to write")->required();

  auto* train = app.add_subcommand("train", "Fit an initial production model");
  train->add_option("--profile", profile, "Profile name or path")->required();
  train->add_option("--data", data, "Labeled CSV (raw or normalized)")->required()->check(CLI::ExistingFile);
  train->add_option("--classifier", classifier, "Classifier id, or auto for the tournament")->capture_default_str();
  train->add_option("--fs", fs, "Feature selection id when --classifier is fixed")->capture_default_str();
  train->add_option("--out", out, "Model file to write")->required();
  train->add_option("--seed", seed, "Random seed")->capture_default_str();
  train->add_option("--timing", timing, "Detection-time source: wall or modeled")->capture_default_str();

  auto* replay = app.add_subcommand("replay", "Run an experiment spec through the pipeline");
  replay->add_option("--spec", spec, "Experiment spec file")->required()->check(CLI::ExistingFile);
  replay->add_option("--seed", replay_seed, "Random seed (overrides the spec)");
  replay->add_option("--set", overrides, "Override a spec key: key=value");
  replay->add_option("--out", dir, "Reports directory")->capture_default_str();
  replay->add_flag("--quiet", quiet, "No progress output");

  auto* report = app.add_subcommand("report", "Render a stored experiment report");
  report->add_option("run", run, "Run directory");
  report->add_flag("--last", last, "Use the most recent run");
  report->add_option("--dir", dir, "Reports directory")->capture_default_str();
  report->add_flag("--json", as_json, "Print the machine-readable report");

  auto* approve = app.add_subcommand("approve", "Approve a pending isolation request");
  auto* deny = app.add_subcommand("deny", "Deny a pending isolation request");
  for (auto* sub : {approve, deny}) {
    sub->add_option("id", request, "Request id")->required();
    sub->add_option("--dir", dir, "Reports directory")->capture_default_str();
    sub->add_option("--run", run, "Run directory (default: the most recent run)");
  }

  auto* select = app.add_subcommand("select", "Run one online-selection pass");
  select->add_option("--profile", profile, "Profile name or path")->required();
  select->add_option("--batch", batch, "Unlabeled batch CSV")->required()->check(CLI::ExistingFile);
  select->add_option("--baseline-pool", pool, "Labeled CSV to sample the baseline from")
      ->required()
      ->check(CLI::ExistingFile);
  select->add_option("--seed", seed, "Random seed")->capture_default_str();
  select->add_option("--out", out, "Selection report to write");
  select->add_option("--model-out", model_out, "Write the winning pair here");
  select->add_option("--timing", timing, "Detection-time source: wall or modeled")->capture_default_str();
  select->add_option("--threads", threads, "Candidate threads, 0 for all cores")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(profile, in, out);
    if (*train) return cmd_train(profile, data, classifier, fs, out, seed, timing);
    if (*replay) return cmd_replay(spec, replay_seed, overrides, dir, quiet);
    if (*report) return cmd_report(dir, run, last, as_json);
    if (*approve) return cmd_resolve(request, tg::Verdict::Approve, dir, run);
    if (*deny) return cmd_resolve(request, tg::Verdict::Deny, dir, run);
    if (*select) return cmd_select(profile, batch, pool, seed, out, model_out, timing, threads);
  } catch (const tg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
