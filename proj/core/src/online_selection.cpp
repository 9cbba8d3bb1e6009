#include "twinguard/online_selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "twinguard/error.hpp"
#include "twinguard/twin_graph.hpp"
#include "util.hpp"

namespace twinguard {

using nlohmann::json;

std::string_view to_string(TimingMode m) noexcept {
  return m == TimingMode::Wall ? "wall" : "modeled";
}

std::optional<TimingMode> timing_mode_from_string(std::string_view s) noexcept {
  if (s == "wall") return TimingMode::Wall;
  if (s == "modeled") return TimingMode::Modeled;
  return std::nullopt;
}

void SelectionConfig::validate() const {
  if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidConfig, "alpha must be > 0");
  if (!(beta >= 0.0)) throw Error(ErrorCode::InvalidConfig, "beta must be >= 0");
  if (!(split > 0.0 && split < 1.0)) throw Error(ErrorCode::InvalidConfig, "split must be in (0,1)");
  if (batch_size == 0) throw Error(ErrorCode::InvalidConfig, "batch size must be > 0");
  if (baseline_attack_ratio < 0.0 || baseline_attack_ratio > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "baseline attack ratio outside [0,1]");
  }
}

json SelectionConfig::to_json() const {
  json hp = json::object();
  for (const auto k : kAllClassifierKinds) hp[std::string(id(k))] = hyperparameters(k);
  return {{"alpha", alpha},
          {"beta", beta},
          {"batch_size", batch_size},
          {"baseline_size", baseline_size},
          {"baseline_attack_ratio", baseline_attack_ratio},
          {"split", split},
          {"seed", seed},
          {"top_k", top_k},
          {"timing", std::string(to_string(timing))},
          {"classifier_hyperparameters", hp}};
}

double sigma(const ConfusionCounts& c) noexcept {
  const double tp = static_cast<double>(c.tp);
  const double recall = (c.tp + c.fn) == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fn);
  const double precision = (c.tp + c.fp) == 0 ? 0.0 : tp / static_cast<double>(c.tp + c.fp);
  return 0.6 * recall + 0.4 * precision;
}

json CandidateScore::to_json() const {
  return {{"candidate", candidate}, {"order", order},        {"counts", twinguard::to_json(counts)},
          {"sigma", sigma},         {"time_ms", time_ms},    {"wall_ms", wall_ms},
          {"time_norm", time_norm}, {"combined", combined},  {"features", features}};
}

CandidateScore CandidateScore::from_json(const json& j) {
  CandidateScore s;
  s.candidate = j.at("candidate").get<std::string>();
  s.order = j.at("order").get<std::size_t>();
  s.counts = confusion_from_json(j.at("counts"));
  s.sigma = j.at("sigma").get<double>();
  s.time_ms = j.at("time_ms").get<double>();
  s.wall_ms = j.value("wall_ms", s.time_ms);
  s.time_norm = j.at("time_norm").get<double>();
  s.combined = j.at("combined").get<double>();
  s.features = j.value("features", std::vector<std::size_t>{});
  return s;
}

CandidateScore score_candidate(std::string candidate, const ConfusionCounts& counts,
                               double time_ms, std::span<const double> cohort_times,
                               const SelectionConfig& config) {
  CandidateScore s;
  s.candidate = std::move(candidate);
  s.counts = counts;
  s.sigma = sigma(counts);
  s.time_ms = time_ms;
  s.wall_ms = time_ms;
  double lo = time_ms, hi = time_ms;
  for (const double t : cohort_times) {
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  s.time_norm = hi > lo ? (time_ms - lo) / (hi - lo) : 0.0;
  s.combined = config.alpha * s.sigma - config.beta * s.time_norm;
  return s;
}

std::vector<CandidateScore> score_cohort(std::span<const CohortEntry> cohort,
                                         const SelectionConfig& config) {
  std::vector<double> times;
  for (const auto& e : cohort) times.push_back(e.time_ms);
  std::vector<CandidateScore> out;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out.push_back(score_candidate(cohort[i].candidate, cohort[i].counts, cohort[i].time_ms, times, config));
    out.back().order = i;
  }
  return out;
}

std::size_t pick_winner(std::span<const CandidateScore> scores) {
  if (scores.empty()) throw Error(ErrorCode::InvalidConfig, "empty cohort");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const auto& a = scores[i];
    const auto& b = scores[best];
    if (a.combined != b.combined) {
      if (a.combined > b.combined) best = i;
    } else if (a.time_ms != b.time_ms) {
      if (a.time_ms < b.time_ms) best = i;
    } else if (a.order < b.order) {
      best = i;
    }
  }
  return best;
}

SplitData stratified_split(std::span<const FlowRecord> records, double fraction,
                           std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < records.size(); ++i) by_class[records[i].is_attack() ? 1 : 0].push_back(i);
  std::mt19937_64 rng(seed);
  SplitData out;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train =
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < n_train ? out.train : out.test).push_back(records[idx[i]]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pseudo-labeling

namespace {

std::vector<std::vector<double>> values_of(std::span<const FlowRecord> records) {
  std::vector<std::vector<double>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.values);
  return out;
}

std::vector<TrafficClass> labels_of(std::span<const FlowRecord> records) {
  std::vector<TrafficClass> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw Error(ErrorCode::EmptyBaseline, "baseline record without label");
    out.push_back(*r.label);
  }
  return out;
}

}  // namespace

PseudoLabeler::PseudoLabeler(std::span<const FlowRecord> baseline)
    : labels_(labels_of(baseline)), index_(values_of(baseline)) {
  if (labels_.empty()) throw Error(ErrorCode::EmptyBaseline, "baseline is empty");
}

TrafficClass PseudoLabeler::label(const FlowRecord& record) const {
  auto hits = index_.query(record.values, kNeighbors);
  const bool exact = hits.front().second == 0.0;
  if (exact) {
    hits.erase(std::remove_if(hits.begin(), hits.end(), [](const auto& h) { return h.second != 0.0; }),
               hits.end());
  }
  // Weight 1/d for ordinary neighbours, unit weight among exact matches.
  std::map<TrafficClass, double> class_weight;
  double attack = 0.0, normal = 0.0;
  for (const auto& [i, d2] : hits) {
    const double w = exact ? 1.0 : 1.0 / std::sqrt(d2);
    (is_attack(labels_[i]) ? attack : normal) += w;
    if (is_attack(labels_[i])) class_weight[labels_[i]] += w;
  }
  if (attack > normal || (attack == normal && is_attack(labels_[hits.front().first]))) {
    // Heaviest attack class; ties go to the class of the nearest attack hit.
    TrafficClass best = TrafficClass::Normal;
    double best_w = -1.0;
    for (const auto& [i, _] : hits) {
      if (!is_attack(labels_[i])) continue;
      const double w = class_weight[labels_[i]];
      if (w > best_w) {
        best_w = w;
        best = labels_[i];
      }
    }
    return best;
  }
  return TrafficClass::Normal;
}

std::vector<FlowRecord> label_batch(std::span<const FlowRecord> unlabeled,
                                    const BaselineDataset& baseline,
                                    const SelectionConfig& config) {
  if (unlabeled.size() != config.batch_size) {
    throw Error(ErrorCode::SizeMismatch, "batch has " + std::to_string(unlabeled.size()) +
                                             " records, expected " +
                                             std::to_string(config.batch_size));
  }
  if (baseline.records.empty()) throw Error(ErrorCode::EmptyBaseline, "baseline is empty");
  const PseudoLabeler labeler(baseline.records);
  std::vector<FlowRecord> out;
  out.reserve(unlabeled.size() + baseline.records.size());
  for (const auto& r : unlabeled) {
    FlowRecord copy = r;
    copy.label = labeler.label(r);
    out.push_back(std::move(copy));
  }
  out.insert(out.end(), baseline.records.begin(), baseline.records.end());
  return out;
}

// ---------------------------------------------------------------------------
// Tournaments

namespace {

void require_both_classes(std::span<const FlowRecord> records, const char* what) {
  std::size_t attacks = 0;
  for (const auto& r : records) attacks += r.is_attack() ? 1 : 0;
  if (attacks == 0 || attacks == records.size()) {
    throw Error(ErrorCode::SingleClassData, std::string(what) + " needs both classes");
  }
}

std::vector<std::size_t> sorted_copy(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct Trial {
  Evaluation eval;
  std::optional<TrainedModel> model;
};

std::vector<CandidateScore> score_trials(const std::vector<std::string>& names,
                                         const std::vector<Trial>& trials,
                                         const SelectionConfig& config) {
  std::vector<CohortEntry> cohort;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const double t =
        config.timing == TimingMode::Wall ? trials[i].eval.elapsed_ms : trials[i].eval.modeled_ms;
    cohort.push_back({names[i], trials[i].eval.counts, t});
  }
  auto scores = score_cohort(cohort, config);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].wall_ms = trials[i].eval.elapsed_ms;
  return scores;
}

}  // namespace

ClassifierSelection select_classifier(std::span<const FlowRecord> labeled,
                                      const SelectionConfig& config) {
  config.validate();
  if (labeled.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no labeled data");
  require_both_classes(labeled, "classifier selection");
  const auto split = stratified_split(labeled, config.split, config.seed);
  if (split.test.empty()) throw Error(ErrorCode::EmptyTrainingSet, "test split is empty");

  std::vector<std::size_t> all(labeled.front().values.size());
  std::iota(all.begin(), all.end(), 0);

  std::vector<Trial> trials(kAllClassifierKinds.size());
  detail::parallel_for(trials.size(), config.threads, [&](std::size_t i) {
    trials[i].model = fit(kAllClassifierKinds[i], split.train, all, config.seed + i);
    trials[i].eval = evaluate(*trials[i].model, split.test);
  });

  std::vector<std::string> names;
  for (const auto k : kAllClassifierKinds) names.emplace_back(id(k));
  auto scores = score_trials(names, trials, config);
  for (auto& s : scores) s.features = all;
  const auto w = pick_winner(scores);
  return {kAllClassifierKinds[w], std::move(*trials[w].model), std::move(scores)};
}

FsSelection select_fs(std::span<const FlowRecord> labeled, ClassifierKind classifier,
                      const SelectionConfig& config) {
  config.validate();
  if (labeled.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no labeled data");
  require_both_classes(labeled, "feature selection");
  const auto split = stratified_split(labeled, config.split, config.seed + 101);
  if (split.test.empty()) throw Error(ErrorCode::EmptyTrainingSet, "test split is empty");

  FsSelection out;
  out.rankings.resize(kAllFsKinds.size());
  std::vector<Trial> trials(kAllFsKinds.size());
  detail::parallel_for(trials.size(), config.threads, [&](std::size_t i) {
    out.rankings[i] = rank_features(kAllFsKinds[i], labeled, config.top_k);
    const auto features = sorted_copy(out.rankings[i].selected);
    trials[i].model = fit(classifier, split.train, features, config.seed);
    trials[i].eval = evaluate(*trials[i].model, split.test);
  });

  std::vector<std::string> names;
  for (const auto k : kAllFsKinds) names.emplace_back(id(k));
  out.scores = score_trials(names, trials, config);
  for (std::size_t i = 0; i < out.scores.size(); ++i) out.scores[i].features = out.rankings[i].selected;
  const auto w = pick_winner(out.scores);
  out.winner = kAllFsKinds[w];
  out.features = out.rankings[w].selected;
  return out;
}

// ---------------------------------------------------------------------------

json SelectionReport::to_json() const {
  json cls = json::array(), fs = json::array(), ranks = json::array();
  for (const auto& s : classifier_scores) cls.push_back(s.to_json());
  for (const auto& s : fs_scores) fs.push_back(s.to_json());
  for (const auto& r : fs_rankings) ranks.push_back(r.to_json());
  return {{"format", "twinguard-selection-report"},
          {"trigger", trigger},
          {"stream_position", stream_position},
          {"config", config.to_json()},
          {"classifier_scores", cls},
          {"fs_rankings", ranks},
          {"fs_scores", fs},
          {"winning_classifier", std::string(id(winning_classifier))},
          {"winning_fs", std::string(id(winning_fs))},
          {"selected_features", selected_features},
          {"fingerprints",
           {{"batch", batch_fingerprint},
            {"baseline", baseline_fingerprint},
            {"labeled", labeled_fingerprint}}},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

void SelectionReport::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

SelectionOutcome run_selection_labeled(std::span<const FlowRecord> labeled,
                                       std::span<const FlowRecord> fs_data,
                                       const SelectionConfig& config, std::string trigger,
                                       std::uint64_t stream_position) {
  SelectionOutcome out;
  auto& report = out.report;
  report.trigger = std::move(trigger);
  report.stream_position = stream_position;
  report.config = config;
  report.started_at = iso8601_now();
  report.labeled_fingerprint = fingerprint_records(labeled);

  auto cls = select_classifier(labeled, config);
  report.classifier_scores = cls.scores;
  report.winning_classifier = cls.winner;

  // The feature tournament needs both classes; fall back to the full
  // labeled set when the batch alone is single-class.
  std::size_t attacks = 0;
  for (const auto& r : fs_data) attacks += r.is_attack() ? 1 : 0;
  const bool usable = !fs_data.empty() && attacks != 0 && attacks != fs_data.size();
  auto fs = select_fs(usable ? fs_data : labeled, cls.winner, config);
  report.fs_rankings = fs.rankings;
  report.fs_scores = fs.scores;
  report.winning_fs = fs.winner;
  report.selected_features = fs.features;

  out.pair.fs = fs.winner;
  out.pair.features = sorted_copy(fs.features);
  out.pair.model = fit(cls.winner, labeled, out.pair.features, config.seed);
  report.finished_at = iso8601_now();
  return out;
}

SelectionOutcome run_selection(std::span<const FlowRecord> unlabeled_batch,
                               const BaselineDataset& baseline, const SelectionConfig& config,
                               std::string trigger, std::uint64_t stream_position) {
  config.validate();
  const auto labeled = label_batch(unlabeled_batch, baseline, config);
  const std::span<const FlowRecord> batch(labeled.data(), unlabeled_batch.size());
  auto out = run_selection_labeled(labeled, batch, config, std::move(trigger), stream_position);
  out.report.batch_fingerprint = fingerprint_records(unlabeled_batch);
  out.report.baseline_fingerprint = fingerprint_records(baseline.records);
  return out;
}

// ---------------------------------------------------------------------------

ModelSlot::ModelSlot(std::uint64_t schema_fingerprint, std::size_t schema_width)
    : fingerprint_(schema_fingerprint), width_(schema_width) {}

std::shared_ptr<const ProductionPair> ModelSlot::current() const {
  std::lock_guard lock(mutex_);
  return current_;
}

SwapAck ModelSlot::swap(ProductionPair pair, TwinGraph* twin, std::uint64_t timestamp) {
  if (pair.model.schema_fingerprint() != fingerprint_) {
    throw Error(ErrorCode::SchemaMismatch, "candidate model was fitted on a different schema");
  }
  if (pair.features != pair.model.features()) {
    throw Error(ErrorCode::InvalidModel, "feature list differs from the model's");
  }
  for (const auto f : pair.features) {
    if (f >= width_) throw Error(ErrorCode::InvalidFeatures, "feature index out of range");
  }
  SwapAck ack;
  json payload;
  {
    std::lock_guard lock(mutex_);
    ack.changed = !current_ || current_->model.to_json() != pair.model.to_json() ||
                  current_->fs != pair.fs;
    pair.version = next_version_++;
    ack.version = pair.version;
    payload = {{"version", pair.version},
               {"classifier", std::string(id(pair.model.kind()))},
               {"fs", std::string(id(pair.fs))},
               {"features", pair.features}};
    current_ = std::make_shared<const ProductionPair>(std::move(pair));
  }
  if (twin) twin->append_event(std::string(kSystemNode), TwinEventKind::ModelSwapped, payload, timestamp);
  return ack;
}

ModelSlot::Classified ModelSlot::classify(const FlowRecord& record) const {
  const auto pair = current();
  if (!pair) throw Error(ErrorCode::InvalidModel, "no production model installed");
  return {pair->model.predict(record), pair->version};
}

// ---------------------------------------------------------------------------

SelectionCoordinator::~SelectionCoordinator() { wait(); }

bool SelectionCoordinator::request_inline(const Job& job) {
  bool expected = false;
  if (!in_flight_.compare_exchange_strong(expected, true)) {
    ++coalesced_;
    return false;
  }
  try {
    job();
  } catch (...) {
    in_flight_ = false;
    throw;
  }
  ++completed_;
  in_flight_ = false;
  return true;
}

bool SelectionCoordinator::request_async(Job job) {
  bool expected = false;
  if (!in_flight_.compare_exchange_strong(expected, true)) {
    ++coalesced_;
    return false;
  }
  std::lock_guard lock(thread_mutex_);
  if (worker_.joinable()) worker_.join();
  worker_ = std::thread([this, job = std::move(job)] {
    try {
      job();
    } catch (...) {
      // A failed run leaves the production pair untouched.
    }
    ++completed_;
    in_flight_ = false;
  });
  return true;
}

void SelectionCoordinator::wait() {
  std::lock_guard lock(thread_mutex_);
  if (worker_.joinable()) worker_.join();
}

}  // namespace twinguard
