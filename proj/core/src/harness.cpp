#include "twinguard/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

#include "twinguard/error.hpp"
#include "twinguard/mitigation.hpp"
#include "twinguard/synthetic.hpp"
#include "util.hpp"

namespace twinguard {

using nlohmann::json;

namespace {

json class_map_to_json(const std::map<TrafficClass, ConfusionCounts>& m) {
  json j = json::object();
  for (const auto& [c, counts] : m) j[std::string(to_string(c))] = twinguard::to_json(counts);
  return j;
}

std::map<TrafficClass, ConfusionCounts> class_map_from_json(const json& j) {
  std::map<TrafficClass, ConfusionCounts> m;
  for (const auto& [k, v] : j.items()) {
    const auto c = traffic_class_from_string(k);
    if (!c) throw Error(ErrorCode::Io, "report names unknown class " + k);
    m[*c] = confusion_from_json(v);
  }
  return m;
}

}  // namespace

json SegmentReport::to_json() const {
  return {{"version", version},
          {"first", first},
          {"last", last},
          {"counts", twinguard::to_json(counts)},
          {"per_class", class_map_to_json(per_class)}};
}

SegmentReport SegmentReport::from_json(const json& j) {
  SegmentReport s;
  s.version = j.at("version").get<std::uint64_t>();
  s.first = j.at("first").get<std::uint64_t>();
  s.last = j.at("last").get<std::uint64_t>();
  s.counts = confusion_from_json(j.at("counts"));
  s.per_class = class_map_from_json(j.at("per_class"));
  return s;
}

json WinnerEntry::to_json() const {
  return {{"version", version}, {"trigger", trigger},       {"position", position},
          {"classifier", classifier}, {"fs", fs}, {"features", features}};
}

WinnerEntry WinnerEntry::from_json(const json& j) {
  WinnerEntry w;
  w.version = j.at("version").get<std::uint64_t>();
  w.trigger = j.at("trigger").get<std::string>();
  w.position = j.at("position").get<std::uint64_t>();
  w.classifier = j.at("classifier").get<std::string>();
  w.fs = j.at("fs").get<std::string>();
  w.features = j.at("features").get<std::vector<std::size_t>>();
  return w;
}

json ExperimentReport::to_json() const {
  json sens = json::object();
  for (const auto& [c, v] : sensitivity) sens[std::string(to_string(c))] = v;
  json segs = json::array();
  for (const auto& s : segments) segs.push_back(s.to_json());
  json wins = json::array();
  for (const auto& w : winners) wins.push_back(w.to_json());
  return {{"format", "twinguard-experiment-report"},
          {"name", name},
          {"seed", seed},
          {"schema", schema},
          {"records", records},
          {"overall", twinguard::to_json(overall)},
          {"per_class", class_map_to_json(per_class)},
          {"sensitivity", sens},
          {"segments", segs},
          {"winners", wins},
          {"retrain_triggers", retrain_triggers},
          {"selection_runs", selection_runs},
          {"coalesced", coalesced},
          {"reliability", reliability},
          {"event_counts", event_counts},
          {"event_kind_digest", event_kind_digest},
          {"mitigation",
           {{"alerts", alerts},
            {"isolations", isolations},
            {"pending_approvals", pending_approvals},
            {"suspended_ips", suspended_ips}}},
          {"runtime_ms", runtime_ms}};
}

ExperimentReport ExperimentReport::from_json(const json& j) {
  ExperimentReport r;
  try {
    if (j.value("format", std::string{}) != "twinguard-experiment-report") {
      throw Error(ErrorCode::Io, "not an experiment report");
    }
    r.name = j.at("name").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.schema = j.value("schema", std::string{});
    r.records = j.at("records").get<std::uint64_t>();
    r.overall = confusion_from_json(j.at("overall"));
    r.per_class = class_map_from_json(j.at("per_class"));
    for (const auto& [k, v] : j.at("sensitivity").items()) {
      if (const auto c = traffic_class_from_string(k)) r.sensitivity[*c] = v.get<double>();
    }
    for (const auto& s : j.at("segments")) r.segments.push_back(SegmentReport::from_json(s));
    for (const auto& w : j.at("winners")) r.winners.push_back(WinnerEntry::from_json(w));
    r.retrain_triggers = j.at("retrain_triggers").get<std::uint64_t>();
    r.selection_runs = j.at("selection_runs").get<std::uint64_t>();
    r.coalesced = j.value("coalesced", std::uint64_t{0});
    for (const auto& e : j.at("reliability")) r.reliability.push_back(e);
    r.event_counts = j.at("event_counts").get<std::map<std::string, std::uint64_t>>();
    r.event_kind_digest = j.at("event_kind_digest").get<std::uint64_t>();
    const auto& m = j.at("mitigation");
    r.alerts = m.at("alerts").get<std::uint64_t>();
    r.isolations = m.at("isolations").get<std::uint64_t>();
    r.pending_approvals = m.at("pending_approvals").get<std::uint64_t>();
    r.suspended_ips = m.at("suspended_ips").get<std::uint64_t>();
    r.runtime_ms = j.value("runtime_ms", 0.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string ExperimentReport::render() const {
  std::ostringstream os;
  os << std::fixed;
  os << "Experiment " << name << " (seed " << seed << ", schema " << schema << ")\n";
  os << "records " << records << "  tp " << overall.tp << "  fn " << overall.fn << "  fp "
     << overall.fp << "  tn " << overall.tn << "\n\n";

  os << std::left << std::setw(18) << "Attack class" << std::right << std::setw(10) << "Samples"
     << std::setw(10) << "Detected" << std::setw(16) << "Sensitivity %" << '\n';
  for (const auto& [c, counts] : per_class) {
    if (!is_attack(c)) continue;
    os << std::left << std::setw(18) << to_string(c) << std::right << std::setw(10)
       << counts.tp + counts.fn << std::setw(10) << counts.tp;
    if (const auto it = sensitivity.find(c); it != sensitivity.end()) {
      os << std::setw(16) << std::setprecision(2) << it->second;
    } else {
      os << std::setw(16) << "-";
    }
    os << '\n';
  }
  if (const auto it = per_class.find(TrafficClass::Normal); it != per_class.end()) {
    os << std::left << std::setw(18) << "Normal" << std::right << std::setw(10)
       << it->second.fp + it->second.tn << "  false alarms " << it->second.fp << '\n';
  }

  os << "\nModel versions\n";
  for (const auto& s : segments) {
    const WinnerEntry* w = nullptr;
    for (const auto& e : winners) {
      if (e.version == s.version) w = &e;
    }
    os << "  v" << s.version << "  records " << s.first << ".." << s.last;
    if (w) {
      os << "  " << w->classifier << " + " << w->fs << " (" << w->trigger << ")";
    }
    os << "  tp " << s.counts.tp << " fn " << s.counts.fn << " fp " << s.counts.fp << " tn "
       << s.counts.tn << '\n';
  }

  os << "\nRetraining triggers " << retrain_triggers << ", selection runs " << selection_runs
     << ", coalesced " << coalesced << '\n';
  os << "Alerts " << alerts << ", isolations " << isolations << ", pending approvals "
     << pending_approvals << ", suspended IPs " << suspended_ips << '\n';
  os << "Runtime " << std::setprecision(1) << runtime_ms << " ms\n";
  return os.str();
}

// ---------------------------------------------------------------------------

void save_pair(const std::filesystem::path& path, const ProductionPair& pair) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const json j = {{"format", "twinguard-production-pair"},
                  {"fs", std::string(id(pair.fs))},
                  {"features", pair.features},
                  {"version", pair.version},
                  {"model", pair.model.to_json()}};
  out << j.dump(2) << '\n';
}

ProductionPair load_pair(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    const auto j = json::parse(in);
    if (j.value("format", std::string{}) != "twinguard-production-pair") {
      throw Error(ErrorCode::InvalidModel, path.string() + " is not a production pair");
    }
    ProductionPair p;
    const auto fs = fs_kind_from_id(j.at("fs").get<std::string>());
    if (!fs) throw Error(ErrorCode::InvalidModel, "unknown feature selection id");
    p.fs = *fs;
    p.features = j.at("features").get<std::vector<std::size_t>>();
    p.model = TrainedModel::from_json(j.at("model"));
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, path.string() + ": " + e.what());
  }
}

std::filesystem::path last_run(const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "LAST");
  std::string name;
  if (!in || !std::getline(in, name) || detail::trim(name).empty()) {
    throw Error(ErrorCode::Io, "no previous run under " + out_dir.string());
  }
  return out_dir / std::string(detail::trim(name));
}

ExperimentReport load_report(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "report.json");
  if (!in) throw Error(ErrorCode::Io, "no report.json in " + run_dir.string());
  try {
    return ExperimentReport::from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("report.json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

// Where stream, training and baseline records come from.
class Corpus {
 public:
  virtual ~Corpus() = default;
  virtual const FeatureSchema& schema() const = 0;
  virtual std::vector<FlowRecord> train_pool() = 0;
  virtual std::vector<FlowRecord> baseline_pool() = 0;
  virtual FlowRecord next(TrafficClass c, std::uint64_t position) = 0;
};

class SyntheticCorpus final : public Corpus {
 public:
  explicit SyntheticCorpus(const ExperimentSpec& spec)
      : spec_(spec), schema_(load_schema(spec.profile)), gen_(schema_), rng_(spec.seed ^ 0x5eedULL) {}

  const FeatureSchema& schema() const override { return schema_; }

  std::vector<FlowRecord> train_pool() override {
    std::mt19937_64 rng(spec_.seed + 1);
    return pool(spec_.initial_train_size, 0, rng);
  }

  std::vector<FlowRecord> baseline_pool() override {
    std::mt19937_64 rng(spec_.seed + 2);
    const std::size_t regime = spec_.baseline_source == BaselineSource::Test && spec_.drift_at ? 1 : 0;
    return pool(spec_.selection.baseline_size, regime, rng);
  }

  FlowRecord next(TrafficClass c, std::uint64_t position) override {
    const std::size_t regime = spec_.drift_at && position >= *spec_.drift_at ? 1 : 0;
    return gen_.generate(c, regime, rng_);
  }

 private:
  // Enough of each class to sample n records at the baseline attack ratio.
  std::vector<FlowRecord> pool(std::size_t n, std::size_t regime, std::mt19937_64& rng) const {
    const auto k = schema_.attack_classes().size();
    const auto attacks = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * spec_.selection.baseline_attack_ratio));
    const auto per_class = k == 0 ? 0 : (attacks + k - 1) / k;
    return gen_.pool(per_class, n - attacks, regime, rng);
  }

  const ExperimentSpec& spec_;
  FeatureSchema schema_;
  TrafficGenerator gen_;
  std::mt19937_64 rng_;
};

class DatasetCorpus final : public Corpus {
 public:
  explicit DatasetCorpus(const ExperimentSpec& spec) : spec_(spec) {
    const auto train_schema = load_schema(spec.train_profile);
    const auto test_schema = load_schema(spec.test_profile);
    for (const auto c : spec.attack_sequence) {
      if (!test_schema.declares(c)) {
        throw Error(ErrorCode::InvalidSpec, std::string(to_string(c)) + " is not a class of " + test_schema.name());
      }
    }
    auto test = load_dataset(spec.test_data, test_schema).records;
    std::vector<FlowRecord> train;
    if (!spec.train_data.empty()) train = load_dataset(spec.train_data, train_schema).records;

    if (!spec.projection.empty()) {
      auto projection = FeatureProjection::load(spec.projection, train_schema, test_schema);
      train_ = projection.project_train(train);
      test = projection.project_test(test);
      schema_ = std::make_unique<FeatureSchema>(projection.shared());
    } else {
      schema_ = std::make_unique<FeatureSchema>(test_schema);
      train_ = std::move(train);
    }

    // Seeded per-class order; the stream draws from the front.
    std::map<TrafficClass, std::vector<FlowRecord>> by_class;
    for (auto& r : test) {
      if (!r.label) throw Error(ErrorCode::UnknownLabel, "test data has an unlabeled row");
      by_class[*r.label].push_back(std::move(r));
    }
    std::mt19937_64 rng(spec.seed + 3);
    for (auto& [c, rs] : by_class) std::shuffle(rs.begin(), rs.end(), rng);

    auto take = [&](TrafficClass c, std::size_t n) {
      auto& rs = by_class[c];
      if (rs.size() < n) {
        throw Error(ErrorCode::DataShortfall, std::string(to_string(c)) + ": spec needs " + std::to_string(n) +
                                                  ", test data has " + std::to_string(rs.size()));
      }
      std::deque<FlowRecord> q(std::make_move_iterator(rs.begin()),
                               std::make_move_iterator(rs.begin() + static_cast<std::ptrdiff_t>(n)));
      rs.erase(rs.begin(), rs.begin() + static_cast<std::ptrdiff_t>(n));
      return q;
    };
    for (const auto c : spec.attack_sequence) queues_[c] = take(c, spec.count_for(c));
    queues_[TrafficClass::Normal] = take(TrafficClass::Normal, spec.normal_count);
    for (auto& [c, rs] : by_class) {
      for (auto& r : rs) held_out_.push_back(std::move(r));
    }
  }

  const FeatureSchema& schema() const override { return *schema_; }

  std::vector<FlowRecord> train_pool() override { return train_; }

  std::vector<FlowRecord> baseline_pool() override {
    return spec_.baseline_source == BaselineSource::Test ? held_out_ : train_;
  }

  FlowRecord next(TrafficClass c, std::uint64_t) override {
    auto& q = queues_.at(c);
    auto r = std::move(q.front());
    q.pop_front();
    return r;
  }

 private:
  const ExperimentSpec& spec_;
  std::unique_ptr<FeatureSchema> schema_;
  std::vector<FlowRecord> train_;
  std::vector<FlowRecord> held_out_;
  std::map<TrafficClass, std::deque<FlowRecord>> queues_;
};

std::vector<TrafficClass> stream_labels(const ExperimentSpec& spec, std::mt19937_64& rng) {
  std::vector<TrafficClass> attacks;
  if (spec.attack_order == AttackOrder::Grouped) {
    for (const auto c : spec.attack_sequence) attacks.insert(attacks.end(), spec.count_for(c), c);
  } else {
    std::vector<std::size_t> left;
    for (const auto c : spec.attack_sequence) left.push_back(spec.count_for(c));
    for (bool any = true; any;) {
      any = false;
      for (std::size_t i = 0; i < left.size(); ++i) {
        if (left[i] == 0) continue;
        attacks.push_back(spec.attack_sequence[i]);
        --left[i];
        any = true;
      }
    }
  }
  std::vector<char> is_attack_slot(attacks.size() + spec.normal_count, 0);
  std::fill(is_attack_slot.begin(), is_attack_slot.begin() + static_cast<std::ptrdiff_t>(attacks.size()), 1);
  std::shuffle(is_attack_slot.begin(), is_attack_slot.end(), rng);

  std::vector<TrafficClass> labels;
  labels.reserve(is_attack_slot.size());
  std::size_t next_attack = 0;
  for (const auto a : is_attack_slot) labels.push_back(a ? attacks[next_attack++] : TrafficClass::Normal);
  return labels;
}

std::unique_ptr<Corpus> make_corpus(const ExperimentSpec& spec) {
  if (spec.source == DataSource::Synthetic) {
    auto corpus = std::make_unique<SyntheticCorpus>(spec);
    for (const auto c : spec.attack_sequence) {
      if (!corpus->schema().declares(c)) {
        throw Error(ErrorCode::InvalidSpec, std::string(to_string(c)) + " is not a class of " + spec.profile);
      }
    }
    return corpus;
  }
  return std::make_unique<DatasetCorpus>(spec);
}

std::string selection_file(std::size_t index) {
  std::ostringstream os;
  os << "selection-" << std::setw(3) << std::setfill('0') << index << ".json";
  return os.str();
}

}  // namespace

ReplayResult replay(const ExperimentSpec& spec, const ReplayOptions& options) {
  spec.validate();
  const auto started = std::chrono::steady_clock::now();
  auto say = [&](const std::string& msg) {
    if (options.progress) options.progress(msg);
  };

  ReplayResult result;
  const bool persist = !options.out_dir.empty();
  if (persist) {
    result.run_dir = options.out_dir / (spec.name + "-" + std::to_string(spec.seed));
    std::filesystem::remove_all(result.run_dir);
    std::filesystem::create_directories(result.run_dir);
  }

  auto corpus = make_corpus(spec);
  const auto& schema = corpus->schema();

  TwinGraph twin(spec.threshold.window);
  if (persist) twin.attach_journal(result.run_dir / "journal.jsonl");
  for (const auto& n : spec.topology.node_ids()) twin.register_node(n);

  const auto clock_start = spec.clock_start;
  MitigationEngine mitigation(twin, spec.policy.empty() ? RiskPolicy::defaults() : RiskPolicy::load(spec.policy),
                              [clock_start](std::uint64_t ts) { return iso8601_from_epoch(clock_start + ts); });
  if (persist) mitigation.persist_to(result.run_dir);

  ModelSlot slot(schema.fingerprint(), schema.feature_count());
  auto& report = result.report;
  auto install = [&](SelectionOutcome outcome, std::uint64_t position) {
    const auto ack = slot.swap(std::move(outcome.pair), &twin, position);
    const auto pair = slot.current();
    report.winners.push_back({ack.version, outcome.report.trigger, position,
                              std::string(id(pair->model.kind())), std::string(id(pair->fs)), pair->features});
    if (persist) outcome.report.write(result.run_dir / selection_file(result.selections.size()));
    result.selections.push_back(std::move(outcome.report));
  };

  auto config = spec.selection;
  config.seed = spec.seed;
  if (!spec.model.empty()) {
    auto pair = load_pair(spec.model);
    const auto ack = slot.swap(std::move(pair), &twin, 0);
    const auto cur = slot.current();
    report.winners.push_back({ack.version, "provided", 0, std::string(id(cur->model.kind())),
                              std::string(id(cur->fs)), cur->features});
  } else {
    say("initial selection");
    const auto pool = corpus->train_pool();
    const auto labeled = sample_baseline(pool, spec.initial_train_size, config.baseline_attack_ratio, spec.seed).records;
    const std::span<const FlowRecord> fs_data(labeled.data(), std::min(config.batch_size, labeled.size()));
    install(run_selection_labeled(labeled, fs_data, config, "initial", 0), 0);
  }

  const auto baseline_pool = corpus->baseline_pool();
  std::deque<FlowRecord> recent;
  std::uint64_t retrain_index = 0;
  std::uint64_t position = 0;
  SelectionCoordinator coordinator;

  ReliabilityMonitor monitor(spec.threshold, &twin, [&](const ReliabilityCheck&) {
    return coordinator.request_inline([&] {
      ++retrain_index;
      say("retraining at record " + std::to_string(position + 1));
      std::vector<FlowRecord> batch(recent.begin(), recent.end());
      auto cfg = config;
      cfg.seed = spec.seed + retrain_index;
      cfg.batch_size = batch.size();
      const auto baseline = sample_baseline(baseline_pool, cfg.baseline_size, cfg.baseline_attack_ratio,
                                            spec.seed + 7919 * retrain_index);
      install(run_selection(batch, baseline, cfg, "reliability", position + 1), position + 1);
    });
  });

  std::mt19937_64 layout_rng(spec.seed);
  const auto labels = stream_labels(spec, layout_rng);
  std::uniform_int_distribution<std::size_t> pick_device(0, spec.topology.devices - 1);
  std::map<std::uint64_t, SegmentReport> segments;
  std::uint64_t alert_id = 0;

  for (position = 0; position < labels.size(); ++position) {
    auto record = corpus->next(labels[position], position);
    const auto device = pick_device(layout_rng);
    record.timestamp = position;
    record.node_id = spec.topology.node_of(device);
    record.src_ip = spec.topology.ip_of(device);

    twin.sync_update(record.node_id, record);
    const auto classified = slot.classify(record);
    const auto& pred = classified.prediction;
    const bool truth = record.is_attack();

    report.overall.add(pred.attack, truth);
    report.per_class[*record.label].add(pred.attack, truth);
    auto& seg = segments[classified.version];
    if (seg.counts.total() == 0) {
      seg.version = classified.version;
      seg.first = position;
    }
    seg.last = position;
    seg.counts.add(pred.attack, truth);
    seg.per_class[*record.label].add(pred.attack, truth);

    if (pred.attack) {
      ++alert_id;
      twin.record_alert(record.node_id, position, pred.attack_class,
                        {{"alert_id", alert_id},
                         {"ip", record.src_ip},
                         {"confidence", pred.confidence()},
                         {"model_version", classified.version}});
      mitigation.mitigate({alert_id, position, record.src_ip, record.node_id, pred.attack_class,
                           pred.confidence(), position});
    }

    recent.push_back(std::move(record));
    if (recent.size() > config.batch_size) recent.pop_front();
    monitor.observe(pred.attack, truth, position);
    if (options.progress && (position + 1) % 1000 == 0) say("streamed " + std::to_string(position + 1));
  }

  report.name = spec.name;
  report.seed = spec.seed;
  report.schema = schema.name();
  report.records = labels.size();
  report.sensitivity = compute_sensitivity(report.per_class);
  for (auto& [v, s] : segments) report.segments.push_back(std::move(s));
  report.selection_runs = coordinator.completed();
  report.coalesced = coordinator.coalesced();
  for (const auto& c : monitor.history()) {
    auto j = c.to_json();
    j["position"] = c.timestamp;
    report.reliability.push_back(std::move(j));
  }

  result.events = twin.event_log();
  std::uint64_t digest = 0xcbf29ce484222325ULL;
  for (const auto& e : result.events) {
    const auto kind = to_string(e.kind);
    ++report.event_counts[std::string(kind)];
    digest = detail::fnv1a(kind, digest);
    digest = detail::fnv1a("|", digest);
    if (e.kind == TwinEventKind::RetrainTriggered) ++report.retrain_triggers;
    if (e.kind == TwinEventKind::MitigationApplied && e.payload.value("to", std::string{}) == "Isolated") {
      ++report.isolations;
    }
  }
  report.event_kind_digest = digest;
  report.alerts = alert_id;
  for (const auto& r : mitigation.approvals().requests()) {
    if (r.status == ActionStatus::Pending) ++report.pending_approvals;
  }
  report.suspended_ips = mitigation.suspended().size();
  report.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

  if (persist) {
    std::ofstream(result.run_dir / "report.json") << report.to_json().dump(2) << '\n';
    std::ofstream(result.run_dir / "report.txt") << report.render();
    std::ofstream(result.run_dir / "spec.json") << spec.to_json().dump(2) << '\n';
    if (const auto pair = slot.current()) save_pair(result.run_dir / "model.json", *pair);
    std::ofstream(options.out_dir / "LAST") << result.run_dir.filename().string() << '\n';
  }
  return result;
}

}  // namespace twinguard
