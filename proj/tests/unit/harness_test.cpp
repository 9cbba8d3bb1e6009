#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "test_support.hpp"
#include "twinguard/experiment.hpp"
#include "twinguard/harness.hpp"
#include "twinguard/mitigation.hpp"

namespace twinguard {
namespace {

using testing::code_of;
using testing::fixture;

TEST(Sensitivity, ArithmeticAndOmission) {
  const std::map<TrafficClass, ConfusionCounts> per_class{
      {TrafficClass::Password, {9946, 54, 0, 0}},
      {TrafficClass::Xss, {0, 10, 0, 0}},
      {TrafficClass::Mitm, {}},
      {TrafficClass::Normal, {0, 0, 3, 97}},
  };
  const auto s = compute_sensitivity(per_class);
  EXPECT_NEAR(s.at(TrafficClass::Password), 99.46, 1e-9);
  EXPECT_EQ(s.at(TrafficClass::Xss), 0.0);
  EXPECT_FALSE(s.contains(TrafficClass::Mitm));
  EXPECT_FALSE(s.contains(TrafficClass::Normal));
}

TEST(Sensitivity, MatchesPerRecordRecount) {
  std::mt19937_64 rng(1);
  const std::vector<TrafficClass> classes{TrafficClass::Xss, TrafficClass::Ddos, TrafficClass::Backdoor};
  std::map<TrafficClass, std::pair<int, int>> hits;  // detected, total
  std::map<TrafficClass, ConfusionCounts> per_class;
  for (int i = 0; i < 5000; ++i) {
    const auto c = classes[rng() % classes.size()];
    const bool detected = rng() % 10 != 0;
    per_class[c].add(detected, true);
    hits[c].first += detected;
    hits[c].second += 1;
  }
  const auto s = compute_sensitivity(per_class);
  for (const auto& [c, h] : hits) EXPECT_NEAR(s.at(c), 100.0 * h.first / h.second, 1e-9);
}

ExperimentSpec smoke() { return ExperimentSpec::load(fixture("smoke.spec")); }

void expect_conservation(const ExperimentSpec& spec, const ReplayResult& r) {
  const auto& rep = r.report;
  EXPECT_EQ(rep.records, spec.attack_total() + spec.normal_count);
  ConfusionCounts sum;
  for (const auto& [c, counts] : rep.per_class) sum += counts;
  EXPECT_EQ(sum, rep.overall);
  EXPECT_EQ(rep.overall.total(), rep.records);
  ConfusionCounts seg;
  for (const auto& s : rep.segments) seg += s.counts;
  EXPECT_EQ(seg, rep.overall);
  EXPECT_EQ(rep.alerts, rep.overall.tp + rep.overall.fp);
  std::uint64_t telemetry = 0, alerts = 0;
  for (const auto& e : r.events) {
    telemetry += e.kind == TwinEventKind::Telemetry;
    alerts += e.kind == TwinEventKind::AlertRaised;
  }
  EXPECT_EQ(telemetry, rep.records);
  EXPECT_EQ(alerts, rep.alerts);
  for (const auto& [c, pct] : rep.sensitivity) {
    EXPECT_GE(pct, 0.0);
    EXPECT_LE(pct, 100.0);
  }
}

void expect_pipeline_order(const std::vector<TwinEvent>& events) {
  std::map<std::pair<std::string, std::uint64_t>, std::uint64_t> telemetry_seq;
  std::map<std::uint64_t, std::uint64_t> alert_seq;
  for (const auto& e : events) {
    if (e.kind == TwinEventKind::Telemetry) telemetry_seq[{e.node_id, e.timestamp}] = e.sequence;
    if (e.kind == TwinEventKind::AlertRaised) {
      const auto t = telemetry_seq.find({e.node_id, e.timestamp});
      ASSERT_NE(t, telemetry_seq.end());
      EXPECT_LT(t->second, e.sequence);
      alert_seq[e.payload.at("alert_id").get<std::uint64_t>()] = e.sequence;
    }
    if (e.kind == TwinEventKind::MitigationApplied && e.payload.contains("alert_id")) {
      const auto id = e.payload.at("alert_id").get<std::uint64_t>();
      if (id == 0) continue;
      ASSERT_TRUE(alert_seq.contains(id));
      EXPECT_LT(alert_seq[id], e.sequence);
    }
  }
}

TEST(Replay, SeparableSyntheticDetectsEveryClass) {
  const auto spec = smoke();
  const auto r = replay(spec);
  ASSERT_EQ(r.report.sensitivity.size(), 10u);
  for (const auto& [c, pct] : r.report.sensitivity) EXPECT_GE(pct, 99.0) << to_string(c);
  expect_conservation(spec, r);
  expect_pipeline_order(r.events);
  EXPECT_TRUE(isolation_safety_violations(r.events).empty());
}

TEST(Replay, ZeroCountClassOmitted) {
  auto spec = smoke();
  spec.set("count.XSS", "0");
  spec.set("normal_count", "500");
  const auto r = replay(spec);
  EXPECT_FALSE(r.report.sensitivity.contains(TrafficClass::Xss));
  EXPECT_FALSE(r.report.per_class.contains(TrafficClass::Xss));
  EXPECT_EQ(r.report.sensitivity.size(), 9u);
  expect_conservation(spec, r);
}

TEST(Replay, DeterministicForFixedSeed) {
  auto spec = smoke();
  spec.normal_count = 600;
  const auto a = replay(spec);
  const auto b = replay(spec);
  EXPECT_EQ(a.report.per_class, b.report.per_class);
  EXPECT_EQ(a.report.winners, b.report.winners);
  EXPECT_EQ(a.report.event_kind_digest, b.report.event_kind_digest);
  EXPECT_EQ(a.report.event_counts, b.report.event_counts);
  spec.selection.threads = 4;
  const auto c = replay(spec);
  EXPECT_EQ(a.report.per_class, c.report.per_class);
  EXPECT_EQ(a.report.winners, c.report.winners);
}

// Trigger decisions recomputed from the logged window counts.
void expect_trace_consistent(const ExperimentReport& rep) {
  for (const auto& c : rep.reliability) {
    const auto counts = confusion_from_json(c.at("counts"));
    const double phi = counts.tp + counts.fn == 0
                           ? 1.0
                           : 1.0 - static_cast<double>(counts.fn) / static_cast<double>(counts.tp + counts.fn);
    EXPECT_NEAR(c.at("phi").get<double>(), phi, 1e-12);
    const bool trigger = phi < c.at("theta").get<double>();
    EXPECT_EQ(c.at("decision").get<std::string>(), trigger ? "TriggerRetraining" : "KeepModel");
  }
}

TEST(Replay, SyntheticDriftTriggersRetraining) {
  const auto spec = ExperimentSpec::load(fixture("drift.spec"));
  const auto r = replay(spec);
  expect_conservation(spec, r);
  expect_pipeline_order(r.events);
  expect_trace_consistent(r.report);
  std::size_t below = 0;
  for (const auto& c : r.report.reliability) below += c.at("decision") == "TriggerRetraining";
  EXPECT_GE(below, 1u);
  EXPECT_EQ(r.report.retrain_triggers, below);
  EXPECT_EQ(r.report.event_counts.at("RetrainTriggered"), below);
  EXPECT_GE(r.report.winners.size(), 2u);
  EXPECT_EQ(r.report.segments.size(), r.report.winners.size());
}

// ToN-like training data and Edge-like test data over the real profiles:
// attacks mark shared columns 0-5 in one and 6-11 in the other.
struct CrossFixture {
  std::filesystem::path dir;
  ExperimentSpec spec;
};

void write_corpus(const std::filesystem::path& path, const FeatureSchema& schema,
                  const std::vector<std::string>& shared_cols, std::size_t first_marked,
                  std::size_t per_class, std::size_t normals, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.04);
  const auto gen = [&](std::optional<TrafficClass> c, std::size_t j) {
    FlowRecord r;
    r.values.assign(schema.feature_count(), 0.0);
    r.label = c;
    r.src_ip = "10.9.0." + std::to_string(rng() % 200 + 1);
    for (std::size_t k = 0; k < shared_cols.size(); ++k) {
      double m = 0.25;
      if (*c != TrafficClass::Normal && k >= first_marked && k < first_marked + 6) m = 0.55 + 0.05 * ((k + j) % 4);
      r.values[*schema.feature_index(shared_cols[k])] = std::clamp(m + noise(rng), 0.0, 1.0);
    }
    return r;
  };
  std::vector<FlowRecord> records;
  for (std::size_t j = 0; j < schema.attack_classes().size(); ++j) {
    for (std::size_t i = 0; i < per_class; ++i) records.push_back(gen(schema.attack_classes()[j], j));
  }
  for (std::size_t i = 0; i < normals; ++i) records.push_back(gen(TrafficClass::Normal, 0));
  std::ofstream out(path);
  write_normalized(out, records, schema);
}

CrossFixture cross_fixture() {
  CrossFixture fx;
  fx.dir = testing::temp_dir("cross");
  const auto ton = load_schema("ton-iot");
  const auto edge = load_schema("edge-iiot");
  std::vector<std::string> ton_cols, edge_cols;
  std::ifstream proj(fixture("ton-edge.projection"));
  std::string line;
  while (std::getline(proj, line)) {
    std::istringstream is(line);
    std::string key, eq, shared, a, b;
    if (is >> key >> eq >> shared >> a >> b && key == "pair") {
      ton_cols.push_back(a);
      edge_cols.push_back(b);
    }
  }
  EXPECT_EQ(ton_cols.size(), 12u);
  write_corpus(fx.dir / "ton.csv", ton, ton_cols, 0, 250, 1500, 1);
  write_corpus(fx.dir / "edge.csv", edge, edge_cols, 6, 120, 1400, 2);

  std::ostringstream spec;
  spec << "name = cross\nsource = dataset\ntrain_profile = ton-iot\ntest_profile = edge-iiot\n"
       << "train_data = " << (fx.dir / "ton.csv").string() << "\n"
       << "test_data = " << (fx.dir / "edge.csv").string() << "\n"
       << "projection = " << fixture("ton-edge.projection").string() << "\n"
       << "attack_sequence = Password, Port Scanning, DDoS UDP, XSS, MITM, Backdoor, Fingerprinting, "
          "SQL Injection, Ransomware, DDoS HTTP\n"
       << "default_count = 40\nnormal_count = 400\nbaseline_source = test\nseed = 5\n"
       << "threshold.window = 200\nselection.batch_size = 200\n";
  fx.spec = ExperimentSpec::parse(spec.str());
  return fx;
}

TEST(Replay, CrossDatasetDriftTriggersRetraining) {
  const auto fx = cross_fixture();
  const auto r = replay(fx.spec);
  expect_conservation(fx.spec, r);
  expect_trace_consistent(r.report);
  std::size_t triggers = 0;
  for (const auto& e : r.events) triggers += e.kind == TwinEventKind::RetrainTriggered;
  EXPECT_GE(triggers, 1u);
  EXPECT_EQ(r.report.schema, "ton-edge");
  std::filesystem::remove_all(fx.dir);
}

TEST(Replay, DataShortfall) {
  auto fx = cross_fixture();
  fx.spec.set("default_count", "500");
  EXPECT_EQ(code_of([&] { replay(fx.spec); }), ErrorCode::DataShortfall);
  std::filesystem::remove_all(fx.dir);
}

TEST(Replay, ArtifactsAndLastPointer) {
  const auto dir = testing::temp_dir("artifacts");
  auto spec = smoke();
  spec.normal_count = 300;
  ReplayOptions opt;
  opt.out_dir = dir;
  const auto r = replay(spec, opt);
  EXPECT_EQ(last_run(dir), r.run_dir);
  for (const auto* f : {"report.json", "report.txt", "spec.json", "model.json", "journal.jsonl", "approvals.json",
                        "suspended_ips.txt", "selection-000.json"}) {
    EXPECT_TRUE(std::filesystem::exists(r.run_dir / f)) << f;
  }
  const auto back = load_report(r.run_dir);
  EXPECT_EQ(back.per_class, r.report.per_class);
  EXPECT_EQ(back.winners, r.report.winners);
  EXPECT_EQ(back.to_json(), r.report.to_json());
  const auto journal = read_journal(r.run_dir / "journal.jsonl");
  ASSERT_EQ(journal.size(), r.events.size());
  const auto pair = load_pair(r.run_dir / "model.json");
  EXPECT_EQ(std::string(id(pair.model.kind())), r.report.winners.back().classifier);
  EXPECT_NE(r.report.render().find("Sensitivity %"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(Spec, ParseErrorsAndOverrides) {
  EXPECT_EQ(code_of([] { ExperimentSpec::parse("bogus = 1\n"); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { ExperimentSpec::parse("seed = x\n"); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { ExperimentSpec::parse("attack_sequence = Nope\n"); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { ExperimentSpec::parse("source = tape\n"); }), ErrorCode::InvalidSpec);
  auto spec = ExperimentSpec::parse("attack_sequence = XSS, DDoS UDP\ndefault_count = 7\ncount.XSS = 3\n");
  EXPECT_EQ(spec.count_for(TrafficClass::Xss), 3u);
  EXPECT_EQ(spec.count_for(TrafficClass::DdosUdp), 7u);
  EXPECT_EQ(spec.attack_total(), 10u);
  spec.set("selection.alpha", "0.5");
  spec.set("threshold.window", "50");
  EXPECT_EQ(spec.selection.alpha, 0.5);
  EXPECT_EQ(spec.threshold.window, 50u);
  EXPECT_EQ(spec.selection.timing, TimingMode::Modeled);
  spec.set("threshold.initial", "0.5");
  EXPECT_EQ(code_of([&] { spec.validate(); }), ErrorCode::InvalidConfig);
}

TEST(Topology, DeviceAssignment) {
  const Topology t;
  EXPECT_EQ(t.node_ids(), (std::vector<std::string>{"edge-1", "edge-2"}));
  EXPECT_EQ(t.node_of(0), "edge-1");
  EXPECT_EQ(t.node_of(11), "edge-2");
  EXPECT_EQ(t.ip_of(0), "10.0.0.1");
  std::map<std::string, int> per_node;
  for (std::size_t d = 0; d < t.devices; ++d) ++per_node[t.node_of(d)];
  EXPECT_EQ(per_node.size(), 2u);
  EXPECT_EQ(per_node["edge-1"] + per_node["edge-2"], 12);
}

}  // namespace
}  // namespace twinguard
