#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <random>
#include <thread>

#include "test_support.hpp"
#include "twinguard/twin_graph.hpp"

namespace twinguard {
namespace {

using testing::code_of;

FlowRecord at(std::uint64_t ts, std::string ip = "10.0.0.1") {
  FlowRecord r;
  r.timestamp = ts;
  r.src_ip = std::move(ip);
  return r;
}

std::vector<TwinEventKind> kinds(const std::vector<TwinEvent>& events) {
  std::vector<TwinEventKind> out;
  for (const auto& e : events) out.push_back(e.kind);
  return out;
}

TEST(SyncUpdate, FreshNodeOneUpdate) {
  TwinGraph g;
  g.register_node("edge-1");
  EXPECT_EQ(g.node("edge-1").version, 1u);
  const auto n = g.sync_update("edge-1", at(5));
  EXPECT_EQ(n.version, 2u);
  EXPECT_EQ(n.telemetry.record_count, 1u);
  EXPECT_EQ(n.telemetry.last_timestamp, 5u);
}

TEST(SyncUpdate, KUpdatesAddK) {
  TwinGraph g;
  g.register_node("n");
  for (std::uint64_t k = 1; k <= 50; ++k) EXPECT_EQ(g.sync_update("n", at(k)).version, 1 + k);
}

TEST(SyncUpdate, UnknownNode) {
  TwinGraph g;
  EXPECT_EQ(code_of([&] { g.sync_update("nope", at(1)); }), ErrorCode::UnknownNode);
  EXPECT_EQ(code_of([&] { g.apply_status("nope", NodeStatus::Isolated); }), ErrorCode::UnknownNode);
}

TEST(SyncUpdate, IsolatedNodeUpdatesAreFlaggedNotDropped) {
  TwinGraph g;
  g.register_node("n");
  g.apply_status("n", NodeStatus::Isolated);
  const auto n = g.sync_update("n", at(1));
  EXPECT_EQ(n.telemetry.record_count, 1u);
  EXPECT_EQ(n.telemetry.flagged_count, 1u);
  const auto log = g.event_log({TwinEventKind::Telemetry, std::nullopt});
  ASSERT_EQ(log.size(), 1u);
  EXPECT_TRUE(log[0].payload.value("flagged", false));
}

TEST(SyncUpdate, WindowIsBounded) {
  TwinGraph g(3);
  g.register_node("n");
  for (std::uint64_t t = 0; t < 10; ++t) {
    g.sync_update("n", at(t));
    g.record_alert("n", t, TrafficClass::Xss, {});
  }
  const auto n = g.node("n");
  EXPECT_EQ(n.telemetry.window.size(), 3u);
  EXPECT_EQ(n.telemetry.window.front().timestamp, 7u);
  EXPECT_EQ(n.telemetry.alert_counts.at(TrafficClass::Xss), 3u);
  EXPECT_EQ(n.telemetry.record_count, 10u);
}

TEST(ApplyStatus, ActiveToIsolated) {
  TwinGraph g;
  g.register_node("n");
  const auto n = g.apply_status("n", NodeStatus::Isolated);
  EXPECT_EQ(n.status, NodeStatus::Isolated);
  EXPECT_EQ(n.version, 2u);
}

TEST(ApplyStatus, PendingThenDeniedBackToActive) {
  TwinGraph g;
  g.register_node("n");
  g.apply_status("n", NodeStatus::PendingIsolation);
  EXPECT_EQ(g.apply_status("n", NodeStatus::Active).status, NodeStatus::Active);
  EXPECT_EQ(g.node("n").version, 3u);
}

TEST(ApplyStatus, IsolatedToPendingIsIllegal) {
  TwinGraph g;
  g.register_node("n");
  g.apply_status("n", NodeStatus::Isolated);
  EXPECT_EQ(code_of([&] { g.apply_status("n", NodeStatus::PendingIsolation); }), ErrorCode::IllegalTransition);
  EXPECT_EQ(g.node("n").status, NodeStatus::Isolated);
  EXPECT_EQ(g.node("n").version, 2u);
}

TEST(ApplyStatus, TransitionTableMatchesStateMachine) {
  const NodeStatus all[] = {NodeStatus::Active, NodeStatus::PendingIsolation, NodeStatus::Isolated};
  const auto declared = [](NodeStatus a, NodeStatus b) {
    return (a == NodeStatus::Active && (b == NodeStatus::PendingIsolation || b == NodeStatus::Isolated)) ||
           (a == NodeStatus::PendingIsolation && (b == NodeStatus::Active || b == NodeStatus::Isolated));
  };
  for (const auto a : all) {
    for (const auto b : all) EXPECT_EQ(is_legal_transition(a, b), declared(a, b));
  }
}

TEST(EventLog, EmptyGraph) {
  TwinGraph g;
  EXPECT_TRUE(g.event_log().empty());
}

TEST(EventLog, TwoSyncsThenStatusChange) {
  TwinGraph g;
  g.register_node("n");
  g.sync_update("n", at(1));
  g.sync_update("n", at(2));
  g.apply_status("n", NodeStatus::Isolated);
  EXPECT_EQ(kinds(g.event_log()), (std::vector{TwinEventKind::Telemetry, TwinEventKind::Telemetry,
                                               TwinEventKind::MitigationApplied}));
}

TEST(EventLog, FilterIsSubsequence) {
  TwinGraph g;
  g.register_node("a");
  g.register_node("b");
  std::mt19937_64 rng(3);
  for (std::uint64_t t = 0; t < 200; ++t) {
    const std::string node = rng() % 2 ? "a" : "b";
    g.sync_update(node, at(t));
    if (rng() % 3 == 0) g.record_alert(node, t, TrafficClass::Password, {});
  }
  const auto all = g.event_log();
  const auto alerts = g.event_log({TwinEventKind::AlertRaised, std::nullopt});
  const auto node_a = g.event_log({std::nullopt, std::string("a")});
  for (const auto* sub : {&alerts, &node_a}) {
    std::size_t j = 0;
    for (const auto& e : all) {
      if (j < sub->size() && (*sub)[j].sequence == e.sequence) ++j;
    }
    EXPECT_EQ(j, sub->size());
  }
  for (const auto& e : alerts) EXPECT_EQ(e.kind, TwinEventKind::AlertRaised);
  for (const auto& e : node_a) EXPECT_EQ(e.node_id, "a");
}

TEST(EventLog, AppendOnlyPrefixExtension) {
  TwinGraph g;
  g.register_node("n");
  std::vector<TwinEvent> before;
  for (std::uint64_t t = 0; t < 30; ++t) {
    g.sync_update("n", at(t));
    const auto now = g.event_log();
    ASSERT_GT(now.size(), before.size());
    for (std::size_t i = 0; i < before.size(); ++i) ASSERT_EQ(now[i].to_json(), before[i].to_json());
    before = now;
  }
}

// Independent reducer over the operation sequence.
struct Expected {
  NodeStatus status = NodeStatus::Active;
  std::uint64_t version = 1;
  std::uint64_t records = 0;
  std::uint64_t last = 0;
  std::uint64_t flagged = 0;
  std::vector<std::pair<std::uint64_t, std::optional<TrafficClass>>> entries;
};

TEST(TwinConsistency, MatchesBruteForceFold) {
  constexpr std::size_t kWindow = 16;
  const std::vector<std::string> nodes{"a", "b", "c"};
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    TwinGraph g(kWindow);
    std::map<std::string, Expected> want;
    for (const auto& n : nodes) g.register_node(n);
    for (std::uint64_t t = 0; t < 300; ++t) {
      const auto& n = nodes[rng() % nodes.size()];
      auto& e = want[n];
      const auto op = rng() % 10;
      if (op < 7) {
        g.sync_update(n, at(t));
        ++e.records;
        e.last = t;
        ++e.version;
        if (e.status == NodeStatus::Isolated) ++e.flagged;
        e.entries.push_back({t, std::nullopt});
        if (rng() % 2) {
          const auto c = kAllTrafficClasses[1 + rng() % (kAllTrafficClasses.size() - 1)];
          g.record_alert(n, t, c, {});
          e.entries.back().second = c;
        }
      } else {
        const NodeStatus targets[] = {NodeStatus::Active, NodeStatus::PendingIsolation, NodeStatus::Isolated};
        const auto to = targets[rng() % 3];
        if (is_legal_transition(e.status, to)) {
          g.apply_status(n, to);
          e.status = to;
          ++e.version;
        } else {
          EXPECT_THROW(g.apply_status(n, to), Error);
        }
      }
    }
    for (const auto& n : nodes) {
      const auto got = g.node(n);
      const auto& e = want[n];
      EXPECT_EQ(got.status, e.status);
      EXPECT_EQ(got.version, e.version);
      EXPECT_EQ(got.telemetry.record_count, e.records);
      EXPECT_EQ(got.telemetry.flagged_count, e.flagged);
      if (e.records) EXPECT_EQ(got.telemetry.last_timestamp, e.last);
      std::map<TrafficClass, std::uint64_t> counts;
      const auto start = e.entries.size() > kWindow ? e.entries.size() - kWindow : 0;
      for (std::size_t i = start; i < e.entries.size(); ++i) {
        if (e.entries[i].second) ++counts[*e.entries[i].second];
      }
      EXPECT_EQ(got.telemetry.alert_counts, counts);
    }
  }
}

TEST(Journal, SequenceDenseUnderConcurrentWriters) {
  TwinGraph g;
  constexpr int kNodes = 4, kUpdates = 500;
  for (int i = 0; i < kNodes; ++i) g.register_node("n" + std::to_string(i));
  std::vector<std::thread> ts;
  for (int i = 0; i < kNodes; ++i) {
    ts.emplace_back([&, i] {
      for (int k = 0; k < kUpdates; ++k) g.sync_update("n" + std::to_string(i), at(static_cast<std::uint64_t>(k)));
    });
  }
  for (auto& t : ts) t.join();
  const auto log = g.event_log();
  ASSERT_EQ(log.size(), static_cast<std::size_t>(kNodes * kUpdates));
  std::map<std::string, std::uint64_t> last_version;
  for (std::size_t i = 0; i < log.size(); ++i) {
    EXPECT_EQ(log[i].sequence, i + 1);
    const auto v = log[i].payload.at("version").get<std::uint64_t>();
    EXPECT_GT(v, last_version[log[i].node_id]);
    last_version[log[i].node_id] = v;
  }
  for (int i = 0; i < kNodes; ++i) EXPECT_EQ(g.node("n" + std::to_string(i)).version, 1u + kUpdates);
}

TEST(Journal, PersistsAndRestores) {
  const auto dir = testing::temp_dir("journal");
  const auto path = dir / "journal.jsonl";
  {
    TwinGraph g(8);
    g.attach_journal(path);
    g.register_node("a");
    g.register_node("b");
    for (std::uint64_t t = 0; t < 20; ++t) {
      g.sync_update(t % 2 ? "a" : "b", at(t));
      if (t % 5 == 0) g.record_alert(t % 2 ? "a" : "b", t, TrafficClass::Mitm, {});
    }
    g.apply_status("a", NodeStatus::PendingIsolation);
    g.apply_status("a", NodeStatus::Isolated);
    g.sync_update("a", at(20));

    const auto events = read_journal(path);
    const auto mem = g.event_log();
    ASSERT_EQ(events.size(), mem.size());
    for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i].to_json(), mem[i].to_json());

    TwinGraph r(8);
    r.restore_from_journal(path);
    for (const auto* n : {"a", "b"}) {
      const auto x = g.node(n), y = r.node(n);
      EXPECT_EQ(x.status, y.status);
      EXPECT_EQ(x.version, y.version);
      EXPECT_EQ(x.telemetry.record_count, y.telemetry.record_count);
      EXPECT_EQ(x.telemetry.flagged_count, y.telemetry.flagged_count);
      EXPECT_EQ(x.telemetry.alert_counts, y.telemetry.alert_counts);
    }
    EXPECT_EQ(r.event_count(), g.event_count());
    r.register_node("c");
    r.sync_update("c", at(99));
    EXPECT_EQ(r.event_log().back().sequence, g.event_count() + 1);
  }
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace twinguard
