#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"
#include "twinguard/experiment.hpp"
#include "twinguard/online_selection.hpp"
#include "twinguard/reliability_monitor.hpp"
#include "twinguard/twin_graph.hpp"

namespace twinguard {

// Counts for the stretch of the stream served by one model version.
struct SegmentReport {
  std::uint64_t version = 0;
  std::uint64_t first = 0;  // stream positions, inclusive
  std::uint64_t last = 0;
  ConfusionCounts counts;
  std::map<TrafficClass, ConfusionCounts> per_class;

  nlohmann::json to_json() const;
  static SegmentReport from_json(const nlohmann::json& j);
};

struct WinnerEntry {
  std::uint64_t version = 0;
  std::string trigger;
  std::uint64_t position = 0;
  std::string classifier;
  std::string fs;
  std::vector<std::size_t> features;

  nlohmann::json to_json() const;
  static WinnerEntry from_json(const nlohmann::json& j);
  friend bool operator==(const WinnerEntry&, const WinnerEntry&) = default;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  std::string schema;
  std::uint64_t records = 0;
  ConfusionCounts overall;
  // Keyed by true label; Normal carries fp/tn, attack classes tp/fn.
  std::map<TrafficClass, ConfusionCounts> per_class;
  std::map<TrafficClass, double> sensitivity;
  std::vector<SegmentReport> segments;
  std::vector<WinnerEntry> winners;
  std::uint64_t retrain_triggers = 0;
  std::uint64_t selection_runs = 0;
  std::uint64_t coalesced = 0;
  std::vector<nlohmann::json> reliability;  // one entry per cadence
  std::map<std::string, std::uint64_t> event_counts;
  std::uint64_t event_kind_digest = 0;  // hash of the journal's kind sequence
  std::uint64_t alerts = 0;
  std::uint64_t isolations = 0;
  std::uint64_t pending_approvals = 0;
  std::uint64_t suspended_ips = 0;
  double runtime_ms = 0.0;

  nlohmann::json to_json() const;
  static ExperimentReport from_json(const nlohmann::json& j);
  // Human-readable tables.
  std::string render() const;
};

struct ReplayOptions {
  // Run artifacts go to out_dir/<name>-<seed>/; nothing is written when empty.
  std::filesystem::path out_dir;
  std::function<void(std::string_view)> progress;
};

struct ReplayResult {
  ExperimentReport report;
  std::vector<TwinEvent> events;
  std::vector<SelectionReport> selections;
  std::filesystem::path run_dir;
};

// Streams the spec's traffic through twin sync, classification, the
// reliability monitor and mitigation. Retraining runs inline on the
// detection thread, so a fixed seed gives identical counts and winners.
ReplayResult replay(const ExperimentSpec& spec, const ReplayOptions& options = {});

// Production pair as a JSON document (fs id, feature list, model).
void save_pair(const std::filesystem::path& path, const ProductionPair& pair);
ProductionPair load_pair(const std::filesystem::path& path);

// Run directory named by out_dir/LAST.
std::filesystem::path last_run(const std::filesystem::path& out_dir);
ExperimentReport load_report(const std::filesystem::path& run_dir);

}  // namespace twinguard
