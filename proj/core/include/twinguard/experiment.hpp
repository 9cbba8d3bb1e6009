#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"
#include "twinguard/flow_model.hpp"
#include "twinguard/online_selection.hpp"
#include "twinguard/reliability_monitor.hpp"

namespace twinguard {

// Devices of the things layer and the edge nodes they report through.
// Device d reports to node edge-(d mod nodes + 1).
struct Topology {
  std::size_t devices = 12;
  std::size_t nodes = 2;

  void validate() const;
  std::string node_of(std::size_t device) const;
  std::string ip_of(std::size_t device) const;
  std::vector<std::string> node_ids() const;
};

enum class DataSource { Synthetic, Dataset };
enum class AttackOrder { Grouped, Interleaved };
enum class BaselineSource { Train, Test };

// Text form: one "key = value" per line, '#' comments, ${VAR} expanded from
// the environment, relative paths resolved against the spec file.
//
//   name, source (synthetic|dataset), profile, train_profile, test_profile,
//   train_data, test_data, projection, model, policy,
//   attack_sequence (comma list), count.<Class>, default_count, normal_count,
//   attack_order (grouped|interleaved), drift_at, baseline_source (train|test),
//   initial_train_size, seed, devices, nodes, clock_start,
//   selection.{alpha,beta,batch_size,baseline_size,attack_ratio,split,top_k,timing,threads},
//   threshold.{initial,min,max,step,target_fpr,target_fnr,window}
struct ExperimentSpec {
  std::string name = "experiment";
  DataSource source = DataSource::Synthetic;
  std::string profile = "synthetic-v1";
  std::string train_profile;
  std::string test_profile;
  std::filesystem::path train_data;
  std::filesystem::path test_data;
  std::filesystem::path projection;
  std::filesystem::path model;
  std::filesystem::path policy;
  std::vector<TrafficClass> attack_sequence;
  std::map<TrafficClass, std::size_t> counts;
  std::size_t default_count = 100;
  std::size_t normal_count = 2000;
  AttackOrder attack_order = AttackOrder::Grouped;
  std::optional<std::size_t> drift_at;
  BaselineSource baseline_source = BaselineSource::Train;
  std::size_t initial_train_size = 2000;
  std::uint64_t seed = 1;
  Topology topology;
  std::uint64_t clock_start = 1700000000;
  SelectionConfig selection = default_selection();
  ThresholdConfig threshold;

  static SelectionConfig default_selection();
  static ExperimentSpec parse(std::string_view text, const std::filesystem::path& base_dir = {});
  static ExperimentSpec load(const std::filesystem::path& path);

  // One key as it would appear in the file; used for CLI overrides.
  void set(std::string_view key, std::string_view value,
           const std::filesystem::path& base_dir = {});
  void validate() const;

  std::size_t count_for(TrafficClass c) const;
  std::size_t attack_total() const;
  nlohmann::json to_json() const;
};

// Shared feature space between two profiles, from "pair = shared train test"
// lines (optional "name = ..."). Every shared column is numeric in [0,1].
class FeatureProjection {
 public:
  static FeatureProjection parse(std::string_view text, const FeatureSchema& train,
                                 const FeatureSchema& test);
  static FeatureProjection load(const std::filesystem::path& path, const FeatureSchema& train,
                                const FeatureSchema& test);

  const FeatureSchema& shared() const noexcept { return shared_; }
  FlowRecord project_train(const FlowRecord& r) const { return project(r, train_cols_); }
  FlowRecord project_test(const FlowRecord& r) const { return project(r, test_cols_); }
  std::vector<FlowRecord> project_train(std::span<const FlowRecord> rs) const;
  std::vector<FlowRecord> project_test(std::span<const FlowRecord> rs) const;

 private:
  FeatureProjection(FeatureSchema shared, std::vector<std::size_t> train_cols,
                    std::vector<std::size_t> test_cols);
  FlowRecord project(const FlowRecord& r, const std::vector<std::size_t>& cols) const;

  FeatureSchema shared_;
  std::vector<std::size_t> train_cols_;
  std::vector<std::size_t> test_cols_;
};

// 100 * tp / (tp + fn) for every attack class; classes with tp + fn = 0
// are left out.
std::map<TrafficClass, double> compute_sensitivity(const std::map<TrafficClass, ConfusionCounts>& per_class);

}  // namespace twinguard
