#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"

namespace twinguard {

class TwinGraph;

struct ThresholdConfig {
  double initial = 0.95;
  double min = 0.80;
  double max = 0.995;
  double step = 0.02;
  double target_fpr = 0.05;
  double target_fnr = 0.05;
  // Window size W; the threshold is evaluated once every W observations.
  std::size_t window = 1000;

  void validate() const;
  nlohmann::json to_json() const;
};

// Reliability 1 - fn / (tp + fn); 1 when no positives were observed.
double reliability(const ConfusionCounts& counts) noexcept;

struct Observation {
  bool predicted_attack = false;
  bool actual_attack = false;
};

// Rolling window of (prediction, estimated truth) pairs with derived counts.
class ReliabilityState {
 public:
  ReliabilityState(std::size_t window, double theta);

  void observe(bool predicted_attack, bool actual_attack);

  const ConfusionCounts& counts() const noexcept { return counts_; }
  double phi() const noexcept { return reliability(counts_); }
  double theta() const noexcept { return theta_; }
  void set_theta(double theta) noexcept { theta_ = theta; }
  double false_positive_rate() const noexcept;
  double false_negative_rate() const noexcept;

  const std::deque<Observation>& window() const noexcept { return window_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::uint64_t observed() const noexcept { return observed_; }

 private:
  std::size_t capacity_;
  double theta_;
  std::deque<Observation> window_;
  ConfusionCounts counts_;
  std::uint64_t observed_ = 0;
};

// Value-returning form of ReliabilityState::observe.
ReliabilityState observe(ReliabilityState state, bool predicted_attack, bool actual_attack);

// theta + step * sign(FPR - target) - step * sign(FNR - target), clamped.
double adapt_threshold(const ReliabilityState& state, const ThresholdConfig& config);

enum class Decision { KeepModel, TriggerRetraining };

std::string_view to_string(Decision d) noexcept;

// KeepModel iff phi >= theta.
Decision check(const ReliabilityState& state) noexcept;

struct ReliabilityCheck {
  std::uint64_t timestamp = 0;
  std::uint64_t observed = 0;
  ConfusionCounts counts;
  double phi = 1.0;
  double theta_before = 0.0;
  double theta = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  Decision decision = Decision::KeepModel;
  bool notified = false;  // false when coalesced into a running selection

  nlohmann::json to_json() const;
};

// Detection-path wrapper: observes every record, and once per window adapts
// the threshold, checks reliability, journals the trace and, below
// threshold, raises one retraining notification.
class ReliabilityMonitor {
 public:
  // Returns false when the request was coalesced; must not block.
  using RetrainHandler = std::function<bool(const ReliabilityCheck&)>;

  explicit ReliabilityMonitor(ThresholdConfig config, TwinGraph* twin = nullptr,
                              RetrainHandler on_retrain = {});

  std::optional<ReliabilityCheck> observe(bool predicted_attack, bool actual_attack,
                                          std::uint64_t timestamp = 0);

  const ReliabilityState& state() const noexcept { return state_; }
  const ThresholdConfig& config() const noexcept { return config_; }
  const std::vector<ReliabilityCheck>& history() const noexcept { return history_; }
  void set_retrain_handler(RetrainHandler handler) { on_retrain_ = std::move(handler); }

 private:
  ThresholdConfig config_;
  ReliabilityState state_;
  TwinGraph* twin_;
  RetrainHandler on_retrain_;
  std::vector<ReliabilityCheck> history_;
};

}  // namespace twinguard
