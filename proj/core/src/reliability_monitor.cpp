#include "twinguard/reliability_monitor.hpp"

#include <algorithm>

#include "twinguard/error.hpp"
#include "twinguard/twin_graph.hpp"

namespace twinguard {

void ThresholdConfig::validate() const {
  if (!(min < initial && initial < max)) {
    throw Error(ErrorCode::InvalidConfig, "threshold bounds must satisfy min < initial < max");
  }
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidConfig, "threshold step must be > 0");
  if (window == 0) throw Error(ErrorCode::InvalidConfig, "window must be > 0");
}

nlohmann::json ThresholdConfig::to_json() const {
  return {{"initial", initial},       {"min", min},
          {"max", max},               {"step", step},
          {"target_fpr", target_fpr}, {"target_fnr", target_fnr},
          {"window", window}};
}

double reliability(const ConfusionCounts& c) noexcept {
  const auto positives = c.tp + c.fn;
  if (positives == 0) return 1.0;
  return 1.0 - static_cast<double>(c.fn) / static_cast<double>(positives);
}

ReliabilityState::ReliabilityState(std::size_t window, double theta)
    : capacity_(std::max<std::size_t>(1, window)), theta_(theta) {}

void ReliabilityState::observe(bool predicted_attack, bool actual_attack) {
  if (window_.size() == capacity_) {
    const auto old = window_.front();
    window_.pop_front();
    auto& slot = old.actual_attack ? (old.predicted_attack ? counts_.tp : counts_.fn)
                                   : (old.predicted_attack ? counts_.fp : counts_.tn);
    --slot;
  }
  window_.push_back({predicted_attack, actual_attack});
  counts_.add(predicted_attack, actual_attack);
  ++observed_;
}

double ReliabilityState::false_positive_rate() const noexcept {
  const auto negatives = counts_.fp + counts_.tn;
  return negatives == 0 ? 0.0 : static_cast<double>(counts_.fp) / static_cast<double>(negatives);
}

double ReliabilityState::false_negative_rate() const noexcept {
  const auto positives = counts_.tp + counts_.fn;
  return positives == 0 ? 0.0 : static_cast<double>(counts_.fn) / static_cast<double>(positives);
}

ReliabilityState observe(ReliabilityState state, bool predicted_attack, bool actual_attack) {
  state.observe(predicted_attack, actual_attack);
  return state;
}

namespace {

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

double adapt_threshold(const ReliabilityState& state, const ThresholdConfig& config) {
  const double next = state.theta() +
                      config.step * sign(state.false_positive_rate() - config.target_fpr) -
                      config.step * sign(state.false_negative_rate() - config.target_fnr);
  return std::clamp(next, config.min, config.max);
}

std::string_view to_string(Decision d) noexcept {
  return d == Decision::KeepModel ? "KeepModel" : "TriggerRetraining";
}

Decision check(const ReliabilityState& state) noexcept {
  return state.phi() >= state.theta() ? Decision::KeepModel : Decision::TriggerRetraining;
}

nlohmann::json ReliabilityCheck::to_json() const {
  return {{"observed", observed},
          {"counts", twinguard::to_json(counts)},
          {"phi", phi},
          {"theta_before", theta_before},
          {"theta", theta},
          {"fpr", fpr},
          {"fnr", fnr},
          {"decision", std::string(to_string(decision))}};
}

ReliabilityMonitor::ReliabilityMonitor(ThresholdConfig config, TwinGraph* twin,
                                       RetrainHandler on_retrain)
    : config_(config),
      state_(config.window, config.initial),
      twin_(twin),
      on_retrain_(std::move(on_retrain)) {
  config_.validate();
}

std::optional<ReliabilityCheck> ReliabilityMonitor::observe(bool predicted_attack,
                                                           bool actual_attack,
                                                           std::uint64_t timestamp) {
  state_.observe(predicted_attack, actual_attack);
  if (state_.observed() % config_.window != 0) return std::nullopt;

  ReliabilityCheck c;
  c.timestamp = timestamp;
  c.observed = state_.observed();
  c.counts = state_.counts();
  c.phi = state_.phi();
  c.theta_before = state_.theta();
  c.fpr = state_.false_positive_rate();
  c.fnr = state_.false_negative_rate();
  state_.set_theta(adapt_threshold(state_, config_));
  c.theta = state_.theta();
  c.decision = check(state_);

  if (twin_) {
    twin_->append_event(std::string(kSystemNode), TwinEventKind::ReliabilityChecked, c.to_json(),
                        timestamp);
  }
  if (c.decision == Decision::TriggerRetraining) {
    // Journal first so the trigger precedes any swap it causes.
    if (twin_) {
      twin_->append_event(std::string(kSystemNode), TwinEventKind::RetrainTriggered,
                          {{"phi", c.phi}, {"theta", c.theta}, {"observed", c.observed}}, timestamp);
    }
    c.notified = on_retrain_ ? on_retrain_(c) : false;
  }
  history_.push_back(c);
  return c;
}

}  // namespace twinguard
