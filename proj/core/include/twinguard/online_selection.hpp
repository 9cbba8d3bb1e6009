#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"
#include "twinguard/feature_selection.hpp"
#include "twinguard/flow_model.hpp"

namespace twinguard {

class TwinGraph;

// Wall uses the measured predict-loop time. Modeled uses the fitted model's
// nominal per-record cost, which makes winners reproducible run to run.
enum class TimingMode { Wall, Modeled };

std::string_view to_string(TimingMode m) noexcept;
std::optional<TimingMode> timing_mode_from_string(std::string_view s) noexcept;

struct SelectionConfig {
  double alpha = 0.9;
  double beta = 0.1;
  std::size_t batch_size = 1000;
  std::size_t baseline_size = 1000;
  double baseline_attack_ratio = 0.65;
  double split = 0.7;
  std::uint64_t seed = 0;
  std::size_t top_k = kDefaultTopK;
  TimingMode timing = TimingMode::Wall;
  // Candidate-level parallelism; 0 means hardware concurrency.
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
};

// Weighted detection quality: 0.6 * recall + 0.4 * precision, where an
// undefined ratio contributes 0.
double sigma(const ConfusionCounts& counts) noexcept;

struct CandidateScore {
  std::string candidate;
  std::size_t order = 0;  // stable kind order, last tie-break
  ConfusionCounts counts;
  double sigma = 0.0;
  double time_ms = 0.0;       // time used for scoring (wall or modeled)
  double wall_ms = 0.0;       // always the measured wall time
  double time_norm = 0.0;     // min-max over the cohort
  double combined = 0.0;      // alpha * sigma - beta * time_norm
  std::vector<std::size_t> features;

  nlohmann::json to_json() const;
  static CandidateScore from_json(const nlohmann::json& j);
};

CandidateScore score_candidate(std::string candidate, const ConfusionCounts& counts,
                               double time_ms, std::span<const double> cohort_times,
                               const SelectionConfig& config);

struct CohortEntry {
  std::string candidate;
  ConfusionCounts counts;
  double time_ms = 0.0;
};

std::vector<CandidateScore> score_cohort(std::span<const CohortEntry> cohort,
                                         const SelectionConfig& config);

// Index of the maximal combined score; ties go to the smaller time, then
// the smaller order.
std::size_t pick_winner(std::span<const CandidateScore> scores);

struct SplitData {
  std::vector<FlowRecord> train;
  std::vector<FlowRecord> test;
};

// Per-class seeded split; round(fraction * class size) records of each class
// go to train.
SplitData stratified_split(std::span<const FlowRecord> records, double fraction,
                           std::uint64_t seed);

// Distance-weighted 5-NN over the baseline. A zero-distance neighbour decides
// the label outright.
class PseudoLabeler {
 public:
  static constexpr std::size_t kNeighbors = 5;

  explicit PseudoLabeler(std::span<const FlowRecord> baseline);
  TrafficClass label(const FlowRecord& record) const;

 private:
  std::vector<TrafficClass> labels_;
  NearestNeighbors index_;
};

// Pseudo-labels `unlabeled` and appends the baseline: |batch| + |baseline|.
std::vector<FlowRecord> label_batch(std::span<const FlowRecord> unlabeled,
                                    const BaselineDataset& baseline,
                                    const SelectionConfig& config);

struct ClassifierSelection {
  ClassifierKind winner = ClassifierKind::GaussianNaiveBayes;
  TrainedModel model;
  std::vector<CandidateScore> scores;
};

ClassifierSelection select_classifier(std::span<const FlowRecord> labeled,
                                      const SelectionConfig& config);

struct FsSelection {
  FsKind winner = FsKind::Variance;
  std::vector<std::size_t> features;  // ranking order of the winner
  std::vector<FeatureRanking> rankings;
  std::vector<CandidateScore> scores;
};

FsSelection select_fs(std::span<const FlowRecord> labeled, ClassifierKind classifier,
                      const SelectionConfig& config);

struct ProductionPair {
  FsKind fs = FsKind::Variance;
  std::vector<std::size_t> features;
  TrainedModel model;
  std::uint64_t version = 0;  // assigned by ModelSlot::swap
};

struct SelectionReport {
  std::string trigger;
  std::uint64_t stream_position = 0;
  SelectionConfig config;
  std::vector<CandidateScore> classifier_scores;
  std::vector<FeatureRanking> fs_rankings;
  std::vector<CandidateScore> fs_scores;
  ClassifierKind winning_classifier = ClassifierKind::GaussianNaiveBayes;
  FsKind winning_fs = FsKind::Variance;
  std::vector<std::size_t> selected_features;
  std::uint64_t batch_fingerprint = 0;
  std::uint64_t baseline_fingerprint = 0;
  std::uint64_t labeled_fingerprint = 0;
  std::string started_at;
  std::string finished_at;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

struct SelectionOutcome {
  SelectionReport report;
  ProductionPair pair;
};

// Full online-learning pass: pseudo-label the batch against the baseline,
// run the classifier tournament on batch+baseline, run the feature-selection
// tournament on the pseudo-labeled batch, then refit the winning classifier
// on batch+baseline restricted to the winning features.
SelectionOutcome run_selection(std::span<const FlowRecord> unlabeled_batch,
                               const BaselineDataset& baseline, const SelectionConfig& config,
                               std::string trigger, std::uint64_t stream_position = 0);

// Same tournaments over already-labeled data (initial training).
SelectionOutcome run_selection_labeled(std::span<const FlowRecord> labeled,
                                       std::span<const FlowRecord> fs_data,
                                       const SelectionConfig& config, std::string trigger,
                                       std::uint64_t stream_position = 0);

struct SwapAck {
  std::uint64_t version = 0;
  bool changed = false;
};

// Holds the production (feature set, classifier) pair. Readers take one
// snapshot per record, so a record never sees a mixed pair.
class ModelSlot {
 public:
  ModelSlot(std::uint64_t schema_fingerprint, std::size_t schema_width);

  std::shared_ptr<const ProductionPair> current() const;

  // Validates the pair against the slot's schema; on failure the production
  // pair is untouched. Journals ModelSwapped when `twin` is given.
  SwapAck swap(ProductionPair pair, TwinGraph* twin = nullptr, std::uint64_t timestamp = 0);

  struct Classified {
    Prediction prediction;
    std::uint64_t version = 0;
  };
  Classified classify(const FlowRecord& record) const;

 private:
  std::uint64_t fingerprint_;
  std::size_t width_;
  mutable std::mutex mutex_;
  std::shared_ptr<const ProductionPair> current_;
  std::uint64_t next_version_ = 1;
};

// Runs at most one selection at a time; a trigger arriving while a run is in
// flight is coalesced into it.
class SelectionCoordinator {
 public:
  using Job = std::function<void()>;

  SelectionCoordinator() = default;
  SelectionCoordinator(const SelectionCoordinator&) = delete;
  SelectionCoordinator& operator=(const SelectionCoordinator&) = delete;
  ~SelectionCoordinator();

  // Runs `job` on a background thread. Returns false when coalesced.
  bool request_async(Job job);
  // Runs `job` on the caller's thread. Returns false when coalesced.
  bool request_inline(const Job& job);

  bool in_flight() const noexcept { return in_flight_.load(); }
  std::size_t completed() const noexcept { return completed_.load(); }
  std::size_t coalesced() const noexcept { return coalesced_.load(); }
  void wait();

 private:
  std::atomic<bool> in_flight_{false};
  std::atomic<std::size_t> completed_{0};
  std::atomic<std::size_t> coalesced_{0};
  std::mutex thread_mutex_;
  std::thread worker_;
};

std::string iso8601_now();

}  // namespace twinguard
