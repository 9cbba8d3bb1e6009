#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/flow_model.hpp"
#include "twinguard/traffic_class.hpp"

namespace twinguard {

// The ten candidate algorithms. Hyperparameters are fixed per kind:
//   GaussianNaiveBayes  var_smoothing 1e-9
//   KNearestNeighbors   k = 5, Euclidean
//   NearestCentroid     Euclidean
//   LogisticRegression  full-batch gradient descent, lr 0.5, 500 epochs, L2 1e-4
//   Perceptron          averaged, 30 shuffled epochs
//   LinearSvm           Pegasos hinge-loss subgradient, lambda 1e-3, 30 epochs
//   DecisionTree        CART, Gini, max depth 8
//   RandomForest        15 trees, max depth 6, bootstrap, sqrt(F) features per split
//   AdaBoost            30 rounds of depth-1 stumps
//   RidgeClassifier     least squares on +/-1 targets, lambda 1.0
enum class ClassifierKind {
  GaussianNaiveBayes,
  KNearestNeighbors,
  NearestCentroid,
  LogisticRegression,
  Perceptron,
  LinearSvm,
  DecisionTree,
  RandomForest,
  AdaBoost,
  RidgeClassifier,
};

inline constexpr std::array<ClassifierKind, 10> kAllClassifierKinds = {
    ClassifierKind::GaussianNaiveBayes, ClassifierKind::KNearestNeighbors,
    ClassifierKind::NearestCentroid,    ClassifierKind::LogisticRegression,
    ClassifierKind::Perceptron,         ClassifierKind::LinearSvm,
    ClassifierKind::DecisionTree,       ClassifierKind::RandomForest,
    ClassifierKind::AdaBoost,           ClassifierKind::RidgeClassifier,
};

std::string_view id(ClassifierKind kind) noexcept;
std::optional<ClassifierKind> classifier_kind_from_id(std::string_view id) noexcept;
nlohmann::json hyperparameters(ClassifierKind kind);

// Kinds that can be fitted on a single-class training set.
bool accepts_single_class(ClassifierKind kind) noexcept;

// Attack is the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fn = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fn + fp + tn; }
  void add(bool predicted_attack, bool actual_attack) noexcept {
    if (actual_attack) {
      (predicted_attack ? tp : fn) += 1;
    } else {
      (predicted_attack ? fp : tn) += 1;
    }
  }
  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fn += o.fn;
    fp += o.fp;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

nlohmann::json to_json(const ConfusionCounts& c);
ConfusionCounts confusion_from_json(const nlohmann::json& j);

struct Prediction {
  bool attack = false;
  // Monotone in the kind's internal decision score; attack iff >= 0.5.
  double attack_score = 0.0;
  // Nearest training attack-class centroid; set for attack predictions only.
  std::optional<TrafficClass> attack_class;

  double confidence() const noexcept { return attack ? attack_score : 1.0 - attack_score; }
};

namespace detail {
class Estimator;
}

// Immutable after fit; safe to share across threads for concurrent predict.
class TrainedModel {
 public:
  ClassifierKind kind() const noexcept { return kind_; }
  const std::vector<std::size_t>& features() const noexcept { return features_; }
  std::uint64_t schema_fingerprint() const noexcept { return fingerprint_; }
  std::size_t training_size() const noexcept { return training_size_; }

  // Throws SchemaMismatch for a foreign record.
  Prediction predict(const FlowRecord& record) const;
  double attack_score(std::span<const double> projected) const;

  // Nominal per-record predict cost in nanoseconds, derived from the fitted
  // structure (feature count, tree depths, stored points).
  double modeled_cost_ns() const;

  nlohmann::json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  std::string export_text() const;
  static TrainedModel import_text(std::string_view text);

 private:
  friend TrainedModel fit(ClassifierKind, std::span<const FlowRecord>,
                          std::span<const std::size_t>, std::uint64_t);

  ClassifierKind kind_ = ClassifierKind::GaussianNaiveBayes;
  std::vector<std::size_t> features_;
  std::uint64_t fingerprint_ = 0;
  std::size_t schema_width_ = 0;
  std::size_t training_size_ = 0;
  std::shared_ptr<const detail::Estimator> estimator_;
  std::vector<std::pair<TrafficClass, std::vector<double>>> attack_centroids_;
};

// Fits `kind` on the given feature columns (sorted and deduplicated check:
// indices must be distinct and < F). Deterministic for a fixed seed.
TrainedModel fit(ClassifierKind kind, std::span<const FlowRecord> train,
                 std::span<const std::size_t> features, std::uint64_t seed);

struct Evaluation {
  ConfusionCounts counts;
  double elapsed_ms = 0.0;  // wall time of the predict loop
  double modeled_ms = 0.0;  // modeled_cost_ns * |test| / 1e6
};

Evaluation evaluate(const TrainedModel& model, std::span<const FlowRecord> test);

// Exact k-nearest-neighbour search (Euclidean, ties by ascending index).
class NearestNeighbors {
 public:
  NearestNeighbors(std::vector<std::vector<double>> points);

  std::size_t size() const noexcept { return points_.size(); }
  // Returns (index, squared distance) for the min(k, size) nearest points.
  std::vector<std::pair<std::size_t, double>> query(std::span<const double> x, std::size_t k) const;

 private:
  std::vector<std::vector<double>> points_;
};

std::vector<double> project(const FlowRecord& record, std::span<const std::size_t> features);

}  // namespace twinguard
