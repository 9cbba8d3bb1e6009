#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/classifier_suite.hpp"

namespace twinguard::detail {

// Row-major training matrix over the selected feature columns; y is 1 for
// attack and 0 for normal.
struct TrainingSet {
  std::vector<double> x;
  std::vector<int> y;
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }
  std::size_t positives() const;
};

class Estimator {
 public:
  virtual ~Estimator() = default;
  virtual double attack_score(std::span<const double> x) const = 0;
  virtual double cost_ns() const = 0;
  virtual nlohmann::json params() const = 0;
};

std::unique_ptr<Estimator> train_estimator(ClassifierKind kind, const TrainingSet& data,
                                           std::uint64_t seed);
std::unique_ptr<Estimator> load_estimator(ClassifierKind kind, const nlohmann::json& params,
                                          std::size_t cols);

double sigmoid(double z);

}  // namespace twinguard::detail
