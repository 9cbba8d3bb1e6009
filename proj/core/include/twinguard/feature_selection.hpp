#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/flow_model.hpp"

namespace twinguard {

// Filter methods; all score each feature independently against the binary
// Attack/Normal label. Chi-square and mutual information use 4
// equal-frequency bins computed on the ranking data.
enum class FsKind {
  Variance,
  PearsonCorrelation,
  AnovaF,
  ChiSquare,
  MutualInformation,
};

inline constexpr std::array<FsKind, 5> kAllFsKinds = {
    FsKind::Variance, FsKind::PearsonCorrelation, FsKind::AnovaF, FsKind::ChiSquare,
    FsKind::MutualInformation,
};

inline constexpr std::size_t kDefaultTopK = 10;
inline constexpr std::size_t kQuantileBins = 4;

std::string_view id(FsKind kind) noexcept;
std::optional<FsKind> fs_kind_from_id(std::string_view id) noexcept;
bool is_supervised(FsKind kind) noexcept;

struct FeatureRanking {
  FsKind kind = FsKind::Variance;
  // (feature index, score); scores non-increasing, ties by ascending index.
  std::vector<std::pair<std::size_t, double>> ranked;
  std::vector<std::size_t> selected;

  nlohmann::json to_json() const;
};

FeatureRanking rank_features(FsKind kind, std::span<const FlowRecord> data,
                             std::size_t k = kDefaultTopK);

std::vector<std::size_t> select_top_k(const FeatureRanking& ranking, std::size_t k = kDefaultTopK);

// Equal-frequency bin index per value (cut points at the k/bins quantiles of
// the sorted column; repeated cut points collapse). Exposed for tests.
std::vector<int> quantile_bins(std::span<const double> column, std::size_t bins = kQuantileBins);

// Individual scoring functions over one column and 0/1 labels.
double variance_score(std::span<const double> column);
double pearson_score(std::span<const double> column, std::span<const int> labels);
double anova_f_score(std::span<const double> column, std::span<const int> labels);
double chi_square_score(std::span<const int> bins, std::span<const int> labels);
double mutual_information_score(std::span<const int> bins, std::span<const int> labels);

}  // namespace twinguard
