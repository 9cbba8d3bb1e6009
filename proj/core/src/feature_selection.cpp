#include "twinguard/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "twinguard/error.hpp"

namespace twinguard {

std::string_view id(FsKind kind) noexcept {
  switch (kind) {
    case FsKind::Variance: return "variance";
    case FsKind::PearsonCorrelation: return "pearson";
    case FsKind::AnovaF: return "anova_f";
    case FsKind::ChiSquare: return "chi_square";
    case FsKind::MutualInformation: return "mutual_information";
  }
  return "unknown";
}

std::optional<FsKind> fs_kind_from_id(std::string_view s) noexcept {
  for (const auto k : kAllFsKinds) {
    if (id(k) == s) return k;
  }
  return std::nullopt;
}

bool is_supervised(FsKind kind) noexcept { return kind != FsKind::Variance; }

nlohmann::json FeatureRanking::to_json() const {
  nlohmann::json ranked_json = nlohmann::json::array();
  for (const auto& [f, s] : ranked) ranked_json.push_back({{"feature", f}, {"score", s}});
  return {{"kind", std::string(id(kind))}, {"ranked", ranked_json}, {"selected", selected}};
}

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double variance_score(std::span<const double> column) {
  if (column.empty()) return 0.0;
  // A constant column must score exactly 0; the mean can be off by an ulp.
  const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  if (*lo == *hi) return 0.0;
  const double m = mean_of(column);
  double s = 0.0;
  for (const double x : column) s += (x - m) * (x - m);
  return s / static_cast<double>(column.size());
}

double pearson_score(std::span<const double> column, std::span<const int> labels) {
  const double mx = mean_of(column);
  double my = 0.0;
  for (const int y : labels) my += y;
  my /= static_cast<double>(labels.size());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double dx = column[i] - mx;
    const double dy = labels[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::min(1.0, std::abs(sxy) / std::sqrt(sxx * syy));
}

double anova_f_score(std::span<const double> column, std::span<const int> labels) {
  // Two groups: F = (SSB / 1) / (SSW / (n - 2)).
  const std::size_t n = column.size();
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    sum[labels[i]] += column[i];
    ++count[labels[i]];
  }
  if (count[0] == 0 || count[1] == 0 || n < 3) return 0.0;
  const double grand = (sum[0] + sum[1]) / static_cast<double>(n);
  const double m0 = sum[0] / static_cast<double>(count[0]);
  const double m1 = sum[1] / static_cast<double>(count[1]);
  const double ssb = static_cast<double>(count[0]) * (m0 - grand) * (m0 - grand) +
                     static_cast<double>(count[1]) * (m1 - grand) * (m1 - grand);
  double ssw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = labels[i] ? m1 : m0;
    ssw += (column[i] - m) * (column[i] - m);
  }
  if (ssb <= 0.0) return 0.0;
  // Perfect separation with zero within-group spread saturates to the
  // largest finite score so rankings stay serializable.
  if (ssw <= 0.0) return std::numeric_limits<double>::max();
  return ssb / (ssw / static_cast<double>(n - 2));
}

std::vector<int> quantile_bins(std::span<const double> column, std::size_t bins) {
  std::vector<int> out(column.size(), 0);
  if (column.empty() || bins < 2) return out;
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (std::size_t k = 1; k < bins; ++k) {
    const double c = sorted[k * sorted.size() / bins];
    if (c > sorted.front() && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
  }
  for (std::size_t i = 0; i < column.size(); ++i) {
    out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), column[i]) - cuts.begin());
  }
  return out;
}

namespace {

struct Contingency {
  std::map<int, std::array<double, 2>> cells;
  double n = 0.0;
  std::array<double, 2> label_totals{0.0, 0.0};
};

Contingency tabulate(std::span<const int> bins, std::span<const int> labels) {
  Contingency t;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    t.cells[bins[i]][labels[i]] += 1.0;
    t.label_totals[labels[i]] += 1.0;
    t.n += 1.0;
  }
  return t;
}

}  // namespace

double chi_square_score(std::span<const int> bins, std::span<const int> labels) {
  const auto t = tabulate(bins, labels);
  if (t.cells.size() < 2 || t.label_totals[0] == 0.0 || t.label_totals[1] == 0.0) return 0.0;
  double chi = 0.0;
  for (const auto& [bin, row] : t.cells) {
    const double row_total = row[0] + row[1];
    for (int y = 0; y < 2; ++y) {
      const double expected = row_total * t.label_totals[y] / t.n;
      chi += (row[y] - expected) * (row[y] - expected) / expected;
    }
  }
  return chi;
}

double mutual_information_score(std::span<const int> bins, std::span<const int> labels) {
  const auto t = tabulate(bins, labels);
  if (t.cells.size() < 2 || t.label_totals[0] == 0.0 || t.label_totals[1] == 0.0) return 0.0;
  double mi = 0.0;
  for (const auto& [bin, row] : t.cells) {
    const double p_bin = (row[0] + row[1]) / t.n;
    for (int y = 0; y < 2; ++y) {
      if (row[y] == 0.0) continue;
      const double p_joint = row[y] / t.n;
      const double p_label = t.label_totals[y] / t.n;
      mi += p_joint * std::log(p_joint / (p_bin * p_label));
    }
  }
  // Rounding can leave a tiny negative residue for independent columns.
  return std::max(0.0, mi);
}

FeatureRanking rank_features(FsKind kind, std::span<const FlowRecord> data, std::size_t k) {
  if (data.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no data to rank");
  const std::size_t width = data.front().values.size();
  std::vector<int> labels;
  labels.reserve(data.size());
  std::size_t positives = 0;
  for (const auto& r : data) {
    if (r.values.size() != width) throw Error(ErrorCode::SchemaMismatch, "ragged ranking data");
    if (!r.label && is_supervised(kind)) {
      throw Error(ErrorCode::EmptyTrainingSet, "unlabeled record in ranking data");
    }
    labels.push_back(r.is_attack() ? 1 : 0);
    positives += static_cast<std::size_t>(labels.back());
  }
  if (is_supervised(kind) && (positives == 0 || positives == data.size())) {
    throw Error(ErrorCode::SingleClassData, std::string(id(kind)) + " needs both classes");
  }

  FeatureRanking out;
  out.kind = kind;
  std::vector<double> column(data.size());
  for (std::size_t f = 0; f < width; ++f) {
    for (std::size_t i = 0; i < data.size(); ++i) column[i] = data[i].values[f];
    double score = 0.0;
    switch (kind) {
      case FsKind::Variance: score = variance_score(column); break;
      case FsKind::PearsonCorrelation: score = pearson_score(column, labels); break;
      case FsKind::AnovaF: score = anova_f_score(column, labels); break;
      case FsKind::ChiSquare: score = chi_square_score(quantile_bins(column), labels); break;
      case FsKind::MutualInformation:
        score = mutual_information_score(quantile_bins(column), labels);
        break;
    }
    out.ranked.emplace_back(f, score);
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const auto& a, const auto& b) {
    return a.second > b.second || (a.second == b.second && a.first < b.first);
  });
  out.selected = select_top_k(out, k);
  return out;
}

std::vector<std::size_t> select_top_k(const FeatureRanking& ranking, std::size_t k) {
  std::vector<std::size_t> out;
  const std::size_t n = std::min(k, ranking.ranked.size());
  for (std::size_t i = 0; i < n; ++i) out.push_back(ranking.ranked[i].first);
  return out;
}

}  // namespace twinguard
