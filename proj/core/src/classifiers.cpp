#include "classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "twinguard/error.hpp"

namespace twinguard::detail {

using nlohmann::json;

std::size_t TrainingSet::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

constexpr double kRecordOverheadNs = 20.0;

double dot(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<double> read_vector(const json& j, std::size_t expected) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != expected) throw Error(ErrorCode::InvalidModel, "parameter vector has wrong width");
  return v;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

class GaussianNaiveBayes final : public Estimator {
 public:
  static std::unique_ptr<GaussianNaiveBayes> train(const TrainingSet& d) {
    auto m = std::make_unique<GaussianNaiveBayes>();
    const std::size_t k = d.cols;
    double max_var = 0.0;
    for (int c = 0; c < 2; ++c) {
      auto& cls = m->classes_[c];
      cls.mean.assign(k, 0.0);
      cls.var.assign(k, 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < d.rows; ++i) {
        if (d.y[i] != c) continue;
        ++n;
        const auto r = d.row(i);
        for (std::size_t f = 0; f < k; ++f) cls.mean[f] += r[f];
      }
      cls.count = n;
      if (n == 0) continue;
      for (auto& v : cls.mean) v /= static_cast<double>(n);
      for (std::size_t i = 0; i < d.rows; ++i) {
        if (d.y[i] != c) continue;
        const auto r = d.row(i);
        for (std::size_t f = 0; f < k; ++f) cls.var[f] += (r[f] - cls.mean[f]) * (r[f] - cls.mean[f]);
      }
      for (auto& v : cls.var) v /= static_cast<double>(n);
    }
    // Smoothing relative to the largest overall feature variance.
    for (std::size_t f = 0; f < k; ++f) {
      double mean = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i) mean += d.row(i)[f];
      mean /= static_cast<double>(d.rows);
      double var = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i) var += (d.row(i)[f] - mean) * (d.row(i)[f] - mean);
      max_var = std::max(max_var, var / static_cast<double>(d.rows));
    }
    const double eps = std::max(1e-9 * max_var, 1e-12);
    for (auto& cls : m->classes_) {
      for (auto& v : cls.var) v += eps;
      cls.prior = static_cast<double>(cls.count) / static_cast<double>(d.rows);
    }
    return m;
  }

  double attack_score(std::span<const double> x) const override {
    if (classes_[1].count == 0) return 0.0;
    if (classes_[0].count == 0) return 1.0;
    const double ln = log_joint(classes_[0], x);
    const double la = log_joint(classes_[1], x);
    return sigmoid(la - ln);
  }

  double cost_ns() const override {
    return kRecordOverheadNs + 8.0 * static_cast<double>(classes_[0].mean.size());
  }

  json params() const override {
    json out = json::array();
    for (const auto& c : classes_) {
      out.push_back({{"count", c.count}, {"prior", c.prior}, {"mean", c.mean}, {"var", c.var}});
    }
    return {{"classes", out}};
  }

  static std::unique_ptr<GaussianNaiveBayes> load(const json& p, std::size_t cols) {
    auto m = std::make_unique<GaussianNaiveBayes>();
    const auto& arr = p.at("classes");
    if (arr.size() != 2) throw Error(ErrorCode::InvalidModel, "naive Bayes needs two classes");
    for (int c = 0; c < 2; ++c) {
      auto& cls = m->classes_[c];
      cls.count = arr[c].at("count").get<std::size_t>();
      cls.prior = arr[c].at("prior").get<double>();
      cls.mean = read_vector(arr[c].at("mean"), cols);
      cls.var = read_vector(arr[c].at("var"), cols);
    }
    return m;
  }

 private:
  struct ClassStats {
    std::size_t count = 0;
    double prior = 0.0;
    std::vector<double> mean;
    std::vector<double> var;
  };

  static double log_joint(const ClassStats& c, std::span<const double> x) {
    constexpr double kLog2Pi = 1.8378770664093453;
    double s = std::log(c.prior);
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double d = x[f] - c.mean[f];
      s -= 0.5 * (kLog2Pi + std::log(c.var[f]) + d * d / c.var[f]);
    }
    return s;
  }

  std::array<ClassStats, 2> classes_;
};

// ---------------------------------------------------------------------------
// k-nearest neighbours

class KNearest final : public Estimator {
 public:
  static constexpr std::size_t kNeighbors = 5;

  KNearest(std::vector<std::vector<double>> points, std::vector<int> labels)
      : index_(points), labels_(std::move(labels)) {
    points_ = std::move(points);
  }

  double attack_score(std::span<const double> x) const override {
    const auto hits = index_.query(x, kNeighbors);
    if (hits.empty()) return 0.0;
    double attacks = 0.0;
    for (const auto& [i, _] : hits) attacks += labels_[i];
    return attacks / static_cast<double>(hits.size());
  }

  double cost_ns() const override {
    const double k = points_.empty() ? 0.0 : static_cast<double>(points_.front().size());
    return kRecordOverheadNs + 3.0 * static_cast<double>(points_.size()) * (k + 1.0);
  }

  json params() const override { return {{"points", points_}, {"labels", labels_}}; }

  static std::unique_ptr<KNearest> load(const json& p, std::size_t cols) {
    auto pts = p.at("points").get<std::vector<std::vector<double>>>();
    auto labels = p.at("labels").get<std::vector<int>>();
    if (pts.size() != labels.size()) throw Error(ErrorCode::InvalidModel, "kNN size mismatch");
    for (const auto& r : pts) {
      if (r.size() != cols) throw Error(ErrorCode::InvalidModel, "kNN point width");
    }
    return std::make_unique<KNearest>(std::move(pts), std::move(labels));
  }

 private:
  NearestNeighbors index_;
  std::vector<std::vector<double>> points_;
  std::vector<int> labels_;
};

// ---------------------------------------------------------------------------
// Nearest centroid

class NearestCentroid final : public Estimator {
 public:
  static std::unique_ptr<NearestCentroid> train(const TrainingSet& d) {
    auto m = std::make_unique<NearestCentroid>();
    for (int c = 0; c < 2; ++c) {
      std::vector<double> sum(d.cols, 0.0);
      std::size_t n = 0;
      for (std::size_t i = 0; i < d.rows; ++i) {
        if (d.y[i] != c) continue;
        ++n;
        const auto r = d.row(i);
        for (std::size_t f = 0; f < d.cols; ++f) sum[f] += r[f];
      }
      if (n == 0) continue;
      for (auto& v : sum) v /= static_cast<double>(n);
      m->centroids_[c] = std::move(sum);
    }
    return m;
  }

  double attack_score(std::span<const double> x) const override {
    const auto& normal = centroids_[0];
    const auto& attack = centroids_[1];
    if (attack.empty()) return 0.0;
    if (normal.empty()) return 1.0;
    const double dn = std::sqrt(squared_distance(x, normal));
    const double da = std::sqrt(squared_distance(x, attack));
    if (dn + da == 0.0) return 0.5;
    return dn / (dn + da);
  }

  double cost_ns() const override {
    const auto k = static_cast<double>(std::max(centroids_[0].size(), centroids_[1].size()));
    return kRecordOverheadNs + 6.0 * k;
  }

  json params() const override { return {{"normal", centroids_[0]}, {"attack", centroids_[1]}}; }

  static std::unique_ptr<NearestCentroid> load(const json& p, std::size_t cols) {
    auto m = std::make_unique<NearestCentroid>();
    m->centroids_[0] = p.at("normal").get<std::vector<double>>();
    m->centroids_[1] = p.at("attack").get<std::vector<double>>();
    for (const auto& c : m->centroids_) {
      if (!c.empty() && c.size() != cols) throw Error(ErrorCode::InvalidModel, "centroid width");
    }
    return m;
  }

 private:
  std::array<std::vector<double>, 2> centroids_;
};

// ---------------------------------------------------------------------------
// Linear models share one decision function: score = sigmoid(scale * (w.x + b)).

class Linear final : public Estimator {
 public:
  Linear(std::vector<double> w, double b, double scale) : w_(std::move(w)), b_(b), scale_(scale) {}

  double attack_score(std::span<const double> x) const override {
    return sigmoid(scale_ * (dot(w_, x) + b_));
  }
  double cost_ns() const override {
    return kRecordOverheadNs + 2.0 * static_cast<double>(w_.size()) + 10.0;
  }
  json params() const override { return {{"weights", w_}, {"bias", b_}, {"scale", scale_}}; }

  static std::unique_ptr<Linear> load(const json& p, std::size_t cols) {
    return std::make_unique<Linear>(read_vector(p.at("weights"), cols), p.at("bias").get<double>(),
                                    p.value("scale", 1.0));
  }

 private:
  std::vector<double> w_;
  double b_;
  double scale_;
};

std::unique_ptr<Linear> train_logistic(const TrainingSet& d) {
  constexpr int kEpochs = 500;
  constexpr double kRate = 0.5;
  constexpr double kL2 = 1e-4;
  std::vector<double> w(d.cols, 0.0);
  double b = 0.0;
  std::vector<double> grad(d.cols);
  const double n = static_cast<double>(d.rows);
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < d.rows; ++i) {
      const auto r = d.row(i);
      const double err = sigmoid(dot(w, r) + b) - d.y[i];
      for (std::size_t f = 0; f < d.cols; ++f) grad[f] += err * r[f];
      grad_b += err;
    }
    for (std::size_t f = 0; f < d.cols; ++f) w[f] -= kRate * (grad[f] / n + kL2 * w[f]);
    b -= kRate * grad_b / n;
  }
  return std::make_unique<Linear>(std::move(w), b, 1.0);
}

std::unique_ptr<Linear> train_perceptron(const TrainingSet& d, std::mt19937_64& rng) {
  constexpr int kEpochs = 30;
  std::vector<double> w(d.cols, 0.0), w_sum(d.cols, 0.0);
  double b = 0.0, b_sum = 0.0;
  std::vector<std::size_t> order(d.rows);
  std::iota(order.begin(), order.end(), 0);
  std::size_t steps = 0;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto i : order) {
      const auto r = d.row(i);
      const double y = d.y[i] ? 1.0 : -1.0;
      if (y * (dot(w, r) + b) <= 0.0) {
        for (std::size_t f = 0; f < d.cols; ++f) w[f] += y * r[f];
        b += y;
      }
      for (std::size_t f = 0; f < d.cols; ++f) w_sum[f] += w[f];
      b_sum += b;
      ++steps;
    }
  }
  const double s = static_cast<double>(std::max<std::size_t>(steps, 1));
  for (auto& v : w_sum) v /= s;
  return std::make_unique<Linear>(std::move(w_sum), b_sum / s, 1.0);
}

std::unique_ptr<Linear> train_linear_svm(const TrainingSet& d, std::mt19937_64& rng) {
  // Pegasos on the bias-augmented input; the bias is regularized with the
  // weights. Iterates of the final epoch are averaged.
  constexpr int kEpochs = 30;
  constexpr double kLambda = 1e-3;
  const std::size_t k = d.cols;
  std::vector<double> w(k + 1, 0.0), avg(k + 1, 0.0);
  std::vector<std::size_t> order(d.rows);
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0, averaged = 0;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto i : order) {
      ++t;
      const auto r = d.row(i);
      const double y = d.y[i] ? 1.0 : -1.0;
      const double eta = 1.0 / (kLambda * static_cast<double>(t));
      const double margin = y * (dot(std::span<const double>(w).first(k), r) + w[k]);
      const double shrink = 1.0 - eta * kLambda;
      for (auto& v : w) v *= shrink;
      if (margin < 1.0) {
        for (std::size_t f = 0; f < k; ++f) w[f] += eta * y * r[f];
        w[k] += eta * y;
      }
      if (epoch == kEpochs - 1) {
        for (std::size_t f = 0; f <= k; ++f) avg[f] += w[f];
        ++averaged;
      }
    }
  }
  for (auto& v : avg) v /= static_cast<double>(std::max<std::size_t>(averaged, 1));
  const double b = avg[k];
  avg.pop_back();
  return std::make_unique<Linear>(std::move(avg), b, 2.0);
}

// Solves A x = rhs in place (Gaussian elimination with partial pivoting).
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> rhs, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) continue;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
      rhs[r] -= factor * rhs[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    const double diag = a[i * n + i];
    if (std::abs(diag) < 1e-300) continue;
    double s = rhs[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / diag;
  }
  return x;
}

std::unique_ptr<Linear> train_ridge(const TrainingSet& d) {
  constexpr double kLambda = 1.0;
  const std::size_t n = d.cols + 1;  // last column is the unpenalized bias
  std::vector<double> a(n * n, 0.0), rhs(n, 0.0);
  std::vector<double> z(n);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto r = d.row(i);
    std::copy(r.begin(), r.end(), z.begin());
    z[d.cols] = 1.0;
    const double y = d.y[i] ? 1.0 : -1.0;
    for (std::size_t p = 0; p < n; ++p) {
      rhs[p] += z[p] * y;
      for (std::size_t q = 0; q < n; ++q) a[p * n + q] += z[p] * z[q];
    }
  }
  for (std::size_t p = 0; p < d.cols; ++p) a[p * n + p] += kLambda;
  auto sol = solve_dense(std::move(a), std::move(rhs), n);
  const double b = sol.back();
  sol.pop_back();
  return std::make_unique<Linear>(std::move(sol), b, 2.0);
}

// ---------------------------------------------------------------------------
// CART trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // attack fraction at the node
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& d, int max_depth, std::size_t features_per_split,
              std::mt19937_64* rng)
      : d_(d), max_depth_(max_depth), per_split_(features_per_split), rng_(rng) {}

  std::vector<TreeNode> build(std::vector<std::size_t> idx) {
    nodes_.clear();
    grow(idx, 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    std::size_t pos = 0;
    for (const auto i : idx) pos += static_cast<std::size_t>(d_.y[i]);
    const double n = static_cast<double>(idx.size());
    nodes_[id].value = idx.empty() ? 0.0 : static_cast<double>(pos) / n;
    if (depth >= max_depth_ || idx.size() < 2 || pos == 0 || pos == idx.size()) return id;

    const double parent_cost = n - (static_cast<double>(pos * pos) +
                                    static_cast<double>((idx.size() - pos) * (idx.size() - pos))) / n;
    double best_cost = parent_cost - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::size_t> sorted = idx;
    for (const auto f : candidate_features()) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return d_.row(a)[f] < d_.row(b)[f];
      });
      std::size_t left_pos = 0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_pos += static_cast<std::size_t>(d_.y[sorted[i]]);
        const double lo = d_.row(sorted[i])[f];
        const double hi = d_.row(sorted[i + 1])[f];
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = n - nl;
        const double pl = static_cast<double>(left_pos);
        const double pr = static_cast<double>(pos - left_pos);
        const double cost = nl - (pl * pl + (nl - pl) * (nl - pl)) / nl + nr -
                            (pr * pr + (nr - pr) * (nr - pr)) / nr;
        if (cost < best_cost) {
          best_cost = cost;
          best_feature = static_cast<int>(f);
          best_threshold = lo + (hi - lo) / 2.0;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (const auto i : idx) {
      (d_.row(i)[static_cast<std::size_t>(best_feature)] <= best_threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> f(d_.cols);
    std::iota(f.begin(), f.end(), 0);
    if (per_split_ == 0 || per_split_ >= d_.cols || rng_ == nullptr) return f;
    for (std::size_t i = 0; i < per_split_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, f.size() - 1);
      std::swap(f[i], f[pick(*rng_)]);
    }
    f.resize(per_split_);
    std::sort(f.begin(), f.end());
    return f;
  }

  const TrainingSet& d_;
  int max_depth_;
  std::size_t per_split_;
  std::mt19937_64* rng_;
  std::vector<TreeNode> nodes_;
};

double tree_score(const std::vector<TreeNode>& nodes, std::span<const double> x) {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                             : nodes[i].right;
  }
  return nodes[i].value;
}

int tree_depth(const std::vector<TreeNode>& nodes, int i = 0) {
  if (nodes[i].feature < 0) return 0;
  return 1 + std::max(tree_depth(nodes, nodes[i].left), tree_depth(nodes, nodes[i].right));
}

json tree_to_json(const std::vector<TreeNode>& nodes) {
  json out = json::array();
  for (const auto& n : nodes) out.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return out;
}

std::vector<TreeNode> tree_from_json(const json& j, std::size_t cols) {
  std::vector<TreeNode> nodes;
  for (const auto& e : j) {
    TreeNode n;
    n.feature = e.at(0).get<int>();
    n.threshold = e.at(1).get<double>();
    n.left = e.at(2).get<int>();
    n.right = e.at(3).get<int>();
    n.value = e.at(4).get<double>();
    nodes.push_back(n);
  }
  const int count = static_cast<int>(nodes.size());
  if (count == 0) throw Error(ErrorCode::InvalidModel, "empty tree");
  for (const auto& n : nodes) {
    if (n.feature >= 0 && (static_cast<std::size_t>(n.feature) >= cols || n.left <= 0 ||
                           n.right <= 0 || n.left >= count || n.right >= count)) {
      throw Error(ErrorCode::InvalidModel, "malformed tree node");
    }
  }
  return nodes;
}

class DecisionTree final : public Estimator {
 public:
  static constexpr int kMaxDepth = 8;

  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  static std::unique_ptr<DecisionTree> train(const TrainingSet& d) {
    std::vector<std::size_t> idx(d.rows);
    std::iota(idx.begin(), idx.end(), 0);
    TreeBuilder builder(d, kMaxDepth, 0, nullptr);
    return std::make_unique<DecisionTree>(builder.build(std::move(idx)));
  }

  double attack_score(std::span<const double> x) const override { return tree_score(nodes_, x); }
  double cost_ns() const override { return kRecordOverheadNs + 4.0 * tree_depth(nodes_) + 2.0; }
  json params() const override { return {{"nodes", tree_to_json(nodes_)}}; }

  static std::unique_ptr<DecisionTree> load(const json& p, std::size_t cols) {
    return std::make_unique<DecisionTree>(tree_from_json(p.at("nodes"), cols));
  }

 private:
  std::vector<TreeNode> nodes_;
};

class RandomForest final : public Estimator {
 public:
  static constexpr int kTrees = 15;
  static constexpr int kMaxDepth = 6;

  explicit RandomForest(std::vector<std::vector<TreeNode>> trees) : trees_(std::move(trees)) {}

  static std::unique_ptr<RandomForest> train(const TrainingSet& d, std::mt19937_64& rng) {
    const auto per_split = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d.cols)))));
    std::vector<std::vector<TreeNode>> trees;
    std::uniform_int_distribution<std::size_t> pick(0, d.rows - 1);
    for (int t = 0; t < kTrees; ++t) {
      std::vector<std::size_t> sample(d.rows);
      for (auto& s : sample) s = pick(rng);
      TreeBuilder builder(d, kMaxDepth, per_split, &rng);
      trees.push_back(builder.build(std::move(sample)));
    }
    return std::make_unique<RandomForest>(std::move(trees));
  }

  double attack_score(std::span<const double> x) const override {
    double s = 0.0;
    for (const auto& t : trees_) s += tree_score(t, x);
    return s / static_cast<double>(trees_.size());
  }

  double cost_ns() const override {
    double c = kRecordOverheadNs;
    for (const auto& t : trees_) c += 4.0 * tree_depth(t) + 2.0;
    return c;
  }

  json params() const override {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(tree_to_json(t));
    return {{"trees", trees}};
  }

  static std::unique_ptr<RandomForest> load(const json& p, std::size_t cols) {
    std::vector<std::vector<TreeNode>> trees;
    for (const auto& t : p.at("trees")) trees.push_back(tree_from_json(t, cols));
    if (trees.empty()) throw Error(ErrorCode::InvalidModel, "forest without trees");
    return std::make_unique<RandomForest>(std::move(trees));
  }

 private:
  std::vector<std::vector<TreeNode>> trees_;
};

// ---------------------------------------------------------------------------
// AdaBoost over decision stumps

struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  double polarity = 1.0;  // +1: predict attack when x > threshold
  double alpha = 0.0;
};

class AdaBoost final : public Estimator {
 public:
  static constexpr int kRounds = 30;

  explicit AdaBoost(std::vector<Stump> stumps) : stumps_(std::move(stumps)) {}

  static std::unique_ptr<AdaBoost> train(const TrainingSet& d) {
    std::vector<double> w(d.rows, 1.0 / static_cast<double>(d.rows));
    std::vector<Stump> stumps;
    std::vector<std::vector<std::size_t>> sorted(d.cols);
    for (std::size_t f = 0; f < d.cols; ++f) {
      sorted[f].resize(d.rows);
      std::iota(sorted[f].begin(), sorted[f].end(), 0);
      std::stable_sort(sorted[f].begin(), sorted[f].end(),
                       [&](std::size_t a, std::size_t b) { return d.row(a)[f] < d.row(b)[f]; });
    }
    for (int round = 0; round < kRounds; ++round) {
      double w_pos = 0.0, w_neg = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i) (d.y[i] ? w_pos : w_neg) += w[i];

      Stump best;
      double best_err = std::numeric_limits<double>::infinity();
      for (std::size_t f = 0; f < d.cols; ++f) {
        const auto& order = sorted[f];
        // Threshold below every value: all samples fall right.
        double left_pos = 0.0, left_neg = 0.0;
        auto consider = [&](double threshold) {
          const double err_up = left_pos + (w_neg - left_neg);    // polarity +1
          const double err_down = left_neg + (w_pos - left_pos);  // polarity -1
          if (err_up < best_err) {
            best_err = err_up;
            best = {f, threshold, 1.0, 0.0};
          }
          if (err_down < best_err) {
            best_err = err_down;
            best = {f, threshold, -1.0, 0.0};
          }
        };
        consider(d.row(order.front())[f] - 1.0);
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
          (d.y[order[i]] ? left_pos : left_neg) += w[order[i]];
          const double lo = d.row(order[i])[f];
          const double hi = d.row(order[i + 1])[f];
          if (lo < hi) consider(lo + (hi - lo) / 2.0);
        }
      }
      const double err = std::clamp(best_err, 1e-10, 1.0 - 1e-10);
      if (err >= 0.5) break;
      best.alpha = 0.5 * std::log((1.0 - err) / err);
      stumps.push_back(best);
      double total = 0.0;
      for (std::size_t i = 0; i < d.rows; ++i) {
        const double y = d.y[i] ? 1.0 : -1.0;
        w[i] *= std::exp(-best.alpha * y * stump_vote(best, d.row(i)));
        total += w[i];
      }
      for (auto& v : w) v /= total;
      if (best_err <= 1e-10) break;
    }
    return std::make_unique<AdaBoost>(std::move(stumps));
  }

  double attack_score(std::span<const double> x) const override {
    double s = 0.0;
    for (const auto& st : stumps_) s += st.alpha * stump_vote(st, x);
    return sigmoid(2.0 * s);
  }

  double cost_ns() const override {
    return kRecordOverheadNs + 3.0 * static_cast<double>(stumps_.size());
  }

  json params() const override {
    json out = json::array();
    for (const auto& s : stumps_) out.push_back({s.feature, s.threshold, s.polarity, s.alpha});
    return {{"stumps", out}};
  }

  static std::unique_ptr<AdaBoost> load(const json& p, std::size_t cols) {
    std::vector<Stump> stumps;
    for (const auto& e : p.at("stumps")) {
      Stump s{e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>(),
              e.at(3).get<double>()};
      if (s.feature >= cols) throw Error(ErrorCode::InvalidModel, "stump feature out of range");
      stumps.push_back(s);
    }
    return std::make_unique<AdaBoost>(std::move(stumps));
  }

 private:
  static double stump_vote(const Stump& s, std::span<const double> x) {
    return (x[s.feature] > s.threshold ? 1.0 : -1.0) * s.polarity;
  }

  std::vector<Stump> stumps_;
};

std::vector<std::vector<double>> rows_of(const TrainingSet& d) {
  std::vector<std::vector<double>> out;
  out.reserve(d.rows);
  for (std::size_t i = 0; i < d.rows; ++i) {
    const auto r = d.row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

}  // namespace

std::unique_ptr<Estimator> train_estimator(ClassifierKind kind, const TrainingSet& data,
                                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  switch (kind) {
    case ClassifierKind::GaussianNaiveBayes: return GaussianNaiveBayes::train(data);
    case ClassifierKind::KNearestNeighbors: return std::make_unique<KNearest>(rows_of(data), data.y);
    case ClassifierKind::NearestCentroid: return NearestCentroid::train(data);
    case ClassifierKind::LogisticRegression: return train_logistic(data);
    case ClassifierKind::Perceptron: return train_perceptron(data, rng);
    case ClassifierKind::LinearSvm: return train_linear_svm(data, rng);
    case ClassifierKind::DecisionTree: return DecisionTree::train(data);
    case ClassifierKind::RandomForest: return RandomForest::train(data, rng);
    case ClassifierKind::AdaBoost: return AdaBoost::train(data);
    case ClassifierKind::RidgeClassifier: return train_ridge(data);
  }
  throw Error(ErrorCode::InvalidModel, "unknown classifier kind");
}

std::unique_ptr<Estimator> load_estimator(ClassifierKind kind, const json& params,
                                          std::size_t cols) {
  try {
    switch (kind) {
      case ClassifierKind::GaussianNaiveBayes: return GaussianNaiveBayes::load(params, cols);
      case ClassifierKind::KNearestNeighbors: return KNearest::load(params, cols);
      case ClassifierKind::NearestCentroid: return NearestCentroid::load(params, cols);
      case ClassifierKind::LogisticRegression:
      case ClassifierKind::Perceptron:
      case ClassifierKind::LinearSvm:
      case ClassifierKind::RidgeClassifier: return Linear::load(params, cols);
      case ClassifierKind::DecisionTree: return DecisionTree::load(params, cols);
      case ClassifierKind::RandomForest: return RandomForest::load(params, cols);
      case ClassifierKind::AdaBoost: return AdaBoost::load(params, cols);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  }
  throw Error(ErrorCode::InvalidModel, "unknown classifier kind");
}

}  // namespace twinguard::detail
