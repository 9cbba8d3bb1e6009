#include "twinguard/classifier_suite.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <set>

#include "classifiers.hpp"
#include "twinguard/error.hpp"

namespace twinguard {

using nlohmann::json;

std::string_view id(ClassifierKind kind) noexcept {
  switch (kind) {
    case ClassifierKind::GaussianNaiveBayes: return "gaussian_nb";
    case ClassifierKind::KNearestNeighbors: return "knn5";
    case ClassifierKind::NearestCentroid: return "nearest_centroid";
    case ClassifierKind::LogisticRegression: return "logistic_regression";
    case ClassifierKind::Perceptron: return "perceptron";
    case ClassifierKind::LinearSvm: return "linear_svm";
    case ClassifierKind::DecisionTree: return "cart";
    case ClassifierKind::RandomForest: return "random_forest";
    case ClassifierKind::AdaBoost: return "adaboost";
    case ClassifierKind::RidgeClassifier: return "ridge";
  }
  return "unknown";
}

std::optional<ClassifierKind> classifier_kind_from_id(std::string_view s) noexcept {
  for (const auto k : kAllClassifierKinds) {
    if (id(k) == s) return k;
  }
  return std::nullopt;
}

json hyperparameters(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::GaussianNaiveBayes: return {{"var_smoothing", 1e-9}};
    case ClassifierKind::KNearestNeighbors: return {{"k", 5}, {"metric", "euclidean"}};
    case ClassifierKind::NearestCentroid: return {{"metric", "euclidean"}};
    case ClassifierKind::LogisticRegression:
      return {{"learning_rate", 0.5}, {"epochs", 500}, {"l2", 1e-4}};
    case ClassifierKind::Perceptron: return {{"epochs", 30}, {"averaged", true}};
    case ClassifierKind::LinearSvm: return {{"lambda", 1e-3}, {"epochs", 30}};
    case ClassifierKind::DecisionTree: return {{"criterion", "gini"}, {"max_depth", 8}};
    case ClassifierKind::RandomForest:
      return {{"trees", 15}, {"max_depth", 6}, {"max_features", "sqrt"}, {"bootstrap", true}};
    case ClassifierKind::AdaBoost: return {{"rounds", 30}, {"base", "stump"}};
    case ClassifierKind::RidgeClassifier: return {{"lambda", 1.0}};
  }
  return json::object();
}

bool accepts_single_class(ClassifierKind kind) noexcept {
  return kind == ClassifierKind::KNearestNeighbors || kind == ClassifierKind::NearestCentroid ||
         kind == ClassifierKind::GaussianNaiveBayes;
}

json to_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fn", c.fn}, {"fp", c.fp}, {"tn", c.tn}};
}

ConfusionCounts confusion_from_json(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>(),
          j.at("fp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>()};
}

std::vector<double> project(const FlowRecord& record, std::span<const std::size_t> features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto f : features) out.push_back(record.values.at(f));
  return out;
}

// ---------------------------------------------------------------------------

NearestNeighbors::NearestNeighbors(std::vector<std::vector<double>> points)
    : points_(std::move(points)) {}

std::vector<std::pair<std::size_t, double>> NearestNeighbors::query(std::span<const double> x,
                                                                    std::size_t k) const {
  std::vector<std::pair<std::size_t, double>> all;
  all.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    double s = 0.0;
    for (std::size_t f = 0; f < p.size(); ++f) {
      const double d = p[f] - x[f];
      s += d * d;
    }
    all.emplace_back(i, s);
  }
  k = std::min(k, all.size());
  const auto closer = [](const auto& a, const auto& b) {
    return a.second < b.second || (a.second == b.second && a.first < b.first);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------

TrainedModel fit(ClassifierKind kind, std::span<const FlowRecord> train,
                 std::span<const std::size_t> features, std::uint64_t seed) {
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, std::string(id(kind)));
  const std::uint64_t fingerprint = train.front().schema_fingerprint;
  const std::size_t width = train.front().values.size();
  if (features.empty()) throw Error(ErrorCode::InvalidFeatures, "empty feature list");
  std::set<std::size_t> seen;
  for (const auto f : features) {
    if (f >= width) throw Error(ErrorCode::InvalidFeatures, "feature index out of range");
    if (!seen.insert(f).second) throw Error(ErrorCode::InvalidFeatures, "duplicate feature index");
  }

  detail::TrainingSet data;
  data.rows = train.size();
  data.cols = features.size();
  data.x.reserve(data.rows * data.cols);
  data.y.reserve(data.rows);
  std::map<TrafficClass, std::pair<std::vector<double>, std::size_t>> class_sums;
  for (const auto& r : train) {
    if (r.schema_fingerprint != fingerprint || r.values.size() != width) {
      throw Error(ErrorCode::SchemaMismatch, "training records from different schemas");
    }
    if (!r.label) throw Error(ErrorCode::EmptyTrainingSet, "unlabeled training record");
    for (const auto f : features) data.x.push_back(r.values[f]);
    data.y.push_back(r.is_attack() ? 1 : 0);
    if (r.is_attack()) {
      auto& [sum, n] = class_sums[*r.label];
      sum.resize(features.size(), 0.0);
      for (std::size_t i = 0; i < features.size(); ++i) sum[i] += r.values[features[i]];
      ++n;
    }
  }
  const auto positives = data.positives();
  if ((positives == 0 || positives == data.rows) && !accepts_single_class(kind)) {
    throw Error(ErrorCode::SingleClassData,
                std::string(id(kind)) + " needs both Normal and Attack records");
  }

  TrainedModel model;
  model.kind_ = kind;
  model.features_.assign(features.begin(), features.end());
  model.fingerprint_ = fingerprint;
  model.schema_width_ = width;
  model.training_size_ = train.size();
  model.estimator_ = detail::train_estimator(kind, data, seed);
  for (auto& [cls, entry] : class_sums) {
    auto& [sum, n] = entry;
    for (auto& v : sum) v /= static_cast<double>(n);
    model.attack_centroids_.emplace_back(cls, std::move(sum));
  }
  return model;
}

double TrainedModel::attack_score(std::span<const double> projected) const {
  return estimator_->attack_score(projected);
}

Prediction TrainedModel::predict(const FlowRecord& record) const {
  if (record.schema_fingerprint != fingerprint_ || record.values.size() != schema_width_) {
    throw Error(ErrorCode::SchemaMismatch, "record does not match the model's schema");
  }
  const auto x = project(record, features_);
  Prediction p;
  p.attack_score = std::clamp(estimator_->attack_score(x), 0.0, 1.0);
  p.attack = p.attack_score >= 0.5;
  if (p.attack && !attack_centroids_.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [cls, centroid] : attack_centroids_) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - centroid[i]) * (x[i] - centroid[i]);
      if (s < best) {
        best = s;
        p.attack_class = cls;
      }
    }
  }
  return p;
}

double TrainedModel::modeled_cost_ns() const {
  return estimator_->cost_ns() + 3.0 * static_cast<double>(attack_centroids_.size() * features_.size());
}

json TrainedModel::to_json() const {
  json centroids = json::array();
  for (const auto& [cls, c] : attack_centroids_) {
    centroids.push_back({{"class", std::string(to_string(cls))}, {"centroid", c}});
  }
  return {{"format", "twinguard-model"},
          {"version", 1},
          {"kind", std::string(id(kind_))},
          {"hyperparameters", hyperparameters(kind_)},
          {"features", features_},
          {"schema_fingerprint", fingerprint_},
          {"schema_width", schema_width_},
          {"training_size", training_size_},
          {"params", estimator_->params()},
          {"attack_centroids", centroids}};
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "twinguard-model") {
      throw Error(ErrorCode::InvalidModel, "not a twinguard model document");
    }
    const auto kind = classifier_kind_from_id(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::InvalidModel, "unknown kind");
    TrainedModel m;
    m.kind_ = *kind;
    m.features_ = j.at("features").get<std::vector<std::size_t>>();
    m.fingerprint_ = j.at("schema_fingerprint").get<std::uint64_t>();
    m.schema_width_ = j.at("schema_width").get<std::size_t>();
    m.training_size_ = j.value("training_size", std::size_t{0});
    std::set<std::size_t> seen;
    for (const auto f : m.features_) {
      if (f >= m.schema_width_ || !seen.insert(f).second) {
        throw Error(ErrorCode::InvalidModel, "invalid feature list");
      }
    }
    m.estimator_ = detail::load_estimator(*kind, j.at("params"), m.features_.size());
    for (const auto& c : j.value("attack_centroids", json::array())) {
      const auto cls = traffic_class_from_string(c.at("class").get<std::string>());
      auto centroid = c.at("centroid").get<std::vector<double>>();
      if (!cls || centroid.size() != m.features_.size()) {
        throw Error(ErrorCode::InvalidModel, "bad attack centroid");
      }
      m.attack_centroids_.emplace_back(*cls, std::move(centroid));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  }
}

std::string TrainedModel::export_text() const { return to_json().dump(2); }

TrainedModel TrainedModel::import_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidModel, e.what());
  }
  return from_json(j);
}

Evaluation evaluate(const TrainedModel& model, std::span<const FlowRecord> test) {
  Evaluation out;
  std::vector<char> predicted(test.size());
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < test.size(); ++i) predicted[i] = model.predict(test[i]).attack;
  const auto end = std::chrono::steady_clock::now();
  out.elapsed_ms = std::chrono::duration<double, std::milli>(end - start).count();
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!test[i].label) throw Error(ErrorCode::EmptyTrainingSet, "unlabeled test record");
    out.counts.add(predicted[i] != 0, test[i].is_attack());
  }
  out.modeled_ms = model.modeled_cost_ns() * static_cast<double>(test.size()) / 1e6;
  return out;
}

}  // namespace twinguard
