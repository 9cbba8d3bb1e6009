#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "test_support.hpp"
#include "twinguard/classifier_suite.hpp"

namespace twinguard {
namespace {

using testing::code_of;
using testing::numeric_schema;
using testing::record;

constexpr auto kAttack = TrafficClass::DdosUdp;

std::vector<FlowRecord> noisy_data(const FeatureSchema& schema, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FlowRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(schema.feature_count());
    for (auto& x : v) x = u(rng);
    const bool attack = v[0] + 0.5 * v[1] + 0.3 * (u(rng) - 0.5) > 0.75;
    out.push_back(record(schema, v, attack ? kAttack : TrafficClass::Normal));
  }
  return out;
}

std::vector<std::size_t> all_features(const FeatureSchema& s) {
  std::vector<std::size_t> f(s.feature_count());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = i;
  return f;
}

TrainedModel linear_doc(const FeatureSchema& schema, std::vector<double> w, double b) {
  std::vector<std::size_t> features(w.size());
  for (std::size_t i = 0; i < features.size(); ++i) features[i] = i;
  const nlohmann::json doc = {{"format", "twinguard-model"},
                              {"version", 1},
                              {"kind", "logistic_regression"},
                              {"features", features},
                              {"schema_fingerprint", schema.fingerprint()},
                              {"schema_width", schema.feature_count()},
                              {"params", {{"weights", w}, {"bias", b}}}};
  return TrainedModel::from_json(doc);
}

TEST(ClassifierKinds, TenStableIds) {
  std::set<std::string_view> ids;
  for (const auto k : kAllClassifierKinds) {
    ids.insert(id(k));
    EXPECT_EQ(classifier_kind_from_id(id(k)), k);
  }
  EXPECT_EQ(ids.size(), 10u);
}

TEST(Fit, NearestNeighbourMemorizesTrainingSet) {
  const auto schema = numeric_schema(3);
  const auto data = noisy_data(schema, 200, 1);
  std::vector<std::vector<double>> points;
  for (const auto& r : data) points.push_back(r.values);
  const NearestNeighbors nn(points);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto hit = nn.query(data[i].values, 1);
    ASSERT_EQ(hit.size(), 1u);
    EXPECT_EQ(hit[0].second, 0.0);
    correct += data[hit[0].first].label == data[i].label;
  }
  EXPECT_EQ(correct, data.size());
}

TEST(Fit, NaiveBayesMatchesHandBayesRule) {
  const auto schema = numeric_schema(1);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n0(0.0, 1.0), n1(10.0, 1.0);
  std::vector<FlowRecord> train, test;
  for (int i = 0; i < 100; ++i) {
    train.push_back(record(schema, {n0(rng)}, TrafficClass::Normal));
    train.push_back(record(schema, {n1(rng)}, kAttack));
  }
  for (int i = 0; i < 20; ++i) {
    test.push_back(record(schema, {n0(rng)}, TrafficClass::Normal));
    test.push_back(record(schema, {n1(rng)}, kAttack));
  }
  // Fitted Gaussians by hand.
  double mean[2] = {0, 0}, var[2] = {0, 0};
  for (const auto& r : train) mean[r.is_attack()] += r.values[0] / 100.0;
  for (const auto& r : train) {
    const int c = r.is_attack();
    var[c] += (r.values[0] - mean[c]) * (r.values[0] - mean[c]) / 100.0;
  }
  const auto loglik = [&](int c, double x) {
    return -0.5 * std::log(2 * std::numbers::pi * var[c]) - (x - mean[c]) * (x - mean[c]) / (2 * var[c]);
  };

  const auto model = fit(ClassifierKind::GaussianNaiveBayes, train, std::vector<std::size_t>{0}, 0);
  std::size_t agree = 0, correct = 0;
  for (const auto& r : test) {
    const bool oracle = loglik(1, r.values[0]) > loglik(0, r.values[0]);
    const bool got = model.predict(r).attack;
    agree += got == oracle;
    correct += got == r.is_attack();
  }
  EXPECT_EQ(agree, 40u);
  EXPECT_EQ(correct, 40u);
}

TEST(Fit, Errors) {
  const auto schema = numeric_schema(2);
  const std::vector<std::size_t> f{0, 1};
  EXPECT_EQ(code_of([&] { fit(ClassifierKind::DecisionTree, std::vector<FlowRecord>{}, f, 0); }),
            ErrorCode::EmptyTrainingSet);
  std::vector<FlowRecord> normals;
  for (int i = 0; i < 10; ++i) normals.push_back(record(schema, {0.1 * i, 0.5}, TrafficClass::Normal));
  for (const auto k : kAllClassifierKinds) {
    if (accepts_single_class(k)) {
      EXPECT_NO_THROW(fit(k, normals, f, 0));
    } else {
      EXPECT_EQ(code_of([&] { fit(k, normals, f, 0); }), ErrorCode::SingleClassData) << id(k);
    }
  }
  const auto data = noisy_data(schema, 20, 2);
  EXPECT_EQ(code_of([&] { fit(ClassifierKind::Perceptron, data, std::vector<std::size_t>{0, 0}, 0); }),
            ErrorCode::InvalidFeatures);
  EXPECT_EQ(code_of([&] { fit(ClassifierKind::Perceptron, data, std::vector<std::size_t>{2}, 0); }),
            ErrorCode::InvalidFeatures);
}

TEST(Predict, ConstantLabelCentroidPredictsNormal) {
  const auto schema = numeric_schema(2);
  std::vector<FlowRecord> normals;
  for (int i = 0; i < 10; ++i) normals.push_back(record(schema, {0.1 * i, 0.2}, TrafficClass::Normal));
  const auto model = fit(ClassifierKind::NearestCentroid, normals, std::vector<std::size_t>{0, 1}, 0);
  for (const auto& r : noisy_data(schema, 100, 3)) EXPECT_FALSE(model.predict(r).attack);
}

TEST(Predict, ZeroWeightPositiveBiasPredictsAttack) {
  const auto schema = numeric_schema(3);
  const auto model = linear_doc(schema, {0.0, 0.0, 0.0}, 0.5);
  for (const auto& r : noisy_data(schema, 100, 4)) EXPECT_TRUE(model.predict(r).attack);
}

TEST(Predict, KnnExactTrainingPoint) {
  const auto schema = numeric_schema(2);
  std::vector<FlowRecord> train;
  for (int i = 0; i < 10; ++i) {
    train.push_back(record(schema, {0.05 * i, 0.1}, TrafficClass::Normal));
    train.push_back(record(schema, {0.05 * i, 0.9}, kAttack));
  }
  const auto model = fit(ClassifierKind::KNearestNeighbors, train, std::vector<std::size_t>{0, 1}, 0);
  for (const auto& r : train) EXPECT_EQ(model.predict(r).attack, r.is_attack());
}

TEST(Predict, SchemaMismatch) {
  const auto a = numeric_schema(2, {kAttack}, "a");
  const auto b = numeric_schema(2, {kAttack}, "b");
  ASSERT_NE(a.fingerprint(), b.fingerprint());
  const auto model = fit(ClassifierKind::NearestCentroid, noisy_data(a, 40, 5), std::vector<std::size_t>{0, 1}, 0);
  EXPECT_EQ(code_of([&] { model.predict(record(b, {0.1, 0.2})); }), ErrorCode::SchemaMismatch);
  EXPECT_EQ(code_of([&] { evaluate(model, noisy_data(b, 5, 1)); }), ErrorCode::SchemaMismatch);
}

TEST(Predict, ConfidenceInUnitIntervalAndMonotone) {
  const auto schema = numeric_schema(3);
  const auto data = noisy_data(schema, 300, 6);
  for (const auto k : kAllClassifierKinds) {
    const auto model = fit(k, data, all_features(schema), 1);
    for (const auto& r : data) {
      const auto p = model.predict(r);
      EXPECT_GE(p.confidence(), 0.5 - 1e-12);
      EXPECT_LE(p.confidence(), 1.0);
      EXPECT_EQ(p.attack, p.attack_score >= 0.5);
    }
  }
}

TEST(Evaluate, PerfectAndInvertedModels) {
  const auto schema = numeric_schema(1);
  std::vector<FlowRecord> test;
  for (int i = 0; i < 10; ++i) {
    test.push_back(record(schema, {1.0}, kAttack));
    test.push_back(record(schema, {0.0}, TrafficClass::Normal));
  }
  EXPECT_EQ(evaluate(linear_doc(schema, {10.0}, -5.0), test).counts, (ConfusionCounts{10, 0, 0, 10}));
  EXPECT_EQ(evaluate(linear_doc(schema, {-10.0}, 5.0), test).counts, (ConfusionCounts{0, 10, 10, 0}));
}

TEST(Evaluate, CountsMatchBruteForceLoop) {
  const auto schema = numeric_schema(4);
  const auto train = noisy_data(schema, 300, 7);
  const auto test = noisy_data(schema, 200, 8);
  for (const auto k : kAllClassifierKinds) {
    const auto model = fit(k, train, all_features(schema), 3);
    ConfusionCounts oracle;
    for (const auto& r : test) {
      const bool p = model.predict(r).attack;
      if (r.is_attack()) ++(p ? oracle.tp : oracle.fn);
      else ++(p ? oracle.fp : oracle.tn);
    }
    const auto ev = evaluate(model, test);
    EXPECT_EQ(ev.counts, oracle) << id(k);
    EXPECT_EQ(ev.counts.total(), test.size());
    EXPECT_GE(ev.elapsed_ms, 0.0);
    EXPECT_GT(ev.modeled_ms, 0.0);
  }
}

TEST(Properties, DeterministicForFixedSeed) {
  const auto schema = numeric_schema(4);
  const auto train = noisy_data(schema, 300, 9);
  const auto test = noisy_data(schema, 200, 10);
  for (const auto k : kAllClassifierKinds) {
    const auto a = fit(k, train, all_features(schema), 42);
    const auto b = fit(k, train, all_features(schema), 42);
    EXPECT_EQ(a.to_json(), b.to_json()) << id(k);
    EXPECT_EQ(evaluate(a, test).counts, evaluate(b, test).counts) << id(k);
  }
}

TEST(Properties, IgnoresCoordinatesOutsideFeatureList) {
  const auto schema = numeric_schema(4);
  const auto train = noisy_data(schema, 300, 11);
  const std::vector<std::size_t> keep{0, 2};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto k : kAllClassifierKinds) {
    const auto model = fit(k, train, keep, 1);
    EXPECT_EQ(model.features(), keep);
    for (auto r : noisy_data(schema, 50, 12)) {
      const auto before = model.predict(r);
      r.values[1] = u(rng);
      r.values[3] = u(rng);
      const auto after = model.predict(r);
      EXPECT_EQ(before.attack_score, after.attack_score) << id(k);
    }
  }
}

struct Separable {
  std::vector<FlowRecord> train, test;
};

// 200 points in [0,4]^2 split by x + y = 4 with a gap of width 1 along the normal.
Separable separable_fixture(const FeatureSchema& schema) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::vector<FlowRecord> all;
  while (all.size() < 200) {
    const double x = u(rng), y = u(rng);
    const double s = (x + y - 4.0) / std::numbers::sqrt2;
    if (std::abs(s) < 0.5) continue;
    all.push_back(record(schema, {x, y}, s > 0 ? kAttack : TrafficClass::Normal));
  }
  Separable out;
  out.train.assign(all.begin(), all.begin() + 140);
  out.test.assign(all.begin() + 140, all.end());
  return out;
}

// Searches directions and offsets for a separator with margin >= 1.
bool has_margin_one_separator(const std::vector<FlowRecord>& data) {
  for (int deg = 0; deg < 360; ++deg) {
    const double t = deg * std::numbers::pi / 180.0;
    const double wx = std::cos(t), wy = std::sin(t);
    double lo_attack = 1e9, hi_normal = -1e9;
    for (const auto& r : data) {
      const double p = wx * r.values[0] + wy * r.values[1];
      if (r.is_attack()) lo_attack = std::min(lo_attack, p);
      else hi_normal = std::max(hi_normal, p);
    }
    if (lo_attack - hi_normal >= 1.0 - 1e-9) return true;
  }
  return false;
}

TEST(Properties, EveryKindSeparatesMarginFixture) {
  const auto schema = numeric_schema(2);
  const auto fx = separable_fixture(schema);
  std::vector<FlowRecord> all = fx.train;
  all.insert(all.end(), fx.test.begin(), fx.test.end());
  ASSERT_TRUE(has_margin_one_separator(all));
  for (const auto k : kAllClassifierKinds) {
    const auto model = fit(k, fx.train, std::vector<std::size_t>{0, 1}, 7);
    const auto c = evaluate(model, fx.test).counts;
    EXPECT_GE(static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()), 0.95) << id(k);
  }
}

TEST(Export, RoundTripPreservesPredictions) {
  const auto schema = numeric_schema(4);
  const auto train = noisy_data(schema, 300, 13);
  const auto test = noisy_data(schema, 100, 14);
  for (const auto k : kAllClassifierKinds) {
    const auto model = fit(k, train, std::vector<std::size_t>{0, 1, 3}, 2);
    const auto back = TrainedModel::import_text(model.export_text());
    EXPECT_EQ(back.kind(), k);
    EXPECT_EQ(back.features(), model.features());
    EXPECT_EQ(back.schema_fingerprint(), model.schema_fingerprint());
    for (const auto& r : test) {
      const auto a = model.predict(r), b = back.predict(r);
      EXPECT_EQ(a.attack_score, b.attack_score) << id(k);
      EXPECT_EQ(a.attack_class, b.attack_class);
    }
  }
  EXPECT_EQ(code_of([] { TrainedModel::import_text("{not json"); }), ErrorCode::InvalidModel);
  EXPECT_EQ(code_of([] { TrainedModel::import_text(R"({"format":"other"})"); }), ErrorCode::InvalidModel);
}

TEST(Predict, AttackClassIsNearestTrainingCentroid) {
  const auto schema = numeric_schema(2, {TrafficClass::Xss, TrafficClass::Ransomware});
  std::vector<FlowRecord> train;
  for (int i = 0; i < 20; ++i) {
    const double d = 0.005 * i;
    train.push_back(record(schema, {0.1 + d, 0.1}, TrafficClass::Normal));
    train.push_back(record(schema, {0.9, 0.1 + d}, TrafficClass::Xss));
    train.push_back(record(schema, {0.9 - d, 0.9}, TrafficClass::Ransomware));
  }
  const auto model = fit(ClassifierKind::DecisionTree, train, std::vector<std::size_t>{0, 1}, 0);
  EXPECT_EQ(model.predict(record(schema, {0.92, 0.15})).attack_class, TrafficClass::Xss);
  EXPECT_EQ(model.predict(record(schema, {0.85, 0.92})).attack_class, TrafficClass::Ransomware);
  EXPECT_FALSE(model.predict(record(schema, {0.1, 0.1})).attack_class.has_value());
}

}  // namespace
}  // namespace twinguard
