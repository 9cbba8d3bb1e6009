#include "twinguard/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "twinguard/error.hpp"

namespace twinguard {

namespace {

double draw(std::normal_distribution<double>& dist, std::mt19937_64& rng) {
  return std::clamp(dist(rng), 0.0, 1.0);
}

}  // namespace

TrafficGenerator::TrafficGenerator(const FeatureSchema& schema, SyntheticConfig config)
    : schema_(&schema), config_(config) {
  if (config_.regime_width < 3) throw Error(ErrorCode::InvalidConfig, "regime width must be >= 3");
  for (const auto& f : schema.features()) {
    if (f.kind != FeatureKind::Numeric) {
      throw Error(ErrorCode::InvalidConfig, "synthetic traffic needs an all-numeric schema");
    }
  }
  regimes_ = schema.feature_count() / config_.regime_width;
  if (regimes_ == 0) throw Error(ErrorCode::InvalidConfig, "schema narrower than one regime");
}

std::vector<std::size_t> TrafficGenerator::signature(TrafficClass c, std::size_t regime) const {
  const auto classes = schema_->attack_classes();
  const auto it = std::find(classes.begin(), classes.end(), c);
  if (it == classes.end()) {
    throw Error(ErrorCode::UnknownLabel, std::string(to_string(c)) + " not declared by " + schema_->name());
  }
  const auto j = static_cast<std::size_t>(it - classes.begin());
  const auto w = config_.regime_width;
  const auto base = (regime % regimes_) * w;
  std::vector<std::size_t> cols{base + j % w, base + (j + 3) % w, base + (j + 7) % w};
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  return cols;
}

FlowRecord TrafficGenerator::generate(TrafficClass c, std::size_t regime, std::mt19937_64& rng) const {
  const auto f = schema_->feature_count();
  FlowRecord r;
  r.values.resize(f);
  r.label = c;
  r.schema_fingerprint = schema_->fingerprint();

  std::vector<double> mean(f, config_.normal_mean);
  if (is_attack(c)) {
    const auto w = config_.regime_width;
    const auto base = (regime % regimes_) * w;
    for (std::size_t i = base; i < base + w; ++i) mean[i] = config_.shift_mean;
    for (const auto i : signature(c, regime)) mean[i] = config_.signature_mean;
  }
  for (std::size_t i = 0; i < f; ++i) {
    std::normal_distribution<double> dist(mean[i], config_.stddev);
    r.values[i] = draw(dist, rng);
  }
  return r;
}

std::vector<FlowRecord> TrafficGenerator::pool(std::size_t per_class, std::size_t normals,
                                               std::size_t regime, std::mt19937_64& rng) const {
  std::vector<FlowRecord> out;
  out.reserve(per_class * schema_->attack_classes().size() + normals);
  for (const auto c : schema_->attack_classes()) {
    for (std::size_t i = 0; i < per_class; ++i) out.push_back(generate(c, regime, rng));
  }
  for (std::size_t i = 0; i < normals; ++i) out.push_back(generate(TrafficClass::Normal, regime, rng));
  return out;
}

FsFixture make_fs_fixture(const FeatureSchema& schema, std::size_t n, std::size_t signal,
                          double attack_ratio, std::uint64_t seed) {
  const auto f = schema.feature_count();
  if (signal > f) throw Error(ErrorCode::InvalidConfig, "more signal columns than features");
  const auto classes = schema.attack_classes();
  if (classes.empty()) throw Error(ErrorCode::InvalidConfig, "schema declares no attack class");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> cols(f);
  std::iota(cols.begin(), cols.end(), 0);
  std::shuffle(cols.begin(), cols.end(), rng);
  FsFixture fx;
  fx.signal.assign(cols.begin(), cols.begin() + static_cast<std::ptrdiff_t>(signal));
  std::sort(fx.signal.begin(), fx.signal.end());
  std::vector<bool> is_signal(f, false);
  for (const auto s : fx.signal) is_signal[s] = true;

  const auto attacks = static_cast<std::size_t>(std::llround(static_cast<double>(n) * attack_ratio));
  std::normal_distribution<double> attack_sig(0.62, 0.08);
  std::normal_distribution<double> normal_sig(0.38, 0.08);
  std::normal_distribution<double> noise(0.5, 0.08);
  fx.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    FlowRecord r;
    const bool attack = i < attacks;
    r.label = attack ? classes[i % classes.size()] : TrafficClass::Normal;
    r.schema_fingerprint = schema.fingerprint();
    r.timestamp = i;
    r.values.resize(f);
    for (std::size_t j = 0; j < f; ++j) {
      auto& dist = is_signal[j] ? (attack ? attack_sig : normal_sig) : noise;
      r.values[j] = draw(dist, rng);
    }
    fx.records.push_back(std::move(r));
  }
  std::shuffle(fx.records.begin(), fx.records.end(), rng);
  return fx;
}

}  // namespace twinguard
