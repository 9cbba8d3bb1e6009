#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "twinguard/flow_model.hpp"

namespace twinguard {

// Gaussian traffic over an all-numeric schema, values already in [0,1].
//
// Features are grouped into regimes of `regime_width` columns. Normal
// traffic sits near `normal_mean` everywhere. An attack in regime r raises
// every column of r to `shift_mean` and three class-specific columns of r to
// `signature_mean`; columns outside r look normal. Moving the stream from
// one regime to the next is the drift used in tests.
struct SyntheticConfig {
  std::size_t regime_width = 10;
  double normal_mean = 0.30;
  double shift_mean = 0.55;
  double signature_mean = 0.80;
  double stddev = 0.05;
};

class TrafficGenerator {
 public:
  explicit TrafficGenerator(const FeatureSchema& schema, SyntheticConfig config = {});

  std::size_t regime_count() const noexcept { return regimes_; }
  // Columns raised to signature_mean for class `c` in `regime`.
  std::vector<std::size_t> signature(TrafficClass c, std::size_t regime) const;

  FlowRecord generate(TrafficClass c, std::size_t regime, std::mt19937_64& rng) const;

  // `per_class` records of every declared attack class plus `normals`
  // normal records, in class order.
  std::vector<FlowRecord> pool(std::size_t per_class, std::size_t normals, std::size_t regime,
                               std::mt19937_64& rng) const;

 private:
  const FeatureSchema* schema_;
  SyntheticConfig config_;
  std::size_t regimes_;
};

// Labeled records in which a seeded choice of `signal` columns separates
// attack from normal and every other column is identically distributed noise.
struct FsFixture {
  std::vector<FlowRecord> records;
  std::vector<std::size_t> signal;  // ascending
};

FsFixture make_fs_fixture(const FeatureSchema& schema, std::size_t n, std::size_t signal,
                          double attack_ratio, std::uint64_t seed);

}  // namespace twinguard
