#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "test_support.hpp"
#include "twinguard/error.hpp"
#include "twinguard/flow_model.hpp"

namespace twinguard {
namespace {

using testing::code_of;
using testing::fixture;
using testing::numeric_schema;

TEST(LoadSchema, SyntheticProfileHasTwentyNumericFeatures) {
  const auto s = load_schema("synthetic-v1");
  EXPECT_EQ(s.feature_count(), 20u);
  for (const auto& f : s.features()) EXPECT_EQ(f.kind, FeatureKind::Numeric);
}

TEST(LoadSchema, EdgeProfileDeclaresTheTenTableClasses) {
  const auto s = load_schema("edge-iiot");
  const std::set<TrafficClass> got(s.attack_classes().begin(), s.attack_classes().end());
  const std::set<TrafficClass> want{TrafficClass::Backdoor,     TrafficClass::DdosHttp,
                                    TrafficClass::DdosUdp,      TrafficClass::Fingerprinting,
                                    TrafficClass::Mitm,         TrafficClass::Password,
                                    TrafficClass::PortScanning, TrafficClass::Ransomware,
                                    TrafficClass::SqlInjection, TrafficClass::Xss};
  EXPECT_EQ(got, want);
  EXPECT_EQ(s.attack_classes().size(), 10u);
  EXPECT_TRUE(s.declares(TrafficClass::Normal));
  EXPECT_GE(s.feature_count(), 10u);
}

TEST(LoadSchema, TonProfileDeclaresSevenClasses) {
  const auto s = load_schema("ton-iot");
  EXPECT_EQ(s.attack_classes().size(), 7u);
  EXPECT_EQ(s.parse_label("ddos"), TrafficClass::Ddos);
  EXPECT_TRUE(s.ignores_label("mitm"));
}

TEST(LoadSchema, UnknownProfile) {
  EXPECT_EQ(code_of([] { load_schema("missing"); }), ErrorCode::UnknownProfile);
}

TEST(LoadSchema, DeterministicFingerprint) {
  EXPECT_EQ(load_schema("edge-iiot").fingerprint(), load_schema("edge-iiot").fingerprint());
  EXPECT_NE(load_schema("edge-iiot").fingerprint(), load_schema("ton-iot").fingerprint());
}

TEST(ParseSchema, DuplicateFeatureNames) {
  EXPECT_EQ(code_of([] { FeatureSchema::parse("name = x\nnumeric = a 0 1\nnumeric = a 0 2\n"); }),
            ErrorCode::DuplicateFeature);
}

TEST(ParseSchema, DictionaryCollision) {
  EXPECT_EQ(code_of([] { FeatureSchema::parse("name = x\ncategorical = proto tcp=1 udp=1\n"); }),
            ErrorCode::DictionaryCollision);
  EXPECT_EQ(code_of([] { FeatureSchema::parse("name = x\ncategorical = proto tcp=1 tcp=2\n"); }),
            ErrorCode::DictionaryCollision);
  // Code 0 is the reserved "other" code.
  EXPECT_EQ(code_of([] { FeatureSchema::parse("name = x\ncategorical = proto tcp=0\n"); }),
            ErrorCode::DictionaryCollision);
}

const char* kProtoProfile =
    "name = proto-test\n"
    "attack_classes = DDoS UDP\n"
    "numeric = bytes 0 1000\n"
    "categorical = proto tcp=1 udp=2\n"
    "numeric = pkts 10 20\n";

TEST(NormalizeRecord, ZeroRow) {
  const auto s = numeric_schema(4);
  const RawRow row{{"f0", "0"}, {"f1", "0"}, {"f2", "0"}, {"f3", "0"}};
  const auto r = normalize_record(row, s);
  EXPECT_EQ(r.values, std::vector<double>(4, 0.0));
  EXPECT_FALSE(r.label.has_value());
}

TEST(NormalizeRecord, CategoricalCodesAndScaling) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  const auto r = normalize_record({{"bytes", "250"}, {"proto", "tcp"}, {"pkts", "15"}, {"label", "DDoS UDP"}}, s);
  EXPECT_EQ(r.values[1], 1.0);
  EXPECT_DOUBLE_EQ(r.values[0], 0.25);
  EXPECT_DOUBLE_EQ(r.values[2], 0.5);
  EXPECT_EQ(r.label, TrafficClass::DdosUdp);

  const auto other = normalize_record({{"bytes", "5000"}, {"proto", "sctp"}, {"pkts", "1"}}, s);
  EXPECT_EQ(other.values[1], static_cast<double>(kOtherCategoryCode));
  EXPECT_EQ(other.values[0], 1.0);  // clamped
  EXPECT_EQ(other.values[2], 0.0);
}

TEST(NormalizeRecord, MissingFeature) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  try {
    normalize_record({{"bytes", "1"}, {"pkts", "12"}}, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFeature);
    EXPECT_NE(std::string(e.what()).find("proto"), std::string::npos);
  }
}

TEST(NormalizeRecord, UnparseableNumericAndLabel) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  EXPECT_EQ(code_of([&] { normalize_record({{"bytes", "x1"}, {"proto", "tcp"}, {"pkts", "12"}}, s); }),
            ErrorCode::UnparseableNumeric);
  EXPECT_EQ(code_of([&] { normalize_record({{"bytes", "nan"}, {"proto", "tcp"}, {"pkts", "12"}}, s); }),
            ErrorCode::UnparseableNumeric);
  EXPECT_EQ(code_of([&] {
              normalize_record({{"bytes", "1"}, {"proto", "tcp"}, {"pkts", "12"}, {"label", "Ransomware"}}, s);
            }),
            ErrorCode::UnknownLabel);
}

TEST(NormalizeRecord, RoundTripIsExact) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    FlowRecord r = testing::record(s, {u(rng), static_cast<double>(i % 3), u(rng)},
                                   i % 2 ? std::optional(TrafficClass::DdosUdp) : std::optional(TrafficClass::Normal));
    const auto back = parse_normalized_record(format_record(r, s), s);
    ASSERT_EQ(back.values, r.values);
    ASSERT_EQ(back.label, r.label);
  }
}

TEST(LoadDataset, ThreeRowsInFileOrder) {
  const auto s = load_schema("synthetic-v1");
  const auto d = load_dataset(fixture("three-rows.csv"), s);
  ASSERT_EQ(d.records.size(), 3u);
  EXPECT_DOUBLE_EQ(d.records[0].values[1], 0.1);
  EXPECT_EQ(d.records[1].values, std::vector<double>(20, 0.0));
  EXPECT_DOUBLE_EQ(d.records[2].values[10], 0.75);
  EXPECT_EQ(d.records[0].src_ip, "10.0.0.1");
  EXPECT_EQ(d.records[1].node_id, "edge-2");
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(d.records[i].timestamp, i);
}

TEST(LoadDataset, LabelsParsedToEnum) {
  const auto s = load_schema("synthetic-v1");
  const auto d = load_dataset(fixture("three-rows.csv"), s);
  EXPECT_EQ(d.records[0].label, TrafficClass::Normal);
  EXPECT_EQ(d.records[1].label, TrafficClass::DdosUdp);
  EXPECT_TRUE(d.records[1].is_attack());
}

TEST(LoadDataset, CorruptRowReportsRowNumber) {
  const auto s = load_schema("synthetic-v1");
  try {
    load_dataset(fixture("corrupt-row2.csv"), s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DatasetRow);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { load_dataset(fixture("no-such.csv"), load_schema("synthetic-v1")); }), ErrorCode::Io);
}

TEST(LoadDataset, IgnoredLabelsAreSkipped) {
  const auto s = FeatureSchema::parse(std::string(kProtoProfile) + "ignore_label = Uploading\n");
  std::istringstream in("bytes,proto,pkts,label\n1,tcp,12,Normal\n2,udp,13,Uploading\n3,udp,14,DDoS UDP\n");
  const auto d = load_dataset(in, s);
  EXPECT_EQ(d.rows_read, 3u);
  EXPECT_EQ(d.rows_skipped, 1u);
  ASSERT_EQ(d.records.size(), 2u);
  EXPECT_EQ(d.records[1].label, TrafficClass::DdosUdp);
}

TEST(LoadDataset, ConcatenationPreservesOrder) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  const std::string header = "bytes,proto,pkts,label\n";
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::string a, b;
    const auto rows = [&](std::string& out, int n) {
      for (int i = 0; i < n; ++i) {
        out += std::to_string(rng() % 1000) + "," + (rng() % 2 ? "tcp" : "udp") + "," +
               std::to_string(10 + rng() % 10) + "," + (rng() % 2 ? "Normal" : "DDoS UDP") + "\n";
      }
    };
    rows(a, static_cast<int>(rng() % 8));
    rows(b, static_cast<int>(rng() % 8));
    std::istringstream ia(header + a), ib(header + b), iab(header + a + b);
    const auto da = load_dataset(ia, s).records;
    const auto db = load_dataset(ib, s).records;
    const auto dab = load_dataset(iab, s).records;
    ASSERT_EQ(dab.size(), da.size() + db.size());
    for (std::size_t i = 0; i < da.size(); ++i) EXPECT_EQ(dab[i].values, da[i].values);
    for (std::size_t i = 0; i < db.size(); ++i) {
      EXPECT_EQ(dab[da.size() + i].values, db[i].values);
      EXPECT_EQ(dab[da.size() + i].label, db[i].label);
    }
  }
}

TEST(LoadDataset, NormalizedFormRoundTrips) {
  const auto s = FeatureSchema::parse(kProtoProfile);
  std::istringstream raw("bytes,proto,pkts,label\n333,tcp,12,Normal\n1,sctp,19,DDoS UDP\n");
  const auto original = load_dataset(raw, s).records;
  std::stringstream buf;
  write_normalized(buf, original, s);
  const auto back = load_dataset(buf, s).records;
  ASSERT_EQ(back.size(), original.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].values, original[i].values);
    EXPECT_EQ(back[i].label, original[i].label);
  }
}

std::vector<FlowRecord> labeled_pool(std::size_t attacks, std::size_t normals) {
  const auto s = numeric_schema(2);
  std::vector<FlowRecord> pool;
  for (std::size_t i = 0; i < attacks; ++i) pool.push_back(testing::record(s, {1.0, double(i)}, TrafficClass::DdosUdp));
  for (std::size_t i = 0; i < normals; ++i) pool.push_back(testing::record(s, {0.0, double(i)}, TrafficClass::Normal));
  return pool;
}

std::size_t attacks_in(const std::vector<FlowRecord>& rs) {
  return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [](const auto& r) { return r.is_attack(); }));
}

TEST(SampleBaseline, SixtyFivePercentOfAThousand) {
  const auto pool = labeled_pool(2000, 2000);
  const auto b = sample_baseline(pool, 1000, 0.65, 1);
  EXPECT_EQ(b.records.size(), 1000u);
  EXPECT_EQ(attacks_in(b.records), 650u);
  EXPECT_DOUBLE_EQ(b.attack_ratio, 0.65);
}

TEST(SampleBaseline, EmptyRequest) {
  const auto b = sample_baseline(labeled_pool(5, 5), 0, 0.65, 1);
  EXPECT_TRUE(b.records.empty());
  EXPECT_EQ(b.attack_ratio, 0.0);
}

TEST(SampleBaseline, DeterministicForSeed) {
  const auto pool = labeled_pool(900, 900);
  const auto a = sample_baseline(pool, 500, 0.65, 42);
  const auto b = sample_baseline(pool, 500, 0.65, 42);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].values, b.records[i].values);
}

TEST(SampleBaseline, WithoutReplacement) {
  const auto pool = labeled_pool(700, 400);
  const auto b = sample_baseline(pool, 1000, 0.65, 3);
  std::set<std::pair<double, double>> seen;
  for (const auto& r : b.records) EXPECT_TRUE(seen.insert({r.values[0], r.values[1]}).second);
}

TEST(SampleBaseline, InsufficientRecords) {
  EXPECT_EQ(code_of([] { sample_baseline(labeled_pool(100, 1000), 1000, 0.65, 1); }),
            ErrorCode::InsufficientRecords);
  EXPECT_EQ(code_of([] { sample_baseline(labeled_pool(1000, 100), 1000, 0.65, 1); }),
            ErrorCode::InsufficientRecords);
}

TEST(SampleBaseline, AttackCountPropertySweep) {
  const auto pool = labeled_pool(600, 600);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = rng() % 600;
    const double ratio = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto b = sample_baseline(pool, n, ratio, rng());
    ASSERT_EQ(b.records.size(), n);
    ASSERT_EQ(attacks_in(b.records), static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio)))
        << "n=" << n << " ratio=" << ratio;
    if (n > 0) ASSERT_LE(std::abs(b.attack_ratio - ratio), 1.0 / static_cast<double>(n));
  }
}

}  // namespace
}  // namespace twinguard
