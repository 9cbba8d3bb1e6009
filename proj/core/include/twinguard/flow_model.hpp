#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "twinguard/traffic_class.hpp"

namespace twinguard {

enum class FeatureKind { Numeric, Categorical };

// Code assigned to categorical values missing from the dictionary.
inline constexpr int kOtherCategoryCode = 0;

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::Numeric;
  // Min-max scaling bounds, numeric features only.
  double lower = 0.0;
  double upper = 1.0;
  // Categorical dictionary, value -> code. Codes are >= 1 and injective.
  std::map<std::string, int, std::less<>> dictionary;
};

struct SchemaDefinition {
  std::string name;
  std::vector<FeatureSpec> features;
  std::string label_column = "label";
  // Optional columns carrying the source address and the edge node id.
  std::string ip_column;
  std::string node_column;
  std::vector<TrafficClass> attack_classes;
  // Raw label spelling -> canonical class (in addition to canonical names).
  std::map<std::string, TrafficClass, std::less<>> label_aliases;
  // Raw labels whose rows are skipped on load (classes outside the profile).
  std::vector<std::string> ignored_labels;
};

// Immutable, validated description of a normalized flow record.
class FeatureSchema {
 public:
  // Validates: unique names, injective dictionaries, lower < upper.
  static FeatureSchema create(SchemaDefinition definition);
  // Parses the key-value profile format shipped under core/profiles.
  static FeatureSchema parse(std::string_view profile_text);

  const std::string& name() const noexcept { return def_.name; }
  std::size_t feature_count() const noexcept { return def_.features.size(); }
  const std::vector<FeatureSpec>& features() const noexcept { return def_.features; }
  const FeatureSpec& feature(std::size_t i) const { return def_.features.at(i); }
  std::optional<std::size_t> feature_index(std::string_view name) const;
  const std::string& label_column() const noexcept { return def_.label_column; }
  const std::string& ip_column() const noexcept { return def_.ip_column; }
  const std::string& node_column() const noexcept { return def_.node_column; }
  std::span<const TrafficClass> attack_classes() const noexcept { return def_.attack_classes; }
  bool declares(TrafficClass c) const noexcept;
  const SchemaDefinition& definition() const noexcept { return def_; }

  // nullopt when the label is not Normal, an alias, or a declared attack class.
  std::optional<TrafficClass> parse_label(std::string_view raw) const;
  bool ignores_label(std::string_view raw) const;

  // FNV-1a over the canonical schema text; records carry it.
  std::uint64_t fingerprint() const noexcept { return fingerprint_; }
  std::string canonical_text() const;

 private:
  explicit FeatureSchema(SchemaDefinition def);

  SchemaDefinition def_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::uint64_t fingerprint_ = 0;
};

struct FlowRecord {
  std::vector<double> values;
  std::string src_ip;
  std::string node_id;
  std::uint64_t timestamp = 0;
  std::optional<TrafficClass> label;
  std::uint64_t schema_fingerprint = 0;

  bool is_attack() const { return label.has_value() && twinguard::is_attack(*label); }
};

using RawRow = std::map<std::string, std::string, std::less<>>;

// Resolves a profile name against the profile search path (the
// TWINGUARD_PROFILE_DIR environment variable, then the built-in directory),
// or loads the file directly when `profile` names an existing path.
FeatureSchema load_schema(std::string_view profile);
std::filesystem::path default_profile_dir();

// Scales numerics into [0,1] with the profile bounds (clamped) and codes
// categoricals; unseen categorical values map to kOtherCategoryCode.
FlowRecord normalize_record(const RawRow& raw, const FeatureSchema& schema);

// Already-normalized form written by `ingest`: numerics printed round-trip
// exact, categoricals by dictionary name. parse_normalized_record inverts it.
RawRow format_record(const FlowRecord& record, const FeatureSchema& schema);
FlowRecord parse_normalized_record(const RawRow& row, const FeatureSchema& schema);

struct LoadedDataset {
  std::vector<FlowRecord> records;
  std::size_t rows_read = 0;
  std::size_t rows_skipped = 0;
};

// Raw profile CSVs and normalized CSVs (first line "#twinguard-normalized")
// are both accepted. Row numbers in errors are 1-based data rows.
LoadedDataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema);
LoadedDataset load_dataset(std::istream& in, const FeatureSchema& schema);

void write_normalized(std::ostream& out, std::span<const FlowRecord> records,
                      const FeatureSchema& schema);

// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerant.
std::vector<std::string> split_csv_line(std::string_view line);

struct BaselineDataset {
  std::vector<FlowRecord> records;
  double attack_ratio = 0.0;
};

// Samples exactly n records without replacement, round(n * attack_ratio) of
// them attacks. Deterministic for a fixed seed.
BaselineDataset sample_baseline(std::span<const FlowRecord> pool, std::size_t n,
                                double attack_ratio, std::uint64_t seed);

// FNV-1a over values and labels; used for data fingerprints in reports.
std::uint64_t fingerprint_records(std::span<const FlowRecord> records);

}  // namespace twinguard
