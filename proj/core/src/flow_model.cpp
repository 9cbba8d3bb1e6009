#include "twinguard/flow_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "twinguard/error.hpp"
#include "util.hpp"

namespace twinguard {

namespace {

constexpr std::string_view kNormalizedMarker = "#twinguard-normalized";
constexpr std::string_view kOtherCategoryName = "__other__";

[[noreturn]] void profile_error(std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::InvalidProfile, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// FeatureSchema

FeatureSchema::FeatureSchema(SchemaDefinition def) : def_(std::move(def)) {}

FeatureSchema FeatureSchema::create(SchemaDefinition definition) {
  FeatureSchema schema(std::move(definition));
  auto& def = schema.def_;
  if (def.name.empty()) throw Error(ErrorCode::InvalidProfile, "schema has no name");
  if (def.label_column.empty()) throw Error(ErrorCode::InvalidProfile, "empty label column");

  for (std::size_t i = 0; i < def.features.size(); ++i) {
    const auto& f = def.features[i];
    if (f.name.empty()) throw Error(ErrorCode::InvalidProfile, "feature with empty name");
    if (!schema.index_.emplace(f.name, i).second) {
      throw Error(ErrorCode::DuplicateFeature, f.name);
    }
    if (f.kind == FeatureKind::Numeric) {
      if (!(f.lower < f.upper)) {
        throw Error(ErrorCode::InvalidProfile, "feature " + f.name + ": lower must be < upper");
      }
    } else {
      std::set<int> codes;
      for (const auto& [value, code] : f.dictionary) {
        if (code == kOtherCategoryCode || code < 0) {
          throw Error(ErrorCode::DictionaryCollision,
                      f.name + ": code " + std::to_string(code) + " is reserved");
        }
        if (!codes.insert(code).second) {
          throw Error(ErrorCode::DictionaryCollision,
                      f.name + ": code " + std::to_string(code) + " assigned twice");
        }
      }
    }
  }
  for (const auto& col : {def.label_column, def.ip_column, def.node_column}) {
    if (!col.empty() && schema.index_.count(col) != 0) {
      throw Error(ErrorCode::InvalidProfile, "column " + col + " is both a feature and metadata");
    }
  }
  std::set<TrafficClass> seen;
  for (const auto c : def.attack_classes) {
    if (!is_attack(c)) throw Error(ErrorCode::InvalidProfile, "Normal listed as attack class");
    if (!seen.insert(c).second) {
      throw Error(ErrorCode::InvalidProfile, "attack class listed twice: " + std::string(to_string(c)));
    }
  }
  for (const auto& [alias, c] : def.label_aliases) {
    if (c != TrafficClass::Normal && !seen.count(c)) {
      throw Error(ErrorCode::InvalidProfile, "alias " + alias + " targets undeclared class");
    }
  }
  schema.fingerprint_ = detail::fnv1a(schema.canonical_text());
  return schema;
}

std::string FeatureSchema::canonical_text() const {
  std::ostringstream os;
  os << "name=" << def_.name << '\n';
  for (const auto& f : def_.features) {
    if (f.kind == FeatureKind::Numeric) {
      os << "numeric " << f.name << ' ' << detail::format_double(f.lower) << ' '
         << detail::format_double(f.upper) << '\n';
    } else {
      os << "categorical " << f.name;
      for (const auto& [value, code] : f.dictionary) os << ' ' << value << '=' << code;
      os << '\n';
    }
  }
  os << "classes";
  for (const auto c : def_.attack_classes) os << '|' << to_string(c);
  os << '\n';
  return os.str();
}

FeatureSchema FeatureSchema::parse(std::string_view text) {
  SchemaDefinition def;
  std::size_t line_no = 0;
  for (auto raw_line : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw_line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) profile_error(line_no, "expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));

    if (key == "name") {
      def.name = std::string(value);
    } else if (key == "label_column") {
      def.label_column = std::string(value);
    } else if (key == "ip_column") {
      def.ip_column = std::string(value);
    } else if (key == "node_column") {
      def.node_column = std::string(value);
    } else if (key == "attack_classes") {
      for (auto item : detail::split(value, ',')) {
        item = detail::trim(item);
        if (item.empty()) continue;
        const auto c = traffic_class_from_string(item);
        if (!c) profile_error(line_no, "unknown attack class '" + std::string(item) + "'");
        def.attack_classes.push_back(*c);
      }
    } else if (key == "label_alias") {
      const auto arrow = value.find("->");
      if (arrow == std::string_view::npos) profile_error(line_no, "label_alias needs 'raw -> Class'");
      const auto raw = detail::trim(value.substr(0, arrow));
      const auto target = detail::trim(value.substr(arrow + 2));
      const auto c = traffic_class_from_string(target);
      if (!c) profile_error(line_no, "unknown class '" + std::string(target) + "'");
      def.label_aliases.emplace(std::string(raw), *c);
    } else if (key == "ignore_label") {
      def.ignored_labels.emplace_back(value);
    } else if (key == "numeric") {
      const auto parts = detail::split_ws(value);
      if (parts.size() != 3) profile_error(line_no, "numeric needs: name lower upper");
      const auto lo = detail::parse_double(parts[1]);
      const auto hi = detail::parse_double(parts[2]);
      if (!lo || !hi) profile_error(line_no, "bad scaling bounds");
      FeatureSpec f;
      f.name = std::string(parts[0]);
      f.lower = *lo;
      f.upper = *hi;
      def.features.push_back(std::move(f));
    } else if (key == "categorical") {
      const auto parts = detail::split_ws(value);
      if (parts.empty()) profile_error(line_no, "categorical needs a name");
      FeatureSpec f;
      f.name = std::string(parts[0]);
      f.kind = FeatureKind::Categorical;
      for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto sep = parts[i].rfind('=');
        if (sep == std::string_view::npos) profile_error(line_no, "dictionary entry needs value=code");
        const auto code = detail::parse_int(parts[i].substr(sep + 1));
        if (!code) profile_error(line_no, "bad dictionary code");
        const std::string cat(parts[i].substr(0, sep));
        if (!f.dictionary.emplace(cat, static_cast<int>(*code)).second) {
          throw Error(ErrorCode::DictionaryCollision, f.name + ": value '" + cat + "' listed twice");
        }
      }
      def.features.push_back(std::move(f));
    } else {
      profile_error(line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  return create(std::move(def));
}

std::optional<std::size_t> FeatureSchema::feature_index(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool FeatureSchema::declares(TrafficClass c) const noexcept {
  return c == TrafficClass::Normal ||
         std::find(def_.attack_classes.begin(), def_.attack_classes.end(), c) !=
             def_.attack_classes.end();
}

std::optional<TrafficClass> FeatureSchema::parse_label(std::string_view raw) const {
  raw = detail::trim(raw);
  if (const auto it = def_.label_aliases.find(raw); it != def_.label_aliases.end()) {
    return it->second;
  }
  const auto c = traffic_class_from_string(raw);
  if (c && declares(*c)) return c;
  return std::nullopt;
}

bool FeatureSchema::ignores_label(std::string_view raw) const {
  raw = detail::trim(raw);
  return std::find(def_.ignored_labels.begin(), def_.ignored_labels.end(), raw) !=
         def_.ignored_labels.end();
}

// ---------------------------------------------------------------------------
// Profile lookup

std::filesystem::path default_profile_dir() {
  if (const char* env = std::getenv("TWINGUARD_PROFILE_DIR"); env && *env) return env;
#ifdef TWINGUARD_PROFILE_DIR
  return TWINGUARD_PROFILE_DIR;
#else
  return "profiles";
#endif
}

FeatureSchema load_schema(std::string_view profile) {
  namespace fs = std::filesystem;
  std::vector<fs::path> candidates;
  const fs::path direct(profile);
  if (direct.has_parent_path() || direct.has_extension()) candidates.push_back(direct);
  if (const char* env = std::getenv("TWINGUARD_PROFILE_DIR"); env && *env) {
    candidates.push_back(fs::path(env) / (std::string(profile) + ".profile"));
  }
#ifdef TWINGUARD_PROFILE_DIR
  candidates.push_back(fs::path(TWINGUARD_PROFILE_DIR) / (std::string(profile) + ".profile"));
#endif
  for (const auto& path : candidates) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) continue;
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return FeatureSchema::parse(buf.str());
  }
  throw Error(ErrorCode::UnknownProfile, std::string(profile));
}

// ---------------------------------------------------------------------------
// Records

namespace {

std::string lookup_optional(const RawRow& raw, const std::string& column) {
  if (column.empty()) return {};
  const auto it = raw.find(column);
  return it == raw.end() ? std::string{} : std::string(detail::trim(it->second));
}

void fill_metadata(FlowRecord& rec, const RawRow& raw, const FeatureSchema& schema) {
  rec.src_ip = lookup_optional(raw, schema.ip_column());
  rec.node_id = lookup_optional(raw, schema.node_column());
  if (const auto it = raw.find(schema.label_column()); it != raw.end()) {
    const auto label = schema.parse_label(it->second);
    if (!label) throw Error(ErrorCode::UnknownLabel, "'" + it->second + "'");
    rec.label = label;
  }
  rec.schema_fingerprint = schema.fingerprint();
}

const std::string& require_key(const RawRow& raw, const FeatureSpec& f) {
  const auto it = raw.find(f.name);
  if (it == raw.end()) throw Error(ErrorCode::MissingFeature, f.name);
  return it->second;
}

}  // namespace

FlowRecord normalize_record(const RawRow& raw, const FeatureSchema& schema) {
  FlowRecord rec;
  rec.values.reserve(schema.feature_count());
  for (const auto& f : schema.features()) {
    const auto& cell = require_key(raw, f);
    if (f.kind == FeatureKind::Categorical) {
      const auto it = f.dictionary.find(detail::trim(cell));
      rec.values.push_back(it == f.dictionary.end() ? kOtherCategoryCode : it->second);
      continue;
    }
    const auto v = detail::parse_double(cell);
    if (!v) throw Error(ErrorCode::UnparseableNumeric, f.name + "='" + cell + "'");
    const double scaled = (*v - f.lower) / (f.upper - f.lower);
    rec.values.push_back(std::clamp(scaled, 0.0, 1.0));
  }
  fill_metadata(rec, raw, schema);
  return rec;
}

RawRow format_record(const FlowRecord& record, const FeatureSchema& schema) {
  if (record.values.size() != schema.feature_count()) {
    throw Error(ErrorCode::SchemaMismatch, "record width differs from schema");
  }
  RawRow row;
  for (std::size_t i = 0; i < schema.feature_count(); ++i) {
    const auto& f = schema.feature(i);
    const double v = record.values[i];
    if (f.kind == FeatureKind::Numeric) {
      row[f.name] = detail::format_double(v);
      continue;
    }
    std::string name(kOtherCategoryName);
    for (const auto& [value, code] : f.dictionary) {
      if (code == static_cast<int>(v)) name = value;
    }
    row[f.name] = name;
  }
  if (!schema.ip_column().empty()) row[schema.ip_column()] = record.src_ip;
  if (!schema.node_column().empty()) row[schema.node_column()] = record.node_id;
  if (record.label) row[schema.label_column()] = std::string(to_string(*record.label));
  return row;
}

FlowRecord parse_normalized_record(const RawRow& row, const FeatureSchema& schema) {
  FlowRecord rec;
  rec.values.reserve(schema.feature_count());
  for (const auto& f : schema.features()) {
    const auto& cell = require_key(row, f);
    if (f.kind == FeatureKind::Categorical) {
      const auto it = f.dictionary.find(detail::trim(cell));
      rec.values.push_back(it == f.dictionary.end() ? kOtherCategoryCode : it->second);
      continue;
    }
    const auto v = detail::parse_double(cell);
    if (!v) throw Error(ErrorCode::UnparseableNumeric, f.name + "='" + cell + "'");
    rec.values.push_back(*v);
  }
  fill_metadata(rec, row, schema);
  return rec;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(std::move(cell));
  return out;
}

LoadedDataset load_dataset(std::istream& in, const FeatureSchema& schema) {
  LoadedDataset out;
  std::string line;
  bool normalized = false;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.rfind(kNormalizedMarker, 0) == 0) {
      normalized = true;
      continue;
    }
    if (!detail::trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) return out;
  for (auto& h : header) h = std::string(detail::trim(h));

  const std::size_t label_col =
      std::find(header.begin(), header.end(), schema.label_column()) - header.begin();

  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row_no;
    ++out.rows_read;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::DatasetRow, "row " + std::to_string(row_no) + ": expected " +
                                             std::to_string(header.size()) + " fields, got " +
                                             std::to_string(cells.size()));
    }
    if (label_col < cells.size() && schema.ignores_label(cells[label_col])) {
      ++out.rows_skipped;
      continue;
    }
    RawRow row;
    for (std::size_t i = 0; i < header.size(); ++i) row.emplace(header[i], cells[i]);
    try {
      auto rec = normalized ? parse_normalized_record(row, schema) : normalize_record(row, schema);
      rec.timestamp = out.records.size();
      out.records.push_back(std::move(rec));
    } catch (const Error& e) {
      throw Error(ErrorCode::DatasetRow, "row " + std::to_string(row_no) + ": " + e.what());
    }
  }
  return out;
}

LoadedDataset load_dataset(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_dataset(in, schema);
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_normalized(std::ostream& out, std::span<const FlowRecord> records,
                      const FeatureSchema& schema) {
  out << kNormalizedMarker << ' ' << schema.name() << '\n';
  std::vector<std::string> columns;
  for (const auto& f : schema.features()) columns.push_back(f.name);
  if (!schema.ip_column().empty()) columns.push_back(schema.ip_column());
  if (!schema.node_column().empty()) columns.push_back(schema.node_column());
  columns.push_back(schema.label_column());
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << csv_escape(columns[i]);
  out << '\n';
  for (const auto& rec : records) {
    auto row = format_record(rec, schema);
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out << (i ? "," : "") << csv_escape(row[columns[i]]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Baseline sampling

BaselineDataset sample_baseline(std::span<const FlowRecord> pool, std::size_t n,
                                double attack_ratio, std::uint64_t seed) {
  if (attack_ratio < 0.0 || attack_ratio > 1.0) {
    throw Error(ErrorCode::InvalidConfig, "attack_ratio outside [0,1]");
  }
  BaselineDataset out;
  if (n == 0) return out;

  std::vector<std::size_t> attacks;
  std::vector<std::size_t> normals;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].label) throw Error(ErrorCode::InsufficientRecords, "unlabeled pool record");
    (pool[i].is_attack() ? attacks : normals).push_back(i);
  }
  const auto n_attack = static_cast<std::size_t>(std::llround(static_cast<double>(n) * attack_ratio));
  const std::size_t n_normal = n - n_attack;
  if (attacks.size() < n_attack) {
    throw Error(ErrorCode::InsufficientRecords, "need " + std::to_string(n_attack) +
                                                    " attack records, pool has " +
                                                    std::to_string(attacks.size()));
  }
  if (normals.size() < n_normal) {
    throw Error(ErrorCode::InsufficientRecords, "need " + std::to_string(n_normal) +
                                                    " normal records, pool has " +
                                                    std::to_string(normals.size()));
  }

  std::mt19937_64 rng(seed);
  auto take = [&](std::vector<std::size_t>& idx, std::size_t k) {
    // Partial Fisher-Yates: the first k slots become the sample.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    for (std::size_t i = 0; i < k; ++i) out.records.push_back(pool[idx[i]]);
  };
  take(attacks, n_attack);
  take(normals, n_normal);
  std::shuffle(out.records.begin(), out.records.end(), rng);
  out.attack_ratio = static_cast<double>(n_attack) / static_cast<double>(n);
  return out;
}

std::uint64_t fingerprint_records(std::span<const FlowRecord> records) {
  std::uint64_t h = detail::kFnvOffset;
  for (const auto& r : records) {
    for (const double v : r.values) h = detail::fnv1a_value(v, h);
    const int label = r.label ? static_cast<int>(*r.label) : -1;
    h = detail::fnv1a_value(label, h);
  }
  return h;
}

}  // namespace twinguard
