#include "twinguard/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "twinguard/error.hpp"
#include "util.hpp"

namespace twinguard {

using nlohmann::json;

void Topology::validate() const {
  if (devices == 0 || nodes == 0) throw Error(ErrorCode::InvalidSpec, "topology counts must be >= 1");
  if (devices > 250 * 256) throw Error(ErrorCode::InvalidSpec, "too many devices");
}

std::string Topology::node_of(std::size_t device) const {
  return "edge-" + std::to_string(device % nodes + 1);
}

std::string Topology::ip_of(std::size_t device) const {
  return "10.0." + std::to_string(device / 250) + "." + std::to_string(device % 250 + 1);
}

std::vector<std::string> Topology::node_ids() const {
  std::vector<std::string> ids;
  for (std::size_t n = 0; n < nodes; ++n) ids.push_back("edge-" + std::to_string(n + 1));
  return ids;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void spec_error(const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); }

std::string expand_env(std::string_view value) {
  std::string out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '$' && i + 1 < value.size() && value[i + 1] == '{') {
      const auto close = value.find('}', i + 2);
      if (close == std::string_view::npos) spec_error("unterminated ${ in '" + std::string(value) + "'");
      const std::string var(value.substr(i + 2, close - i - 2));
      const char* v = std::getenv(var.c_str());
      if (!v) spec_error("environment variable " + var + " is not set");
      out += v;
      i = close;
    } else {
      out += value[i];
    }
  }
  return out;
}

std::size_t to_size(std::string_view key, std::string_view v) {
  const auto n = detail::parse_int(v);
  if (!n || *n < 0) spec_error(std::string(key) + ": expected a non-negative integer");
  return static_cast<std::size_t>(*n);
}

double to_double(std::string_view key, std::string_view v) {
  const auto d = detail::parse_double(v);
  if (!d) spec_error(std::string(key) + ": expected a number");
  return *d;
}

TrafficClass to_class(std::string_view v) {
  const auto c = traffic_class_from_string(detail::trim(v));
  if (!c) spec_error("unknown class '" + std::string(v) + "'");
  return *c;
}

std::filesystem::path to_path(std::string_view v, const std::filesystem::path& base) {
  std::filesystem::path p{std::string(v)};
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

SelectionConfig ExperimentSpec::default_selection() {
  SelectionConfig c;
  c.timing = TimingMode::Modeled;
  return c;
}

void ExperimentSpec::set(std::string_view key, std::string_view raw, const std::filesystem::path& base) {
  const auto expanded = expand_env(detail::trim(raw));
  const std::string_view value = expanded;

  if (key == "name") {
    name = std::string(value);
  } else if (key == "source") {
    if (value == "synthetic") source = DataSource::Synthetic;
    else if (value == "dataset") source = DataSource::Dataset;
    else spec_error("source must be synthetic or dataset");
  } else if (key == "profile") {
    profile = std::string(value);
  } else if (key == "train_profile") {
    train_profile = std::string(value);
  } else if (key == "test_profile") {
    test_profile = std::string(value);
  } else if (key == "train_data") {
    train_data = to_path(value, base);
  } else if (key == "test_data") {
    test_data = to_path(value, base);
  } else if (key == "projection") {
    projection = to_path(value, base);
  } else if (key == "model") {
    model = to_path(value, base);
  } else if (key == "policy") {
    policy = to_path(value, base);
  } else if (key == "attack_sequence") {
    attack_sequence.clear();
    for (auto item : detail::split(value, ',')) {
      if (!detail::trim(item).empty()) attack_sequence.push_back(to_class(item));
    }
  } else if (key.starts_with("count.")) {
    counts[to_class(key.substr(6))] = to_size(key, value);
  } else if (key == "default_count") {
    default_count = to_size(key, value);
  } else if (key == "normal_count") {
    normal_count = to_size(key, value);
  } else if (key == "attack_order") {
    if (value == "grouped") attack_order = AttackOrder::Grouped;
    else if (value == "interleaved") attack_order = AttackOrder::Interleaved;
    else spec_error("attack_order must be grouped or interleaved");
  } else if (key == "drift_at") {
    drift_at = to_size(key, value);
  } else if (key == "baseline_source") {
    if (value == "train") baseline_source = BaselineSource::Train;
    else if (value == "test") baseline_source = BaselineSource::Test;
    else spec_error("baseline_source must be train or test");
  } else if (key == "initial_train_size") {
    initial_train_size = to_size(key, value);
  } else if (key == "seed") {
    seed = to_size(key, value);
  } else if (key == "devices") {
    topology.devices = to_size(key, value);
  } else if (key == "nodes") {
    topology.nodes = to_size(key, value);
  } else if (key == "clock_start") {
    clock_start = to_size(key, value);
  } else if (key == "selection.alpha") {
    selection.alpha = to_double(key, value);
  } else if (key == "selection.beta") {
    selection.beta = to_double(key, value);
  } else if (key == "selection.batch_size") {
    selection.batch_size = to_size(key, value);
  } else if (key == "selection.baseline_size") {
    selection.baseline_size = to_size(key, value);
  } else if (key == "selection.attack_ratio") {
    selection.baseline_attack_ratio = to_double(key, value);
  } else if (key == "selection.split") {
    selection.split = to_double(key, value);
  } else if (key == "selection.top_k") {
    selection.top_k = to_size(key, value);
  } else if (key == "selection.threads") {
    selection.threads = to_size(key, value);
  } else if (key == "selection.timing") {
    const auto t = timing_mode_from_string(value);
    if (!t) spec_error("selection.timing must be wall or modeled");
    selection.timing = *t;
  } else if (key == "threshold.initial") {
    threshold.initial = to_double(key, value);
  } else if (key == "threshold.min") {
    threshold.min = to_double(key, value);
  } else if (key == "threshold.max") {
    threshold.max = to_double(key, value);
  } else if (key == "threshold.step") {
    threshold.step = to_double(key, value);
  } else if (key == "threshold.target_fpr") {
    threshold.target_fpr = to_double(key, value);
  } else if (key == "threshold.target_fnr") {
    threshold.target_fnr = to_double(key, value);
  } else if (key == "threshold.window") {
    threshold.window = to_size(key, value);
  } else {
    spec_error("unknown key '" + std::string(key) + "'");
  }
}

ExperimentSpec ExperimentSpec::parse(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentSpec spec;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) spec_error("line " + std::to_string(line_no) + ": expected key = value");
    try {
      spec.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1), base_dir);
    } catch (const Error& e) {
      spec_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

void ExperimentSpec::validate() const {
  topology.validate();
  selection.validate();
  threshold.validate();
  if (source == DataSource::Dataset) {
    if (train_profile.empty() || test_profile.empty()) spec_error("dataset runs need train_profile and test_profile");
    if (test_data.empty()) spec_error("dataset runs need test_data");
    if (train_data.empty() && model.empty()) spec_error("dataset runs need train_data or model");
    if (train_profile != test_profile && projection.empty()) {
      spec_error("train and test profiles differ; a projection file is required");
    }
  } else if (profile.empty()) {
    spec_error("synthetic runs need a profile");
  }
  std::set<TrafficClass> seen;
  for (const auto c : attack_sequence) {
    if (!seen.insert(c).second) spec_error("class listed twice in attack_sequence: " + std::string(to_string(c)));
  }
  for (const auto& [c, n] : counts) {
    if (!seen.count(c)) spec_error("count given for class outside attack_sequence: " + std::string(to_string(c)));
  }
  if (initial_train_size == 0 && model.empty()) spec_error("initial_train_size must be > 0");
}

std::size_t ExperimentSpec::count_for(TrafficClass c) const {
  const auto it = counts.find(c);
  return it == counts.end() ? default_count : it->second;
}

std::size_t ExperimentSpec::attack_total() const {
  std::size_t n = 0;
  for (const auto c : attack_sequence) n += count_for(c);
  return n;
}

json ExperimentSpec::to_json() const {
  json seq = json::array();
  json cnt = json::object();
  for (const auto c : attack_sequence) {
    seq.push_back(std::string(to_string(c)));
    cnt[std::string(to_string(c))] = count_for(c);
  }
  json j = {{"name", name},
            {"source", source == DataSource::Synthetic ? "synthetic" : "dataset"},
            {"attack_sequence", seq},
            {"counts", cnt},
            {"normal_count", normal_count},
            {"attack_order", attack_order == AttackOrder::Grouped ? "grouped" : "interleaved"},
            {"baseline_source", baseline_source == BaselineSource::Train ? "train" : "test"},
            {"initial_train_size", initial_train_size},
            {"seed", seed},
            {"devices", topology.devices},
            {"nodes", topology.nodes},
            {"selection", selection.to_json()},
            {"threshold", threshold.to_json()}};
  if (source == DataSource::Synthetic) {
    j["profile"] = profile;
  } else {
    j["train_profile"] = train_profile;
    j["test_profile"] = test_profile;
    j["train_data"] = train_data.string();
    j["test_data"] = test_data.string();
    if (!projection.empty()) j["projection"] = projection.string();
  }
  if (drift_at) j["drift_at"] = *drift_at;
  if (!model.empty()) j["model"] = model.string();
  return j;
}

// ---------------------------------------------------------------------------

FeatureProjection::FeatureProjection(FeatureSchema shared, std::vector<std::size_t> train_cols,
                                     std::vector<std::size_t> test_cols)
    : shared_(std::move(shared)), train_cols_(std::move(train_cols)), test_cols_(std::move(test_cols)) {}

FeatureProjection FeatureProjection::parse(std::string_view text, const FeatureSchema& train,
                                           const FeatureSchema& test) {
  SchemaDefinition def;
  def.name = train.name() + "+" + test.name();
  std::vector<std::size_t> train_cols, test_cols;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const auto where = "projection line " + std::to_string(line_no);
    if (eq == std::string_view::npos) spec_error(where + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key == "name") {
      def.name = std::string(value);
      continue;
    }
    if (key != "pair") spec_error(where + ": unknown key '" + std::string(key) + "'");
    const auto parts = detail::split_ws(value);
    if (parts.size() != 3) spec_error(where + ": pair needs: shared train_feature test_feature");
    const auto ti = train.feature_index(parts[1]);
    const auto si = test.feature_index(parts[2]);
    if (!ti) spec_error(where + ": " + train.name() + " has no feature " + std::string(parts[1]));
    if (!si) spec_error(where + ": " + test.name() + " has no feature " + std::string(parts[2]));
    FeatureSpec f;
    f.name = std::string(parts[0]);
    def.features.push_back(std::move(f));
    train_cols.push_back(*ti);
    test_cols.push_back(*si);
  }
  if (def.features.empty()) spec_error("projection declares no shared features");
  for (const auto* s : {&train, &test}) {
    for (const auto c : s->attack_classes()) {
      if (std::find(def.attack_classes.begin(), def.attack_classes.end(), c) == def.attack_classes.end()) {
        def.attack_classes.push_back(c);
      }
    }
  }
  return FeatureProjection(FeatureSchema::create(std::move(def)), std::move(train_cols), std::move(test_cols));
}

FeatureProjection FeatureProjection::load(const std::filesystem::path& path, const FeatureSchema& train,
                                          const FeatureSchema& test) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open projection " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), train, test);
}

FlowRecord FeatureProjection::project(const FlowRecord& r, const std::vector<std::size_t>& cols) const {
  FlowRecord out;
  out.values.reserve(cols.size());
  for (const auto c : cols) {
    if (c >= r.values.size()) throw Error(ErrorCode::SchemaMismatch, "record narrower than its schema");
    out.values.push_back(r.values[c]);
  }
  out.src_ip = r.src_ip;
  out.node_id = r.node_id;
  out.timestamp = r.timestamp;
  out.label = r.label;
  out.schema_fingerprint = shared_.fingerprint();
  return out;
}

std::vector<FlowRecord> FeatureProjection::project_train(std::span<const FlowRecord> rs) const {
  std::vector<FlowRecord> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(project(r, train_cols_));
  return out;
}

std::vector<FlowRecord> FeatureProjection::project_test(std::span<const FlowRecord> rs) const {
  std::vector<FlowRecord> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(project(r, test_cols_));
  return out;
}

// ---------------------------------------------------------------------------

std::map<TrafficClass, double> compute_sensitivity(const std::map<TrafficClass, ConfusionCounts>& per_class) {
  std::map<TrafficClass, double> out;
  for (const auto& [c, counts] : per_class) {
    if (!is_attack(c)) continue;
    const auto positives = counts.tp + counts.fn;
    if (positives == 0) continue;
    out[c] = 100.0 * static_cast<double>(counts.tp) / static_cast<double>(positives);
  }
  return out;
}

}  // namespace twinguard
