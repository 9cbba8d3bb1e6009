#include "twinguard/twin_graph.hpp"

#include <algorithm>

#include "twinguard/error.hpp"

namespace twinguard {

std::string_view to_string(NodeStatus s) noexcept {
  switch (s) {
    case NodeStatus::Active: return "Active";
    case NodeStatus::PendingIsolation: return "PendingIsolation";
    case NodeStatus::Isolated: return "Isolated";
  }
  return "Active";
}

std::optional<NodeStatus> node_status_from_string(std::string_view s) noexcept {
  for (const auto v : {NodeStatus::Active, NodeStatus::PendingIsolation, NodeStatus::Isolated}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

bool is_legal_transition(NodeStatus from, NodeStatus to) noexcept {
  switch (from) {
    case NodeStatus::Active:
      return to == NodeStatus::PendingIsolation || to == NodeStatus::Isolated;
    case NodeStatus::PendingIsolation:
      return to == NodeStatus::Active || to == NodeStatus::Isolated;
    case NodeStatus::Isolated:
      return false;
  }
  return false;
}

std::string_view to_string(TwinEventKind k) noexcept {
  switch (k) {
    case TwinEventKind::Telemetry: return "Telemetry";
    case TwinEventKind::AlertRaised: return "AlertRaised";
    case TwinEventKind::MitigationApplied: return "MitigationApplied";
    case TwinEventKind::ModelSwapped: return "ModelSwapped";
    case TwinEventKind::RetrainTriggered: return "RetrainTriggered";
    case TwinEventKind::ReliabilityChecked: return "ReliabilityChecked";
  }
  return "Telemetry";
}

std::optional<TwinEventKind> twin_event_kind_from_string(std::string_view s) noexcept {
  for (const auto k : {TwinEventKind::Telemetry, TwinEventKind::AlertRaised,
                       TwinEventKind::MitigationApplied, TwinEventKind::ModelSwapped,
                       TwinEventKind::RetrainTriggered, TwinEventKind::ReliabilityChecked}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

nlohmann::json TwinEvent::to_json() const {
  return {{"seq", sequence},
          {"node", node_id},
          {"kind", std::string(to_string(kind))},
          {"payload", payload},
          {"ts", timestamp}};
}

TwinEvent TwinEvent::from_json(const nlohmann::json& j) {
  TwinEvent e;
  e.sequence = j.at("seq").get<std::uint64_t>();
  e.node_id = j.at("node").get<std::string>();
  const auto kind = twin_event_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::Io, "journal: unknown event kind");
  e.kind = *kind;
  e.payload = j.value("payload", nlohmann::json::object());
  e.timestamp = j.value("ts", std::uint64_t{0});
  return e;
}

TwinGraph::TwinGraph(std::size_t telemetry_window) : window_(std::max<std::size_t>(1, telemetry_window)) {}

void TwinGraph::attach_journal(const std::filesystem::path& path, bool append) {
  std::lock_guard lock(journal_mutex_);
  journal_.close();
  journal_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!journal_) throw Error(ErrorCode::Io, "cannot open journal " + path.string());
}

void TwinGraph::register_node(std::string node_id) {
  std::unique_lock lock(nodes_mutex_);
  if (nodes_.count(node_id)) return;
  auto s = std::make_unique<Slot>();
  s->node.node_id = node_id;
  nodes_.emplace(std::move(node_id), std::move(s));
}

bool TwinGraph::has_node(std::string_view node_id) const {
  std::shared_lock lock(nodes_mutex_);
  return nodes_.find(node_id) != nodes_.end();
}

std::vector<std::string> TwinGraph::node_ids() const {
  std::shared_lock lock(nodes_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : nodes_) out.push_back(id);
  return out;
}

TwinGraph::Slot& TwinGraph::slot(std::string_view node_id) const {
  std::shared_lock lock(nodes_mutex_);
  const auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw Error(ErrorCode::UnknownNode, std::string(node_id));
  return *it->second;
}

TwinEvent TwinGraph::append_locked(std::string node_id, TwinEventKind kind,
                                   nlohmann::json payload, std::uint64_t timestamp) {
  std::lock_guard lock(journal_mutex_);
  TwinEvent e;
  e.sequence = next_sequence_++;
  e.node_id = std::move(node_id);
  e.kind = kind;
  e.payload = std::move(payload);
  e.timestamp = timestamp;
  if (journal_.is_open()) {
    journal_ << e.to_json().dump() << '\n';
    journal_.flush();
  }
  events_.push_back(e);
  return e;
}

TwinEvent TwinGraph::append_event(std::string node_id, TwinEventKind kind,
                                  nlohmann::json payload, std::uint64_t timestamp) {
  return append_locked(std::move(node_id), kind, std::move(payload), timestamp);
}

void TwinGraph::apply_telemetry(TwinNode& node, std::uint64_t timestamp) {
  auto& t = node.telemetry;
  ++t.record_count;
  t.last_timestamp = timestamp;
  t.window.push_back({timestamp, std::nullopt});
  while (t.window.size() > window_) {
    if (const auto& old = t.window.front().alert) {
      if (--t.alert_counts[*old] == 0) t.alert_counts.erase(*old);
    }
    t.window.pop_front();
  }
  if (node.status == NodeStatus::Isolated) ++t.flagged_count;
  ++node.version;
}

TwinNode TwinGraph::sync_update(std::string_view node_id, const FlowRecord& record) {
  auto& s = slot(node_id);
  std::unique_lock lock(s.mutex);
  const bool flagged = s.node.status == NodeStatus::Isolated;
  apply_telemetry(s.node, record.timestamp);
  nlohmann::json payload = {{"version", s.node.version}, {"records", s.node.telemetry.record_count}};
  if (!record.src_ip.empty()) payload["ip"] = record.src_ip;
  if (flagged) payload["flagged"] = true;
  // Appending under the node lock keeps per-node journal order equal to
  // per-node apply order.
  append_locked(s.node.node_id, TwinEventKind::Telemetry, std::move(payload), record.timestamp);
  return s.node;
}

TwinNode TwinGraph::apply_status(std::string_view node_id, NodeStatus new_status,
                                 nlohmann::json details, std::uint64_t timestamp) {
  auto& s = slot(node_id);
  std::unique_lock lock(s.mutex);
  const NodeStatus from = s.node.status;
  if (!is_legal_transition(from, new_status)) {
    throw Error(ErrorCode::IllegalTransition,
                std::string(node_id) + ": " + std::string(to_string(from)) + " -> " +
                    std::string(to_string(new_status)));
  }
  s.node.status = new_status;
  ++s.node.version;
  if (!details.is_object()) details = nlohmann::json::object();
  details["from"] = std::string(to_string(from));
  details["to"] = std::string(to_string(new_status));
  details["version"] = s.node.version;
  append_locked(s.node.node_id, TwinEventKind::MitigationApplied, std::move(details), timestamp);
  return s.node;
}

void TwinGraph::record_alert(std::string_view node_id, std::uint64_t timestamp,
                             std::optional<TrafficClass> cls, nlohmann::json details) {
  auto& s = slot(node_id);
  std::unique_lock lock(s.mutex);
  auto& window = s.node.telemetry.window;
  for (auto it = window.rbegin(); it != window.rend(); ++it) {
    if (it->timestamp != timestamp) continue;
    if (cls && !it->alert) {
      it->alert = cls;
      ++s.node.telemetry.alert_counts[*cls];
    }
    break;
  }
  if (!details.is_object()) details = nlohmann::json::object();
  if (cls) details["class"] = std::string(to_string(*cls));
  append_locked(s.node.node_id, TwinEventKind::AlertRaised, std::move(details), timestamp);
}

void TwinGraph::add_suspended_ip(std::string_view node_id, std::string ip) {
  auto& s = slot(node_id);
  std::unique_lock lock(s.mutex);
  s.node.suspended_ips.insert(std::move(ip));
}

TwinNode TwinGraph::node(std::string_view node_id) const {
  auto& s = slot(node_id);
  std::shared_lock lock(s.mutex);
  return s.node;
}

std::vector<TwinEvent> TwinGraph::event_log(const EventFilter& filter) const {
  std::lock_guard lock(journal_mutex_);
  std::vector<TwinEvent> out;
  for (const auto& e : events_) {
    if (filter.matches(e)) out.push_back(e);
  }
  return out;
}

std::size_t TwinGraph::event_count() const {
  std::lock_guard lock(journal_mutex_);
  return events_.size();
}

std::vector<TwinEvent> read_journal(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open journal " + path.string());
  std::vector<TwinEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(TwinEvent::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, "journal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void TwinGraph::restore_from_journal(const std::filesystem::path& path) {
  const auto events = read_journal(path);
  for (const auto& e : events) {
    if (e.node_id == kSystemNode) continue;
    register_node(e.node_id);
    auto& s = slot(e.node_id);
    std::unique_lock lock(s.mutex);
    switch (e.kind) {
      case TwinEventKind::Telemetry:
        apply_telemetry(s.node, e.timestamp);
        break;
      case TwinEventKind::AlertRaised:
        if (const auto it = e.payload.find("class"); it != e.payload.end()) {
          if (const auto c = traffic_class_from_string(it->get<std::string>())) {
            for (auto w = s.node.telemetry.window.rbegin(); w != s.node.telemetry.window.rend(); ++w) {
              if (w->timestamp == e.timestamp) {
                if (!w->alert) {
                  w->alert = c;
                  ++s.node.telemetry.alert_counts[*c];
                }
                break;
              }
            }
          }
        }
        break;
      case TwinEventKind::MitigationApplied:
        if (const auto it = e.payload.find("to"); it != e.payload.end()) {
          if (const auto st = node_status_from_string(it->get<std::string>())) {
            s.node.status = *st;
            ++s.node.version;
          }
        }
        if (e.payload.value("action", std::string{}) == "SuspendIp") {
          s.node.suspended_ips.insert(e.payload.value("target", std::string{}));
        }
        break;
      default:
        break;
    }
  }
  std::lock_guard lock(journal_mutex_);
  events_ = events;
  next_sequence_ = events.empty() ? 1 : events.back().sequence + 1;
}

}  // namespace twinguard
