#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/flow_model.hpp"
#include "twinguard/traffic_class.hpp"

namespace twinguard {

enum class NodeStatus { Active, PendingIsolation, Isolated };

std::string_view to_string(NodeStatus s) noexcept;
std::optional<NodeStatus> node_status_from_string(std::string_view s) noexcept;
bool is_legal_transition(NodeStatus from, NodeStatus to) noexcept;

// ReliabilityChecked carries the monitor's per-cadence trace (phi, theta,
// counts) so the journal is the single audit stream.
enum class TwinEventKind {
  Telemetry,
  AlertRaised,
  MitigationApplied,
  ModelSwapped,
  RetrainTriggered,
  ReliabilityChecked,
};

std::string_view to_string(TwinEventKind k) noexcept;
std::optional<TwinEventKind> twin_event_kind_from_string(std::string_view s) noexcept;

// Node id used for events that belong to the twin layer rather than a node.
inline constexpr std::string_view kSystemNode = "system";

struct TwinEvent {
  std::uint64_t sequence = 0;
  std::string node_id;
  TwinEventKind kind = TwinEventKind::Telemetry;
  nlohmann::json payload = nlohmann::json::object();
  std::uint64_t timestamp = 0;

  nlohmann::json to_json() const;
  static TwinEvent from_json(const nlohmann::json& j);
};

struct TelemetryWindowEntry {
  std::uint64_t timestamp = 0;
  std::optional<TrafficClass> alert;
};

struct TelemetrySummary {
  std::uint64_t record_count = 0;
  std::uint64_t last_timestamp = 0;
  std::uint64_t flagged_count = 0;  // updates received while Isolated
  std::deque<TelemetryWindowEntry> window;
  std::map<TrafficClass, std::uint64_t> alert_counts;  // over `window`
};

struct TwinNode {
  std::string node_id;
  NodeStatus status = NodeStatus::Active;
  std::uint64_t version = 1;
  TelemetrySummary telemetry;
  std::set<std::string> suspended_ips;
};

struct EventFilter {
  std::optional<TwinEventKind> kind;
  std::optional<std::string> node_id;

  bool matches(const TwinEvent& e) const {
    return (!kind || e.kind == *kind) && (!node_id || e.node_id == *node_id);
  }
};

// In-process replica store for edge nodes with an append-only event journal.
//
// Each node has its own lock (single writer per node, concurrent readers);
// the journal has a separate lock and assigns the global sequence number at
// append time, so cross-node updates can proceed in parallel.
class TwinGraph {
 public:
  explicit TwinGraph(std::size_t telemetry_window = 1000);
  TwinGraph(const TwinGraph&) = delete;
  TwinGraph& operator=(const TwinGraph&) = delete;

  // Journal every event to `path` as JSON lines, flushed per event.
  void attach_journal(const std::filesystem::path& path, bool append = false);

  void register_node(std::string node_id);
  bool has_node(std::string_view node_id) const;
  std::vector<std::string> node_ids() const;

  // Applies one telemetry record. Updates against an Isolated node are
  // applied and journaled with "flagged": true.
  TwinNode sync_update(std::string_view node_id, const FlowRecord& record);

  TwinNode apply_status(std::string_view node_id, NodeStatus new_status,
                        nlohmann::json details = nlohmann::json::object(),
                        std::uint64_t timestamp = 0);

  // Marks the telemetry entry with `timestamp` as an alert of class `cls`.
  void record_alert(std::string_view node_id, std::uint64_t timestamp,
                    std::optional<TrafficClass> cls, nlohmann::json details);

  void add_suspended_ip(std::string_view node_id, std::string ip);

  // Journals an event that does not change replica state.
  TwinEvent append_event(std::string node_id, TwinEventKind kind, nlohmann::json payload,
                         std::uint64_t timestamp);

  TwinNode node(std::string_view node_id) const;
  std::vector<TwinEvent> event_log(const EventFilter& filter = {}) const;
  std::size_t event_count() const;

  // Rebuilds replicas and the in-memory log from a journal file; later
  // appends continue the sequence.
  void restore_from_journal(const std::filesystem::path& path);

 private:
  struct Slot {
    mutable std::shared_mutex mutex;
    TwinNode node;
  };

  Slot& slot(std::string_view node_id) const;
  TwinEvent append_locked(std::string node_id, TwinEventKind kind, nlohmann::json payload,
                          std::uint64_t timestamp);
  void apply_telemetry(TwinNode& node, std::uint64_t timestamp);

  std::size_t window_;
  mutable std::shared_mutex nodes_mutex_;
  std::map<std::string, std::unique_ptr<Slot>, std::less<>> nodes_;

  mutable std::mutex journal_mutex_;
  std::vector<TwinEvent> events_;
  std::uint64_t next_sequence_ = 1;
  std::ofstream journal_;
};

std::vector<TwinEvent> read_journal(const std::filesystem::path& path);

}  // namespace twinguard
