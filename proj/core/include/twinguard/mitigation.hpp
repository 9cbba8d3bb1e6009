#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinguard/traffic_class.hpp"
#include "twinguard/twin_graph.hpp"

namespace twinguard {

enum class RiskLevel { Standard, MidHigh, High };
enum class ActionKind { BlockFlow, SuspendIp, IsolateNode, RequestApproval };
enum class ActionStatus { Applied, Pending, Denied };
enum class Verdict { Approve, Deny };

std::string_view to_string(RiskLevel r) noexcept;
std::string_view to_string(ActionKind k) noexcept;
std::string_view to_string(ActionStatus s) noexcept;
std::string_view to_string(Verdict v) noexcept;
std::optional<RiskLevel> risk_level_from_string(std::string_view s) noexcept;

// Base tier per attack class plus the confidence at which an alert is
// promoted one tier.
class RiskPolicy {
 public:
  // High: Ransomware, Backdoor, MITM, SQL Injection, Injection
  // MidHigh: DDoS HTTP, DDoS UDP, DDoS, Password, XSS
  // Standard: Port Scanning, Scanning, Fingerprinting
  static RiskPolicy defaults();
  // "Class Name = High|MidHigh|Standard" lines and "promotion_confidence = x";
  // entries override the defaults. A promotion confidence above 1 disables
  // promotion.
  static RiskPolicy parse(std::string_view text);
  static RiskPolicy load(const std::filesystem::path& path);

  std::optional<RiskLevel> base_tier(TrafficClass c) const;
  void set(TrafficClass c, RiskLevel level) { tiers_[c] = level; }
  double promotion_confidence() const noexcept { return promotion_confidence_; }

 private:
  std::map<TrafficClass, RiskLevel> tiers_;
  double promotion_confidence_ = 0.9;
};

// Unmapped or unknown classes fall back to Standard (with a warning on
// stderr); confidence >= promotion_confidence promotes one tier.
RiskLevel classify_risk(std::optional<TrafficClass> attack, double confidence,
                        const RiskPolicy& policy);

struct Alert {
  std::uint64_t alert_id = 0;
  std::uint64_t flow_id = 0;
  std::string ip;
  std::string node_id;
  std::optional<TrafficClass> attack_class;
  double confidence = 0.0;
  std::uint64_t timestamp = 0;
};

struct MitigationAction {
  ActionKind kind = ActionKind::BlockFlow;
  std::string target;
  RiskLevel risk = RiskLevel::Standard;
  std::uint64_t alert_id = 0;
  ActionStatus status = ActionStatus::Applied;
  std::uint64_t request_id = 0;  // RequestApproval and approved IsolateNode

  nlohmann::json to_json() const;
};

// Set of suspended addresses, persisted as "ip,ISO-8601 timestamp" lines.
class SuspendedIpList {
 public:
  // Returns false when the address was already suspended.
  bool add(const std::string& ip, const std::string& timestamp);
  bool contains(std::string_view ip) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return entries_; }

  void save(const std::filesystem::path& path) const;
  static SuspendedIpList load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

struct ApprovalRequest {
  std::uint64_t id = 0;
  std::string node_id;
  std::uint64_t alert_id = 0;
  std::optional<TrafficClass> attack_class;
  RiskLevel risk = RiskLevel::MidHigh;
  ActionStatus status = ActionStatus::Pending;  // Applied once approved
  std::string created_at;
  std::string resolved_at;
};

// Pending-approval registry, persisted as a JSON document.
class ApprovalQueue {
 public:
  ApprovalRequest& create(std::string node_id, std::uint64_t alert_id,
                          std::optional<TrafficClass> cls, RiskLevel risk, std::string created_at);
  ApprovalRequest* find(std::uint64_t id);
  const ApprovalRequest* find(std::uint64_t id) const;
  const ApprovalRequest* pending_for(std::string_view node_id) const;
  const std::vector<ApprovalRequest>& requests() const noexcept { return requests_; }

  nlohmann::json to_json() const;
  static ApprovalQueue from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static ApprovalQueue load(const std::filesystem::path& path);

 private:
  std::vector<ApprovalRequest> requests_;
  std::uint64_t next_id_ = 1;
};

// Applies the response to detection alerts against the twin layer. Every
// alert blocks the flow and suspends the source address; High isolates the
// node at once; MidHigh moves it to PendingIsolation and queues a request
// for an administrator.
class MitigationEngine {
 public:
  using Clock = std::function<std::string(std::uint64_t timestamp)>;

  MitigationEngine(TwinGraph& twin, RiskPolicy policy, Clock clock = {});

  // Writes suspended_ips.txt and approvals.json under `dir` after every
  // change; existing files there are loaded first.
  void persist_to(const std::filesystem::path& dir);

  std::vector<MitigationAction> mitigate(const Alert& alert);
  MitigationAction resolve_approval(std::uint64_t request_id, Verdict verdict,
                                    std::uint64_t timestamp = 0);

  const SuspendedIpList& suspended() const noexcept { return suspended_; }
  const ApprovalQueue& approvals() const noexcept { return approvals_; }
  const RiskPolicy& policy() const noexcept { return policy_; }

 private:
  void journal(const MitigationAction& action, const std::string& node, std::uint64_t ts,
               nlohmann::json extra = nlohmann::json::object());
  void save_locked() const;

  TwinGraph& twin_;
  RiskPolicy policy_;
  Clock clock_;
  std::mutex mutex_;
  SuspendedIpList suspended_;
  ApprovalQueue approvals_;
  std::optional<std::filesystem::path> dir_;
};

// Replays a journal and reports every transition to Isolated that was not
// caused by a High-risk alert or an approved request for that node.
std::vector<std::string> isolation_safety_violations(std::span<const TwinEvent> events);

std::string iso8601_from_epoch(std::uint64_t seconds);

}  // namespace twinguard
