#include "twinguard/mitigation.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "twinguard/error.hpp"
#include "util.hpp"

namespace twinguard {

using nlohmann::json;

std::string_view to_string(RiskLevel r) noexcept {
  switch (r) {
    case RiskLevel::Standard: return "Standard";
    case RiskLevel::MidHigh: return "MidHigh";
    case RiskLevel::High: return "High";
  }
  return "Standard";
}

std::string_view to_string(ActionKind k) noexcept {
  switch (k) {
    case ActionKind::BlockFlow: return "BlockFlow";
    case ActionKind::SuspendIp: return "SuspendIp";
    case ActionKind::IsolateNode: return "IsolateNode";
    case ActionKind::RequestApproval: return "RequestApproval";
  }
  return "BlockFlow";
}

std::string_view to_string(ActionStatus s) noexcept {
  switch (s) {
    case ActionStatus::Applied: return "Applied";
    case ActionStatus::Pending: return "Pending";
    case ActionStatus::Denied: return "Denied";
  }
  return "Applied";
}

std::string_view to_string(Verdict v) noexcept { return v == Verdict::Approve ? "Approve" : "Deny"; }

std::optional<RiskLevel> risk_level_from_string(std::string_view s) noexcept {
  for (const auto r : {RiskLevel::Standard, RiskLevel::MidHigh, RiskLevel::High}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

namespace {

std::optional<ActionStatus> action_status_from_string(std::string_view s) {
  for (const auto v : {ActionStatus::Applied, ActionStatus::Pending, ActionStatus::Denied}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

RiskPolicy RiskPolicy::defaults() {
  RiskPolicy p;
  using C = TrafficClass;
  for (const auto c : {C::Ransomware, C::Backdoor, C::Mitm, C::SqlInjection, C::Injection}) {
    p.tiers_[c] = RiskLevel::High;
  }
  for (const auto c : {C::DdosHttp, C::DdosUdp, C::Ddos, C::Password, C::Xss}) {
    p.tiers_[c] = RiskLevel::MidHigh;
  }
  for (const auto c : {C::PortScanning, C::Scanning, C::Fingerprinting}) {
    p.tiers_[c] = RiskLevel::Standard;
  }
  return p;
}

RiskPolicy RiskPolicy::parse(std::string_view text) {
  auto p = defaults();
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::InvalidConfig, "policy line " + std::to_string(line_no));
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key == "promotion_confidence") {
      const auto v = detail::parse_double(value);
      if (!v || *v < 0.0) throw Error(ErrorCode::InvalidConfig, "bad promotion_confidence");
      p.promotion_confidence_ = *v;
      continue;
    }
    const auto cls = traffic_class_from_string(key);
    const auto level = risk_level_from_string(value);
    if (!cls || !is_attack(*cls) || !level) {
      throw Error(ErrorCode::InvalidConfig, "policy line " + std::to_string(line_no) + ": '" +
                                                std::string(line) + "'");
    }
    p.tiers_[*cls] = *level;
  }
  return p;
}

RiskPolicy RiskPolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open policy " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::optional<RiskLevel> RiskPolicy::base_tier(TrafficClass c) const {
  const auto it = tiers_.find(c);
  if (it == tiers_.end()) return std::nullopt;
  return it->second;
}

RiskLevel classify_risk(std::optional<TrafficClass> attack, double confidence,
                        const RiskPolicy& policy) {
  std::optional<RiskLevel> base;
  if (attack) base = policy.base_tier(*attack);
  if (!base) {
    std::clog << "warning: no risk tier for class '"
              << (attack ? std::string(to_string(*attack)) : std::string("unknown"))
              << "', using Standard\n";
    base = RiskLevel::Standard;
  }
  if (confidence >= policy.promotion_confidence()) {
    if (*base == RiskLevel::Standard) return RiskLevel::MidHigh;
    return RiskLevel::High;
  }
  return *base;
}

json MitigationAction::to_json() const {
  json j = {{"action", std::string(to_string(kind))},
            {"target", target},
            {"risk", std::string(to_string(risk))},
            {"alert_id", alert_id},
            {"status", std::string(to_string(status))}};
  if (request_id != 0) j["request_id"] = request_id;
  return j;
}

// ---------------------------------------------------------------------------

bool SuspendedIpList::add(const std::string& ip, const std::string& timestamp) {
  return entries_.emplace(ip, timestamp).second;
}

bool SuspendedIpList::contains(std::string_view ip) const { return entries_.find(ip) != entries_.end(); }

void SuspendedIpList::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& [ip, ts] : entries_) out << ip << ',' << ts << '\n';
}

SuspendedIpList SuspendedIpList::load(const std::filesystem::path& path) {
  SuspendedIpList list;
  std::ifstream in(path);
  if (!in) return list;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto comma = t.find(',');
    list.add(std::string(t.substr(0, comma)),
             comma == std::string_view::npos ? std::string{} : std::string(t.substr(comma + 1)));
  }
  return list;
}

// ---------------------------------------------------------------------------

ApprovalRequest& ApprovalQueue::create(std::string node_id, std::uint64_t alert_id,
                                       std::optional<TrafficClass> cls, RiskLevel risk,
                                       std::string created_at) {
  ApprovalRequest r;
  r.id = next_id_++;
  r.node_id = std::move(node_id);
  r.alert_id = alert_id;
  r.attack_class = cls;
  r.risk = risk;
  r.created_at = std::move(created_at);
  requests_.push_back(std::move(r));
  return requests_.back();
}

ApprovalRequest* ApprovalQueue::find(std::uint64_t id) {
  for (auto& r : requests_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

const ApprovalRequest* ApprovalQueue::find(std::uint64_t id) const {
  return const_cast<ApprovalQueue*>(this)->find(id);
}

const ApprovalRequest* ApprovalQueue::pending_for(std::string_view node_id) const {
  for (const auto& r : requests_) {
    if (r.node_id == node_id && r.status == ActionStatus::Pending) return &r;
  }
  return nullptr;
}

json ApprovalQueue::to_json() const {
  json arr = json::array();
  for (const auto& r : requests_) {
    json j = {{"id", r.id},
              {"node", r.node_id},
              {"alert_id", r.alert_id},
              {"risk", std::string(to_string(r.risk))},
              {"status", std::string(to_string(r.status))},
              {"created_at", r.created_at},
              {"resolved_at", r.resolved_at}};
    j["class"] = r.attack_class ? std::string(to_string(*r.attack_class)) : std::string{};
    arr.push_back(std::move(j));
  }
  return {{"format", "twinguard-approvals"}, {"next_id", next_id_}, {"requests", arr}};
}

ApprovalQueue ApprovalQueue::from_json(const json& j) {
  ApprovalQueue q;
  try {
    q.next_id_ = j.value("next_id", std::uint64_t{1});
    for (const auto& e : j.at("requests")) {
      ApprovalRequest r;
      r.id = e.at("id").get<std::uint64_t>();
      r.node_id = e.at("node").get<std::string>();
      r.alert_id = e.value("alert_id", std::uint64_t{0});
      r.attack_class = traffic_class_from_string(e.value("class", std::string{}));
      r.risk = risk_level_from_string(e.value("risk", std::string("MidHigh"))).value_or(RiskLevel::MidHigh);
      r.status = action_status_from_string(e.at("status").get<std::string>()).value_or(ActionStatus::Pending);
      r.created_at = e.value("created_at", std::string{});
      r.resolved_at = e.value("resolved_at", std::string{});
      q.next_id_ = std::max(q.next_id_, r.id + 1);
      q.requests_.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, std::string("approval queue: ") + e.what());
  }
  return q;
}

void ApprovalQueue::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

ApprovalQueue ApprovalQueue::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {};
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, "approval queue " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------

std::string iso8601_from_epoch(std::uint64_t seconds) {
  const auto t = static_cast<std::time_t>(seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

MitigationEngine::MitigationEngine(TwinGraph& twin, RiskPolicy policy, Clock clock)
    : twin_(twin), policy_(std::move(policy)), clock_(std::move(clock)) {
  if (!clock_) {
    clock_ = [](std::uint64_t) {
      return iso8601_from_epoch(static_cast<std::uint64_t>(std::time(nullptr)));
    };
  }
}

void MitigationEngine::persist_to(const std::filesystem::path& dir) {
  std::lock_guard lock(mutex_);
  std::filesystem::create_directories(dir);
  dir_ = dir;
  if (std::filesystem::exists(dir / "suspended_ips.txt")) {
    suspended_ = SuspendedIpList::load(dir / "suspended_ips.txt");
  }
  if (std::filesystem::exists(dir / "approvals.json")) {
    approvals_ = ApprovalQueue::load(dir / "approvals.json");
  }
  save_locked();
}

void MitigationEngine::save_locked() const {
  if (!dir_) return;
  suspended_.save(*dir_ / "suspended_ips.txt");
  approvals_.save(*dir_ / "approvals.json");
}

void MitigationEngine::journal(const MitigationAction& action, const std::string& node,
                               std::uint64_t ts, json extra) {
  auto payload = action.to_json();
  for (auto& [k, v] : extra.items()) payload[k] = v;
  twin_.append_event(node, TwinEventKind::MitigationApplied, std::move(payload), ts);
}

std::vector<MitigationAction> MitigationEngine::mitigate(const Alert& alert) {
  std::lock_guard lock(mutex_);
  const auto risk = classify_risk(alert.attack_class, alert.confidence, policy_);
  const auto cls_name = alert.attack_class ? std::string(to_string(*alert.attack_class)) : std::string{};
  std::vector<MitigationAction> actions;
  bool dirty = false;

  MitigationAction block{ActionKind::BlockFlow, "flow:" + std::to_string(alert.flow_id), risk,
                         alert.alert_id, ActionStatus::Applied, 0};
  journal(block, alert.node_id, alert.timestamp, {{"class", cls_name}});
  actions.push_back(block);

  MitigationAction suspend{ActionKind::SuspendIp, alert.ip, risk, alert.alert_id,
                           ActionStatus::Applied, 0};
  const bool added = suspended_.add(alert.ip, clock_(alert.timestamp));
  dirty |= added;
  twin_.add_suspended_ip(alert.node_id, alert.ip);
  journal(suspend, alert.node_id, alert.timestamp, {{"new", added}});
  actions.push_back(suspend);

  const auto status = twin_.node(alert.node_id).status;
  if (risk == RiskLevel::High) {
    MitigationAction isolate{ActionKind::IsolateNode, alert.node_id, risk, alert.alert_id,
                             ActionStatus::Applied, 0};
    if (status == NodeStatus::Isolated) {
      journal(isolate, alert.node_id, alert.timestamp, {{"noop", true}});
    } else {
      auto details = isolate.to_json();
      details["class"] = cls_name;
      twin_.apply_status(alert.node_id, NodeStatus::Isolated, std::move(details), alert.timestamp);
    }
    actions.push_back(isolate);
  } else if (risk == RiskLevel::MidHigh && status != NodeStatus::Isolated) {
    MitigationAction request{ActionKind::RequestApproval, alert.node_id, risk, alert.alert_id,
                             ActionStatus::Pending, 0};
    if (const auto* existing = approvals_.pending_for(alert.node_id)) {
      request.request_id = existing->id;
      journal(request, alert.node_id, alert.timestamp, {{"noop", true}});
    } else {
      auto& r = approvals_.create(alert.node_id, alert.alert_id, alert.attack_class, risk,
                                  clock_(alert.timestamp));
      request.request_id = r.id;
      dirty = true;
      auto details = request.to_json();
      details["class"] = cls_name;
      twin_.apply_status(alert.node_id, NodeStatus::PendingIsolation, std::move(details),
                         alert.timestamp);
    }
    actions.push_back(request);
  }
  if (dirty) save_locked();
  return actions;
}

MitigationAction MitigationEngine::resolve_approval(std::uint64_t request_id, Verdict verdict,
                                                    std::uint64_t timestamp) {
  std::lock_guard lock(mutex_);
  auto* r = approvals_.find(request_id);
  if (!r) throw Error(ErrorCode::UnknownRequest, std::to_string(request_id));
  if (r->status != ActionStatus::Pending) {
    throw Error(ErrorCode::AlreadyResolved, "request " + std::to_string(request_id) + " is " +
                                                std::string(to_string(r->status)));
  }
  const auto status = twin_.node(r->node_id).status;
  MitigationAction action;
  action.target = r->node_id;
  action.risk = r->risk;
  action.alert_id = r->alert_id;
  action.request_id = r->id;
  json details;
  if (verdict == Verdict::Approve) {
    action.kind = ActionKind::IsolateNode;
    action.status = ActionStatus::Applied;
    details = action.to_json();
    details["verdict"] = "Approve";
    if (status == NodeStatus::Isolated) {
      details["noop"] = true;
      twin_.append_event(r->node_id, TwinEventKind::MitigationApplied, details, timestamp);
    } else {
      twin_.apply_status(r->node_id, NodeStatus::Isolated, details, timestamp);
    }
    r->status = ActionStatus::Applied;
  } else {
    action.kind = ActionKind::RequestApproval;
    action.status = ActionStatus::Denied;
    details = action.to_json();
    details["verdict"] = "Deny";
    if (status == NodeStatus::PendingIsolation) {
      twin_.apply_status(r->node_id, NodeStatus::Active, details, timestamp);
    } else {
      details["noop"] = true;
      twin_.append_event(r->node_id, TwinEventKind::MitigationApplied, details, timestamp);
    }
    r->status = ActionStatus::Denied;
  }
  r->resolved_at = clock_(timestamp);
  save_locked();
  return action;
}

// ---------------------------------------------------------------------------

std::vector<std::string> isolation_safety_violations(std::span<const TwinEvent> events) {
  std::vector<std::string> violations;
  // node -> request ids raised for it
  std::map<std::string, std::set<std::uint64_t>> requested;
  for (const auto& e : events) {
    if (e.kind != TwinEventKind::MitigationApplied) continue;
    const auto action = e.payload.value("action", std::string{});
    const auto request_id = e.payload.value("request_id", std::uint64_t{0});
    if (action == "RequestApproval" && e.payload.value("status", std::string{}) == "Pending") {
      requested[e.node_id].insert(request_id);
    }
    if (e.payload.value("to", std::string{}) != "Isolated") continue;
    const auto risk = e.payload.value("risk", std::string{});
    if (risk == "High" && !e.payload.contains("verdict")) continue;
    const bool approved = e.payload.value("verdict", std::string{}) == "Approve" &&
                          requested[e.node_id].count(request_id) != 0;
    if (!approved) {
      violations.push_back("event " + std::to_string(e.sequence) + ": node " + e.node_id +
                           " isolated at risk " + risk + " without approval");
    }
  }
  return violations;
}

}  // namespace twinguard
