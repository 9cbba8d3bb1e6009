#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace twinguard {

// Canonical traffic classes. Attack spellings follow the dataset tables the
// profiles were built from; a profile declares which subset it uses.
enum class TrafficClass : std::uint8_t {
  Normal = 0,
  Backdoor,
  DdosHttp,
  DdosUdp,
  Fingerprinting,
  Mitm,
  Password,
  PortScanning,
  Ransomware,
  SqlInjection,
  Xss,
  Scanning,
  Injection,
  Ddos,
};

inline constexpr std::size_t kTrafficClassCount = 14;

inline constexpr std::array<TrafficClass, kTrafficClassCount> kAllTrafficClasses = {
    TrafficClass::Normal,       TrafficClass::Backdoor,     TrafficClass::DdosHttp,
    TrafficClass::DdosUdp,      TrafficClass::Fingerprinting, TrafficClass::Mitm,
    TrafficClass::Password,     TrafficClass::PortScanning, TrafficClass::Ransomware,
    TrafficClass::SqlInjection, TrafficClass::Xss,          TrafficClass::Scanning,
    TrafficClass::Injection,    TrafficClass::Ddos,
};

constexpr bool is_attack(TrafficClass c) noexcept { return c != TrafficClass::Normal; }

constexpr std::size_t index_of(TrafficClass c) noexcept { return static_cast<std::size_t>(c); }

std::string_view to_string(TrafficClass c) noexcept;

// Accepts the canonical spelling only ("DDoS UDP", "SQL Injection", ...).
std::optional<TrafficClass> traffic_class_from_string(std::string_view name) noexcept;

}  // namespace twinguard
