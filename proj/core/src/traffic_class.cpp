#include "twinguard/traffic_class.hpp"

#include "twinguard/error.hpp"

namespace twinguard {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownProfile: return "UnknownProfile";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::DuplicateFeature: return "DuplicateFeature";
    case ErrorCode::DictionaryCollision: return "DictionaryCollision";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::UnparseableNumeric: return "UnparseableNumeric";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DatasetRow: return "DatasetRow";
    case ErrorCode::InsufficientRecords: return "InsufficientRecords";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::SingleClassData: return "SingleClassData";
    case ErrorCode::InvalidFeatures: return "InvalidFeatures";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::EmptyBaseline: return "EmptyBaseline";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::UnknownRequest: return "UnknownRequest";
    case ErrorCode::AlreadyResolved: return "AlreadyResolved";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DataShortfall: return "DataShortfall";
  }
  return "Unknown";
}

std::string_view to_string(TrafficClass c) noexcept {
  switch (c) {
    case TrafficClass::Normal: return "Normal";
    case TrafficClass::Backdoor: return "Backdoor";
    case TrafficClass::DdosHttp: return "DDoS HTTP";
    case TrafficClass::DdosUdp: return "DDoS UDP";
    case TrafficClass::Fingerprinting: return "Fingerprinting";
    case TrafficClass::Mitm: return "MITM";
    case TrafficClass::Password: return "Password";
    case TrafficClass::PortScanning: return "Port Scanning";
    case TrafficClass::Ransomware: return "Ransomware";
    case TrafficClass::SqlInjection: return "SQL Injection";
    case TrafficClass::Xss: return "XSS";
    case TrafficClass::Scanning: return "Scanning";
    case TrafficClass::Injection: return "Injection";
    case TrafficClass::Ddos: return "DDoS";
  }
  return "Normal";
}

std::optional<TrafficClass> traffic_class_from_string(std::string_view name) noexcept {
  for (const auto c : kAllTrafficClasses) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

}  // namespace twinguard
