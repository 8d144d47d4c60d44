#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pessim {

enum class SuiteStatus { kPass, kFail, kInvalidInput };
std::string to_string(SuiteStatus status);

struct SuiteResult {
  std::string name;
  SuiteStatus status = SuiteStatus::kPass;
  std::size_t instances = 0;
  /// Suite-specific headline number (worst residual, worst ratio, ...).
  double worst = 0.0;
  std::string metric;
  /// Failing instances, capped at ten.
  std::vector<nlohmann::json> failures;
  nlohmann::json details = nlohmann::json::object();
  std::string message;
};

struct VerifyOptions {
  std::uint64_t seed = 20240607;
  /// Replaces the random MDPs of the MDP-driven batteries by this document.
  std::optional<nlohmann::json> mdp;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;
  bool passed() const;
  bool invalid_input() const;
};

/// Names accepted by run_verify_suite besides "all".
const std::vector<std::string>& verify_suite_names();

/// Runs one named battery or all of them. Unknown names throw InvalidInput.
VerifyReport run_verify_suite(const std::string& selector, const VerifyOptions& opts = {});

nlohmann::json to_json(const SuiteResult& suite);
nlohmann::json to_json(const VerifyReport& report);

}  // namespace pessim
