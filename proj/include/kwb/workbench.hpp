#pragma once

// Scenarios, the built-in registry and the report documents behind the kwb CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kwb/einstein_lab.hpp"
#include "kwb/kropina.hpp"

namespace kwb {

using Json = nlohmann::ordered_json;

inline constexpr const char* kScenarioSchema = "scenario/1";
inline constexpr const char* kReportSchema = "report/1";

/// Version string baked in at configure time (git describe).
const char* tool_version();

struct Scenario {
  std::string name;
  int dim = 0;
  Representation representation = Representation::Navigation;
  std::vector<std::string> metric;  // row-major n x n: h_ij or a_ij
  std::vector<std::string> field;   // W^i or b_i
  std::string gauge = "2";          // navigation only
  std::string weight = "0";         // f
  std::string weights = "plain";    // preset label or "custom"
  WeightConfig cfg;
  std::vector<double> box_lo, box_hi;
  int points = 8;
  int directions = 12;
  std::uint64_t seed = 0;
  double tol = 1e-6;
  bool normalize_wind = false;

  KropinaSpace space() const;
  /// Chart points drawn uniformly from the box; depends only on (seed, box).
  std::vector<std::vector<double>> sample_points(std::optional<int> count = std::nullopt) const;
  Json to_json() const;
};

/// Parses a weights preset: "plain", "ricInf", "pric", "ricN:<N>".
WeightConfig weights_preset(const std::string& name, int n);

/// Validates a "scenario/1" document. Throws SchemaError with a JSON pointer,
/// or PreconditionFailure for a non-unit wind or a poor admissibility rate.
Scenario scenario_from_json(const Json& doc);
/// A registry name, "random_ab:<seed>", or a path to a JSON file.
Scenario load_scenario(const std::string& name_or_path);

struct RegistryEntry {
  std::string name;
  std::string summary;
};
std::vector<RegistryEntry> builtin_scenarios();
Scenario builtin_scenario(const std::string& name);

/// (alpha, beta) scenario with seeded polynomial coefficients.
Scenario random_ab_scenario(std::uint64_t seed, int n = 3);

// ---- commands ----

enum class ExitCode { Ok = 0, Usage = 1, Fail = 2, Precondition = 3 };

struct CommandResult {
  Json report;
  std::string text;  // plain-text summary table
  ExitCode exit = ExitCode::Ok;
};

struct ReportOptions {
  bool timings = true;
};

/// theorem: "auto", "41", "44", "51" or "61".
CommandResult run_check(const Scenario& sc, const std::string& theorem, const ReportOptions& ro = {});
/// Directions for verify keep W_0 above this. Nearer the cone boundary the generic
/// pipeline loses digits roughly like beta^-4 and stops being a usable oracle.
inline constexpr double kVerifyMinW0 = 0.1;
CommandResult run_verify(const Scenario& sc, const ReportOptions& ro = {});
/// target: "nav" or "ab". The converted scenario is in report["converted"].
CommandResult run_convert(const Scenario& sc, const std::string& target, const std::optional<std::string>& gauge,
                          const ReportOptions& ro = {});

Json report_json(const TheoremReport& r);

}  // namespace kwb
