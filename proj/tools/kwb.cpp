// kwb: command-line front end of the Kropina workbench.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kwb/errors.hpp"
#include "kwb/workbench.hpp"

namespace {

using kwb::ExitCode;

int code(ExitCode e) { return static_cast<int>(e); }

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string json_out;
  bool no_timings = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "built-in name, random_ab:<seed>, or path to a scenario/1 file")->required();
  cmd->add_option("--seed", c.seed, "override the scenario seed");
  cmd->add_option("--json-out", c.json_out, "write the report/1 document here");
  cmd->add_flag("--no-timings", c.no_timings, "omit wall-clock timings from the report");
}

int finish(const kwb::CommandResult& r, const Common& c) {
  std::cout << r.text;
  if (!c.json_out.empty()) {
    std::ofstream out(c.json_out);
    if (!out) {
      std::cerr << "error: cannot write " << c.json_out << "\n";
      return code(ExitCode::Usage);
    }
    out << r.report.dump(2) << "\n";
  }
  return code(r.exit);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kropina workbench: closed-form curvature checks and weighted Einstein checkers"};
  app.set_version_flag("--version", std::string("kwb ") + kwb::tool_version());
  app.require_subcommand(1);

  Common common;
  std::string theorem = "auto";
  std::optional<double> tol;
  std::optional<std::string> weights;
  std::optional<int> points, dirs;
  std::string target;
  std::optional<std::string> gauge;
  std::string scenario_out;

  auto* check = app.add_subcommand("check", "run the weighted Einstein checkers");
  add_common(check, common);
  check->add_option("--theorem", theorem, "auto, 41, 44, 51 or 61")->check(CLI::IsMember({"auto", "41", "44", "51", "61"}));
  check->add_option("--tol", tol, "condition tolerance")->check(CLI::PositiveNumber);
  check->add_option("--weights", weights, "override weights: plain, ricInf, pric, ricN:<N>");
  check->add_option("--points", points, "chart points")->check(CLI::Range(1, 100));
  check->add_option("--dirs", dirs, "directions per point")->check(CLI::Range(4, 200));

  auto* verify = app.add_subcommand("verify", "cross-validate closed forms against the generic pipeline");
  add_common(verify, common);
  verify->add_option("--points", points, "chart points")->check(CLI::Range(1, 100));
  verify->add_option("--dirs", dirs, "directions per point")->check(CLI::Range(4, 200));

  auto* convert = app.add_subcommand("convert", "convert between navigation and (alpha, beta) data");
  add_common(convert, common);
  convert->add_option("--to", target, "nav or ab")->required()->check(CLI::IsMember({"nav", "ab"}));
  convert->add_option("--gauge", gauge, "gauge b(x) for conversion into (alpha, beta) data");
  convert->add_option("--out", scenario_out, "write the converted scenario here");

  auto* scenarios = app.add_subcommand("scenarios", "built-in scenarios");
  auto* list = scenarios->add_subcommand("list", "list built-in scenarios");
  scenarios->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::Usage);
  }

  if (list->parsed()) {
    for (const auto& e : kwb::builtin_scenarios()) std::printf("%-20s %s\n", e.name.c_str(), e.summary.c_str());
    return 0;
  }

  kwb::Scenario sc;
  try {
    sc = kwb::load_scenario(common.scenario);
    if (common.seed) sc.seed = *common.seed;
    if (tol) sc.tol = *tol;
    if (points) sc.points = *points;
    if (dirs) sc.directions = *dirs;
    if (weights) {
      sc.cfg = kwb::weights_preset(*weights, sc.dim);
      sc.weights = *weights;
    }
    if (sc.directions < sc.dim + 2) throw kwb::Error("need at least n+2 directions");
    // Overrides change sample points and directions: validate again.
    sc = kwb::scenario_from_json(sc.to_json());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::Usage);
  }

  const kwb::ReportOptions ro{!common.no_timings};
  try {
    if (check->parsed()) return finish(kwb::run_check(sc, theorem, ro), common);
    if (verify->parsed()) return finish(kwb::run_verify(sc, ro), common);
    if (convert->parsed()) {
      const kwb::CommandResult r = kwb::run_convert(sc, target, gauge, ro);
      if (!scenario_out.empty()) {
        std::ofstream out(scenario_out);
        if (!out) {
          std::cerr << "error: cannot write " << scenario_out << "\n";
          return code(ExitCode::Usage);
        }
        out << r.report["converted"].dump(2) << "\n";
      }
      return finish(r, common);
    }
  } catch (const kwb::PreconditionFailure& e) {
    std::cerr << "precondition failed: " << e.what() << "\n";
    return code(ExitCode::Precondition);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::Usage);
  }
  return code(ExitCode::Usage);
}
