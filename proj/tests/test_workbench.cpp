#include <string>

#include "doctest.h"
#include "kwb/errors.hpp"
#include "kwb/workbench.hpp"

using namespace kwb;

namespace {

Json minimal() {
  return Json::parse(R"({
    "schema": "scenario/1",
    "name": "flat",
    "dimension": 2,
    "representation": "nav",
    "metric": [["1", "0"], ["0", "1"]],
    "field": ["1", "0"],
    "box": {"lo": [-1, -1], "hi": [1, 1]}
  })");
}

std::string schema_pointer(const Json& doc) {
  try {
    scenario_from_json(doc);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("registry scenarios load") {
  for (const auto& e : builtin_scenarios()) {
    if (e.name.find('<') != std::string::npos) continue;
    const Scenario sc = load_scenario(e.name);
    CHECK(sc.name == e.name);
    const auto pts = sc.sample_points();
    for (const auto& x : pts) CHECK(sc.space().unit_norm_defect(x) < 1e-10);
  }
  const Scenario p = load_scenario("euclid_parallel");
  CHECK(p.dim == 3);
  CHECK(p.field == std::vector<std::string>{"1", "0", "0"});
  CHECK(p.weight == "0");
  CHECK(load_scenario("random_ab:5").representation == Representation::AlphaBeta);
  CHECK_THROWS(load_scenario("no_such_scenario"));
  CHECK_THROWS(load_scenario("random_ab:x"));
}

TEST_CASE("scenario schema errors carry JSON pointers") {
  CHECK(schema_pointer(minimal()) == "<accepted>");
  Json d = minimal();
  d.erase("dimension");
  CHECK(schema_pointer(d) == "/dimension");
  d = minimal();
  d["metric"][1][0] = "x1 + + 2";
  CHECK(schema_pointer(d) == "/metric/1/0");
  d = minimal();
  d["field"][1] = "x3";
  CHECK(schema_pointer(d) == "/field/1");
  d = minimal();
  d["box"]["hi"][0] = -2;
  CHECK(schema_pointer(d) == "/box/hi/0");
  d = minimal();
  d["weights"] = "ricN:two";
  CHECK(schema_pointer(d) == "/weights");
  d = minimal();
  d["extra"] = 1;
  CHECK(schema_pointer(d) == "/extra");
  d = minimal();
  d["representation"] = "randers";
  CHECK(schema_pointer(d) == "/representation");
  d = minimal();
  d["samples"] = {{"points", 3}, {"directions", 2}};
  CHECK(schema_pointer(d) == "/samples/directions");

  try {
    Json bad = minimal();
    bad["metric"][0][0] = "x1 + + 2";
    scenario_from_json(bad);
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("offset 5") != std::string::npos);
  }
}

TEST_CASE("wind normalization and admissibility at load") {
  Json d = minimal();
  d["field"] = {"1.1", "0"};
  CHECK_THROWS_AS(scenario_from_json(d), PreconditionFailure);
  d["normalize_wind"] = true;
  const Scenario sc = scenario_from_json(d);
  CHECK(sc.space().unit_norm_defect(std::vector<double>{0.2, 0.3}) < 1e-12);

  Json z = minimal();
  z["representation"] = "ab";
  z.erase("gauge");
  z["field"] = {"0", "0"};
  CHECK_THROWS_AS(scenario_from_json(z), Error);
}

TEST_CASE("check dispatch and exit codes") {
  Scenario par = load_scenario("euclid_parallel");
  par.cfg = weights_preset("pric", 3);
  CommandResult r = run_check(par, "auto");
  CHECK(r.exit == ExitCode::Ok);
  CHECK(r.report["reports"][0]["theorem"] == "thm61");

  Scenario hopf = load_scenario("s3_hopf");
  hopf.cfg = weights_preset("ricInf", 3);
  r = run_check(hopf, "auto");
  CHECK(r.exit == ExitCode::Ok);
  CHECK(r.report["reports"][0]["theorem"] == "thm41");

  r = run_check(load_scenario("euclid_twist"), "auto");
  CHECK(r.exit == ExitCode::Precondition);
  CHECK(r.report["reports"][0]["verdict"] == "PRECONDITION");

  r = run_check(hopf, "51");
  CHECK(r.exit == ExitCode::Usage);
  CHECK(r.report["error"]["kind"] == "dispatch");

  r = run_check(load_scenario("s3_hopf_weighted"), "44");
  CHECK(r.exit == ExitCode::Fail);
}

TEST_CASE("reports are deterministic without timings") {
  const Scenario sc = load_scenario("random_ab:2");
  const ReportOptions quiet{false};
  const std::string a = run_check(sc, "auto", quiet).report.dump();
  const std::string b = run_check(sc, "auto", quiet).report.dump();
  CHECK(a == b);
  CHECK(run_verify(sc, quiet).report.dump() == run_verify(sc, quiet).report.dump());
  CHECK(!run_check(sc, "auto", quiet).report.contains("timings_ms"));
  CHECK(run_check(sc, "auto").report.contains("timings_ms"));
  CHECK(run_check(sc, "auto", quiet).report["schema"] == "report/1");
}

TEST_CASE("verify passes on the registry") {
  for (const char* name : {"euclid_parallel", "s3_hopf", "euclid_gaussian", "euclid_twist", "torus_wind", "random_ab:11"}) {
    Scenario sc = load_scenario(name);
    sc.points = 4;
    const CommandResult r = run_verify(sc, {false});
    CHECK_MESSAGE(r.exit == ExitCode::Ok, name);
  }
  const CommandResult p = run_verify(load_scenario("euclid_parallel"), {false});
  for (const auto& t : p.report["tables"]) CHECK(t["max_deviation"].get<double>() < 1e-10);
}

TEST_CASE("conversion round trips") {
  const Scenario ab = load_scenario("random_ab:4");
  const CommandResult to_nav = run_convert(ab, "nav", std::nullopt, {false});
  CHECK(to_nav.exit == ExitCode::Ok);
  const Scenario nav = scenario_from_json(to_nav.report["converted"]);
  const CommandResult back = run_convert(nav, "ab", std::nullopt, {false});
  CHECK(back.exit == ExitCode::Ok);
  const Scenario ab2 = scenario_from_json(back.report["converted"]);
  const KropinaSpace s0 = ab.space(), s2 = ab2.space();
  for (const auto& x : ab.sample_points()) {
    CHECK((Matrix(s0.a().at(x)) - Matrix(s2.a().at(x))).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((Vector(s0.b().at(x)) - Vector(s2.b().at(x))).cwiseAbs().maxCoeff() < 1e-12);
  }

  const Scenario hopf = load_scenario("s3_hopf");
  CHECK(run_convert(hopf, "ab", std::string("2"), {false}).exit == ExitCode::Ok);
  const CommandResult g = run_convert(hopf, "ab", std::string("1+0.1*x1"), {false});
  CHECK(g.exit == ExitCode::Ok);
  CHECK(g.report["round_trip"]["max_deviation"].get<double>() < 1e-10);
  CHECK_THROWS_AS(run_convert(hopf, "ab", std::string("-1"), {false}), PreconditionFailure);
}
