#include "kwb/workbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "kwb/errors.hpp"
#include "kwb/finsler.hpp"
#include "kwb/kropina_forms.hpp"
#include "kwb/rng.hpp"

#ifndef KWB_GIT_DESCRIBE
#define KWB_GIT_DESCRIBE "unknown"
#endif

namespace kwb {

const char* tool_version() { return KWB_GIT_DESCRIBE; }

namespace {

constexpr double kUnitNormTol = 1e-10;
constexpr double kMinAdmissibility = 0.1;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string sci(double v) { return fmt("%.3e", v); }

std::vector<Expr> parse_all(const std::vector<std::string>& texts, int n) {
  std::vector<Expr> out;
  for (const auto& t : texts) out.push_back(parse_expr(t, n));
  return out;
}

std::string pointer(const std::string& base, const std::string& key) { return base + "/" + key; }
std::string pointer(const std::string& base, std::size_t i) { return base + "/" + std::to_string(i); }

// ---- strict JSON reading ----

const Json& require(const Json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.contains(key)) throw SchemaError(pointer(ptr, key), "missing required member");
  return obj.at(key);
}

std::string expect_string(const Json& v, const std::string& ptr) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw SchemaError(ptr, "expected a string expression");
}

double expect_number(const Json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaError(ptr, "expected a number");
  return v.get<double>();
}

long long expect_int(const Json& v, const std::string& ptr, long long lo, long long hi) {
  if (!v.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  const long long k = v.get<long long>();
  if (k < lo || k > hi) throw SchemaError(ptr, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return k;
}

void only_keys(const Json& obj, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw SchemaError(pointer(ptr, it.key()), "unknown member");
}

std::vector<double> expect_vector(const Json& v, const std::string& ptr, int n) {
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    throw SchemaError(ptr, "expected an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expect_number(v[i], pointer(ptr, i)));
  return out;
}

void check_expression(const std::string& text, int n, const std::string& ptr) {
  try {
    parse_expr(text, n);
  } catch (const ParseError& e) {
    throw SchemaError(ptr, std::string("expression: ") + e.what());
  } catch (const Error& e) {
    throw SchemaError(ptr, std::string("expression: ") + e.what());
  }
}

Json weights_json(const Scenario& sc) {
  if (sc.weights != "custom") return sc.weights;
  return Json{{"a", sc.cfg.a}, {"c", sc.cfg.c}};
}

}  // namespace

WeightConfig weights_preset(const std::string& name, int n) {
  if (name == "plain") return WeightConfig::plain(n);
  if (name == "ricInf") return WeightConfig::ric_inf(n);
  if (name == "pric") return WeightConfig::pric(n);
  if (name.rfind("ricN:", 0) == 0) {
    std::size_t used = 0;
    const std::string tail = name.substr(5);
    double N = 0.0;
    try {
      N = std::stod(tail, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != tail.size()) throw Error("bad ricN value in '" + name + "'");
    return WeightConfig::ric_n(N, n);
  }
  throw Error("unknown weights preset '" + name + "'");
}

KropinaSpace Scenario::space() const {
  const Expr f = parse_expr(weight, dim);
  if (representation == Representation::AlphaBeta)
    return KropinaSpace::from_alpha_beta(RiemannianMetric(dim, parse_all(metric, dim), "alpha"),
                                         VectorFieldW(parse_all(field, dim)), f);
  const RiemannianMetric h(dim, parse_all(metric, dim), "h");
  VectorFieldW W(parse_all(field, dim));
  if (normalize_wind) W = kwb::normalize_wind(h, W);
  return KropinaSpace::from_navigation(h, W, parse_expr(gauge, dim), f);
}

std::vector<std::vector<double>> Scenario::sample_points(std::optional<int> count) const {
  const int m = count.value_or(points);
  const CounterRng rng(seed, 0x9011);
  std::vector<std::vector<double>> out;
  for (int k = 0; k < m; ++k) {
    std::vector<double> x(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      const double u = rng.uniform(static_cast<std::uint64_t>(k * dim + i));
      x[static_cast<std::size_t>(i)] = box_lo[static_cast<std::size_t>(i)] + u * (box_hi[static_cast<std::size_t>(i)] - box_lo[static_cast<std::size_t>(i)]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

Json Scenario::to_json() const {
  Json m = Json::array();
  for (int i = 0; i < dim; ++i) {
    Json row = Json::array();
    for (int j = 0; j < dim; ++j) row.push_back(metric[static_cast<std::size_t>(i * dim + j)]);
    m.push_back(row);
  }
  Json doc{{"schema", kScenarioSchema},
           {"name", name},
           {"dimension", dim},
           {"representation", representation == Representation::Navigation ? "nav" : "ab"},
           {"metric", m},
           {"field", field}};
  if (representation == Representation::Navigation) doc["gauge"] = gauge;
  doc["weight"] = weight;
  doc["weights"] = weights_json(*this);
  doc["box"] = {{"lo", box_lo}, {"hi", box_hi}};
  doc["samples"] = {{"points", points}, {"directions", directions}};
  doc["seed"] = seed;
  doc["tolerance"] = tol;
  if (normalize_wind) doc["normalize_wind"] = true;
  return doc;
}

Scenario scenario_from_json(const Json& doc) {
  only_keys(doc, "", {"schema", "name", "dimension", "representation", "metric", "field", "gauge", "weight",
                      "weights", "box", "samples", "seed", "tolerance", "normalize_wind"});
  Scenario sc;
  const Json& schema = require(doc, "schema", "");
  if (!schema.is_string() || schema.get<std::string>() != kScenarioSchema)
    throw SchemaError("/schema", std::string("expected \"") + kScenarioSchema + "\"");
  const Json& name = require(doc, "name", "");
  if (!name.is_string() || name.get<std::string>().empty()) throw SchemaError("/name", "expected a nonempty string");
  sc.name = name.get<std::string>();
  sc.dim = static_cast<int>(expect_int(require(doc, "dimension", ""), "/dimension", 2, 4));
  const int n = sc.dim;

  const Json& rep = require(doc, "representation", "");
  if (rep == "nav") {
    sc.representation = Representation::Navigation;
  } else if (rep == "ab") {
    sc.representation = Representation::AlphaBeta;
  } else {
    throw SchemaError("/representation", "expected \"nav\" or \"ab\"");
  }

  const Json& metric = require(doc, "metric", "");
  if (!metric.is_array() || static_cast<int>(metric.size()) != n)
    throw SchemaError("/metric", "expected " + std::to_string(n) + " rows");
  for (std::size_t i = 0; i < metric.size(); ++i) {
    const std::string rp = pointer("/metric", i);
    if (!metric[i].is_array() || static_cast<int>(metric[i].size()) != n)
      throw SchemaError(rp, "expected a row of " + std::to_string(n) + " expressions");
    for (std::size_t j = 0; j < metric[i].size(); ++j) {
      const std::string p = pointer(rp, j);
      sc.metric.push_back(expect_string(metric[i][j], p));
      check_expression(sc.metric.back(), n, p);
    }
  }
  const Json& field = require(doc, "field", "");
  if (!field.is_array() || static_cast<int>(field.size()) != n)
    throw SchemaError("/field", "expected " + std::to_string(n) + " expressions");
  for (std::size_t i = 0; i < field.size(); ++i) {
    sc.field.push_back(expect_string(field[i], pointer("/field", i)));
    check_expression(sc.field.back(), n, pointer("/field", i));
  }
  if (doc.contains("gauge")) {
    if (sc.representation != Representation::Navigation)
      throw SchemaError("/gauge", "a gauge is only meaningful for navigation data");
    sc.gauge = expect_string(doc["gauge"], "/gauge");
    check_expression(sc.gauge, n, "/gauge");
  }
  if (doc.contains("weight")) {
    sc.weight = expect_string(doc["weight"], "/weight");
    check_expression(sc.weight, n, "/weight");
  }
  sc.cfg = WeightConfig::plain(n);
  if (doc.contains("weights")) {
    const Json& w = doc["weights"];
    if (w.is_string()) {
      try {
        sc.cfg = weights_preset(w.get<std::string>(), n);
      } catch (const Error& e) {
        throw SchemaError("/weights", e.what());
      }
      sc.weights = w.get<std::string>();
    } else {
      only_keys(w, "/weights", {"a", "c"});
      sc.cfg = {expect_number(require(w, "a", "/weights"), "/weights/a"),
                expect_number(require(w, "c", "/weights"), "/weights/c"), n};
      sc.weights = "custom";
    }
  }

  const Json& box = require(doc, "box", "");
  only_keys(box, "/box", {"lo", "hi"});
  sc.box_lo = expect_vector(require(box, "lo", "/box"), "/box/lo", n);
  sc.box_hi = expect_vector(require(box, "hi", "/box"), "/box/hi", n);
  for (int i = 0; i < n; ++i)
    if (!(sc.box_lo[static_cast<std::size_t>(i)] < sc.box_hi[static_cast<std::size_t>(i)]))
      throw SchemaError(pointer("/box/hi", static_cast<std::size_t>(i)), "box must have positive volume");

  if (doc.contains("samples")) {
    const Json& s = doc["samples"];
    only_keys(s, "/samples", {"points", "directions"});
    if (s.contains("points")) sc.points = static_cast<int>(expect_int(s["points"], "/samples/points", 1, 100));
    if (s.contains("directions"))
      sc.directions = static_cast<int>(expect_int(s["directions"], "/samples/directions", n + 2, 200));
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw SchemaError("/seed", "expected a nonnegative integer");
    sc.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("tolerance")) {
    sc.tol = expect_number(doc["tolerance"], "/tolerance");
    if (!(sc.tol > 0.0)) throw SchemaError("/tolerance", "must be positive");
  }
  if (doc.contains("normalize_wind")) {
    if (!doc["normalize_wind"].is_boolean()) throw SchemaError("/normalize_wind", "expected a boolean");
    sc.normalize_wind = doc["normalize_wind"].get<bool>();
    if (sc.normalize_wind && sc.representation != Representation::Navigation)
      throw SchemaError("/normalize_wind", "only meaningful for navigation data");
  }

  // Numerical validation at the sample points.
  const KropinaSpace space = sc.space();
  const CounterRng rng(sc.seed, 0xad17);
  const auto pts = sc.sample_points();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const auto& x = pts[k];
    std::string where = "(";
    for (std::size_t i = 0; i < x.size(); ++i) where += (i ? ", " : "") + fmt("%.6g", x[i]);
    where += ")";
    try {
      space.a().at(x);
      space.h().at(x);
    } catch (const Error& e) {
      throw PreconditionFailure("metric at " + where + ": " + e.what());
    }
    if (sc.representation == Representation::Navigation && space.unit_norm_defect(x) > kUnitNormTol)
      throw PreconditionFailure("|W|_h differs from 1 at " + where + " (set normalize_wind to rescale)");
    const double rate = admissibility_rate(space, x, 200, rng.split(k));
    if (rate <= kMinAdmissibility)
      throw PreconditionFailure("admissible-direction rate " + fmt("%.3f", rate) + " at " + where);
  }
  return sc;
}

// ---- registry ----

namespace {

Scenario nav_base(std::string name, int n) {
  Scenario sc;
  sc.name = std::move(name);
  sc.dim = n;
  sc.representation = Representation::Navigation;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sc.metric.push_back(i == j ? "1" : "0");
  sc.box_lo.assign(static_cast<std::size_t>(n), -1.0);
  sc.box_hi.assign(static_cast<std::size_t>(n), 1.0);
  sc.cfg = WeightConfig::plain(n);
  return sc;
}

}  // namespace

std::vector<RegistryEntry> builtin_scenarios() {
  return {
      {"euclid_parallel", "flat R^3, W = e1, f = 0"},
      {"s3_hopf", "unit 3-sphere in Hopf coordinates with the unit Hopf field"},
      {"s3_hopf_weighted", "s3_hopf with f = 0.2 sin(x1) cos(x2), Ric_inf weights"},
      {"euclid_gaussian", "flat R^3, W = e1, f = 0.2 |x|^2, Ric_inf weights"},
      {"euclid_twist", "flat R^3, W = (cos x2, sin x2, 0): unit but not Killing"},
      {"torus_wind", "flat torus, constant unit wind, periodic gauge 2 + 0.5 sin(x1) cos(x2)"},
      {"random_ab:<seed>", "(alpha, beta) data with seeded polynomial coefficients"},
  };
}

Scenario builtin_scenario(const std::string& name) {
  if (name == "euclid_parallel") {
    Scenario sc = nav_base(name, 3);
    sc.field = {"1", "0", "0"};
    return sc;
  }
  if (name == "s3_hopf" || name == "s3_hopf_weighted") {
    Scenario sc = nav_base(name, 3);
    sc.metric = {"1", "0", "0", "0", "sin(x1)^2", "0", "0", "0", "cos(x1)^2"};
    sc.field = {"0", "1", "1"};
    sc.box_lo = {0.3, -1.0, -1.0};
    sc.box_hi = {1.2, 1.0, 1.0};
    if (name == "s3_hopf_weighted") {
      sc.weight = "0.2*sin(x1)*cos(x2)";
      sc.weights = "ricInf";
      sc.cfg = WeightConfig::ric_inf(3);
    }
    return sc;
  }
  if (name == "euclid_gaussian") {
    Scenario sc = nav_base(name, 3);
    sc.field = {"1", "0", "0"};
    sc.weight = "0.2*(x1^2 + x2^2 + x3^2)";
    sc.weights = "ricInf";
    sc.cfg = WeightConfig::ric_inf(3);
    return sc;
  }
  if (name == "euclid_twist") {
    Scenario sc = nav_base(name, 3);
    sc.field = {"cos(x2)", "sin(x2)", "0"};
    return sc;
  }
  if (name == "torus_wind") {
    Scenario sc = nav_base(name, 2);
    sc.field = {"cos(0.3)", "sin(0.3)"};
    sc.gauge = "2 + 0.5*sin(x1)*cos(x2)";
    sc.box_lo = {-3.0, -3.0};
    sc.box_hi = {3.0, 3.0};
    return sc;
  }
  if (name.rfind("random_ab:", 0) == 0) {
    const std::string tail = name.substr(10);
    if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos)
      throw Error("random_ab needs a nonnegative integer seed");
    return random_ab_scenario(std::stoull(tail));
  }
  throw Error("unknown scenario '" + name + "'");
}

Scenario random_ab_scenario(std::uint64_t seed, int n) {
  const CounterRng rng(seed, 0xab);
  std::uint64_t k = 0;
  auto coef = [&](double scale) { return std::round((2.0 * rng.uniform(k++) - 1.0) * scale * 1000.0) / 1000.0; };
  auto term = [](double c, const std::string& mono) {
    const std::string num = fmt("%.3f", std::abs(c));
    return std::string(c < 0 ? " - " : " + ") + num + (mono.empty() ? "" : "*" + mono);
  };
  auto quadratic = [&](double c0, double scale) {
    std::string s = fmt("%.3f", c0);
    for (int i = 0; i < n; ++i) {
      s += term(coef(scale), "x" + std::to_string(i + 1));
      for (int j = i; j < n; ++j) s += term(coef(scale), "x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1));
    }
    return s;
  };
  Scenario sc;
  sc.name = "random_ab:" + std::to_string(seed);
  sc.dim = n;
  sc.representation = Representation::AlphaBeta;
  sc.metric.assign(static_cast<std::size_t>(n * n), "");
  // Diagonally dominant on the box [-0.5, 0.5]^n.
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const std::string e = i == j ? quadratic(2.0, 0.2) : quadratic(coef(0.1), 0.05);
      sc.metric[static_cast<std::size_t>(i * n + j)] = e;
      sc.metric[static_cast<std::size_t>(j * n + i)] = e;
    }
  for (int i = 0; i < n; ++i) sc.field.push_back(quadratic(i == 0 ? 1.5 : coef(0.5), 0.4));
  sc.weight = quadratic(0.0, 0.3);
  sc.weights = "custom";
  sc.cfg = {0.3, 0.2, n};
  sc.box_lo.assign(static_cast<std::size_t>(n), -0.5);
  sc.box_hi.assign(static_cast<std::size_t>(n), 0.5);
  sc.seed = seed;
  return sc;
}

Scenario load_scenario(const std::string& name_or_path) {
  const auto registry = builtin_scenarios();
  const bool named = name_or_path.rfind("random_ab:", 0) == 0 ||
                     std::any_of(registry.begin(), registry.end(),
                                 [&](const RegistryEntry& e) { return e.name == name_or_path; });
  if (named) return scenario_from_json(builtin_scenario(name_or_path).to_json());
  std::ifstream in(name_or_path);
  if (!in) throw Error("cannot open scenario '" + name_or_path + "' (not a file or built-in name)");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

// ---- reports ----

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Json header(const std::string& command, const Scenario& sc) {
  return Json{{"schema", kReportSchema}, {"tool", std::string("kwb ") + tool_version()}, {"command", command},
              {"scenario", sc.to_json()}};
}

Json weights_block(const WeightConfig& cfg) {
  return Json{{"a", cfg.a}, {"c", cfg.c}, {"n", cfg.n}, {"kappa", cfg.kappa()}, {"nu", cfg.nu()},
              {"regime", regime_name(cfg.regime())}};
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string text_table(const TheoremReport& r) {
  std::string out = r.theorem + "  " + verdict_name(r.verdict) + "  (" + regime_name(r.cfg.regime()) + ")\n";
  for (const auto& c : r.conditions) {
    std::string tag = c.pass() ? "ok" : "FAIL";
    if (c.precondition) tag += " [precondition]";
    if (c.informational) tag += " [info]";
    out += "  " + pad(c.name, 30) + pad(sci(c.residual), 12) + pad("tol " + sci(c.tolerance), 16) + tag + "\n";
  }
  if (!r.message.empty()) out += "  note: " + r.message + "\n";
  return out;
}

ExitCode worst(ExitCode a, ExitCode b) {
  auto rank = [](ExitCode e) {
    switch (e) {
      case ExitCode::Ok: return 0;
      case ExitCode::Fail: return 1;
      case ExitCode::Precondition: return 2;
      case ExitCode::Usage: return 3;
    }
    return 3;
  };
  return rank(a) >= rank(b) ? a : b;
}

ExitCode exit_for(Verdict v) {
  switch (v) {
    case Verdict::Pass: return ExitCode::Ok;
    case Verdict::Fail: return ExitCode::Fail;
    case Verdict::PreconditionFailed: return ExitCode::Precondition;
  }
  return ExitCode::Usage;
}

}  // namespace

Json report_json(const TheoremReport& r) {
  Json conds = Json::array();
  for (const auto& c : r.conditions)
    conds.push_back({{"name", c.name},
                     {"residual", c.residual},
                     {"tolerance", c.tolerance},
                     {"precondition", c.precondition},
                     {"informational", c.informational},
                     {"pass", c.pass()}});
  Json samples = Json::array();
  for (const auto& s : r.samples) samples.push_back({{"x", s.x}, {"values", s.scalars}});
  return Json{{"theorem", r.theorem}, {"weights", weights_block(r.cfg)}, {"verdict", verdict_name(r.verdict)},
              {"message", r.message}, {"conditions", conds}, {"samples", samples}};
}

CommandResult run_check(const Scenario& sc, const std::string& theorem, const ReportOptions& ro) {
  const auto t0 = Clock::now();
  CommandResult res;
  res.report = header("check", sc);
  res.report["theorem"] = theorem;
  res.report["weights"] = weights_block(sc.cfg);
  const KropinaSpace space = sc.space();
  const auto points = sc.sample_points();
  CheckOptions opt;
  opt.tol = sc.tol;
  opt.directions = sc.directions;
  opt.seed = sc.seed;

  std::vector<TheoremReport> reports;
  try {
    if (theorem == "auto") {
      reports = check_auto(space, sc.cfg, points, opt);
    } else if (theorem == "41") {
      reports.push_back(thm41_check(space, sc.cfg, points, opt));
    } else if (theorem == "44") {
      reports.push_back(thm44_check(space, sc.cfg, points, opt));
    } else if (theorem == "51") {
      reports.push_back(thm51_check(space, sc.cfg, points, opt));
    } else if (theorem == "61") {
      if (sc.cfg.regime() != Regime::NuZeroKappaZero)
        throw DispatchError(std::string("thm61 needs the projective weights, got regime ") + regime_name(sc.cfg.regime()));
      reports.push_back(thm61_check(space, points, opt));
    } else {
      throw DispatchError("unknown theorem '" + theorem + "' (auto, 41, 44, 51, 61)");
    }
  } catch (const DispatchError& e) {
    res.report["error"] = {{"kind", "dispatch"}, {"message", e.what()}};
    res.report["verdict"] = "ERROR";
    res.text = std::string("error: ") + e.what() + "\n";
    res.exit = ExitCode::Usage;
    return res;
  } catch (const PreconditionFailure& e) {
    res.report["error"] = {{"kind", "precondition"}, {"message", e.what()}};
    res.report["verdict"] = verdict_name(Verdict::PreconditionFailed);
    res.text = std::string("precondition failed: ") + e.what() + "\n";
    res.exit = ExitCode::Precondition;
    return res;
  }

  Json arr = Json::array();
  res.text = "scenario " + sc.name + "  weights a=" + fmt("%.6g", sc.cfg.a) + " c=" + fmt("%.6g", sc.cfg.c) +
             "  kappa=" + fmt("%.6g", sc.cfg.kappa()) + " nu=" + fmt("%.6g", sc.cfg.nu()) + "\n";
  for (const auto& r : reports) {
    arr.push_back(report_json(r));
    res.text += text_table(r);
    res.exit = worst(res.exit, exit_for(r.verdict));
  }
  res.report["reports"] = arr;
  res.report["verdict"] = res.exit == ExitCode::Ok ? "PASS" : res.exit == ExitCode::Fail ? "FAIL" : "PRECONDITION";
  if (ro.timings) res.report["timings_ms"] = {{"total", elapsed_ms(t0)}};
  return res;
}

namespace {

struct PairTable {
  std::string name;
  double tol = 0.0;
  double max_dev = 0.0;
  Json rows = Json::array();
  void add(const std::vector<double>& x, const std::vector<double>& y, double closed, double generic) {
    const double dev = std::abs(closed - generic) / std::max({1.0, std::abs(closed), std::abs(generic)});
    max_dev = std::max(max_dev, dev);
    rows.push_back({{"x", x}, {"y", y}, {"closed", closed}, {"generic", generic}, {"deviation", dev}});
  }
  void add(const std::vector<double>& x, const std::vector<double>& y, const Vector& closed, const Vector& generic) {
    const double scale = std::max({1.0, closed.cwiseAbs().maxCoeff(), generic.cwiseAbs().maxCoeff()});
    const double dev = (closed - generic).cwiseAbs().maxCoeff() / scale;
    max_dev = std::max(max_dev, dev);
    rows.push_back({{"x", x},
                    {"y", y},
                    {"closed", std::vector<double>(closed.data(), closed.data() + closed.size())},
                    {"generic", std::vector<double>(generic.data(), generic.data() + generic.size())},
                    {"deviation", dev}});
  }
  bool pass() const { return max_dev <= tol; }
};

}  // namespace

CommandResult run_verify(const Scenario& sc, const ReportOptions& ro) {
  const auto t0 = Clock::now();
  CommandResult res;
  res.report = header("verify", sc);
  const KropinaSpace space = sc.space();
  const int n = sc.dim;
  const auto points = sc.sample_points();
  const FinslerPtr F = space.finsler();
  const VolumeDensity bh = space.bh_density();
  const VolumeDensity weighted = space.weighted_density();

  PairTable spray{"spray: (alpha, beta) closed form vs generic", 1e-8};
  PairTable nspray{"spray: navigation form vs generic", 1e-8};
  PairTable ric{"Ricci: (alpha, beta) closed form vs generic", 1e-7};
  PairTable nric{"Ricci: navigation form (isotropic S) vs generic", 1e-7};
  PairTable sbh{"S-curvature (BH): closed form vs generic", 1e-5};
  PairTable sdot{"Sdot (weighted): closed form vs generic", 1e-5};
  PairTable ident{"Ric_{a,c} vs PRic identity, 10 weight pairs", 1e-8};

  bool isotropic = true;
  const CounterRng wr(sc.seed, 0x1de);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    const AbTensors t = ab_tensors(space, x);
    const NavTensors nt = nav_tensors(space, x);
    const bool iso_here = nt.w.R.cwiseAbs().maxCoeff() < 1e-8 && nt.w.S_vec.cwiseAbs().maxCoeff() < 1e-8;
    isotropic = isotropic && iso_here;
    const auto dirs = sample_directions(space, x, sc.directions, CounterRng(sc.seed, 0x7e41).split(k), kVerifyMinW0);
    for (const auto& y : dirs) {
      const AbInvariants v = ab_invariants(t, y);
      const CurvatureSample cw = curvature_sample(*F, weighted, x, y);
      const CurvatureSample cb = curvature_sample(*F, bh, x, y);
      spray.add(x, y, kropina_spray_closed(v, t, y), cw.G);
      nspray.add(x, y, nav_spray(nt, y), cw.G);
      ric.add(x, y, kropina_ricci_closed(v), cw.Ric);
      if (iso_here) nric.add(x, y, nav_ricci_isotropic(nt, y), cw.Ric);
      sbh.add(x, y, s_bh_closed(v), cb.S);
      sdot.add(x, y, (n + 1) * s_dot_closed(v, t, y), cw.Sdot);
    }
    const CurvatureParts parts = curvature_parts(space, x, dirs.front(), Route::Generic);
    for (std::uint64_t j = 0; j < 10; ++j) {
      const WeightConfig cfg{4.0 * wr.uniform(2 * (k * 10 + j)) - 2.0, 4.0 * wr.uniform(2 * (k * 10 + j) + 1) - 2.0, n};
      ident.add(x, dirs.front(), ric_ac(parts, cfg), ric_ac_via_pric(parts, cfg));
    }
  }

  std::vector<PairTable*> tables{&spray, &nspray, &ric, &sbh, &sdot, &ident};
  if (isotropic) tables.insert(tables.begin() + 3, &nric);
  Json arr = Json::array();
  res.text = "scenario " + sc.name + "  " + std::to_string(points.size()) + " points x " +
             std::to_string(sc.directions) + " directions\n";
  for (const PairTable* p : tables) {
    arr.push_back({{"pair", p->name}, {"tolerance", p->tol}, {"max_deviation", p->max_dev}, {"pass", p->pass()},
                   {"rows", p->rows}});
    res.text += "  " + pad(p->name, 52) + pad(sci(p->max_dev), 12) + pad("tol " + sci(p->tol), 16) +
                (p->pass() ? "ok" : "FAIL") + "\n";
    if (!p->pass()) res.exit = ExitCode::Fail;
  }
  if (!isotropic) res.text += "  (navigation Ricci form skipped: S is not isotropic on this scenario)\n";
  res.report["min_w0"] = kVerifyMinW0;
  res.report["tables"] = arr;
  res.report["verdict"] = res.exit == ExitCode::Ok ? "PASS" : "FAIL";
  if (ro.timings) res.report["timings_ms"] = {{"total", elapsed_ms(t0)}};
  return res;
}

CommandResult run_convert(const Scenario& sc, const std::string& target, const std::optional<std::string>& gauge,
                          const ReportOptions& ro) {
  const auto t0 = Clock::now();
  CommandResult res;
  res.report = header("convert", sc);
  const int n = sc.dim;
  KropinaSpace space = sc.space();
  const auto points = sc.sample_points();
  if (gauge) {
    if (target != "ab") throw Error("--gauge applies to conversion into (alpha, beta) data");
    const Expr g = parse_expr(*gauge, n);
    const CompiledExpr gc(g);
    for (const auto& x : points)
      if (!(gc(std::span<const double>(x)) > 0.0)) throw PreconditionFailure("gauge is not positive at a sample point");
    space = space.regauged(g);
  }

  Scenario out = sc;
  out.metric.clear();
  out.field.clear();
  out.normalize_wind = false;
  if (target == "ab") {
    out.representation = Representation::AlphaBeta;
    for (const auto& e : space.a().components()) out.metric.push_back(e.str());
    for (const auto& e : space.b().components()) out.field.push_back(e.str());
    out.gauge = "2";
  } else if (target == "nav") {
    out.representation = Representation::Navigation;
    for (const auto& e : space.h().components()) out.metric.push_back(e.str());
    for (const auto& e : space.W().components()) out.field.push_back(e.str());
    out.gauge = space.gauge().str();
  } else {
    throw Error("--to must be nav or ab");
  }
  out.name = sc.name + "@" + target;
  const Json converted = out.to_json();
  const Scenario back = scenario_from_json(converted);
  const KropinaSpace other = back.space();

  double max_dev = 0.0;
  Json rows = Json::array();
  const FinslerPtr F0 = sc.space().finsler_ab();
  const FinslerPtr F1 = other.finsler_ab();
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    for (const auto& y : sample_directions(space, x, 4, CounterRng(sc.seed, 0xc0).split(k))) {
      const double a = F0->F(x, y), b = F1->F(x, y);
      const double dev = std::abs(a - b) / std::max(1.0, std::abs(a));
      max_dev = std::max(max_dev, dev);
      rows.push_back({{"x", x}, {"y", y}, {"F_source", a}, {"F_converted", b}, {"deviation", dev}});
    }
  }
  constexpr double kTol = 1e-10;
  res.report["target"] = target;
  if (gauge) res.report["gauge"] = *gauge;
  res.report["converted"] = converted;
  res.report["round_trip"] = {{"tolerance", kTol}, {"max_deviation", max_dev}, {"rows", rows}};
  res.exit = max_dev <= kTol ? ExitCode::Ok : ExitCode::Fail;
  res.report["verdict"] = res.exit == ExitCode::Ok ? "PASS" : "FAIL";
  res.text = "converted " + sc.name + " to " + target + "; F agreement " + sci(max_dev) + " (tol " + sci(kTol) + ") " +
             (res.exit == ExitCode::Ok ? "ok" : "FAIL") + "\n";
  if (ro.timings) res.report["timings_ms"] = {{"total", elapsed_ms(t0)}};
  return res;
}

}  // namespace kwb
