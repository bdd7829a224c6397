// Acceptance run: one line per criterion, exit 0 only when every criterion holds.
// Tolerances are pinned here and never read from the command line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "kwb/einstein_lab.hpp"
#include "kwb/fd.hpp"
#include "kwb/finsler.hpp"
#include "kwb/kropina_forms.hpp"
#include "kwb/riemannian.hpp"
#include "kwb/rng.hpp"
#include "kwb/workbench.hpp"

using namespace kwb;

namespace {

constexpr double kSprayTol = 1e-8;
constexpr double kRicciTol = 1e-7;
constexpr double kSTol = 1e-5;
constexpr double kSdotTol = 1e-5;
constexpr double kPredicateTol = 1e-8;
constexpr double kKillingTol = 1e-8;
constexpr double kTheoremTol = 1e-6;
constexpr double kIdentityTol = 1e-8;
constexpr double kFdTol = 1e-5;
constexpr double kMcSigmas = 3.0;
constexpr std::int64_t kMcSamples = 100000;
// Closed-vs-generic grids keep h-unit directions at W_0 > 0.1, as the checkers do.
// Closer to the cone boundary the generic jets lose digits like beta^-4.
constexpr double kMinW0 = 0.1;

struct Line {
  int id = 0;
  std::string title;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;
};

double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

double rel(const Vector& a, const Vector& b) {
  const double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

const std::vector<std::string> kCrossScenarios{"euclid_parallel", "s3_hopf", "euclid_gaussian", "torus_wind",
                                                "random_ab:1"};

const std::vector<std::string> kAllScenarios{"euclid_parallel", "s3_hopf",    "s3_hopf_weighted", "euclid_gaussian",
                                             "euclid_twist",    "torus_wind", "random_ab:1",      "random_ab:2"};

// 6 points x 5 directions = 30 samples per scenario.
struct Grid {
  Scenario sc;
  KropinaSpace space;
  std::vector<std::vector<double>> points;
  std::vector<std::vector<std::vector<double>>> dirs;
};

Grid grid(const std::string& name, int points = 6, int directions = 5) {
  const Scenario sc = load_scenario(name);
  Grid g{sc, sc.space(), {}, {}};
  g.points = g.sc.sample_points(points);
  for (std::size_t k = 0; k < g.points.size(); ++k)
    g.dirs.push_back(sample_directions(g.space, g.points[k], directions, CounterRng(g.sc.seed, 0xacc).split(k), kMinW0));
  return g;
}

Line spray_criterion() {
  Line l{1, "spray: (alpha, beta) and navigation forms vs generic", 0.0, kSprayTol};
  int samples = 0;
  for (const auto& name : kCrossScenarios) {
    const Grid g = grid(name);
    const FinslerPtr F = g.space.finsler();
    for (std::size_t k = 0; k < g.points.size(); ++k) {
      const auto& x = g.points[k];
      const AbTensors t = ab_tensors(g.space, x);
      const NavTensors nt = nav_tensors(g.space, x);
      for (const auto& y : g.dirs[k]) {
        const Vector G = spray_generic(*F, x, y);
        l.measured = std::max({l.measured, rel(kropina_spray_closed(ab_invariants(t, y), t, y), G),
                               rel(nav_spray(nt, y), G)});
        ++samples;
      }
    }
  }
  l.pass = l.measured <= l.tolerance && samples == 150;
  l.note = std::to_string(samples) + " samples on 5 scenarios";
  return l;
}

Line ricci_criterion() {
  Line l{2, "Ricci: closed form and navigation form (isotropic S) vs generic", 0.0, kRicciTol};
  int nav_samples = 0;
  for (const auto& name : kCrossScenarios) {
    const Grid g = grid(name);
    const FinslerPtr F = g.space.finsler();
    const bool isotropic = name == "euclid_parallel" || name == "s3_hopf";
    for (std::size_t k = 0; k < g.points.size(); ++k) {
      const auto& x = g.points[k];
      const AbTensors t = ab_tensors(g.space, x);
      const NavTensors nt = nav_tensors(g.space, x);
      for (const auto& y : g.dirs[k]) {
        const double ric = ricci_generic(*F, x, y);
        l.measured = std::max(l.measured, rel(kropina_ricci_closed(ab_invariants(t, y)), ric));
        if (isotropic) {
          l.measured = std::max(l.measured, rel(nav_ricci_isotropic(nt, y), ric));
          ++nav_samples;
        }
      }
    }
  }
  // Whole cone on s3_hopf, where Ric = 2 F^2 exactly (constant flag curvature 1).
  const Scenario hopf = load_scenario("s3_hopf");
  const KropinaSpace space = hopf.space();
  const FinslerPtr F = space.finsler();
  double closed_dev = 0.0, generic_dev = 0.0, beta_min = 1.0;
  for (const auto& x : hopf.sample_points(6)) {
    for (const auto& y : sample_directions(space, x, 30, CounterRng(hopf.seed, 0xc0e), 1e-3)) {
      const AbInvariants v = ab_invariants(space, x, y);
      const double exact = 2.0 * v.F * v.F;
      closed_dev = std::max(closed_dev, rel(kropina_ricci_closed(v), exact));
      generic_dev = std::max(generic_dev, rel(ricci_generic(*F, x, y), exact));
      beta_min = std::min(beta_min, v.beta);
    }
  }
  l.pass = l.measured <= l.tolerance && nav_samples == 60 && closed_dev <= l.tolerance;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "navigation form on euclid_parallel and s3_hopf; whole cone on s3_hopf (beta >= %.1e) vs Ric = 2F^2: "
                "closed %.1e, generic %.1e",
                beta_min, closed_dev, generic_dev);
  l.note = buf;
  return l;
}

Line s_criterion() {
  Line l{3, "S-curvature (BH) closed vs generic; MC density vs closed form", 0.0, kSTol};
  for (const auto& name : kCrossScenarios) {
    const Grid g = grid(name);
    const FinslerPtr F = g.space.finsler();
    const VolumeDensity bh = g.space.bh_density();
    for (std::size_t k = 0; k < g.points.size(); ++k)
      for (const auto& y : g.dirs[k])
        l.measured = std::max(l.measured, rel(s_bh_closed(g.space, g.points[k], y),
                                              s_curvature_generic(*F, bh, g.points[k], y)));
  }
  // MC density at one point per scenario, in units of its standard error.
  double worst_z = 0.0;
  bool have_closed = true;
  std::uint64_t seed = 1;
  for (const std::string name : {"s3_hopf", "torus_wind", "random_ab:1"}) {
    const Grid g = grid(name, 1, 1);
    const BhDensityEstimate e = bh_density(*g.space.finsler(), g.points[0], kMcSamples, seed++);
    have_closed = have_closed && e.closed_form.has_value();
    if (e.closed_form) worst_z = std::max(worst_z, std::abs(e.sigma - *e.closed_form) / e.standard_error);
  }
  l.pass = l.measured <= l.tolerance && have_closed && worst_z <= kMcSigmas;
  char buf[96];
  std::snprintf(buf, sizeof buf, "MC worst |z| = %.2f (limit %.0f SE, %lld samples)", worst_z, kMcSigmas,
                static_cast<long long>(kMcSamples));
  l.note = buf;
  return l;
}

Line sdot_criterion() {
  Line l{4, "Sdot (weighted density) closed vs generic", 0.0, kSdotTol};
  bool nonconstant_f = false;
  for (const auto& name : kCrossScenarios) {
    const Grid g = grid(name);
    const FinslerPtr F = g.space.finsler();
    const VolumeDensity w = g.space.weighted_density();
    const int n = g.sc.dim;
    nonconstant_f = nonconstant_f || g.sc.weight != "0";
    for (std::size_t k = 0; k < g.points.size(); ++k)
      for (const auto& y : g.dirs[k])
        l.measured = std::max(l.measured, rel((n + 1) * s_dot_closed(g.space, g.points[k], y),
                                              sdot_generic(*F, w, g.points[k], y)));
  }
  l.pass = l.measured <= l.tolerance && nonconstant_f;
  l.note = "includes nonconstant f (euclid_gaussian, random_ab:1)";
  return l;
}

Line predicate_criterion() {
  Line l{5, "isotropy fit, S_BH = 0, R_ij = 0, conformal beta agree", 0.0, kPredicateTol};
  bool agree = true;
  bool twist_false = false;
  double weakest_false = 1e300;
  std::string summary;
  for (const auto& name : kAllScenarios) {
    const Grid g = grid(name, 6, 6);
    // Worst measure of each predicate over the grid.
    double iso = 0.0, s = 0.0, R = 0.0, conf = 0.0;
    for (std::size_t k = 0; k < g.points.size(); ++k) {
      const auto& x = g.points[k];
      const AbTensors t = ab_tensors(g.space, x, kPredicateTol);
      iso = std::max(iso, t.isotropy.residual / t.isotropy.scale);
      for (const auto& y : g.dirs[k]) s = std::max(s, std::abs(s_bh_closed(ab_invariants(t, y))));
      R = std::max(R, nav_tensors(g.space, x).w.R.cwiseAbs().maxCoeff());
      conf = std::max(conf, beta_conformal(g.space, x).residual);
    }
    const bool b[4] = {iso < kPredicateTol, s < kPredicateTol, R < kPredicateTol, conf < kPredicateTol};
    const bool all = b[0] && b[1] && b[2] && b[3];
    const bool none = !b[0] && !b[1] && !b[2] && !b[3];
    agree = agree && (all || none);
    if (name == "euclid_twist") twist_false = none;
    // measured: largest predicate value on jointly true scenarios; weakest violation on the false ones.
    if (all) l.measured = std::max({l.measured, iso, s, R, conf});
    if (none) weakest_false = std::min({weakest_false, iso, s, R, conf});
    summary += name + (all ? "=T " : none ? "=F " : "=mixed ");
  }
  l.pass = agree && twist_false;
  char buf[64];
  std::snprintf(buf, sizeof buf, "(weakest violation %.1e)", weakest_false);
  l.note = summary + buf;
  return l;
}

Line killing_criterion() {
  Line l{6, "Killing identity W_{k|i|j} + W_m Rbar_j^m_{ki} on s3_hopf", 0.0, kKillingTol};
  const Scenario sc = load_scenario("s3_hopf");
  const KropinaSpace space = sc.space();
  const auto points = sc.sample_points(20);
  for (const auto& x : points) {
    const NavTensors nt = nav_tensors(space, x);
    const Vector& Wl = nt.w.W_low;
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          double s = nt.w_second(k, i, j);
          for (int m = 0; m < 3; ++m) s += Wl(m) * nt.riemann(m, j, k, i);
          l.measured = std::max(l.measured, std::abs(s));
        }
  }
  l.pass = l.measured < l.tolerance && points.size() == 20;
  l.note = "20 points";
  return l;
}

const Condition* find(const TheoremReport& r, const std::string& name) {
  for (const auto& c : r.conditions)
    if (c.name == name) return &c;
  return nullptr;
}

double worst_binding(const TheoremReport& r) {
  double w = 0.0;
  for (const auto& c : r.conditions)
    if (!c.informational && !c.precondition) w = std::max(w, c.residual);
  return w;
}

Line thm41_criterion() {
  Line l{7, "navigation-side checker: s3_hopf and euclid_gaussian end to end", 0.0, kTheoremTol};
  CheckOptions opt;
  opt.tol = kTheoremTol;
  bool ok = true;
  double gauss_theta = 0.0;
  for (const std::string name : {"s3_hopf", "euclid_gaussian"}) {
    const Scenario sc = load_scenario(name);
    opt.seed = sc.seed;
    opt.directions = sc.directions;
    const TheoremReport r = thm41_check(sc.space(), sc.cfg, sc.sample_points(), opt);
    ok = ok && r.verdict == Verdict::Pass;
    for (const char* c : {"einstein_formula", "einstein_fit", "theta_formula_vs_fit", "sigma_formula_vs_fit"}) {
      const Condition* cond = find(r, c);
      ok = ok && cond != nullptr;
      if (cond) l.measured = std::max(l.measured, cond->residual);
    }
    if (name == "euclid_gaussian")
      for (const auto& s : r.samples)
        for (const auto& [key, value] : s.scalars)
          if (key.rfind("theta_fit_", 0) == 0) gauss_theta = std::max(gauss_theta, std::abs(value));
  }
  l.pass = ok && l.measured < l.tolerance && gauss_theta > 1e-3;
  char buf[64];
  std::snprintf(buf, sizeof buf, "euclid_gaussian max |theta_fit| = %.4g", gauss_theta);
  l.note = buf;
  return l;
}

Line regime_criterion() {
  Line l{8, "(alpha, beta) checkers: flat wind, s3_hopf, euclid_twist", 0.0, kTheoremTol};
  CheckOptions opt;
  opt.tol = kTheoremTol;
  bool ok = true;
  std::string note;
  const WeightConfig nu0{0.0, 6.0 / 16.0, 3};  // nu = 0, kappa = 2
  const WeightConfig nu_ne0 = WeightConfig::ric_inf(3);
  auto run = [&](const std::string& name, const std::string& label, const TheoremReport& r) {
    ok = ok && r.verdict == Verdict::Pass;
    l.measured = std::max(l.measured, worst_binding(r));
    note += name + ":" + label + (r.verdict == Verdict::Pass ? " " : "(" + std::string(verdict_name(r.verdict)) + ") ");
  };
  for (const std::string name : {"euclid_parallel", "s3_hopf"}) {
    const Scenario sc = load_scenario(name);
    const KropinaSpace space = sc.space();
    const auto pts = sc.sample_points();
    opt.seed = sc.seed;
    if (name == "euclid_parallel") run(name, "41", thm41_check(space, nu_ne0, pts, opt));
    run(name, "44", thm44_check(space, nu_ne0, pts, opt));
    run(name, "51", thm51_check(space, nu0, pts, opt));
    run(name, "61", thm61_check(space, pts, opt));
  }
  const CommandResult twist = run_check(load_scenario("euclid_twist"), "auto", {false});
  const bool twist_ok = twist.exit == ExitCode::Precondition;
  note += std::string("euclid_twist exit ") + std::to_string(static_cast<int>(twist.exit));
  l.pass = ok && twist_ok && l.measured < l.tolerance;
  l.note = note;
  return l;
}

Line identity_criterion() {
  Line l{9, "Ric_{a,c} vs PRic identity; projective constants vanish", 0.0, kIdentityTol};
  const CounterRng rng(9, 0x1d);
  std::uint64_t draw = 0;
  for (const auto& name : kAllScenarios) {
    const Grid g = grid(name, 3, 2);
    for (std::size_t k = 0; k < g.points.size(); ++k)
      for (const auto& y : g.dirs[k]) {
        const CurvatureParts p = curvature_parts(g.space, g.points[k], y, Route::Generic);
        for (int j = 0; j < 10; ++j) {
          const WeightConfig cfg{4.0 * rng.uniform(draw) - 2.0, 4.0 * rng.uniform(draw + 1) - 2.0, g.sc.dim};
          draw += 2;
          l.measured = std::max(l.measured, rel(ric_ac(p, cfg), ric_ac_via_pric(p, cfg)));
        }
      }
  }
  // The projective constants, raw and through weight_constants.
  double raw = 0.0;
  bool exact = true;
  for (int n = 2; n <= 4; ++n) {
    const WeightConfig c = WeightConfig::pric(n);
    const double kappa = (n - 1) - c.a * (n + 1);
    const double nu = 3.0 * (n - 1) - 4.0 * c.a * (n + 1) - c.c * (n + 1) * (n + 1);
    raw = std::max({raw, std::abs(kappa), std::abs(nu)});
    exact = exact && c.kappa() == 0.0 && c.nu() == 0.0 && c.regime() == Regime::NuZeroKappaZero;
  }
  l.pass = l.measured <= l.tolerance && exact;
  char buf[96];
  std::snprintf(buf, sizeof buf, "10 (a,c) pairs per sample; pric kappa=nu=0 for n=2..4 (raw %.1e)", raw);
  l.note = buf;
  return l;
}

Line ad_criterion() {
  Line l{10, "jet derivatives vs finite differences (30 seeded spot checks)", 0.0, kFdTol};
  const CounterRng rng(10, 0xad);
  std::uint64_t draw = 0;
  auto pick = [&](int m) { return static_cast<int>(rng.uniform(draw++) * m) % m; };
  int checks = 0, nonzero = 0;
  for (int t = 0; t < 30; ++t) {
    // Scenario t mod 5, a different chart point and direction for every check.
    const Grid g = grid(kCrossScenarios[t % kCrossScenarios.size()], 6, 1);
    const int n = g.sc.dim;
    const auto& x = g.points[static_cast<std::size_t>(t / 5)];
    const auto& y = g.dirs[static_cast<std::size_t>(t / 5)][0];
    const FinslerPtr F = g.space.finsler();
    const SprayJets jets = spray_jets(*F, x, y, 3);
    std::vector<double> z(x);
    z.insert(z.end(), y.begin(), y.end());
    // Redraw a few times to avoid structurally zero derivatives.
    MultiIndex mi;
    double ad = 0.0;
    int comp = 0;
    const bool of_L = t % 2 == 0;
    for (int attempt = 0; attempt < 8; ++attempt) {
      if (of_L) {
        const int deg = 1 + pick(3);
        mi = MultiIndex(2 * n);
        for (int d = 0; d < deg; ++d) mi = mi + MultiIndex::unit(2 * n, pick(2 * n));
        ad = jets.L.partial(mi);
      } else {
        comp = pick(n);
        mi = MultiIndex::unit(2 * n, pick(2 * n));
        ad = jets.G[static_cast<std::size_t>(comp)].partial(mi);
      }
      if (std::abs(ad) > 1e-12) break;
    }
    ScalarFunction fn;
    if (of_L)
      fn = [&](std::span<const double> p) {
        const double f = F->F(p.subspan(0, n), p.subspan(n, n));
        return f * f;
      };
    else
      fn = [&](std::span<const double> p) {
        return spray_generic(*F, p.subspan(0, n), p.subspan(n, n))(comp);
      };
    // Steps shrink with the distance of y to the cone boundary beta = 0.
    const AbInvariants v = ab_invariants(g.space, x, y);
    const double room = std::min(1.0, v.beta / std::sqrt(v.b2));
    const double step = (mi.degree() == 3 ? 5e-3 : 1e-3) * room;
    l.measured = std::max(l.measured, rel(ad, fd_partial(fn, z, mi, step)));
    ++checks;
    if (std::abs(ad) > 1e-12) ++nonzero;
  }
  l.pass = l.measured <= l.tolerance && checks == 30;
  l.note = "L to third order, first derivatives of G; " + std::to_string(nonzero) + " of 30 nonzero";
  return l;
}

}  // namespace

int main() {
  const std::vector<Line (*)()> criteria{spray_criterion,     ricci_criterion,   s_criterion,      sdot_criterion,
                                         predicate_criterion, killing_criterion, thm41_criterion,  regime_criterion,
                                         identity_criterion,  ad_criterion};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Line l{static_cast<int>(k + 1), "", 0.0, 0.0, false, ""};
    try {
      l = criteria[k]();
    } catch (const std::exception& e) {
      l.note = std::string("error: ") + e.what();
    }
    if (!l.pass) ++failed;
    std::printf("criterion %2d  %s  measured %.2e  tol %.0e  %s\n    %s\n", l.id, l.pass ? "PASS" : "FAIL",
                l.measured, l.tolerance, l.title.c_str(), l.note.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria pass\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
