#include <cmath>
#include <vector>

#include "doctest.h"
#include "kwb/errors.hpp"
#include "kwb/fd.hpp"
#include "kwb/finsler.hpp"
#include "support.hpp"

using namespace kwb;
using kwb::testing::kropina_direction;
using kwb::testing::RandomSource;

namespace {

struct AbCase {
  RiemannianMetric a;
  VectorFieldW b;
  FinslerPtr F;
};

AbCase random_ab(RandomSource& rs, int n) {
  RiemannianMetric a(n, rs.metric(n), "alpha");
  VectorFieldW b(rs.field(n));
  return {a, b, kropina_ab_finsler(a, b)};
}

AbCase flat_wind(int n) {
  RiemannianMetric a = RiemannianMetric::euclidean(n, "alpha");
  std::vector<Expr> b(n, Expr::constant(0.0));
  b[0] = Expr::constant(2.0);
  VectorFieldW bw(b);
  return {a, bw, kropina_ab_finsler(a, bw)};
}

double rel(double a, double b, double floor = 1.0) { return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)}); }

std::vector<double> scaled(const std::vector<double>& y, double s) {
  std::vector<double> out(y);
  for (auto& v : out) v *= s;
  return out;
}

}  // namespace

TEST_CASE("fundamental tensor") {
  RandomSource rs(21, 0);
  const RiemannianMetric h(3, rs.metric(3));
  const auto Fh = riemannian_finsler(h);
  const std::vector<double> x = rs.point(3), y{0.3, -1.0, 0.4};
  CHECK((fundamental_tensor(*Fh, x, y) - h.at(x)).cwiseAbs().maxCoeff() < 1e-12);

  const AbCase flat = flat_wind(3);
  const std::vector<double> v{1.0, 0.4, -0.2};
  const Matrix g = fundamental_tensor(*flat.F, x, v);
  const Eigen::Map<const Vector> yv(v.data(), 3);
  const double F = flat.F->F(x, v);
  CHECK(rel(yv.dot(g * yv), F * F) < 1e-10);
  const std::vector<double> bad{-1.0, 0.3, 0.0};
  CHECK_THROWS_AS(fundamental_tensor(*flat.F, x, bad), ConicDomainError);
}

TEST_CASE("spray, curvature and Euler identity on random Kropina metrics") {
  RandomSource rs(22, 0);
  CHECK(spray_generic(*riemannian_finsler(RiemannianMetric::euclidean(3)), std::vector<double>{0.1, 0.2, 0.3},
                      std::vector<double>{1.0, 2.0, 3.0})
            .cwiseAbs()
            .maxCoeff() == 0.0);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 3;
    const AbCase c = random_ab(rs, n);
    const auto x = rs.point(n);
    const auto y = kropina_direction(c.a, c.b, x, rs);
    const Vector G = spray_generic(*c.F, x, y);
    const Matrix R = riemann_generic(*c.F, x, y);
    const double F = c.F->F(x, y);
    const Matrix g = fundamental_tensor(*c.F, x, y);
    const Eigen::Map<const Vector> yv(y.data(), n);
    CHECK(rel(yv.dot(g * yv), F * F) < 1e-10);
    CHECK(ricci_generic(*c.F, x, y) == R.trace());
    // R^i_k y^k = 0 for the Riemann curvature of any spray.
    CHECK((R * yv).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, R.cwiseAbs().maxCoeff()));
    for (double lam : {0.5, 2.0, 3.0}) {
      const auto ly = scaled(y, lam);
      CHECK(rel(c.F->F(x, ly), lam * F) < 1e-12);
      const Vector G2 = spray_generic(*c.F, x, ly);
      const Matrix R2 = riemann_generic(*c.F, x, ly);
      const double gs = std::max(1.0, G.cwiseAbs().maxCoeff());
      const double rscale = std::max(1.0, R.cwiseAbs().maxCoeff());
      CHECK((G2 - lam * lam * G).cwiseAbs().maxCoeff() < 1e-9 * lam * lam * gs);
      CHECK((R2 - lam * lam * R).cwiseAbs().maxCoeff() < 1e-9 * lam * lam * rscale);
      CHECK(rel(R2.trace(), lam * lam * R.trace(), lam * lam * rscale) < 1e-9);
    }
  }
}

TEST_CASE("flat wind is flat") {
  const AbCase flat = flat_wind(3);
  const std::vector<double> x{0.5, -0.4, 1.0}, y{1.0, 0.3, 0.7};
  CHECK(spray_generic(*flat.F, x, y).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(ricci_generic(*flat.F, x, y)) < 1e-8);
  const VolumeDensity bh = closed_bh_density(flat.F);
  CHECK(std::abs(s_curvature_generic(*flat.F, bh, x, y)) < 1e-8);
  CHECK(std::abs(sdot_generic(*flat.F, bh, x, y)) < 1e-8);
  CHECK(std::abs(hess_F(parse_expr("3*x1 - x2 + 2*x3", 3), *flat.F, x, y)) < 1e-14);
}

TEST_CASE("distortion") {
  RandomSource rs(23, 0);
  const RiemannianMetric h(3, rs.metric(3));
  const auto x = rs.point(3);
  const std::vector<double> y{0.2, 0.9, -0.5};
  CHECK(std::abs(distortion(*riemannian_finsler(h), riemannian_volume(h), x, y)) < 1e-12);

  const AbCase c = random_ab(rs, 3);
  const auto v = kropina_direction(c.a, c.b, x, rs);
  const VolumeDensity bh = closed_bh_density(c.F);
  const double tau = distortion(*c.F, bh, x, v);
  CHECK(std::isfinite(tau));
  CHECK(std::abs(distortion(*c.F, bh, x, scaled(v, 2.5)) - tau) < 1e-10);
  const Expr f = parse_expr("x1*x2 + sin(x3)", 3);
  const double shifted = distortion(*c.F, weighted_density(bh, f, 3), x, v);
  CHECK(std::abs(shifted - tau - 4.0 * eval_expr<double>(f, x)) < 1e-10);
}

TEST_CASE("S, Sdot and Hess against geodesic integration") {
  RandomSource rs(24, 0);
  const Expr f = parse_expr("0.3*x1^2 - x2*x3 + 0.2*sin(x1)", 3);
  for (int t = 0; t < 6; ++t) {
    const AbCase c = random_ab(rs, 3);
    const auto x = rs.point(3);
    const auto y = kropina_direction(c.a, c.b, x, rs, 0.4);
    const VolumeDensity bh = closed_bh_density(c.F);
    const VolumeDensity wd = weighted_density(bh, f, 3);
    const double S_bh = s_curvature_generic(*c.F, bh, x, y);
    const double S_w = s_curvature_generic(*c.F, wd, x, y);
    const Jet fj = eval_expr<Jet>(f, seed_point(x, 1));
    double f0 = 0.0;
    for (int i = 0; i < 3; ++i) f0 += fj.partial(MultiIndex::unit(3, i)) * y[i];
    CHECK(rel(S_w, S_bh + 4.0 * f0) < 1e-10);

    const auto tau = [&](std::span<const double> cc, std::span<const double> vv) { return distortion(*c.F, wd, cc, vv); };
    const CurveDerivatives d = geodesic_derivatives(*c.F, x, y, tau);
    CHECK(rel(d.d1, S_w) < 1e-5);
    CHECK(rel(d.d2, sdot_generic(*c.F, wd, x, y)) < 1e-5);

    const CompiledExpr cf(f);
    const auto fc = [&](std::span<const double> cc, std::span<const double>) { return cf(cc); };
    const CurveDerivatives h = geodesic_derivatives(*c.F, x, y, fc);
    CHECK(rel(h.d2, hess_F(f, *c.F, x, y)) < 1e-5);

    const CurvatureSample cs = curvature_sample(*c.F, wd, x, y, &f);
    CHECK(rel(cs.S, S_w) < 1e-12);
    CHECK(rel(cs.Sdot, d.d2) < 1e-5);
    CHECK(rel(*cs.hess, h.d2) < 1e-5);
    const Eigen::Map<const Vector> yv(y.data(), 3);
    CHECK((cs.N * yv - 2.0 * cs.G).cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, cs.G.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("Riemannian Hessian agrees with hess_h") {
  RandomSource rs(25, 0);
  const Expr f = parse_expr("x1*x2^2 - cos(x3)", 3);
  for (int t = 0; t < 20; ++t) {
    const RiemannianMetric h(3, rs.metric(3));
    const auto x = rs.point(3);
    const std::vector<double> y{rs.uniform(-1, 1), rs.uniform(-1, 1), rs.uniform(-1, 1)};
    const Eigen::Map<const Vector> yv(y.data(), 3);
    const double expected = yv.dot(hess_h(f, h, x) * yv);
    CHECK(rel(hess_F(f, *riemannian_finsler(h), x, y), expected) < 1e-10);
  }
}

TEST_CASE("geodesic flow") {
  const auto E = riemannian_finsler(RiemannianMetric::euclidean(2));
  const std::vector<double> x{0.5, -1.0}, y{0.3, 0.7};
  const auto line = geodesic_flow(*E, x, y, 2.0, 10);
  CHECK(std::abs(line.back().c(0) - (0.5 + 0.6)) < 1e-15);
  CHECK(std::abs(line.back().c(1) - (-1.0 + 1.4)) < 1e-15);
  CHECK_THROWS(geodesic_flow(*E, x, y, 1e-20, 10));

  RandomSource rs(26, 0);
  for (int t = 0; t < 5; ++t) {
    const AbCase c = random_ab(rs, 3);
    const auto p = rs.point(3);
    const auto v = kropina_direction(c.a, c.b, p, rs, 0.5);
    const auto path = geodesic_flow(*c.F, p, v, 0.5, 200);
    const double F0 = c.F->F(p, v);
    double drift = 0.0;
    for (const auto& q : path)
      drift = std::max(drift, std::abs(c.F->F(std::span<const double>(q.c.data(), 3), std::span<const double>(q.v.data(), 3)) - F0));
    CHECK(drift < 1e-7 * std::max(1.0, F0));
    // Re-differentiate the discrete path: c'' ~ -2 G.
    const std::size_t k = path.size() / 2;
    const double dt = path[1].t - path[0].t;
    const Vector acc = (path[k + 1].v - path[k - 1].v) / (2.0 * dt);
    const Vector G = spray_generic(*c.F, std::span<const double>(path[k].c.data(), 3),
                                   std::span<const double>(path[k].v.data(), 3));
    CHECK((acc + 2.0 * G).cwiseAbs().maxCoeff() < 1e-4 * std::max(1.0, G.cwiseAbs().maxCoeff()));
  }

  // Flat wind: geodesics are straight lines.
  const AbCase flat = flat_wind(3);
  const std::vector<double> o{0.0, 0.0, 0.0}, w{1.0, 0.5, 0.0};
  const auto path = geodesic_flow(*flat.F, o, w, 1.0, 20);
  CHECK(std::abs(path.back().c(1) - 0.5) < 1e-14);
}

TEST_CASE("Busemann-Hausdorff density by Monte Carlo") {
  const auto E = riemannian_finsler(RiemannianMetric::euclidean(2));
  const std::vector<double> x2{0.0, 0.0};
  const BhDensityEstimate e = bh_density(*E, x2, 100000, 5);
  CHECK(std::abs(e.sigma - 1.0) < 3.0 * e.standard_error);

  RandomSource rs(27, 0);
  for (int t = 0; t < 3; ++t) {
    const AbCase c = random_ab(rs, 3);
    const auto x = rs.point(3);
    const BhDensityEstimate k = bh_density(*c.F, x, 100000, 100 + t);
    REQUIRE(k.closed_form);
    CHECK(std::abs(k.sigma - *k.closed_form) < 3.0 * k.standard_error);
    const BhDensityEstimate k2 = bh_density(*scaled_finsler(c.F, 2.0), x, 100000, 100 + t);
    CHECK(std::abs(k2.volume * 8.0 - k.volume) < 1e-12 * k.volume);
  }

  // Without a closed-form box the radial probe still brackets the set.
  FunctionFinslerSpec spec;
  spec.n = 2;
  spec.in_domain = [](std::span<const double>, std::span<const double> y) { return y[0] != 0.0 || y[1] != 0.0; };
  spec.F = [](std::span<const double>, std::span<const double> y) { return std::sqrt(4.0 * y[0] * y[0] + y[1] * y[1]); };
  spec.L = [](std::span<const Jet>, std::span<const Jet> y) { return 4.0 * y[0] * y[0] + y[1] * y[1]; };
  const auto ell = function_finsler(spec);
  const BhDensityEstimate p = bh_density(*ell, x2, 100000, 9);
  CHECK(std::abs(p.sigma - 2.0) < 3.0 * p.standard_error);
}

TEST_CASE("jet derivatives of L agree with finite differences") {
  RandomSource rs(28, 0);
  int checks = 0;
  for (int t = 0; t < 10; ++t) {
    const AbCase c = random_ab(rs, 3);
    const auto x = rs.point(3);
    const auto y = kropina_direction(c.a, c.b, x, rs, 0.4);
    const SprayJets s = spray_jets(*c.F, x, y, 3);
    std::vector<double> z(x);
    z.insert(z.end(), y.begin(), y.end());
    const ScalarFunction L = [&](std::span<const double> p) {
      const double f = c.F->F(p.subspan(0, 3), p.subspan(3, 3));
      return f * f;
    };
    for (int k = 0; k < 3; ++k) {
      MultiIndex mi(6);
      const int deg = 1 + rs.pick(3);
      for (int d = 0; d < deg; ++d) mi = mi + MultiIndex::unit(6, rs.pick(6));
      const double step = deg == 3 ? 5e-3 : 1e-3;
      const double ad = s.L.partial(mi);
      const double fd = fd_partial(L, z, mi, step);
      INFO("index " << mi.str());
      CHECK(rel(ad, fd) < 1e-5);
      ++checks;
    }
  }
  CHECK(checks == 30);
}
