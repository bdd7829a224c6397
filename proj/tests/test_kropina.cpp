#include <cmath>
#include <vector>

#include "doctest.h"
#include "kwb/errors.hpp"
#include "kwb/finsler.hpp"
#include "kwb/kropina.hpp"
#include "kwb/kropina_forms.hpp"
#include "support.hpp"

using namespace kwb;
using kwb::testing::kropina_direction;
using kwb::testing::RandomSource;

namespace {

double rel(double a, double b, double floor = 1.0) { return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)}); }

double rel(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff() / std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()}); }

double rel(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff() / std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()}); }

KropinaSpace random_ab(RandomSource& rs, int n, bool weighted = false) {
  Expr f = weighted ? rs.quadratic(n, 0.3) : Expr::constant(0.0);
  return KropinaSpace::from_alpha_beta(RiemannianMetric(n, rs.metric(n), "alpha"), VectorFieldW(rs.field(n)), f);
}

std::vector<double> direction(const KropinaSpace& s, const std::vector<double>& x, RandomSource& rs) {
  return kropina_direction(s.a(), s.b(), x, rs);
}

RiemannianMetric s3() {
  std::vector<Expr> c(9, Expr::constant(0.0));
  c[0] = Expr::constant(1.0);
  c[4] = parse_expr("sin(x1)^2", 3);
  c[8] = parse_expr("cos(x1)^2", 3);
  return RiemannianMetric(3, c);
}

VectorFieldW hopf() { return VectorFieldW({Expr::constant(0.0), Expr::constant(1.0), Expr::constant(1.0)}); }

std::vector<double> s3_point(RandomSource& rs) { return {rs.uniform(0.3, 1.2), rs.uniform(-1.0, 1.0), rs.uniform(-1.0, 1.0)}; }

std::vector<double> nav_direction(const KropinaSpace& s, const std::vector<double>& x, RandomSource& rs) {
  return kropina_direction(s.h(), VectorFieldW([&] {
                             std::vector<Expr> low;
                             for (int i = 0; i < s.dim(); ++i) {
                               Expr e = Expr::constant(0.0);
                               for (int j = 0; j < s.dim(); ++j) e = e + s.h().component(i, j) * s.W().component(j);
                               low.push_back(e);
                             }
                             return low;
                           }()),
                           x, rs);
}

// alpha Euclidean, b_i = x_i + c_i: b_{i;j} = delta_ij, so r_00 = alpha^2 and s = 0.
KropinaSpace radial(int n) {
  std::vector<Expr> b;
  for (int i = 0; i < n; ++i) b.push_back(Expr::variable(i) + Expr::constant(i == 0 ? 3.0 : 0.5));
  return KropinaSpace::from_alpha_beta(RiemannianMetric::euclidean(n, "alpha"), VectorFieldW(b));
}

KropinaSpace flat_wind(int n, Expr f = Expr::constant(0.0)) {
  std::vector<Expr> W(n, Expr::constant(0.0));
  W[0] = Expr::constant(1.0);
  return KropinaSpace::from_navigation(RiemannianMetric::euclidean(n), VectorFieldW(W), Expr::constant(2.0), f);
}

}  // namespace

TEST_CASE("navigation conversions") {
  RandomSource rs(11, 1);
  for (int trial = 0; trial < 5; ++trial) {
    const KropinaSpace s = random_ab(rs, 3);
    for (int k = 0; k < 10; ++k) {
      const auto x = rs.point(3);
      CHECK(s.unit_norm_defect(x) < 1e-12);
      CHECK(s.consistency_residual(x) < 1e-10);
      const auto y = direction(s, x, rs);
      CHECK(rel(s.finsler_ab()->F(x, y), s.finsler_nav()->F(x, y)) < 1e-10);
    }
    // Round trip with the original gauge.
    const auto [h, W] = ab_to_nav(s);
    const KropinaSpace back = KropinaSpace::from_navigation(h, W, s.gauge());
    for (int k = 0; k < 5; ++k) {
      const auto x = rs.point(3);
      CHECK(rel(Matrix(back.a().at(x)), Matrix(s.a().at(x))) < 1e-12);
      CHECK(rel(Vector(back.b().at(x)), Vector(s.b().at(x))) < 1e-12);
    }
  }

  SUBCASE("gauge 2 gives a = h, b = 2W") {
    const KropinaSpace s = KropinaSpace::from_navigation(s3(), hopf());
    const std::vector<double> x{0.7, 0.1, -0.2};
    CHECK(rel(Matrix(s.a().at(x)), Matrix(s.h().at(x))) < 1e-15);
    CHECK(rel(Vector(s.b().at(x)), Vector(2.0 * s.h().at(x) * s.W().at(x))) < 1e-15);
    CHECK(std::abs(CompiledExpr(s.rho())(std::span<const double>(x))) < 1e-15);
  }

  SUBCASE("non-unit wind is rejected") {
    const VectorFieldW W({Expr::constant(0.0), Expr::constant(1.1), Expr::constant(1.0)});
    CHECK_THROWS_AS(nav_to_ab(s3(), W, Expr::constant(2.0), {{0.7, 0.0, 0.0}}), PreconditionFailure);
    CHECK_NOTHROW(nav_to_ab(s3(), hopf(), Expr::constant(2.0), {{0.7, 0.0, 0.0}}));
    const VectorFieldW N = normalize_wind(s3(), W);
    CHECK_NOTHROW(nav_to_ab(s3(), N, Expr::constant(2.0), {{0.7, 0.0, 0.0}, {0.4, 1.0, 2.0}}));
  }

  SUBCASE("symbolic determinant and adjugate") {
    RandomSource r2(3, 9);
    for (int n = 1; n <= 4; ++n) {
      const RiemannianMetric g(n, r2.metric(n));
      const auto x = r2.point(n);
      const Matrix G = g.at(x);
      const double det = CompiledExpr(symbolic_determinant(g.components(), n))(std::span<const double>(x));
      CHECK(rel(det, G.determinant()) < 1e-12);
      const auto adj = symbolic_adjugate(g.components(), n);
      Matrix A(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = CompiledExpr(adj[i * n + j])(std::span<const double>(x));
      CHECK(rel(Matrix(A * G), Matrix(det * Matrix::Identity(n, n))) < 1e-12);
    }
  }
}

TEST_CASE("ab invariants") {
  SUBCASE("parallel beta on Euclidean alpha") {
    const KropinaSpace s = flat_wind(3);
    const AbTensors t = ab_tensors(s, std::vector<double>{0.1, 0.2, 0.3});
    CHECK(t.r.cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.s.cwiseAbs().maxCoeff() == 0.0);
    CHECK(t.r_cov.max_abs() == 0.0);
    CHECK(t.isotropy.holds);
  }
  SUBCASE("conformal beta") {
    const KropinaSpace s = radial(3);
    RandomSource rs(5, 2);
    for (int k = 0; k < 10; ++k) {
      const AbTensors t = ab_tensors(s, rs.point(3));
      CHECK(t.isotropy.holds);
      CHECK(std::abs(t.isotropy.eta - 1.0) < 1e-9);
      CHECK(t.eta_grad.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("symmetry and s_00 = 0") {
    RandomSource rs(6, 3);
    for (int k = 0; k < 30; ++k) {
      const KropinaSpace s = random_ab(rs, 2 + k % 3);
      const auto x = rs.point(s.dim());
      const AbTensors t = ab_tensors(s, x);
      CHECK((t.r - t.r.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((t.s + t.s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
      const auto y = direction(s, x, rs);
      const Vector yv = Eigen::Map<const Vector>(y.data(), s.dim());
      CHECK(std::abs(yv.dot(t.s * yv)) < 1e-12);
    }
  }
}

TEST_CASE("closed forms agree with the generic pipeline") {
  RandomSource rs(21, 4);
  for (int k = 0; k < 30; ++k) {
    const int n = 2 + k % 3;
    const KropinaSpace s = random_ab(rs, n, true);
    const auto x = rs.point(n);
    const auto y = direction(s, x, rs);
    const CurvatureSample c = curvature_sample(*s.finsler(), s.weighted_density(), x, y, &s.f());
    const AbTensors t = ab_tensors(s, x);
    const AbInvariants v = ab_invariants(t, y);
    INFO("sample " << k << " n=" << n);
    CHECK(rel(kropina_spray_closed(v, t, y), c.G) < 1e-8);
    CHECK(rel(nav_spray(nav_tensors(s, x), y), c.G) < 1e-8);
    CHECK(rel(kropina_ricci_closed(v), c.Ric) < 1e-7);
    CHECK(rel(s_weighted_closed(v), c.S) < 1e-5);
    CHECK(rel((n + 1) * s_dot_closed(v, t, y), c.Sdot) < 1e-5);
    CHECK(rel(hess_f_closed(v, t, y), *c.hess) < 1e-8);
  }
}

TEST_CASE("S_BH against the generic pipeline with the Busemann-Hausdorff density") {
  RandomSource rs(22, 4);
  for (int k = 0; k < 10; ++k) {
    const KropinaSpace s = random_ab(rs, 3);
    const auto x = rs.point(3);
    const auto y = direction(s, x, rs);
    CHECK(rel(s_bh_closed(s, x, y), s_curvature_generic(*s.finsler(), s.bh_density(), x, y)) < 1e-5);
  }
}

TEST_CASE("homogeneity of closed forms") {
  RandomSource rs(23, 4);
  const KropinaSpace s = random_ab(rs, 3, true);
  const auto x = rs.point(3);
  const auto y = direction(s, x, rs);
  for (double lam : {0.5, 2.0, 3.0}) {
    std::vector<double> ly(y);
    for (auto& v : ly) v *= lam;
    CHECK(rel(kropina_spray_closed(s, x, ly), Vector(lam * lam * kropina_spray_closed(s, x, y))) < 1e-12);
    CHECK(rel(kropina_ricci_closed(s, x, ly), lam * lam * kropina_ricci_closed(s, x, y)) < 1e-12);
    CHECK(rel(s_bh_closed(s, x, ly), lam * s_bh_closed(s, x, y)) < 1e-12);
    CHECK(rel(s_dot_closed(s, x, ly), lam * lam * s_dot_closed(s, x, y)) < 1e-12);
  }
}

TEST_CASE("flat wind") {
  const std::vector<double> x{0.3, -0.2, 0.1};
  const std::vector<double> y{1.0, 0.4, -0.3};
  const KropinaSpace s = flat_wind(3);
  CHECK(kropina_spray_closed(s, x, y).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(nav_spray(nav_tensors(s, x), y).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(kropina_ricci_closed(s, x, y)) < 1e-8);
  CHECK(nav_riemann_isotropic(nav_tensors(s, x), y).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::abs(nav_ricci_isotropic(nav_tensors(s, x), y)) < 1e-15);
  CHECK(std::abs(s_dot_closed(s, x, y)) < 1e-15);

  // f = lambda |x|^2 / 2: G = 0, so Sdot / (n+1) = lambda |y|^2.
  const double lam = 0.7;
  const KropinaSpace w = flat_wind(3, parse_expr("0.35*(x1^2 + x2^2 + x3^2)", 3));
  CHECK(std::abs(s_dot_closed(w, x, y) - lam * (1.0 + 0.16 + 0.09)) < 1e-12);
}

TEST_CASE("gauge invariance") {
  RandomSource rs(31, 5);
  const KropinaSpace base = KropinaSpace::from_navigation(s3(), normalize_wind(s3(), VectorFieldW({parse_expr("0.3*x2", 3), Expr::constant(1.0), parse_expr("1 + 0.2*x1", 3)})));
  const KropinaSpace other = base.regauged(parse_expr("2 + 0.3*sin(x1) + 0.1*x2*x3", 3));
  for (int k = 0; k < 20; ++k) {
    const auto x = s3_point(rs);
    const auto y = nav_direction(base, x, rs);
    CHECK(other.consistency_residual(x) < 1e-10);
    CHECK(rel(base.finsler_ab()->F(x, y), other.finsler_ab()->F(x, y)) < 1e-12);
    CHECK(rel(kropina_spray_closed(base, x, y), kropina_spray_closed(other, x, y)) < 1e-8);
    CHECK(rel(kropina_ricci_closed(base, x, y), kropina_ricci_closed(other, x, y)) < 1e-8);
    CHECK(rel(s_bh_closed(base, x, y), s_bh_closed(other, x, y)) < 1e-8);
    CHECK(rel(s_dot_closed(base, x, y), s_dot_closed(other, x, y)) < 1e-8);
    CHECK(rel(base.bh_density()(x), other.bh_density()(x)) < 1e-12);
  }
}

TEST_CASE("rs_from_RS matches the alpha-beta route") {
  RandomSource rs(41, 6);
  for (int k = 0; k < 30; ++k) {
    const int n = 2 + k % 3;
    const KropinaSpace s = random_ab(rs, n);
    const auto x = rs.point(n);
    const auto y = direction(s, x, rs);
    const AbInvariants v = ab_invariants(s, x, y);
    const RsFromNav nav = rs_from_RS(s, x, y);
    CHECK(rel(nav.r00, v.r00) < 1e-9);
    CHECK(rel(nav.s0, v.s0) < 1e-9);
    CHECK(rel(nav.s_up0, v.s_up0) < 1e-9);
  }

  SUBCASE("Killing wind with a varying gauge") {
    // rho = 0.1 sin(x2): W^k rho_k = 0.1 cos(x2).
    const KropinaSpace s = KropinaSpace::from_navigation(s3(), hopf(), parse_expr("2*exp(-0.1*sin(x2))", 3));
    for (int k = 0; k < 10; ++k) {
      const auto x = s3_point(rs);
      const NavTensors t = nav_tensors(s, x);
      CHECK(t.w.R.cwiseAbs().maxCoeff() < 1e-12);
      const AbTensors a = ab_tensors(s, x);
      REQUIRE(a.isotropy.holds);
      const double Wrho = t.w.W.dot(t.rho_grad);
      CHECK(std::abs(Wrho - 0.1 * std::cos(x[1])) < 1e-12);
      CHECK(std::abs(Wrho + 0.5 * a.isotropy.eta) < 1e-10);
      const auto y = nav_direction(s, x, rs);
      const Vector yv = Eigen::Map<const Vector>(y.data(), 3);
      const double h2 = yv.dot(t.h * yv);
      CHECK(std::abs(rs_from_RS(t, y).r00 + 2.0 * std::exp(-2.0 * t.rho) * Wrho * h2) < 1e-12);
    }
  }

  SUBCASE("constant gauge") {
    const KropinaSpace s = KropinaSpace::from_navigation(s3(), normalize_wind(s3(), VectorFieldW({parse_expr("0.3*x2", 3), Expr::constant(1.0), Expr::constant(0.5)})), Expr::constant(3.0));
    const std::vector<double> x{0.8, 0.2, 0.1};
    const AbTensors a = ab_tensors(s, x);
    const NavTensors t = nav_tensors(s, x);
    CHECK(rel(a.r, Matrix(2.0 * std::exp(-2.0 * t.rho) * t.w.R)) < 1e-12);
  }
}

TEST_CASE("navigation curvature on the Hopf fibration") {
  const KropinaSpace s = KropinaSpace::from_navigation(s3(), hopf());
  RandomSource rs(51, 7);
  for (int k = 0; k < 30; ++k) {
    const auto x = s3_point(rs);
    const auto y = nav_direction(s, x, rs);
    const NavTensors t = nav_tensors(s, x);
    const KillingIdentityResiduals id = killing_identities(t, y);
    CHECK(id.s1 < 1e-8);
    CHECK(id.s2 < 1e-8);
    CHECK(id.s3 < 1e-8);
    CHECK(id.s_square < 1e-8);
    const double ric = nav_ricci_isotropic(t, y);
    const Matrix R = nav_riemann_isotropic(t, y);
    CHECK(rel(R.trace(), ric) < 1e-12);
    CHECK(rel(ric, ricci_generic(*s.finsler(), x, y)) < 1e-7);
    CHECK(rel(R, riemann_generic(*s.finsler(), x, y)) < 1e-7);
    CHECK(rel(ric, kropina_ricci_closed(s, x, y)) < 1e-8);
  }
}

TEST_CASE("navigation formulas refuse non-isotropic data") {
  const VectorFieldW W = normalize_wind(s3(), VectorFieldW({parse_expr("0.3*x2", 3), Expr::constant(1.0), Expr::constant(1.0)}));
  const NavTensors t = nav_tensors(s3(), W, Expr::constant(0.0), std::vector<double>{0.8, 0.3, 0.1});
  const std::vector<double> y{0.1, 1.0, 1.0};
  CHECK_THROWS_AS(nav_ricci_isotropic(t, y), PreconditionFailure);
  CHECK_THROWS_AS(nav_riemann_isotropic(t, y), PreconditionFailure);
  CHECK_NOTHROW(nav_spray(t, y));
  CHECK_THROWS_AS(nav_spray(t, std::vector<double>{0.0, -1.0, -1.0}), ConicDomainError);
}

TEST_CASE("isotropic S-curvature equivalences") {
  RandomSource rs(61, 8);
  SUBCASE("conformal scenarios") {
    const KropinaSpace hopf_gauged = KropinaSpace::from_navigation(s3(), hopf(), parse_expr("2*exp(-0.1*sin(x2))", 3));
    for (const KropinaSpace* s : {&hopf_gauged}) {
      for (int k = 0; k < 10; ++k) {
        const auto x = s3_point(rs);
        const AbTensors t = ab_tensors(*s, x);
        CHECK(t.isotropy.holds);
        CHECK(t.isotropy.residual < 1e-9);
        CHECK(beta_conformal(*s, x).residual < 1e-9);
        CHECK(nav_tensors(*s, x).w.R.cwiseAbs().maxCoeff() < 1e-9);
        const auto y = nav_direction(*s, x, rs);
        CHECK(std::abs(s_bh_closed(ab_invariants(t, y))) < 1e-9);
      }
    }
    const KropinaSpace r = radial(3);
    for (int k = 0; k < 10; ++k) {
      const auto x = rs.point(3);
      const AbTensors t = ab_tensors(r, x);
      CHECK(t.isotropy.holds);
      CHECK(beta_conformal(r, x).residual < 1e-9);
      CHECK(std::abs(beta_conformal(r, x).psi - 2.0) < 1e-9);
      CHECK(nav_tensors(r, x).w.R.cwiseAbs().maxCoeff() < 1e-9);
      CHECK(std::abs(s_bh_closed(ab_invariants(t, direction(r, x, rs)))) < 1e-9);
    }
  }
  SUBCASE("generic scenarios fail every predicate") {
    for (int k = 0; k < 10; ++k) {
      const KropinaSpace s = random_ab(rs, 3);
      const auto x = rs.point(3);
      const AbTensors t = ab_tensors(s, x);
      CHECK_FALSE(t.isotropy.holds);
      CHECK(beta_conformal(s, x).residual > 1e-6);
      CHECK(nav_tensors(s, x).w.R.cwiseAbs().maxCoeff() > 1e-6);
      double worst = 0.0;
      for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(s_bh_closed(ab_invariants(t, direction(s, x, rs)))));
      CHECK(worst > 1e-6);
    }
  }
}
