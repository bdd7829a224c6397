#include "kwb/kropina_forms.hpp"

#include <algorithm>
#include <cmath>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

std::size_t at(int i, int j, int n) { return static_cast<std::size_t>(i * n + j); }

Vector as_vector(std::span<const double> y) {
  Vector v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

Vector half_gamma_yy(const Tensor3& gamma, const Vector& y) {
  const int n = static_cast<int>(y.size());
  Vector G = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) G(i) += 0.5 * gamma(i, j, k) * y(j) * y(k);
  return G;
}

IsotropyFit fit_isotropy(const Matrix& r, const Matrix& a, double tol) {
  const int n = static_cast<int>(r.rows());
  std::vector<Vector> dirs;
  for (int i = 0; i < n; ++i) dirs.push_back(Vector::Unit(n, i));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) dirs.push_back(Vector::Unit(n, i) + Vector::Unit(n, j));
  double num = 0.0, den = 0.0;
  for (const auto& v : dirs) {
    const double q = v.dot(a * v);
    num += v.dot(r * v) * q;
    den += q * q;
  }
  IsotropyFit fit;
  fit.eta = num / den;
  double res = 0.0;
  for (const auto& v : dirs) {
    const double d = v.dot(r * v) - fit.eta * v.dot(a * v);
    res += d * d;
  }
  fit.residual = std::sqrt(res);
  fit.scale = std::max(r.cwiseAbs().maxCoeff(), 1.0);
  fit.holds = fit.residual < tol * fit.scale;
  return fit;
}

}  // namespace

AbTensors ab_tensors(const KropinaSpace& space, std::span<const double> x, double isotropy_tol) {
  const int n = space.dim();
  const LeviCivita lc = levi_civita(space.a(), x);
  AbTensors t;
  t.n = n;
  t.a = lc.g_val;
  t.a_inv = lc.g_inv_val;

  const std::vector<Jet> bj = space.b().at(std::span<const Jet>(lc.x));
  std::vector<Jet> bup;
  for (int i = 0; i < n; ++i) {
    Jet s = constant_like(lc.x[0], 0.0);
    for (int j = 0; j < n; ++j) s += lc.g_inv(i, j) * bj[static_cast<std::size_t>(j)];
    bup.push_back(std::move(s));
  }
  t.b = values(bj);
  t.b_up = values(bup);
  t.b2 = t.b.dot(t.b_up);
  if (!(t.b2 > 0.0)) throw DomainError("beta vanishes");

  const std::vector<Jet> bcov = cov_derivative_covector(lc, bj);
  std::vector<Jet> rj, sj;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      rj.push_back((bcov[at(i, j, n)] + bcov[at(j, i, n)]) * 0.5);
      sj.push_back((bcov[at(i, j, n)] - bcov[at(j, i, n)]) * 0.5);
    }
  t.r.resize(n, n);
  t.s.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t.r(i, j) = rj[at(i, j, n)].value();
      t.s(i, j) = sj[at(i, j, n)].value();
    }
  t.r_up = t.a_inv * t.r;
  t.s_up = t.a_inv * t.s;
  t.r_vec = t.r.transpose() * t.b_up;
  t.s_vec = t.s.transpose() * t.b_up;
  t.r_up_vec = t.a_inv * t.r_vec;
  t.s_up_vec = t.a_inv * t.s_vec;
  t.r_scalar = t.r_vec.dot(t.b_up);
  t.e = t.r + t.b * t.s_vec.transpose() + t.s_vec * t.b.transpose();

  t.r_cov = cov_derivative_2tensor(lc, rj);
  t.s_cov = cov_derivative_2tensor(lc, sj);

  std::vector<Jet> rv, sv;
  for (int j = 0; j < n; ++j) {
    Jet rs = constant_like(rj[0], 0.0), ss = constant_like(rj[0], 0.0);
    for (int i = 0; i < n; ++i) {
      rs += bup[static_cast<std::size_t>(i)] * rj[at(i, j, n)];
      ss += bup[static_cast<std::size_t>(i)] * sj[at(i, j, n)];
    }
    rv.push_back(std::move(rs));
    sv.push_back(std::move(ss));
  }
  const auto rvc = cov_derivative_covector(lc, rv);
  const auto svc = cov_derivative_covector(lc, sv);
  t.r_vec_cov.resize(n, n);
  t.s_vec_cov.resize(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k) {
      t.r_vec_cov(j, k) = rvc[at(j, k, n)].value();
      t.s_vec_cov(j, k) = svc[at(j, k, n)].value();
    }

  t.gamma_a = christoffel(lc);
  t.ricci_a = ricci(riemann(lc));
  t.isotropy = fit_isotropy(t.r, t.a, isotropy_tol);

  Jet trace = constant_like(rj[0], 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) trace += lc.g_inv(i, j) * rj[at(i, j, n)];
  t.eta_grad.resize(n);
  for (int k = 0; k < n; ++k) t.eta_grad(k) = trace.partial(MultiIndex::unit(n, k)) / n;

  const Jet fj = eval_expr<Jet>(space.f(), std::span<const Jet>(lc.x));
  t.f_grad.resize(n);
  t.f_partial2.resize(n, n);
  for (int i = 0; i < n; ++i) t.f_grad(i) = fj.partial(MultiIndex::unit(n, i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.f_partial2(i, j) = fj.partial(MultiIndex::unit(n, i) + MultiIndex::unit(n, j));
  t.f_hess_a = t.f_partial2;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) t.f_hess_a(i, j) -= t.gamma_a(m, i, j) * t.f_grad(m);
  return t;
}

AbInvariants ab_invariants(const AbTensors& t, std::span<const double> yspan) {
  const int n = t.n;
  if (static_cast<int>(yspan.size()) != n) throw Error("tangent vector dimension mismatch");
  const Vector y = as_vector(yspan);
  AbInvariants v;
  v.n = n;
  v.alpha2 = y.dot(t.a * y);
  v.beta = t.b.dot(y);
  if (!(v.beta > 0.0)) throw ConicDomainError("beta(y) must be positive");
  v.F = v.alpha2 / v.beta;
  v.b2 = t.b2;
  v.r00 = y.dot(t.r * y);
  v.r0 = t.r_vec.dot(y);
  v.s0 = t.s_vec.dot(y);
  v.r = t.r_scalar;
  v.rkk = t.r_up.trace();
  v.s_i0 = t.s * y;
  v.s_up0 = t.s_up * y;
  v.r_0i = t.r * y;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        v.r00_0 += t.r_cov(i, j, k) * y(i) * y(j) * y(k);
        v.r00_k_bk += t.r_cov(i, j, k) * y(i) * y(j) * t.b_up(k);
      }
  v.r0_0 = y.dot(t.r_vec_cov * y);
  v.s0_0 = y.dot(t.s_vec_cov * y);
  v.s0_k_bk = y.dot(t.s_vec_cov * t.b_up);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      v.sk_k += t.a_inv(k, l) * t.s_vec_cov(l, k);
      for (int j = 0; j < n; ++j) v.sk0_k += t.a_inv(k, l) * t.s_cov(l, j, k) * y(j);
    }
  v.sk_sk0 = t.s_vec.dot(v.s_up0);
  v.sk_sk = t.s_vec.dot(t.s_up_vec);
  v.sjk_skj = (t.s_up * t.s_up).trace();
  v.rk_sk0 = t.r_vec.dot(v.s_up0);
  v.r0k_sk = v.r_0i.dot(t.s_up_vec);
  v.r0k_sk0 = v.r_0i.dot(v.s_up0);
  v.ri_si = t.r_vec.dot(t.s_up_vec);
  v.ski_rik = (t.s_up * t.r_up).trace();
  v.ric_alpha = y.dot(t.ricci_a * y);
  v.G_alpha = half_gamma_yy(t.gamma_a, y);
  if (t.isotropy.holds) v.eta = t.isotropy.eta;
  v.eta_0 = t.eta_grad.dot(y);
  v.bk_etak = t.eta_grad.dot(t.b_up);
  v.f0 = t.f_grad.dot(y);
  v.f_00 = y.dot(t.f_partial2 * y);
  v.hess_f_alpha = y.dot(t.f_hess_a * y);
  return v;
}

AbInvariants ab_invariants(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  return ab_invariants(ab_tensors(space, x), y);
}

Vector kropina_spray_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> yspan) {
  const Vector y = as_vector(yspan);
  const double b2 = v.b2;
  const Vector T = -0.5 * v.F * v.s_up0 + (v.F * v.s0 + v.r00) / (2.0 * b2) * t.b_up -
                   (v.s0 + v.r00 / v.F) / b2 * y;
  return v.G_alpha + T;
}

Vector kropina_spray_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  const AbTensors t = ab_tensors(space, x);
  return kropina_spray_closed(ab_invariants(t, y), t, y);
}

double kropina_ricci_closed(const AbInvariants& v) {
  const double n = v.n, F = v.F, b2 = v.b2, b4 = b2 * b2;
  const double r00 = v.r00, r0 = v.r0, s0 = v.s0;
  double T = 3.0 * (n - 1.0) / (b4 * F * F) * r00 * r00;
  T += (n - 1.0) / (F * b4) * (2.0 * r00 * s0 - 4.0 * r00 * r0 - 4.0 * F * r0 * s0 - F * s0 * s0);
  T += (n - 1.0) / (b2 * F) * (v.r00_0 + F * v.s0_0 + F * F * v.sk_sk0);
  T += ((r0 + s0) * (r0 + s0) - v.r * (r00 + F * s0)) / b4;
  T += (F * v.s0_k_bk + v.r00_k_bk - (v.r0_0 + v.s0_0) + (r00 + F * s0) * v.rkk + 2.0 * n * v.r0k_sk0 -
        F * v.rk_sk0 - F * v.r0k_sk - 0.5 * F * F * v.sk_sk) /
       b2;
  T += -F * v.sk0_k - 0.25 * F * F * v.sjk_skj;
  return v.ric_alpha + T;
}

double kropina_ricci_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  return kropina_ricci_closed(ab_invariants(space, x, y));
}

double s_bh_closed(const AbInvariants& v) { return (v.n + 1.0) / v.b2 * (v.r0 - v.r00 / v.F); }

double s_bh_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  return s_bh_closed(ab_invariants(space, x, y));
}

double s_weighted_closed(const AbInvariants& v) { return s_bh_closed(v) + (v.n + 1.0) * v.f0; }

double hess_f_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> y) {
  return v.f_00 - 2.0 * t.f_grad.dot(kropina_spray_closed(v, t, y));
}

double s_dot_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> y) {
  const double F = v.F, b2 = v.b2, q = v.beta / v.alpha2;  // q = 1/F
  const double r00 = v.r00, r0 = v.r0, s0 = v.s0;
  const double first = (v.r0_0 - q * v.r00_0 + F * v.rk_sk0 - 2.0 * v.r0k_sk0) / b2;
  const double second = (-(F * s0 + r00) * v.r + 2.0 * q * r00 * (3.0 * r0 - s0) + 2.0 * r0 * (s0 - r0) -
                         4.0 * q * q * r00 * r00) /
                        (b2 * b2);
  return first + second + hess_f_closed(v, t, y);
}

double s_dot_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  const AbTensors t = ab_tensors(space, x);
  return s_dot_closed(ab_invariants(t, y), t, y);
}

ConformalCheck beta_conformal(const KropinaSpace& space, std::span<const double> x) {
  const int n = space.dim();
  const std::vector<Jet> xs = seed_point(x, 1);
  const JetMatrix a = space.a().at(std::span<const Jet>(xs));
  const JetMatrix ainv = inverse(a);
  const std::vector<Jet> b = space.b().at(std::span<const Jet>(xs));
  std::vector<Jet> B;
  for (int k = 0; k < n; ++k) {
    Jet s = constant_like(xs[0], 0.0);
    for (int l = 0; l < n; ++l) s += ainv(k, l) * b[static_cast<std::size_t>(l)];
    B.push_back(std::move(s));
  }
  auto d = [&](const Jet& j, int var) { return j.partial(MultiIndex::unit(n, var)); };
  Matrix L(n, n);
  Matrix av = a.values();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        s += B[static_cast<std::size_t>(k)].value() * d(a(i, j), k);
        s += av(k, j) * d(B[static_cast<std::size_t>(k)], i) + av(i, k) * d(B[static_cast<std::size_t>(k)], j);
      }
      L(i, j) = s;
    }
  ConformalCheck c;
  c.psi = (L.array() * av.array()).sum() / (av.array() * av.array()).sum();
  c.residual = (L - c.psi * av).cwiseAbs().maxCoeff() / std::max(L.cwiseAbs().maxCoeff(), 1.0);
  return c;
}

// ---- navigation side ----

NavTensors nav_tensors(const RiemannianMetric& h, const VectorFieldW& W, const Expr& rho, std::span<const double> x) {
  const LeviCivita lc = levi_civita(h, x);
  NavTensors t;
  t.n = lc.n;
  t.h = lc.g_val;
  t.h_inv = lc.g_inv_val;
  t.gamma = christoffel(lc);
  t.riemann = riemann(lc);
  t.ricci = ricci(t.riemann);
  t.w = w_invariants(lc, W);
  t.w_second = second_cov_w(lc, W);
  const Jet rj = eval_expr<Jet>(rho, std::span<const Jet>(seed_point(x, 1)));
  t.rho = rj.value();
  t.rho_grad.resize(t.n);
  for (int i = 0; i < t.n; ++i) t.rho_grad(i) = rj.partial(MultiIndex::unit(t.n, i));
  t.rho_up = t.h_inv * t.rho_grad;
  return t;
}

NavTensors nav_tensors(const KropinaSpace& space, std::span<const double> x) {
  return nav_tensors(space.h(), space.W(), space.rho(), x);
}

RsFromNav rs_from_RS(const NavTensors& t, std::span<const double> yspan) {
  const Vector y = as_vector(yspan);
  const double e2 = std::exp(-2.0 * t.rho);
  const double hh = y.dot(t.h * y);
  const double W0 = t.w.W_low.dot(y);
  const double rho0 = t.rho_grad.dot(y);
  const double Wrho = t.w.W.dot(t.rho_grad);
  RsFromNav out;
  out.r00 = 2.0 * e2 * (y.dot(t.w.R * y) - Wrho * hh);
  out.s_up0 = 2.0 * (t.w.S_up * y + t.rho_up * W0 - rho0 * t.w.W);
  out.s0 = 4.0 * e2 * (t.w.S_vec.dot(y) + Wrho * W0 - rho0);
  return out;
}

RsFromNav rs_from_RS(const KropinaSpace& space, std::span<const double> x, std::span<const double> y) {
  return rs_from_RS(nav_tensors(space, x), y);
}

namespace {

struct NavPoint {
  Vector y;
  double W0, F;
};

NavPoint nav_point(const NavTensors& t, std::span<const double> yspan) {
  if (static_cast<int>(yspan.size()) != t.n) throw Error("tangent vector dimension mismatch");
  NavPoint p;
  p.y = as_vector(yspan);
  p.W0 = t.w.W_low.dot(p.y);
  if (!(p.W0 > 0.0)) throw ConicDomainError("W_0 must be positive");
  p.F = p.y.dot(t.h * p.y) / (2.0 * p.W0);
  return p;
}

}  // namespace

Vector nav_spray(const NavTensors& t, std::span<const double> yspan) {
  const NavPoint p = nav_point(t, yspan);
  const double R00 = p.y.dot(t.w.R * p.y);
  const double S0 = t.w.S_vec.dot(p.y);
  const Vector xi = p.y - p.F * t.w.W;
  return half_gamma_yy(t.gamma, p.y) - p.F * (t.w.S_up * p.y) - (R00 + 2.0 * p.F * S0) / (2.0 * p.F) * xi;
}

Vector nav_spray(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                 std::span<const double> y) {
  return nav_spray(nav_tensors(h, W, Expr::constant(0.0), x), y);
}

void require_isotropic_s(const NavTensors& t, double tol) {
  const double r = t.w.R.cwiseAbs().maxCoeff();
  const double s = t.w.S_vec.cwiseAbs().maxCoeff();
  if (!(r < tol) || !(s < tol))
    throw PreconditionFailure("isotropic S-curvature hypothesis fails: |R_ij| = " + std::to_string(r) +
                              ", |S_j| = " + std::to_string(s));
}

Matrix nav_riemann_isotropic(const NavTensors& t, std::span<const double> yspan, double tol) {
  require_isotropic_s(t, tol);
  const NavPoint p = nav_point(t, yspan);
  const int n = t.n;
  const Vector& y = p.y;
  const Vector& W = t.w.W;
  const double F = p.F;
  const Vector xi_low = t.h * (y - F * W);
  const Matrix SS = t.w.S_up * t.w.S_up;
  const Vector S0S = t.w.S_up * (t.w.S_up * y);
  Matrix Rbar = Matrix::Zero(n, n), A = Matrix::Zero(n, n), C = Matrix::Zero(n, n);
  Vector B = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int p1 = 0; p1 < n; ++p1)
        for (int q = 0; q < n; ++q) {
          Rbar(i, k) += t.riemann(i, p1, k, q) * y(p1) * y(q);
          A(i, k) += t.riemann(i, p1, k, q) * y(p1) * W(q);
          C(i, k) += t.riemann(i, k, p1, q) * y(p1) * W(q);
          B(i) += t.riemann(i, p1, k, q) * y(p1) * y(q) * W(k);
        }
  Matrix R = Rbar - 2.0 * F * A + F * C - F * F * SS;
  R += (F * S0S - B) * xi_low.transpose() / p.W0;
  return R;
}

Matrix nav_riemann_isotropic(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                             std::span<const double> y, double tol) {
  return nav_riemann_isotropic(nav_tensors(h, W, Expr::constant(0.0), x), y, tol);
}

double nav_ricci_isotropic(const NavTensors& t, std::span<const double> yspan, double tol) {
  require_isotropic_s(t, tol);
  const NavPoint p = nav_point(t, yspan);
  return p.y.dot(t.ricci * p.y) - 2.0 * p.F * p.y.dot(t.ricci * t.w.W) -
         p.F * p.F * (t.w.S_up * t.w.S_up).trace();
}

double nav_ricci_isotropic(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                           std::span<const double> y, double tol) {
  return nav_ricci_isotropic(nav_tensors(h, W, Expr::constant(0.0), x), y, tol);
}

KillingIdentityResiduals killing_identities(const NavTensors& t, std::span<const double> yspan) {
  const int n = t.n;
  const Vector y = as_vector(yspan);
  const Vector& W = t.w.W;
  Tensor3 Scov(n);  // S_{ij|k}
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) Scov(i, j, k) = 0.5 * (t.w_second(i, j, k) - t.w_second(j, i, k));
  Matrix S0k = Matrix::Zero(n, n);  // S^i_{0|k}
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) S0k(i, k) += t.h_inv(i, l) * Scov(l, j, k) * y(j);
  const Matrix Wup_cov = t.h_inv * t.w.cov;  // W^i_{|k}
  Vector Sj0k = Vector::Zero(n);            // S_{0|k}
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Sj0k(k) += (Wup_cov(i, k) * t.w.S(i, j) + W(i) * Scov(i, j, k)) * y(j);

  Matrix A = Matrix::Zero(n, n);
  Vector B = Vector::Zero(n), C3 = Vector::Zero(n), D = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < n; ++p)
      for (int k = 0; k < n; ++k)
        for (int q = 0; q < n; ++q) {
          const double Rm = t.riemann(i, p, k, q);
          A(i, k) += Rm * y(p) * W(q);
          B(i) += Rm * y(p) * y(q) * W(k);
          C3(k) += t.w.W_low(i) * Rm * y(p) * W(q);
          D(i) += W(k) * Rm * W(p) * y(q);
        }
  const Vector S0 = t.w.S_up * y;
  KillingIdentityResiduals res;
  res.s1 = (S0k - A).cwiseAbs().maxCoeff();
  res.s2 = (S0k * y + B).cwiseAbs().maxCoeff();
  res.s3 = (Sj0k - (t.w.S.transpose() * S0 + C3)).cwiseAbs().maxCoeff();
  res.s_square = (t.w.S_up * S0 - D).cwiseAbs().maxCoeff();
  return res;
}

}  // namespace kwb
