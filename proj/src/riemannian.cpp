#include "kwb/riemannian.hpp"

#include <cmath>
#include <utility>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

std::size_t sq(int n) { return static_cast<std::size_t>(n * n); }

}  // namespace

std::vector<Jet> seed_point(std::span<const double> x, int order) {
  const int n = static_cast<int>(x.size());
  auto space = JetSpace::get(n, order);
  std::vector<Jet> out;
  out.reserve(x.size());
  for (int i = 0; i < n; ++i) out.push_back(Jet::variable(space, i, x[static_cast<std::size_t>(i)]));
  return out;
}

RiemannianMetric::RiemannianMetric(int n, std::vector<Expr> components, std::string role)
    : n_(n), role_(std::move(role)), exprs_(std::move(components)) {
  if (n < 1) throw Error("metric dimension must be positive");
  if (exprs_.size() != sq(n)) throw Error("metric needs n*n components");
  for (const auto& e : exprs_) {
    if (e.arity() > n) throw Error("metric component references a coordinate beyond x" + std::to_string(n));
    compiled_.emplace_back(e);
  }
}

RiemannianMetric RiemannianMetric::euclidean(int n, std::string role) {
  std::vector<Expr> c(sq(n), Expr::constant(0.0));
  for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i * n + i)] = Expr::constant(1.0);
  return RiemannianMetric(n, std::move(c), std::move(role));
}

Matrix RiemannianMetric::at(std::span<const double> x) const {
  Matrix g(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) g(i, j) = compiled_[static_cast<std::size_t>(i * n_ + j)](x);
  const double scale = g.cwiseAbs().maxCoeff();
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, scale))
    throw Error("metric " + role_ + " is not symmetric");
  Eigen::LLT<Matrix> llt(g);
  if (llt.info() != Eigen::Success) throw SingularMatrix("metric " + role_ + " is not positive-definite");
  return g;
}

JetMatrix RiemannianMetric::at(std::span<const Jet> x) const {
  JetMatrix g(n_, constant_like(x[0], 0.0));
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) g(i, j) = compiled_[static_cast<std::size_t>(i * n_ + j)](x);
  return g;
}

VectorFieldW::VectorFieldW(std::vector<Expr> components) : exprs_(std::move(components)) {
  for (const auto& e : exprs_) {
    if (e.arity() > dim()) throw Error("vector field component references a coordinate beyond the dimension");
    compiled_.emplace_back(e);
  }
}

Vector VectorFieldW::at(std::span<const double> x) const {
  Vector v(dim());
  for (int i = 0; i < dim(); ++i) v(i) = compiled_[static_cast<std::size_t>(i)](x);
  return v;
}

std::vector<Jet> VectorFieldW::at(std::span<const Jet> x) const {
  std::vector<Jet> v;
  v.reserve(exprs_.size());
  for (const auto& c : compiled_) v.push_back(c(x));
  return v;
}

LeviCivita levi_civita(const RiemannianMetric& g, std::span<const double> x) {
  const int n = g.dim();
  if (static_cast<int>(x.size()) != n) throw Error("point dimension does not match metric");
  LeviCivita lc;
  lc.n = n;
  lc.g_val = g.at(x);  // definiteness check
  lc.x = seed_point(x, 2);
  lc.g = g.at(std::span<const Jet>(lc.x));
  lc.g_inv = inverse(lc.g);
  lc.g_inv_val = lc.g_inv.values();
  std::vector<Jet> dg;  // d_l g_ij at [(i*n + j)*n + l], order 1
  dg.reserve(static_cast<std::size_t>(n * n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) dg.push_back(lc.g(i, j).derivative(l));
  auto d = [&](int i, int j, int l) -> const Jet& { return dg[static_cast<std::size_t>((i * n + j) * n + l)]; };
  const Jet zero(JetSpace::get(n, 1), 0.0);
  lc.gamma.assign(static_cast<std::size_t>(n * n * n), zero);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      std::vector<Jet> lowered;  // G_{l,ij}
      lowered.reserve(static_cast<std::size_t>(n));
      for (int l = 0; l < n; ++l) lowered.push_back(0.5 * (d(j, l, i) + d(i, l, j) - d(i, j, l)));
      for (int k = 0; k < n; ++k) {
        Jet s = zero;
        for (int l = 0; l < n; ++l) s += lc.g_inv(k, l) * lowered[static_cast<std::size_t>(l)];
        lc.gamma[static_cast<std::size_t>((k * n + i) * n + j)] = s;
        lc.gamma[static_cast<std::size_t>((k * n + j) * n + i)] = s;
      }
    }
  return lc;
}

std::vector<Jet> cov_derivative_covector(const LeviCivita& lc, const std::vector<Jet>& w) {
  const int n = lc.n;
  std::vector<Jet> out;
  out.reserve(sq(n));
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      Jet s = w[static_cast<std::size_t>(k)].derivative(i);
      for (int m = 0; m < n; ++m) s -= lc.Gamma(m, i, k) * w[static_cast<std::size_t>(m)];
      out.push_back(std::move(s));
    }
  return out;
}

Tensor3 cov_derivative_2tensor(const LeviCivita& lc, const std::vector<Jet>& t) {
  const int n = lc.n;
  auto T = [&](int a, int b) { return t[static_cast<std::size_t>(a * n + b)].value(); };
  Tensor3 out(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = t[static_cast<std::size_t>(k * n + i)].derivative(j).value();
        for (int m = 0; m < n; ++m) s -= lc.Gamma_val(m, j, k) * T(m, i) + lc.Gamma_val(m, j, i) * T(k, m);
        out(k, i, j) = s;
      }
  return out;
}

Tensor3 christoffel(const LeviCivita& lc) {
  Tensor3 out(lc.n);
  for (int k = 0; k < lc.n; ++k)
    for (int i = 0; i < lc.n; ++i)
      for (int j = 0; j < lc.n; ++j) out(k, i, j) = lc.Gamma_val(k, i, j);
  return out;
}

Tensor4 riemann(const LeviCivita& lc) {
  const int n = lc.n;
  Tensor4 r(n);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = lc.Gamma(m, j, k).derivative(i).value() - lc.Gamma(m, i, k).derivative(j).value();
          for (int p = 0; p < n; ++p)
            s += lc.Gamma_val(m, i, p) * lc.Gamma_val(p, j, k) - lc.Gamma_val(m, j, p) * lc.Gamma_val(p, i, k);
          r(m, k, i, j) = s;
        }
  return r;
}

Matrix ricci(const Tensor4& r) {
  const int n = r.dim();
  Matrix ric = Matrix::Zero(n, n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) ric(k, j) += r(m, k, m, j);
  return ric;
}

Tensor3 christoffel(const RiemannianMetric& g, std::span<const double> x) { return christoffel(levi_civita(g, x)); }

Tensor4 riemann_h(const RiemannianMetric& g, std::span<const double> x) { return riemann(levi_civita(g, x)); }

Tensor4 lower_first(const Tensor4& r, const Matrix& g) {
  const int n = r.dim();
  Tensor4 out(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int m = 0; m < n; ++m) s += g(l, m) * r(m, k, i, j);
          out(l, k, i, j) = s;
        }
  return out;
}

Matrix ricci_h(const RiemannianMetric& g, std::span<const double> x) { return ricci(riemann_h(g, x)); }

namespace {

void scalar_derivatives(const LeviCivita& lc, const Expr& f, Vector& grad, Matrix& hess) {
  const int n = lc.n;
  const Jet fj = eval_expr<Jet>(f, lc.x);
  grad.resize(n);
  hess.resize(n, n);
  for (int i = 0; i < n; ++i) grad(i) = fj.partial(MultiIndex::unit(n, i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = fj.partial(MultiIndex::unit(n, i) + MultiIndex::unit(n, j));
      for (int m = 0; m < n; ++m) s -= lc.Gamma_val(m, i, j) * grad(m);
      hess(i, j) = s;
    }
}

}  // namespace

Matrix hess_h(const Expr& f, const RiemannianMetric& g, std::span<const double> x) {
  const LeviCivita lc = levi_civita(g, x);
  Vector grad;
  Matrix hess;
  scalar_derivatives(lc, f, grad, hess);
  return hess;
}

WInvariants w_invariants(const LeviCivita& lc, const VectorFieldW& W) {
  const int n = lc.n;
  if (W.dim() != n) throw Error("vector field dimension does not match metric");
  WInvariants out;
  const std::vector<Jet> Wj = W.at(std::span<const Jet>(lc.x));
  out.W = values(Wj);
  out.W_low = lc.g_val * out.W;
  out.cov.resize(n, n);
  std::vector<Jet> low;
  for (int i = 0; i < n; ++i) {
    Jet s = constant_like(lc.x[0], 0.0);
    for (int j = 0; j < n; ++j) s += lc.g(i, j) * Wj[static_cast<std::size_t>(j)];
    low.push_back(std::move(s));
  }
  const auto c = cov_derivative_covector(lc, low);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.cov(i, j) = c[static_cast<std::size_t>(i * n + j)].value();
  out.R = 0.5 * (out.cov + out.cov.transpose());
  out.S = 0.5 * (out.cov - out.cov.transpose());
  out.S_up = lc.g_inv_val * out.S;
  out.S_vec = out.S.transpose() * out.W;
  out.R_vec = out.R.transpose() * out.W;
  out.R_scalar = out.R_vec.dot(out.W);
  return out;
}

WInvariants w_invariants(const RiemannianMetric& g, const VectorFieldW& W, std::span<const double> x) {
  return w_invariants(levi_civita(g, x), W);
}

Tensor3 second_cov_w(const LeviCivita& lc, const VectorFieldW& W) {
  const int n = lc.n;
  if (W.dim() != n) throw Error("vector field dimension does not match metric");
  const std::vector<Jet> Wj = W.at(std::span<const Jet>(lc.x));
  std::vector<Jet> low;
  for (int i = 0; i < n; ++i) {
    Jet s = constant_like(lc.x[0], 0.0);
    for (int j = 0; j < n; ++j) s += lc.g(i, j) * Wj[static_cast<std::size_t>(j)];
    low.push_back(std::move(s));
  }
  return cov_derivative_2tensor(lc, cov_derivative_covector(lc, low));
}

Tensor3 second_cov_w(const RiemannianMetric& g, const VectorFieldW& W, std::span<const double> x) {
  return second_cov_w(levi_civita(g, x), W);
}

CovDerivPack cov_deriv_pack(const RiemannianMetric& g, const Expr& f, std::span<const double> x) {
  CovDerivPack p;
  p.lc = levi_civita(g, x);
  p.gamma = christoffel(p.lc);
  p.riemann = riemann(p.lc);
  p.ricci = ricci(p.riemann);
  scalar_derivatives(p.lc, f, p.f_grad, p.f_hess);
  return p;
}

}  // namespace kwb
