#include "kwb/finsler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include "kwb/errors.hpp"
#include "kwb/rng.hpp"

namespace kwb {

double FinslerEvaluator::closed_bh(std::span<const double>) const {
  throw Error("no closed-form Busemann-Hausdorff density for this metric");
}

Jet FinslerEvaluator::closed_bh(std::span<const Jet>) const {
  throw Error("no closed-form Busemann-Hausdorff density for this metric");
}

namespace {

void check_sizes(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<std::size_t>(F.dim());
  if (x.size() != n || y.size() != n) throw Error("point or direction has the wrong dimension");
}

void require_domain(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  check_sizes(F, x, y);
  if (!F.in_domain(x, y)) throw ConicDomainError("direction outside the conic domain");
}

template <class T>
T quadratic_form(const RiemannianMetric& g, std::span<const T> x, std::span<const T> u, std::span<const T> v) {
  const int n = g.dim();
  T s = constant_like(u[0], 0.0);
  for (int i = 0; i < n; ++i) {
    T row = constant_like(u[0], 0.0);
    for (int j = 0; j < n; ++j) row += g.compiled(i, j)(x) * v[static_cast<std::size_t>(j)];
    s += u[static_cast<std::size_t>(i)] * row;
  }
  return s;
}

template <class T>
T pairing(const VectorFieldW& b, std::span<const T> x, std::span<const T> y) {
  T s = constant_like(y[0], 0.0);
  for (int i = 0; i < b.dim(); ++i) s += b.compiled(i)(x) * y[static_cast<std::size_t>(i)];
  return s;
}

Vector inverse_diagonal_sqrt(const Matrix& m) {
  const Matrix inv = m.inverse();
  Vector out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out(i) = std::sqrt(inv(i, i));
  return out;
}

class RiemannianFinsler final : public FinslerEvaluator {
 public:
  explicit RiemannianFinsler(RiemannianMetric g) : g_(std::move(g)) {}
  int dim() const override { return g_.dim(); }
  bool in_domain(std::span<const double>, std::span<const double> y) const override {
    return std::any_of(y.begin(), y.end(), [](double v) { return v != 0.0; });
  }
  double F(std::span<const double> x, std::span<const double> y) const override {
    return std::sqrt(quadratic_form<double>(g_, x, y, y));
  }
  Jet L(std::span<const Jet> x, std::span<const Jet> y) const override { return quadratic_form<Jet>(g_, x, y, y); }
  std::optional<SublevelBox> sublevel_box(std::span<const double> x) const override {
    const Vector half = inverse_diagonal_sqrt(g_.at(x));
    return SublevelBox{-half, half};
  }
  bool has_closed_bh() const override { return true; }
  double closed_bh(std::span<const double> x) const override { return std::sqrt(g_.at(x).determinant()); }
  Jet closed_bh(std::span<const Jet> x) const override { return sqrt(determinant(g_.at(x))); }

 private:
  RiemannianMetric g_;
};

class KropinaAbFinsler final : public FinslerEvaluator {
 public:
  KropinaAbFinsler(RiemannianMetric a, VectorFieldW b) : a_(std::move(a)), b_(std::move(b)) {
    if (a_.dim() != b_.dim()) throw Error("alpha and beta dimensions differ");
  }
  int dim() const override { return a_.dim(); }
  bool in_domain(std::span<const double> x, std::span<const double> y) const override {
    return pairing<double>(b_, x, y) > 0.0;
  }
  double F(std::span<const double> x, std::span<const double> y) const override {
    return quadratic_form<double>(a_, x, y, y) / pairing<double>(b_, x, y);
  }
  Jet L(std::span<const Jet> x, std::span<const Jet> y) const override {
    const Jet f = quadratic_form<Jet>(a_, x, y, y) / pairing<Jet>(b_, x, y);
    return f * f;
  }
  // {alpha^2 < beta} is the a-ellipsoid of radius b/2 about B/2, B^i = a^{ij} b_j.
  std::optional<SublevelBox> sublevel_box(std::span<const double> x) const override {
    const Matrix a = a_.at(x);
    const Vector b = b_.at(x);
    const Matrix ainv = a.inverse();
    const Vector B = ainv * b;
    const double norm = std::sqrt(b.dot(B));
    Vector half(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) half(i) = 0.5 * norm * std::sqrt(ainv(i, i));
    const Vector center = 0.5 * B;
    return SublevelBox{center - half, center + half};
  }
  bool has_closed_bh() const override { return true; }
  double closed_bh(std::span<const double> x) const override {
    const Matrix a = a_.at(x);
    const Vector b = b_.at(x);
    const double b2 = b.dot(a.ldlt().solve(b));
    return std::sqrt(a.determinant()) * std::pow(2.0 / std::sqrt(b2), a.rows());
  }
  Jet closed_bh(std::span<const Jet> x) const override {
    const JetMatrix a = a_.at(x);
    const JetMatrix ainv = inverse(a);
    const std::vector<Jet> b = b_.at(x);
    Jet b2 = constant_like(x[0], 0.0);
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) b2 += b[static_cast<std::size_t>(i)] * ainv(i, j) * b[static_cast<std::size_t>(j)];
    return sqrt(determinant(a)) * pow(2.0 * reciprocal(sqrt(b2)), dim());
  }

 private:
  RiemannianMetric a_;
  VectorFieldW b_;
};

class KropinaNavFinsler final : public FinslerEvaluator {
 public:
  KropinaNavFinsler(RiemannianMetric h, VectorFieldW W) : h_(std::move(h)), W_(std::move(W)) {
    if (h_.dim() != W_.dim()) throw Error("h and W dimensions differ");
  }
  int dim() const override { return h_.dim(); }
  bool in_domain(std::span<const double> x, std::span<const double> y) const override { return W0<double>(x, y) > 0.0; }
  double F(std::span<const double> x, std::span<const double> y) const override {
    return quadratic_form<double>(h_, x, y, y) / (2.0 * W0<double>(x, y));
  }
  Jet L(std::span<const Jet> x, std::span<const Jet> y) const override {
    const Jet f = quadratic_form<Jet>(h_, x, y, y) / (2.0 * W0<Jet>(x, y));
    return f * f;
  }
  // {h^2 < 2 W_0} is the h-unit ball about W.
  std::optional<SublevelBox> sublevel_box(std::span<const double> x) const override {
    const Vector half = inverse_diagonal_sqrt(h_.at(x));
    const Vector center = W_.at(x);
    return SublevelBox{center - half, center + half};
  }
  bool has_closed_bh() const override { return true; }
  double closed_bh(std::span<const double> x) const override { return std::sqrt(h_.at(x).determinant()); }
  Jet closed_bh(std::span<const Jet> x) const override { return sqrt(determinant(h_.at(x))); }

 private:
  template <class T>
  T W0(std::span<const T> x, std::span<const T> y) const {
    std::vector<T> w;
    for (int i = 0; i < dim(); ++i) w.push_back(W_.compiled(i)(x));
    return quadratic_form<T>(h_, x, std::span<const T>(w), y);
  }

  RiemannianMetric h_;
  VectorFieldW W_;
};

class FunctionFinsler final : public FinslerEvaluator {
 public:
  explicit FunctionFinsler(FunctionFinslerSpec s) : s_(std::move(s)) {}
  int dim() const override { return s_.n; }
  bool in_domain(std::span<const double> x, std::span<const double> y) const override { return s_.in_domain(x, y); }
  double F(std::span<const double> x, std::span<const double> y) const override { return s_.F(x, y); }
  Jet L(std::span<const Jet> x, std::span<const Jet> y) const override { return s_.L(x, y); }

 private:
  FunctionFinslerSpec s_;
};

class ScaledFinsler final : public FinslerEvaluator {
 public:
  ScaledFinsler(FinslerPtr base, double c) : base_(std::move(base)), c_(c) {
    if (!(c > 0.0)) throw Error("scale factor must be positive");
  }
  int dim() const override { return base_->dim(); }
  bool in_domain(std::span<const double> x, std::span<const double> y) const override { return base_->in_domain(x, y); }
  double F(std::span<const double> x, std::span<const double> y) const override { return c_ * base_->F(x, y); }
  Jet L(std::span<const Jet> x, std::span<const Jet> y) const override { return (c_ * c_) * base_->L(x, y); }
  std::optional<SublevelBox> sublevel_box(std::span<const double> x) const override {
    auto box = base_->sublevel_box(x);
    if (box) {
      box->lo /= c_;
      box->hi /= c_;
    }
    return box;
  }
  bool has_closed_bh() const override { return base_->has_closed_bh(); }
  double closed_bh(std::span<const double> x) const override { return std::pow(c_, dim()) * base_->closed_bh(x); }
  Jet closed_bh(std::span<const Jet> x) const override { return std::pow(c_, dim()) * base_->closed_bh(x); }

 private:
  FinslerPtr base_;
  double c_;
};

}  // namespace

FinslerPtr riemannian_finsler(RiemannianMetric g) { return std::make_shared<RiemannianFinsler>(std::move(g)); }
FinslerPtr kropina_ab_finsler(RiemannianMetric a, VectorFieldW b) {
  return std::make_shared<KropinaAbFinsler>(std::move(a), std::move(b));
}
FinslerPtr kropina_nav_finsler(RiemannianMetric h, VectorFieldW W) {
  return std::make_shared<KropinaNavFinsler>(std::move(h), std::move(W));
}
FinslerPtr function_finsler(FunctionFinslerSpec spec) { return std::make_shared<FunctionFinsler>(std::move(spec)); }
FinslerPtr scaled_finsler(FinslerPtr base, double factor) {
  return std::make_shared<ScaledFinsler>(std::move(base), factor);
}

double VolumeDensity::operator()(std::span<const double> x) const {
  const double v = value(x);
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("volume density is not positive");
  return v;
}

VolumeDensity riemannian_volume(const RiemannianMetric& g) {
  VolumeDensity d;
  d.kind = VolumeDensity::Kind::Custom;
  d.value = [g](std::span<const double> x) { return std::sqrt(g.at(x).determinant()); };
  d.jet = [g](std::span<const Jet> x) { return sqrt(determinant(g.at(x))); };
  return d;
}

VolumeDensity closed_bh_density(FinslerPtr F) {
  if (!F->has_closed_bh()) throw Error("metric has no closed-form Busemann-Hausdorff density");
  VolumeDensity d;
  d.kind = VolumeDensity::Kind::BusemannHausdorff;
  d.value = [F](std::span<const double> x) { return F->closed_bh(x); };
  d.jet = [F](std::span<const Jet> x) { return F->closed_bh(x); };
  return d;
}

VolumeDensity weighted_density(VolumeDensity base, const Expr& f, int n) {
  const CompiledExpr cf(f);
  const double k = -(n + 1.0);
  VolumeDensity d;
  d.kind = VolumeDensity::Kind::Weighted;
  d.value = [base, cf, k](std::span<const double> x) { return std::exp(k * cf(x)) * base.value(x); };
  d.jet = [base, cf, k](std::span<const Jet> x) { return exp(k * cf(x)) * base.jet(x); };
  return d;
}

SprayJets spray_jets(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y, int order) {
  require_domain(F, x, y);
  if (order < 2) throw OrderOverflow("spray needs jets of order >= 2");
  const int n = F.dim();
  SprayJets s;
  s.n = n;
  s.order = order;
  auto space = JetSpace::get(2 * n, order);
  for (int i = 0; i < n; ++i) {
    s.x.push_back(Jet::variable(space, i, x[static_cast<std::size_t>(i)]));
    s.y.push_back(Jet::variable(space, n + i, y[static_cast<std::size_t>(i)]));
  }
  s.L = F.L(s.x, s.y);
  std::vector<Jet> Ly;
  for (int i = 0; i < n; ++i) Ly.push_back(s.L.derivative(n + i));
  s.g = JetMatrix(n, Jet(JetSpace::get(2 * n, order - 2), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      s.g(i, j) = 0.5 * Ly[static_cast<std::size_t>(i)].derivative(n + j);
      s.g(j, i) = s.g(i, j);
    }
  s.g_inv = inverse(s.g);
  std::vector<Jet> v;
  for (int l = 0; l < n; ++l) {
    Jet t = -s.L.derivative(l);
    for (int k = 0; k < n; ++k) t += Ly[static_cast<std::size_t>(l)].derivative(k) * s.y[static_cast<std::size_t>(k)];
    v.push_back(std::move(t));
  }
  for (int i = 0; i < n; ++i) {
    Jet Gi = s.g_inv(i, 0) * v[0];
    for (int l = 1; l < n; ++l) Gi += s.g_inv(i, l) * v[static_cast<std::size_t>(l)];
    s.G.push_back(0.25 * Gi);
  }
  return s;
}

Matrix fundamental_tensor(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  return spray_jets(F, x, y, 2).g.values();
}

Vector spray_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  return values(spray_jets(F, x, y, 2).G);
}

namespace {

MultiIndex idx1(int vars, int a) { return MultiIndex::unit(vars, a); }
MultiIndex idx2(int vars, int a, int b) { return MultiIndex::unit(vars, a) + MultiIndex::unit(vars, b); }

Matrix riemann_from(const SprayJets& s) {
  const int n = s.n;
  const int m2 = 2 * n;
  Matrix R(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const Jet& Gi = s.G[static_cast<std::size_t>(i)];
      double r = 2.0 * Gi.partial(idx1(m2, k));
      for (int m = 0; m < n; ++m) {
        const Jet& Gm = s.G[static_cast<std::size_t>(m)];
        r -= Gi.partial(idx2(m2, m, n + k)) * s.y[static_cast<std::size_t>(m)].value();
        r += 2.0 * Gm.value() * Gi.partial(idx2(m2, n + m, n + k));
        r -= Gi.partial(idx1(m2, n + m)) * Gm.partial(idx1(m2, n + k));
      }
      R(i, k) = r;
    }
  return R;
}

// tau as a jet of order K-2 (K = s.order).
Jet tau_jet(const SprayJets& s, const VolumeDensity& sigma) {
  const Jet det = determinant(s.g);
  if (!(det.value() > 0.0)) throw DomainError("det g is not positive");
  const Jet sig = sigma.jet(s.x);
  if (!(sig.value() > 0.0)) throw DomainError("volume density is not positive");
  return 0.5 * log(det) - log(sig);
}

// y^m d_{x^m} u - 2 G^j d_{y^j} u as a jet one order below u.
Jet horizontal(const SprayJets& s, const Jet& u) {
  const int n = s.n;
  Jet out = u.derivative(0) * s.y[0];
  for (int m = 1; m < n; ++m) out += u.derivative(m) * s.y[static_cast<std::size_t>(m)];
  for (int j = 0; j < n; ++j) out -= 2.0 * s.G[static_cast<std::size_t>(j)] * u.derivative(n + j);
  return out;
}

double hess_from(const Expr& f, std::span<const double> x, std::span<const double> y, const Vector& G) {
  const int n = static_cast<int>(x.size());
  const Jet fj = eval_expr<Jet>(f, seed_point(x, 2));
  double h = 0.0;
  for (int i = 0; i < n; ++i) {
    h -= 2.0 * fj.partial(idx1(n, i)) * G(i);
    for (int j = 0; j < n; ++j)
      h += fj.partial(idx2(n, i, j)) * y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
  }
  return h;
}

}  // namespace

Matrix riemann_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  return riemann_from(spray_jets(F, x, y, 4));
}

double ricci_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  return riemann_generic(F, x, y).trace();
}

double distortion(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                  std::span<const double> y) {
  const double det = fundamental_tensor(F, x, y).determinant();
  if (!(det > 0.0)) throw DomainError("det g is not positive");
  return std::log(std::sqrt(det) / sigma(x));
}

double s_curvature_generic(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                           std::span<const double> y) {
  const SprayJets s = spray_jets(F, x, y, 3);
  return horizontal(s, tau_jet(s, sigma)).value();
}

double sdot_generic(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                    std::span<const double> y) {
  const SprayJets s = spray_jets(F, x, y, 4);
  return horizontal(s, horizontal(s, tau_jet(s, sigma))).value();
}

double hess_F(const Expr& f, const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y) {
  return hess_from(f, x, y, spray_generic(F, x, y));
}

CurvatureSample curvature_sample(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                                 std::span<const double> y, const Expr* f) {
  const SprayJets s = spray_jets(F, x, y, 4);
  const int n = s.n;
  CurvatureSample c;
  c.g = s.g.values();
  c.G = values(s.G);
  c.N.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.N(i, j) = s.G[static_cast<std::size_t>(i)].partial(idx1(2 * n, n + j));
  c.R = riemann_from(s);
  c.Ric = c.R.trace();
  const Jet tau = tau_jet(s, sigma);
  c.tau = tau.value();
  const Jet S = horizontal(s, tau);
  c.S = S.value();
  c.Sdot = horizontal(s, S).value();
  if (f) c.hess = hess_from(*f, x, y, c.G);
  return c;
}

std::vector<GeodesicPoint> geodesic_flow(const FinslerEvaluator& F, std::span<const double> x,
                                         std::span<const double> y, double t_end, int steps) {
  check_sizes(F, x, y);
  if (steps < 1) throw Error("geodesic_flow needs at least one step");
  const double dt = t_end / steps;
  if (!(std::abs(dt) > 1e-14) || !std::isfinite(dt)) throw Error("geodesic step underflow");
  const int n = F.dim();
  auto accel = [&](const Vector& c, const Vector& v) -> Vector {
    try {
      return -2.0 * spray_generic(F, std::span<const double>(c.data(), n), std::span<const double>(v.data(), n));
    } catch (const ConicDomainError&) {
      throw ConicDomainError("geodesic left the conic domain");
    }
  };
  std::vector<GeodesicPoint> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  Vector c = Eigen::Map<const Vector>(x.data(), n);
  Vector v = Eigen::Map<const Vector>(y.data(), n);
  path.push_back({0.0, c, v});
  for (int k = 0; k < steps; ++k) {
    const Vector k1c = v, k1v = accel(c, v);
    const Vector k2c = v + 0.5 * dt * k1v, k2v = accel(c + 0.5 * dt * k1c, k2c);
    const Vector k3c = v + 0.5 * dt * k2v, k3v = accel(c + 0.5 * dt * k2c, k3c);
    const Vector k4c = v + dt * k3v, k4v = accel(c + dt * k3c, k4c);
    c += dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    path.push_back({(k + 1) * dt, c, v});
  }
  return path;
}

CurveDerivatives geodesic_derivatives(
    const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y,
    const std::function<double(std::span<const double>, std::span<const double>)>& phi, double h, int substeps) {
  if (substeps < 2 || substeps % 2 != 0) throw Error("substeps must be even and >= 2");
  const auto fwd = geodesic_flow(F, x, y, h, substeps);
  const auto bwd = geodesic_flow(F, x, y, -h, substeps);
  auto at = [&](const GeodesicPoint& p) {
    return phi(std::span<const double>(p.c.data(), p.c.size()), std::span<const double>(p.v.data(), p.v.size()));
  };
  const double p0 = at(fwd.front());
  const double ph = at(fwd.back()), mh = at(bwd.back());
  const double ph2 = at(fwd[static_cast<std::size_t>(substeps / 2)]), mh2 = at(bwd[static_cast<std::size_t>(substeps / 2)]);
  const double d1_h = (ph - mh) / (2.0 * h), d1_h2 = (ph2 - mh2) / h;
  const double d2_h = (ph - 2.0 * p0 + mh) / (h * h), d2_h2 = (ph2 - 2.0 * p0 + mh2) / (0.25 * h * h);
  return {(4.0 * d1_h2 - d1_h) / 3.0, (4.0 * d2_h2 - d2_h) / 3.0};
}

double unit_ball_volume(int n) { return std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n + 1.0); }

namespace {

// Symmetric box from radial probes: F(x, u) gives the boundary distance 1/F along u.
SublevelBox probe_box(const FinslerEvaluator& F, std::span<const double> x, const CounterRng& rng) {
  const int n = F.dim();
  Vector extent = Vector::Zero(n);
  std::vector<double> u(static_cast<std::size_t>(n));
  int admissible = 0;
  constexpr int kProbes = 4096;
  for (int p = 0; p < kProbes; ++p) {
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
      u[static_cast<std::size_t>(i)] = rng.normal(static_cast<std::uint64_t>(p * n + i));
      norm += u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(i)];
    }
    if (norm == 0.0 || !F.in_domain(x, u)) continue;
    const double f = F.F(x, u);
    if (!(f > 0.0)) continue;
    ++admissible;
    for (int i = 0; i < n; ++i) extent(i) = std::max(extent(i), std::abs(u[static_cast<std::size_t>(i)]) / f);
  }
  if (admissible == 0) throw DomainError("degenerate sublevel set: no admissible direction");
  const Vector half = 1.25 * extent;
  return SublevelBox{-half, half};
}

}  // namespace

BhDensityEstimate bh_density(const FinslerEvaluator& F, std::span<const double> x, std::int64_t mc_samples,
                             std::uint64_t seed) {
  const int n = F.dim();
  if (static_cast<int>(x.size()) != n) throw Error("point has the wrong dimension");
  if (mc_samples < 1) throw Error("bh_density needs at least one sample");
  const CounterRng rng(seed, 0x4248);
  BhDensityEstimate est;
  auto box = F.sublevel_box(x);
  est.box = box ? *box : probe_box(F, x, rng.split(1));
  const Vector width = est.box.hi - est.box.lo;
  const double box_volume = width.prod();
  if (!(box_volume > 0.0)) throw DomainError("degenerate sublevel set: empty bounding box");
  const CounterRng draws = rng.split(2);
  std::vector<double> y(static_cast<std::size_t>(n));
  std::int64_t hits = 0;
  for (std::int64_t s = 0; s < mc_samples; ++s) {
    for (int i = 0; i < n; ++i)
      y[static_cast<std::size_t>(i)] =
          est.box.lo(i) + width(i) * draws.uniform(static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(n) + i);
    if (F.in_domain(x, y) && F.F(x, y) < 1.0) ++hits;
  }
  if (hits == 0) throw DomainError("degenerate sublevel set: no samples accepted");
  const double p = static_cast<double>(hits) / static_cast<double>(mc_samples);
  est.samples = mc_samples;
  est.accepted = hits;
  est.volume = box_volume * p;
  est.volume_se = box_volume * std::sqrt(p * (1.0 - p) / static_cast<double>(mc_samples));
  est.sigma = unit_ball_volume(n) / est.volume;
  est.standard_error = est.sigma * est.volume_se / est.volume;
  if (F.has_closed_bh()) est.closed_form = F.closed_bh(x);
  return est;
}

}  // namespace kwb
