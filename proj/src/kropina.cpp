#include "kwb/kropina.hpp"

#include <algorithm>
#include <cmath>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

std::vector<Expr> minor_of(const std::vector<Expr>& m, int n, int row, int col) {
  std::vector<Expr> out;
  out.reserve(static_cast<std::size_t>((n - 1) * (n - 1)));
  for (int i = 0; i < n; ++i) {
    if (i == row) continue;
    for (int j = 0; j < n; ++j)
      if (j != col) out.push_back(m[static_cast<std::size_t>(i * n + j)]);
  }
  return out;
}

Expr lower_index(const RiemannianMetric& h, const VectorFieldW& W, int i) {
  Expr s = Expr::constant(0.0);
  for (int j = 0; j < h.dim(); ++j) s = s + h.component(i, j) * W.component(j);
  return s;
}

}  // namespace

Expr symbolic_determinant(const std::vector<Expr>& m, int n) {
  if (n > 4) throw Error("symbolic determinant supports n <= 4");
  if (n == 1) return m[0];
  if (n == 2) return m[0] * m[3] - m[1] * m[2];
  Expr s = Expr::constant(0.0);
  for (int j = 0; j < n; ++j) {
    const Expr term = m[static_cast<std::size_t>(j)] * symbolic_determinant(minor_of(m, n, 0, j), n - 1);
    s = j % 2 == 0 ? s + term : s - term;
  }
  return s;
}

std::vector<Expr> symbolic_adjugate(const std::vector<Expr>& m, int n) {
  if (n == 1) return {Expr::constant(1.0)};
  std::vector<Expr> adj(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // adj_ij = (-1)^{i+j} M_ji
      const Expr c = symbolic_determinant(minor_of(m, n, j, i), n - 1);
      adj[static_cast<std::size_t>(i * n + j)] = (i + j) % 2 == 0 ? c : -c;
    }
  return adj;
}

VectorFieldW normalize_wind(const RiemannianMetric& h, const VectorFieldW& W) {
  const int n = h.dim();
  Expr norm2 = Expr::constant(0.0);
  for (int i = 0; i < n; ++i) norm2 = norm2 + W.component(i) * lower_index(h, W, i);
  const Expr norm = sqrt(norm2);
  std::vector<Expr> out;
  for (int i = 0; i < n; ++i) out.push_back(W.component(i) / norm);
  return VectorFieldW(out);
}

KropinaSpace::KropinaSpace(Representation source, RiemannianMetric a, VectorFieldW b, RiemannianMetric h,
                           VectorFieldW W, Expr gauge, Expr f)
    : source_(source),
      a_(std::move(a)),
      b_(std::move(b)),
      h_(std::move(h)),
      W_(std::move(W)),
      gauge_(std::move(gauge)),
      f_(std::move(f)),
      rho_(ln(Expr::constant(2.0) / gauge_)),
      gauge_c_(gauge_) {
  if (a_.dim() != b_.dim() || h_.dim() != W_.dim() || a_.dim() != h_.dim()) throw Error("dimension mismatch");
  if (f_.arity() > dim() || gauge_.arity() > dim()) throw Error("weight or gauge references a coordinate beyond the dimension");
}

KropinaSpace KropinaSpace::from_navigation(RiemannianMetric h, VectorFieldW W, Expr gauge, Expr f) {
  const int n = h.dim();
  if (W.dim() != n) throw Error("h and W dimensions differ");
  if (gauge.is_constant() && !(gauge.node().value > 0.0)) throw PreconditionFailure("gauge must be positive");
  const Expr b2 = gauge * gauge;
  std::vector<Expr> a;
  for (const auto& c : h.components()) a.push_back(b2 / Expr::constant(4.0) * c);
  std::vector<Expr> b;
  for (int i = 0; i < n; ++i) b.push_back(b2 / Expr::constant(2.0) * lower_index(h, W, i));
  return KropinaSpace(Representation::Navigation, RiemannianMetric(n, a, "alpha"), VectorFieldW(b), std::move(h),
                      std::move(W), std::move(gauge), std::move(f));
}

KropinaSpace KropinaSpace::from_alpha_beta(RiemannianMetric a, VectorFieldW b, Expr f) {
  const int n = a.dim();
  if (b.dim() != n) throw Error("alpha and beta dimensions differ");
  const Expr det = symbolic_determinant(a.components(), n);
  const std::vector<Expr> adj = symbolic_adjugate(a.components(), n);
  std::vector<Expr> bup;  // b^i * det a
  for (int i = 0; i < n; ++i) {
    Expr s = Expr::constant(0.0);
    for (int j = 0; j < n; ++j) s = s + adj[static_cast<std::size_t>(i * n + j)] * b.component(j);
    bup.push_back(s);
  }
  Expr num = Expr::constant(0.0);
  for (int i = 0; i < n; ++i) num = num + b.component(i) * bup[static_cast<std::size_t>(i)];
  const Expr b2 = num / det;
  std::vector<Expr> h;
  for (const auto& c : a.components()) h.push_back(Expr::constant(4.0) * c / b2);
  std::vector<Expr> W;
  for (int i = 0; i < n; ++i) W.push_back(bup[static_cast<std::size_t>(i)] / (Expr::constant(2.0) * det));
  RiemannianMetric hm(n, h, "h");
  return KropinaSpace(Representation::AlphaBeta, std::move(a), std::move(b), std::move(hm), VectorFieldW(W), sqrt(b2),
                      std::move(f));
}

KropinaSpace KropinaSpace::regauged(Expr gauge) const { return from_navigation(h_, W_, std::move(gauge), f_); }

KropinaSpace KropinaSpace::with_weight(Expr f) const {
  KropinaSpace s = *this;
  s.f_ = std::move(f);
  if (s.f_.arity() > dim()) throw Error("weight references a coordinate beyond the dimension");
  return s;
}

FinslerPtr KropinaSpace::finsler() const { return source_ == Representation::Navigation ? finsler_nav() : finsler_ab(); }
FinslerPtr KropinaSpace::finsler_ab() const { return kropina_ab_finsler(a_, b_); }
FinslerPtr KropinaSpace::finsler_nav() const { return kropina_nav_finsler(h_, W_); }

VolumeDensity KropinaSpace::bh_density() const { return closed_bh_density(finsler()); }

VolumeDensity KropinaSpace::weighted_density() const { return kwb::weighted_density(bh_density(), f_, dim()); }

double KropinaSpace::unit_norm_defect(std::span<const double> x) const {
  const Matrix h = h_.at(x);
  const Vector W = W_.at(x);
  return std::abs(std::sqrt(W.dot(h * W)) - 1.0);
}

double KropinaSpace::consistency_residual(std::span<const double> x) const {
  const Matrix a = a_.at(x), h = h_.at(x);
  const Vector b = b_.at(x), W = W_.at(x);
  const double g = gauge_c_(x);
  if (!(g > 0.0)) throw PreconditionFailure("gauge is not positive");
  const double e = g * g / 4.0;  // e^{-2 rho}
  double worst = unit_norm_defect(x);
  worst = std::max(worst, (a - e * h).cwiseAbs().maxCoeff() / std::max(1.0, a.cwiseAbs().maxCoeff()));
  worst = std::max(worst, (b - 2.0 * e * (h * W)).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
  const double b2 = b.dot(a.ldlt().solve(b));
  worst = std::max(worst, std::abs(b2 - g * g) / std::max(1.0, b2));
  worst = std::max(worst, std::abs(b2 - 4.0 * e) / std::max(1.0, b2));
  return worst;
}

std::pair<RiemannianMetric, VectorFieldW> ab_to_nav(const KropinaSpace& space) { return {space.h(), space.W()}; }

std::pair<RiemannianMetric, VectorFieldW> nav_to_ab(const RiemannianMetric& h, const VectorFieldW& W,
                                                    const Expr& gauge,
                                                    const std::vector<std::vector<double>>& check_points) {
  const CompiledExpr g(gauge);
  for (const auto& x : check_points) {
    if (!(g(std::span<const double>(x)) > 0.0)) throw PreconditionFailure("gauge is not positive at a check point");
    const Matrix hm = h.at(x);
    const Vector w = W.at(x);
    if (std::abs(std::sqrt(w.dot(hm * w)) - 1.0) > 1e-8) throw PreconditionFailure("|W|_h differs from 1");
  }
  const KropinaSpace s = KropinaSpace::from_navigation(h, W, gauge);
  return {s.a(), s.b()};
}

namespace {

template <typename Accept>
std::vector<std::vector<double>> draw_directions(const KropinaSpace& space, std::span<const double> x, int count,
                                                 int max_candidates, const CounterRng& rng, Accept accept) {
  const int n = space.dim();
  const Matrix h = space.h().at(x);
  const Vector Wl = h * space.W().at(x);
  const Eigen::LLT<Matrix> llt(h);
  std::vector<std::vector<double>> out;
  for (int j = 0; j < max_candidates && static_cast<int>(out.size()) < count; ++j) {
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = rng.normal(static_cast<std::uint64_t>(j) * n + i);
    const Vector y = llt.matrixU().solve(Vector(z / z.norm()));
    if (accept(Wl.dot(y))) out.emplace_back(y.data(), y.data() + n);
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> sample_directions(const KropinaSpace& space, std::span<const double> x, int count,
                                                   const CounterRng& rng, double min_w0) {
  auto out = draw_directions(space, x, count, 100 * count, rng, [&](double w0) { return w0 > min_w0; });
  if (static_cast<int>(out.size()) < count) throw PreconditionFailure("too few admissible directions");
  return out;
}

double admissibility_rate(const KropinaSpace& space, std::span<const double> x, int trials, const CounterRng& rng) {
  const auto out = draw_directions(space, x, trials, trials, rng, [](double w0) { return w0 > 0.0; });
  return static_cast<double>(out.size()) / trials;
}

}  // namespace kwb
