#include "kwb/einstein_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

double snap(double v, double scale) { return std::abs(v) <= 1e-12 * std::max(scale, 1.0) ? 0.0 : v; }

/// Running sum that remembers the largest term, for relative residuals.
struct Balance {
  double sum = 0.0;
  double mag = 0.0;
  void add(double t) {
    sum += t;
    mag = std::max(mag, std::abs(t));
  }
  double relative() const { return std::abs(sum) / std::max(mag, 1.0); }
};

Vector as_vector(std::span<const double> y) {
  Vector v(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Eigen::Index>(i)) = y[i];
  return v;
}

std::size_t ipow(int n, int d) {
  std::size_t p = 1;
  for (int i = 0; i < d; ++i) p *= static_cast<std::size_t>(n);
  return p;
}

std::vector<int> digits(std::size_t flat, int n, int d) {
  std::vector<int> idx(static_cast<std::size_t>(d));
  for (int k = d - 1; k >= 0; --k) {
    idx[static_cast<std::size_t>(k)] = static_cast<int>(flat % static_cast<std::size_t>(n));
    flat /= static_cast<std::size_t>(n);
  }
  return idx;
}

std::size_t flatten(const std::vector<int>& idx, int n) {
  std::size_t f = 0;
  for (int i : idx) f = f * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
  return f;
}

}  // namespace

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::NuNonzero: return "nu!=0";
    case Regime::NuZeroKappaNonzero: return "nu=0,kappa!=0";
    case Regime::NuZeroKappaZero: return "nu=0,kappa=0";
  }
  return "?";
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::PreconditionFailed: return "PRECONDITION";
  }
  return "?";
}

WeightConstants weight_constants(double a, double c, int n) {
  const double an = a * (n + 1), cn = c * (n + 1) * (n + 1);
  WeightConstants w;
  w.kappa = snap((n - 1) - an, std::max<double>(n - 1, std::abs(an)));
  w.nu = snap(3.0 * (n - 1) - 4.0 * an - cn, std::max({3.0 * (n - 1), std::abs(4.0 * an), std::abs(cn)}));
  return w;
}

Regime WeightConfig::regime() const {
  const WeightConstants w = weight_constants(a, c, n);
  if (w.nu != 0.0) return Regime::NuNonzero;
  return w.kappa != 0.0 ? Regime::NuZeroKappaNonzero : Regime::NuZeroKappaZero;
}

WeightConfig WeightConfig::ric_n(double N, int n) {
  if (N == n) throw Error("Ric_N needs N != n");
  return {1.0, 1.0 / (N - n), n};
}

WeightConfig WeightConfig::pric(int n) {
  return {static_cast<double>(n - 1) / (n + 1), -static_cast<double>(n - 1) / ((n + 1) * (n + 1)), n};
}

CurvatureParts curvature_parts(const KropinaSpace& space, std::span<const double> x, std::span<const double> y,
                               Route route) {
  CurvatureParts p;
  if (route == Route::Closed) {
    const AbTensors t = ab_tensors(space, x);
    const AbInvariants v = ab_invariants(t, y);
    p.ric = kropina_ricci_closed(v);
    p.S = s_weighted_closed(v);
    p.Sdot = (space.dim() + 1) * s_dot_closed(v, t, y);
    p.F = v.F;
  } else {
    const FinslerPtr F = space.finsler();
    const CurvatureSample c = curvature_sample(*F, space.weighted_density(), x, y);
    p.ric = c.Ric;
    p.S = c.S;
    p.Sdot = c.Sdot;
    p.F = F->F(x, y);
  }
  return p;
}

double ric_ac(const CurvatureParts& p, const WeightConfig& cfg) { return p.ric + cfg.a * p.Sdot - cfg.c * p.S * p.S; }

double ric_ac(const KropinaSpace& space, const WeightConfig& cfg, std::span<const double> x,
              std::span<const double> y, Route route) {
  return ric_ac(curvature_parts(space, x, y, route), cfg);
}

double pric(const CurvatureParts& p, int n) {
  const double m = n + 1.0;
  return p.ric + (n - 1.0) * (p.Sdot / m + p.S * p.S / (m * m));
}

double pric(const KropinaSpace& space, std::span<const double> x, std::span<const double> y, Route route) {
  return pric(curvature_parts(space, x, y, route), space.dim());
}

double ric_ac_via_pric(const CurvatureParts& p, const WeightConfig& cfg) {
  const double m = cfg.n + 1.0;
  const WeightConstants w = weight_constants(cfg.a, cfg.c, cfg.n);
  return pric(p, cfg.n) - w.kappa / m * (p.Sdot + 4.0 * p.S * p.S / m) + w.nu * p.S * p.S / (m * m);
}

double einstein_residual(const KropinaSpace& space, const WeightConfig& cfg, const EinsteinAnsatz& ansatz,
                         std::span<const double> x, std::span<const double> y, Route route) {
  const CurvatureParts p = curvature_parts(space, x, y, route);
  const double theta = ansatz.theta.dot(as_vector(y));
  return ric_ac(p, cfg) - (cfg.n - 1.0) * (3.0 * theta * p.F + ansatz.sigma * p.F * p.F);
}

namespace {

struct DirectionSample {
  Vector y;
  double F = 0.0;
  double ric_ac = 0.0;
};

EinsteinAnsatz fit_samples(int n, const std::vector<DirectionSample>& samples) {
  const int m = static_cast<int>(samples.size());
  if (m < n + 2) throw RankDeficient("fit needs at least n+2 directions");
  Matrix A(m, n + 1);
  Vector rhs(m);
  for (int k = 0; k < m; ++k) {
    const auto& s = samples[static_cast<std::size_t>(k)];
    // Row divided by F^2 so every direction carries the same weight.
    A.row(k).head(n) = (3.0 * (n - 1.0) / s.F) * s.y.transpose();
    A(k, n) = n - 1.0;
    rhs(k) = s.ric_ac / (s.F * s.F);
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < n + 1) throw RankDeficient("direction set does not determine (theta, sigma)");
  const Vector sol = qr.solve(rhs);
  EinsteinAnsatz out;
  out.theta = sol.head(n);
  out.sigma = sol(n);
  out.fitted = true;
  const Vector res = A * sol - rhs;
  for (int k = 0; k < m; ++k) out.residual = std::max(out.residual, std::abs(res(k)) / std::max(1.0, std::abs(rhs(k))));
  return out;
}

}  // namespace

EinsteinAnsatz fit_theta_sigma(const KropinaSpace& space, const WeightConfig& cfg, std::span<const double> x,
                               const std::vector<std::vector<double>>& directions, Route route) {
  std::vector<DirectionSample> samples;
  for (const auto& y : directions) {
    const CurvatureParts p = curvature_parts(space, x, y, route);
    samples.push_back({as_vector(y), p.F, ric_ac(p, cfg)});
  }
  return fit_samples(space.dim(), samples);
}

TensorEinstein tensor_einstein_check(const Matrix& T, const Matrix& h) {
  const int n = static_cast<int>(h.rows());
  TensorEinstein out;
  out.mu = (h.ldlt().solve(T)).trace() / (n * (n - 1.0));
  const Matrix D = T - (n - 1.0) * out.mu * h;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(0.5 * (D + D.transpose()), h, Eigen::EigenvaluesOnly);
  out.residual = es.eigenvalues().cwiseAbs().maxCoeff();
  return out;
}

// ---- homogeneous polynomials ----

HomogeneousPoly::HomogeneousPoly(int n, int degree) : n_(n), d_(degree), c_(ipow(n, degree), 0.0) {
  if (degree < 0) throw Error("negative degree");
}

double HomogeneousPoly::operator()(std::span<const double> y) const {
  double s = 0.0;
  for (std::size_t f = 0; f < c_.size(); ++f) {
    if (c_[f] == 0.0) continue;
    double t = c_[f];
    for (int i : digits(f, n_, d_)) t *= y[static_cast<std::size_t>(i)];
    s += t;
  }
  return s;
}

HomogeneousPoly HomogeneousPoly::symmetrized() const {
  HomogeneousPoly out(n_, d_);
  std::vector<int> perm(static_cast<std::size_t>(d_));
  std::iota(perm.begin(), perm.end(), 0);
  int count = 0;
  do {
    ++count;
    for (std::size_t f = 0; f < c_.size(); ++f) {
      const auto idx = digits(f, n_, d_);
      std::vector<int> p(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) p[k] = idx[static_cast<std::size_t>(perm[k])];
      out.c_[f] += c_[flatten(p, n_)];
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& v : out.c_) v /= count;
  return out;
}

double HomogeneousPoly::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

HomogeneousPoly HomogeneousPoly::product(const HomogeneousPoly& p, const HomogeneousPoly& q) {
  if (p.n_ != q.n_) throw Error("dimension mismatch");
  HomogeneousPoly out(p.n_, p.d_ + q.d_);
  for (std::size_t i = 0; i < p.c_.size(); ++i)
    for (std::size_t j = 0; j < q.c_.size(); ++j) out.c_[i * q.c_.size() + j] = p.c_[i] * q.c_[j];
  return out.symmetrized();
}

HomogeneousPoly HomogeneousPoly::from_matrix(const Matrix& m) {
  const int n = static_cast<int>(m.rows());
  HomogeneousPoly out(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.c_[static_cast<std::size_t>(i * n + j)] = m(i, j);
  return out.symmetrized();
}

HomogeneousPoly HomogeneousPoly::from_vector(const Vector& v) {
  HomogeneousPoly out(static_cast<int>(v.size()), 1);
  for (int i = 0; i < v.size(); ++i) out.c_[static_cast<std::size_t>(i)] = v(i);
  return out;
}

HomogeneousPoly HomogeneousPoly::from_tensor3(const Tensor3& t) {
  const int n = t.dim();
  HomogeneousPoly out(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out.c_[static_cast<std::size_t>((i * n + j) * n + k)] = t(i, j, k);
  return out.symmetrized();
}

HomogeneousPoly& HomogeneousPoly::operator+=(const HomogeneousPoly& other) {
  if (other.n_ != n_ || other.d_ != d_) throw Error("shape mismatch");
  for (std::size_t f = 0; f < c_.size(); ++f) c_[f] += other.c_[f];
  return *this;
}

HomogeneousPoly& HomogeneousPoly::operator*=(double s) {
  for (auto& v : c_) v *= s;
  return *this;
}

Divisibility poly_divisible_by_alpha2(const HomogeneousPoly& coeffs, const Matrix& a) {
  const int n = coeffs.dim(), d = coeffs.degree();
  if (d < 2 || d > 4) throw Error("divisibility test supports degree 2..4");
  const int q = d - 2;
  const HomogeneousPoly A = HomogeneousPoly::from_matrix(a);
  // One basis element per multiset of q indices.
  std::vector<HomogeneousPoly> basis;
  for (std::size_t f = 0; f < ipow(n, q); ++f) {
    const auto idx = digits(f, n, q);
    if (!std::is_sorted(idx.begin(), idx.end())) continue;
    HomogeneousPoly e(n, q);
    e[f] = 1.0;
    basis.push_back(e.symmetrized());
  }
  const HomogeneousPoly C = coeffs.symmetrized();
  Matrix M(static_cast<Eigen::Index>(C.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t b = 0; b < basis.size(); ++b) {
    const HomogeneousPoly col = HomogeneousPoly::product(basis[b], A);
    for (std::size_t f = 0; f < col.size(); ++f) M(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(b)) = col[f];
  }
  Vector rhs(static_cast<Eigen::Index>(C.size()));
  for (std::size_t f = 0; f < C.size(); ++f) rhs(static_cast<Eigen::Index>(f)) = C[f];
  const Vector sol = M.colPivHouseholderQr().solve(rhs);
  Divisibility out{HomogeneousPoly(n, q), 0.0};
  for (std::size_t b = 0; b < basis.size(); ++b) {
    HomogeneousPoly term = basis[b];
    term *= sol(static_cast<Eigen::Index>(b));
    out.quotient += term;
  }
  out.residual = (M * sol - rhs).cwiseAbs().maxCoeff() / std::max(C.max_abs(), 1.0);
  return out;
}

// ---- the expanded equation ----

double RicacPolys::total(const AbInvariants& v) const {
  const double a2 = v.alpha2, b = v.beta;
  return nu_term + a2 * b * b * b * P1 + a2 * a2 * b * b * P2 + a2 * a2 * a2 * b * P3 + a2 * a2 * a2 * a2 * P4;
}

RicacPolys ricac_polys(const AbInvariants& v, double hess_f, const WeightConfig& cfg, const Vector& theta,
                       double sigma, const Vector& y) {
  const double n = cfg.n, m = n + 1.0;
  const WeightConstants w = weight_constants(cfg.a, cfg.c, cfg.n);
  const double k = w.kappa, nu = w.nu;
  const double b2 = v.b2, b4 = b2 * b2;
  const double r00 = v.r00, r0 = v.r0, s0 = v.s0, f0 = v.f0;
  const double th = theta.dot(y);
  RicacPolys p;
  p.nu_term = nu * std::pow(v.beta, 4) * r00 * r00;
  p.P1 = k * (b2 * v.r00_0 + 2.0 * r00 * r0 + 2.0 * r00 * s0) - 2.0 * nu * r00 * r0 +
         2.0 * cfg.c * m * m * b2 * r00 * f0;
  p.P2 = b4 * v.ric_alpha + b2 * v.r00_k_bk + (n - 2.0) * b2 * v.s0_0 + b2 * r00 * v.rkk - (n - 2.0) * s0 * s0 +
         (-k + n - 2.0) * b2 * v.r0_0 + (k - n) * r00 * v.r + (-2.0 * k + 4.0 - 2.0 * n) * r0 * s0 +
         2.0 * (k + 1.0) * b2 * v.r0k_sk0 + (nu - 2.0 * k + 2.0 - n) * r0 * r0 + cfg.a * m * b4 * hess_f -
         cfg.c * m * m * (2.0 * b2 * r0 * f0 + b4 * f0 * f0);
  p.P3 = (k - n) * s0 * v.r + b2 * v.s0_k_bk + b2 * s0 * v.rkk - b4 * v.sk0_k + (-k + n - 2.0) * b2 * v.rk_sk0 -
         b2 * v.r0k_sk + (n - 1.0) * b2 * v.sk_sk0 - 3.0 * (n - 1.0) * th * b4;
  p.P4 = -(0.5 * b2 * v.sk_sk + 0.25 * b4 * v.sjk_skj + (n - 1.0) * sigma * b4);
  return p;
}

HomogeneousPoly p1_tensor(const AbTensors& t, const WeightConfig& cfg) {
  const int n = t.n;
  const double m = n + 1.0;
  const WeightConstants w = weight_constants(cfg.a, cfg.c, cfg.n);
  const HomogeneousPoly r = HomogeneousPoly::from_matrix(t.r);
  HomogeneousPoly out = HomogeneousPoly::from_tensor3(t.r_cov);
  out *= w.kappa * t.b2;
  HomogeneousPoly rr = HomogeneousPoly::product(r, HomogeneousPoly::from_vector(t.r_vec));
  rr *= 2.0 * w.kappa - 2.0 * w.nu;
  HomogeneousPoly rs = HomogeneousPoly::product(r, HomogeneousPoly::from_vector(t.s_vec));
  rs *= 2.0 * w.kappa;
  HomogeneousPoly rf = HomogeneousPoly::product(r, HomogeneousPoly::from_vector(t.f_grad));
  rf *= 2.0 * cfg.c * m * m * t.b2;
  out += rr;
  out += rs;
  out += rf;
  return out;
}

// ---- checkers ----

namespace {

class ReportBuilder {
 public:
  ReportBuilder(std::string theorem, const WeightConfig& cfg) {
    report_.theorem = std::move(theorem);
    report_.cfg = cfg;
  }

  void observe(const std::string& name, double residual, double tol, bool precondition = false) {
    record(name, residual, tol, precondition, false);
  }
  void inform(const std::string& name, double residual, double tol) { record(name, residual, tol, false, true); }

  SampleRecord& sample(std::span<const double> x) {
    report_.samples.push_back({std::vector<double>(x.begin(), x.end()), {}});
    return report_.samples.back();
  }

  bool preconditions_hold() const {
    return std::all_of(report_.conditions.begin(), report_.conditions.end(),
                       [](const Condition& c) { return !c.precondition || c.pass(); });
  }

  TheoremReport finish(std::string message = {}) {
    report_.verdict = Verdict::Pass;
    for (const auto& c : report_.conditions)
      if (!c.informational && !c.pass()) {
        if (c.precondition) {
          report_.verdict = Verdict::PreconditionFailed;
          break;
        }
        report_.verdict = Verdict::Fail;
      }
    if (report_.verdict == Verdict::Fail && message.empty()) message = regrouping_note();
    report_.message = std::move(message);
    return std::move(report_);
  }

 private:
  // Names the failing conditions whose regrouped form holds.
  std::string regrouping_note() const {
    std::string names;
    for (const auto& c : report_.conditions) {
      if (c.informational || c.pass()) continue;
      const Condition* alt = nullptr;
      for (const auto& d : report_.conditions)
        if (d.name == c.name + "_regrouped") alt = &d;
      if (!alt || !alt->pass()) return {};
      names += (names.empty() ? "" : ", ") + c.name;
    }
    return names.empty() ? std::string{} : "literal form fails but the Hess_F f regrouping holds: " + names;
  }

  void record(const std::string& name, double residual, double tol, bool precondition, bool informational) {
    for (auto& c : report_.conditions)
      if (c.name == name) {
        c.residual = std::isnan(residual) ? residual : std::max(c.residual, residual);
        return;
      }
    report_.conditions.push_back({name, residual, tol, precondition, informational});
  }

  TheoremReport report_;
};

/// Sampled directions at point index k, rescaled to F(y) = 1.
std::vector<DirectionSample> direction_samples(const KropinaSpace& space, const WeightConfig& cfg,
                                               std::span<const double> x, std::size_t k, const CheckOptions& opt) {
  const CounterRng rng = CounterRng(opt.seed, 0x5a17).split(k);
  const auto dirs = sample_directions(space, x, opt.directions, rng, opt.min_w0);
  const FinslerPtr F = space.finsler();
  std::vector<DirectionSample> out;
  for (auto y : dirs) {
    const double f = F->F(x, y);
    for (auto& v : y) v /= f;
    const CurvatureParts p = curvature_parts(space, x, y, Route::Generic);
    out.push_back({as_vector(y), p.F, ric_ac(p, cfg)});
  }
  return out;
}

void record_fit(ReportBuilder& rb, SampleRecord& rec, const EinsteinAnsatz& fit, double tol) {
  rb.observe("einstein_fit", fit.residual, tol);
  rec.scalars["sigma_fit"] = fit.sigma;
  for (int i = 0; i < fit.theta.size(); ++i) rec.scalars["theta_fit_" + std::to_string(i + 1)] = fit.theta(i);
}

/// Hess_F f = [polynomial part] + F * X with X = f_i s^i_0 - s_0 f_i b^i / b^2.
/// The regrouped conditions move the F * X piece from the quadric into the
/// linear condition, where its power of alpha belongs.
double hess_f_alpha_part(const AbTensors& t, const AbInvariants& v) {
  return t.f_grad.dot(v.s_up0) - v.s0 * t.f_grad.dot(t.b_up) / t.b2;
}

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

void require_regime(const WeightConfig& cfg, const KropinaSpace& space, Regime want, const char* who) {
  if (cfg.n != space.dim()) throw Error("weight configuration dimension differs from the space");
  if (cfg.regime() != want)
    throw DispatchError(std::string(who) + " needs regime " + regime_name(want) + ", got " + regime_name(cfg.regime()));
}

}  // namespace

TheoremReport thm41_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt) {
  require_regime(cfg, space, Regime::NuNonzero, "thm41");
  const int n = space.dim();
  const double m = n + 1.0;
  ReportBuilder rb("thm41", cfg);
  for (const auto& x : points)
    if (space.unit_norm_defect(x) > 1e-8) throw PreconditionFailure("|W|_h differs from 1");

  std::vector<WInvariants> winv;
  for (const auto& x : points) {
    winv.push_back(w_invariants(space.h(), space.W(), x));
    rb.observe("killing", winv.back().R.cwiseAbs().maxCoeff(), opt.tol, true);
  }
  if (!rb.preconditions_hold()) return rb.finish("wind is not Killing: S-curvature is not isotropic");

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    const WInvariants& w = winv[k];
    const CovDerivPack pack = cov_deriv_pack(space.h(), space.f(), x);
    const Matrix& h = pack.lc.g_val;
    const Matrix T = pack.ricci + cfg.a * m * pack.f_hess - cfg.c * m * m * pack.f_grad * pack.f_grad.transpose();
    const TensorEinstein te = tensor_einstein_check(T, h);
    rb.observe("weighted_ricci_h_einstein", te.residual / std::max(1.0, T.cwiseAbs().maxCoeff()), opt.tol);

    const double SS = (w.S_up * w.S_up).trace();
    const double hessW = w.W.dot(pack.f_hess * w.W);
    const double fW = pack.f_grad.dot(w.W);
    const double ricW = w.W.dot(pack.ricci * w.W);
    const double sigma = te.mu - (ricW + SS + cfg.a * m * hessW - cfg.c * m * m * fW * fW) / (n - 1.0);
    const Vector theta = (2.0 * cfg.a * m * (pack.f_hess * w.W + w.S_up.transpose() * pack.f_grad) -
                          2.0 * cfg.c * m * m * fW * pack.f_grad) /
                         (3.0 * (n - 1.0));
    // The relation between mu and sigma as it appears inside the proof.
    const double sigma_proof =
        te.mu - 3.0 * theta.dot(w.W) - (ricW + SS - cfg.a * m * hessW + cfg.c * m * m * fW * fW) / (n - 1.0);

    const auto samples = direction_samples(space, cfg, x, k, opt);
    for (const auto& s : samples) {
      Balance bal;
      bal.add(s.ric_ac);
      bal.add(-(n - 1.0) * 3.0 * theta.dot(s.y) * s.F);
      bal.add(-(n - 1.0) * sigma * s.F * s.F);
      rb.observe("einstein_formula", bal.relative(), opt.tol);
    }
    const EinsteinAnsatz fit = fit_samples(n, samples);
    SampleRecord& rec = rb.sample(x);
    record_fit(rb, rec, fit, opt.tol);
    rb.observe("theta_formula_vs_fit", (fit.theta - theta).cwiseAbs().maxCoeff() / std::max(1.0, theta.cwiseAbs().maxCoeff()), opt.tol);
    rb.observe("sigma_formula_vs_fit", rel_diff(fit.sigma, sigma), opt.tol);
    rb.inform("sigma_proof_vs_fit", rel_diff(fit.sigma, sigma_proof), opt.tol);
    rec.scalars["mu"] = te.mu;
    rec.scalars["sigma_formula"] = sigma;
    rec.scalars["sigma_proof"] = sigma_proof;
    for (int i = 0; i < n; ++i) rec.scalars["theta_formula_" + std::to_string(i + 1)] = theta(i);
  }
  return rb.finish();
}

namespace {

/// Isotropy of r_00 at every point, as a precondition.
std::vector<AbTensors> isotropy_pass(ReportBuilder& rb, const KropinaSpace& space,
                                     const std::vector<std::vector<double>>& points, double tol) {
  std::vector<AbTensors> out;
  for (const auto& x : points) {
    out.push_back(ab_tensors(space, x, tol));
    rb.observe("isotropy", out.back().isotropy.residual / out.back().isotropy.scale, tol, true);
  }
  return out;
}

double sigma_from_s(const AbTensors& t) {
  const double b2 = t.b2;
  return -(0.5 * t.s_vec.dot(t.s_up_vec) + 0.25 * b2 * (t.s_up * t.s_up).trace()) / ((t.n - 1.0) * b2);
}

}  // namespace

TheoremReport thm44_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt) {
  require_regime(cfg, space, Regime::NuNonzero, "thm44");
  const int n = space.dim();
  const double dn = n, m = n + 1.0;
  const double kappa = cfg.kappa(), nu = cfg.nu();
  ReportBuilder rb("thm44", cfg);
  const auto tensors = isotropy_pass(rb, space, points, opt.tol);
  if (!rb.preconditions_hold()) return rb.finish("r_00 is not a multiple of alpha^2: S-curvature is not isotropic");

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    const AbTensors& t = tensors[k];
    const double eta = t.isotropy.eta, b2 = t.b2, b4 = b2 * b2;
    const auto samples = direction_samples(space, cfg, x, k, opt);
    const EinsteinAnsatz fit = fit_samples(n, samples);
    SampleRecord& rec = rb.sample(x);
    record_fit(rb, rec, fit, opt.tol);
    const double thb = fit.theta.dot(t.b_up);
    const double sksk = t.s_vec.dot(t.s_up_vec);
    double sk_k = 0.0;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) sk_k += t.a_inv(i, l) * t.s_vec_cov(l, i);
    const double sjk_skj = (t.s_up * t.s_up).trace();
    const double lambda = -((dn - 2.0) * eta * eta + t.eta_grad.dot(t.b_up)) * b2 + 3.0 * (dn - 1.0) * b2 * thb +
                          (dn - 2.0) * sksk - b2 * (sk_k + sjk_skj);
    double lam_num = 0.0, lam_den = 0.0;
    for (const auto& s : samples) {
      const std::vector<double> y(s.y.data(), s.y.data() + n);
      const AbInvariants v = ab_invariants(t, y);
      const double hess = hess_f_closed(v, t, y);
      const double beta = v.beta, s0 = v.s0;
      Balance lhs;
      lhs.add(v.ric_alpha * b4);
      lhs.add((dn - 2.0) * (b2 * (v.s0_0 + v.eta_0 * beta) - 2.0 * eta * beta * s0 - s0 * s0 - eta * eta * beta * beta));
      lhs.add(-(3.0 * kappa - nu - cfg.a * m) * b4 * v.f0 * v.f0);
      lhs.add((-kappa + dn - 1.0) * b4 * hess);
      lam_num += lhs.sum * v.alpha2;
      lam_den += v.alpha2 * v.alpha2;
      lhs.add(-lambda * v.alpha2);
      rb.observe("ric_alpha_lambda", lhs.relative(), opt.tol);

      Balance lin;
      lin.add(beta * ((dn - 2.0) * sksk + 3.0 * (dn - 1.0) * b2 * thb - b2 * (sk_k + sjk_skj)));
      lin.add(b2 * ((dn - 3.0) * eta * s0 + v.s0_k_bk - b2 * v.sk0_k + (dn - 1.0) * v.sk_sk0 -
                    3.0 * (dn - 1.0) * b2 * fit.theta.dot(s.y)));
      rb.observe("theta_condition", lin.relative(), opt.tol);

      const double X = hess_f_alpha_part(t, v);
      Balance q2 = lhs;
      q2.add(-(-kappa + dn - 1.0) * b4 * v.F * X);
      rb.inform("ric_alpha_lambda_regrouped", q2.relative(), opt.tol);
      Balance l2 = lin;
      l2.add((-kappa + dn - 1.0) * b4 * X);
      rb.inform("theta_condition_regrouped", l2.relative(), opt.tol);
    }
    const double sigma = sigma_from_s(t);
    rb.observe("sigma_formula_vs_fit", rel_diff(sigma, fit.sigma), opt.tol);
    rec.scalars["eta"] = eta;
    rec.scalars["lambda"] = lambda;
    rec.scalars["lambda_fit"] = lam_num / lam_den;
    rec.scalars["sigma_formula"] = sigma;
  }
  return rb.finish();
}

TheoremReport thm51_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt) {
  require_regime(cfg, space, Regime::NuZeroKappaNonzero, "thm51");
  const int n = space.dim();
  const double dn = n;
  const double kappa = cfg.kappa();
  ReportBuilder rb("thm51", cfg);
  std::vector<AbTensors> tensors;
  std::vector<Vector> zetas;
  for (const auto& x : points) {
    tensors.push_back(ab_tensors(space, x, opt.tol));
    const Divisibility d = poly_divisible_by_alpha2(p1_tensor(tensors.back(), cfg), tensors.back().a);
    rb.observe("p1_divisible", d.residual, opt.tol, true);
    Vector z(n);
    for (int i = 0; i < n; ++i) z(i) = d.quotient[static_cast<std::size_t>(i)];
    zetas.push_back(z);
  }
  if (!rb.preconditions_hold()) return rb.finish("P1 is not divisible by alpha^2");

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    const AbTensors& t = tensors[k];
    const Vector& zeta = zetas[k];
    const double b2 = t.b2, b4 = b2 * b2;
    const auto samples = direction_samples(space, cfg, x, k, opt);
    const EinsteinAnsatz fit = fit_samples(n, samples);
    SampleRecord& rec = rb.sample(x);
    record_fit(rb, rec, fit, opt.tol);
    const double thb = fit.theta.dot(t.b_up);
    // The y-independent contractions of AbInvariants, read off any admissible direction.
    const AbInvariants v0 = ab_invariants(t, std::vector<double>(samples.front().y.data(), samples.front().y.data() + n));
    const double u = (dn - kappa) * v0.ri_si + (dn - 2.0) * v0.sk_sk + 3.0 * (dn - 1.0) * b2 * thb -
                     b2 * (v0.sk_k + v0.sjk_skj + v0.ski_rik);
    for (const auto& s : samples) {
      const std::vector<double> y(s.y.data(), s.y.data() + n);
      const AbInvariants v = ab_invariants(t, y);
      const double hess = hess_f_closed(v, t, y);
      const RicacPolys P = ricac_polys(v, hess, cfg, fit.theta, fit.sigma, s.y);
      Balance p1;
      p1.add(P.P1);
      p1.add(-zeta.dot(s.y) * v.alpha2);
      rb.observe("p1_quotient", p1.relative(), opt.tol);

      Balance f2u;
      f2u.add(v.beta * zeta.dot(s.y));
      f2u.add(P.P2);
      f2u.add(-u * v.alpha2);
      rb.observe("u_quadric", f2u.relative(), opt.tol);

      Balance lin;
      lin.add(v.beta * u);
      lin.add((kappa - dn) * v.s0 * v.r);
      lin.add(b2 * v.s0_k_bk);
      lin.add(b2 * v.s0 * v.rkk);
      lin.add(-b4 * v.sk0_k);
      lin.add((dn - kappa - 2.0) * b2 * v.rk_sk0);
      lin.add(-b2 * v.r0k_sk);
      lin.add((dn - 1.0) * b2 * v.sk_sk0);
      lin.add(-3.0 * (dn - 1.0) * fit.theta.dot(s.y) * b4);
      rb.observe("theta_condition", lin.relative(), opt.tol);
      const double X = hess_f_alpha_part(t, v);
      Balance q2 = f2u;
      q2.add(-cfg.a * (dn + 1.0) * b4 * v.F * X);
      rb.inform("u_quadric_regrouped", q2.relative(), opt.tol);
      Balance l2 = lin;
      l2.add(cfg.a * (dn + 1.0) * b4 * X);
      rb.inform("theta_condition_regrouped", l2.relative(), opt.tol);
    }
    const double sigma = sigma_from_s(t);
    rb.observe("sigma_formula_vs_fit", rel_diff(sigma, fit.sigma), opt.tol);
    rec.scalars["u"] = u;
    rec.scalars["sigma_formula"] = sigma;
    for (int i = 0; i < n; ++i) rec.scalars["zeta_" + std::to_string(i + 1)] = zeta(i);
  }
  return rb.finish();
}

TheoremReport thm61_check(const KropinaSpace& space, const std::vector<std::vector<double>>& points,
                          const CheckOptions& opt) {
  const int n = space.dim();
  const double dn = n;
  const WeightConfig cfg = WeightConfig::pric(n);
  require_regime(cfg, space, Regime::NuZeroKappaZero, "thm61");
  ReportBuilder rb("thm61", cfg);
  const auto tensors = isotropy_pass(rb, space, points, opt.tol);
  if (!rb.preconditions_hold()) return rb.finish("r_00 is not a multiple of alpha^2");

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& x = points[k];
    const AbTensors& t = tensors[k];
    const double eta = t.isotropy.eta, b2 = t.b2, b4 = b2 * b2;
    const Vector zeta = -2.0 * (dn - 1.0) * b2 * eta * t.f_grad;
    const auto samples = direction_samples(space, cfg, x, k, opt);
    const EinsteinAnsatz fit = fit_samples(n, samples);
    SampleRecord& rec = rb.sample(x);
    record_fit(rb, rec, fit, opt.tol);
    const double thb = fit.theta.dot(t.b_up);
    const double sksk = t.s_vec.dot(t.s_up_vec);
    double sk_k = 0.0;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < n; ++l) sk_k += t.a_inv(i, l) * t.s_vec_cov(l, i);
    const double sjk_skj = (t.s_up * t.s_up).trace();
    const double u = (dn - 2.0) * sksk + 3.0 * (dn - 1.0) * b2 * thb - b2 * (sk_k + sjk_skj);
    const double bk_etak = t.eta_grad.dot(t.b_up);
    for (const auto& s : samples) {
      const std::vector<double> y(s.y.data(), s.y.data() + n);
      const AbInvariants v = ab_invariants(t, y);
      const double hess = hess_f_closed(v, t, y);
      const double beta = v.beta, s0 = v.s0, a2 = v.alpha2;

      Balance z;
      z.add(zeta.dot(s.y) * a2);
      z.add(2.0 * (dn - 1.0) * b2 * v.r00 * v.f0);
      rb.observe("zeta", z.relative(), opt.tol);

      Balance q;
      q.add(beta * zeta.dot(s.y));
      q.add(b4 * v.ric_alpha);
      q.add(((bk_etak + (dn - 2.0) * eta * eta) * b2 - u) * a2);
      q.add(-(dn - 2.0) * eta * eta * beta * beta);
      q.add(((dn - 2.0) * (b2 * v.eta_0 - 2.0 * eta * s0) + 2.0 * (dn - 1.0) * b2 * eta * v.f0) * beta);
      q.add((dn - 2.0) * (b2 * v.s0_0 - s0 * s0));
      q.add((dn - 1.0) * b4 * (hess + v.f0 * v.f0));
      rb.observe("u_quadric", q.relative(), opt.tol);

      Balance lin;
      lin.add(((dn - 2.0) * sksk + 3.0 * (dn - 1.0) * b2 * thb - b2 * (sk_k + sjk_skj)) * beta);
      lin.add((dn - 3.0) * b2 * eta * s0);
      lin.add(b2 * v.s0_k_bk);
      lin.add(-b4 * v.sk0_k);
      lin.add((dn - 1.0) * b2 * v.sk_sk0);
      lin.add(-3.0 * (dn - 1.0) * b4 * fit.theta.dot(s.y));
      rb.observe("theta_condition", lin.relative(), opt.tol);
      const double X = hess_f_alpha_part(t, v);
      Balance q2 = q;
      q2.add(-(dn - 1.0) * b4 * v.F * X);
      rb.inform("u_quadric_regrouped", q2.relative(), opt.tol);
      Balance l2 = lin;
      l2.add((dn - 1.0) * b4 * X);
      rb.inform("theta_condition_regrouped", l2.relative(), opt.tol);
    }
    const double sigma = sigma_from_s(t);
    rb.observe("sigma_formula_vs_fit", rel_diff(sigma, fit.sigma), opt.tol);
    rec.scalars["eta"] = eta;
    rec.scalars["u"] = u;
    rec.scalars["sigma_formula"] = sigma;
    for (int i = 0; i < n; ++i) rec.scalars["zeta_" + std::to_string(i + 1)] = zeta(i);
  }
  return rb.finish();
}

std::vector<TheoremReport> check_auto(const KropinaSpace& space, const WeightConfig& cfg,
                                      const std::vector<std::vector<double>>& points, const CheckOptions& opt) {
  switch (cfg.regime()) {
    case Regime::NuNonzero: return {thm41_check(space, cfg, points, opt), thm44_check(space, cfg, points, opt)};
    case Regime::NuZeroKappaNonzero: return {thm51_check(space, cfg, points, opt)};
    case Regime::NuZeroKappaZero: return {thm61_check(space, points, opt)};
  }
  return {};
}

}  // namespace kwb
