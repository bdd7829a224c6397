#pragma once

// Weighted Ricci curvature Ric_{a,c} = Ric + a Sdot - c S^2 of a Kropina
// measure space (F, e^{-(n+1) f} dV_BH) and numerical checkers for the
// weakly weighted Einstein equation
//
//   Ric_{a,c} = (n-1) (3 theta / F + sigma) F^2.
//
// Existential clauses ("there is a scalar / 1-form such that ...") are decided
// by least-squares fits with explicit residuals. End-to-end residuals always go
// through the generic pipeline, never through the closed forms under test.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kwb/kropina.hpp"
#include "kwb/kropina_forms.hpp"

namespace kwb {

enum class Regime { NuNonzero, NuZeroKappaNonzero, NuZeroKappaZero };

const char* regime_name(Regime r);

struct WeightConstants {
  double kappa = 0.0;
  double nu = 0.0;
};

/// kappa = (n-1) - a(n+1), nu = 3(n-1) - 4a(n+1) - c(n+1)^2. Values within
/// 1e-12 (relative to the size of the summands) of zero are returned as 0.
WeightConstants weight_constants(double a, double c, int n);

struct WeightConfig {
  double a = 0.0;
  double c = 0.0;
  int n = 2;

  double kappa() const { return weight_constants(a, c, n).kappa; }
  double nu() const { return weight_constants(a, c, n).nu; }
  Regime regime() const;

  static WeightConfig plain(int n) { return {0.0, 0.0, n}; }
  static WeightConfig ric_inf(int n) { return {1.0, 0.0, n}; }
  /// a = 1, c = 1/(N - n).
  static WeightConfig ric_n(double N, int n);
  /// a = (n-1)/(n+1), c = -(n-1)/(n+1)^2: the projective Ricci curvature.
  static WeightConfig pric(int n);
};

enum class Route { Closed, Generic };

/// Ric, S and Sdot of the weighted density at (x, y).
struct CurvatureParts {
  double ric = 0.0;
  double S = 0.0;
  double Sdot = 0.0;
  double F = 0.0;
};
CurvatureParts curvature_parts(const KropinaSpace& space, std::span<const double> x, std::span<const double> y,
                               Route route);

double ric_ac(const CurvatureParts& p, const WeightConfig& cfg);
double ric_ac(const KropinaSpace& space, const WeightConfig& cfg, std::span<const double> x,
              std::span<const double> y, Route route = Route::Generic);
/// Ric + (n-1) [Sdot/(n+1) + S^2/(n+1)^2].
double pric(const CurvatureParts& p, int n);
double pric(const KropinaSpace& space, std::span<const double> x, std::span<const double> y,
            Route route = Route::Generic);
/// PRic - kappa/(n+1) (Sdot + 4 S^2/(n+1)) + nu S^2/(n+1)^2.
double ric_ac_via_pric(const CurvatureParts& p, const WeightConfig& cfg);

struct EinsteinAnsatz {
  Vector theta;
  double sigma = 0.0;
  bool fitted = false;
  double residual = 0.0;  // max over directions of |einstein residual| / max(1, |Ric_{a,c}|)
};

/// Ric_{a,c}(y) - (n-1)(3 theta(y) F + sigma F^2).
double einstein_residual(const KropinaSpace& space, const WeightConfig& cfg, const EinsteinAnsatz& ansatz,
                         std::span<const double> x, std::span<const double> y, Route route = Route::Generic);

/// Least squares for (theta_1..theta_n, sigma). Needs at least n+2 directions;
/// throws RankDeficient when the system has rank below n+1.
EinsteinAnsatz fit_theta_sigma(const KropinaSpace& space, const WeightConfig& cfg, std::span<const double> x,
                               const std::vector<std::vector<double>>& directions, Route route = Route::Generic);

struct TensorEinstein {
  double mu = 0.0;
  double residual = 0.0;  // operator norm of h^{-1}(T - (n-1) mu h)
};
/// mu = tr_h(T) / (n(n-1)).
TensorEinstein tensor_einstein_check(const Matrix& T, const Matrix& h);

/// Homogeneous polynomial of degree d in y stored as a symmetric tensor with n^d entries.
class HomogeneousPoly {
 public:
  HomogeneousPoly(int n, int degree);
  int dim() const noexcept { return n_; }
  int degree() const noexcept { return d_; }
  double& operator[](std::size_t flat) { return c_[flat]; }
  double operator[](std::size_t flat) const { return c_[flat]; }
  std::size_t size() const noexcept { return c_.size(); }
  const std::vector<double>& coefficients() const noexcept { return c_; }

  double operator()(std::span<const double> y) const;
  /// Average over all index permutations.
  HomogeneousPoly symmetrized() const;
  double max_abs() const;

  /// sym(p (x) q).
  static HomogeneousPoly product(const HomogeneousPoly& p, const HomogeneousPoly& q);
  static HomogeneousPoly from_matrix(const Matrix& m);
  static HomogeneousPoly from_vector(const Vector& v);
  static HomogeneousPoly from_tensor3(const Tensor3& t);
  HomogeneousPoly& operator+=(const HomogeneousPoly& other);
  HomogeneousPoly& operator*=(double s);

 private:
  int n_;
  int d_;
  std::vector<double> c_;
};

struct Divisibility {
  HomogeneousPoly quotient;
  double residual = 0.0;  // |C - sym(Q (x) a)|_max / max(|C|_max, 1)
};
/// Least-squares solve of coeffs = sym(Q (x) a) for a symmetric Q of degree d-2, d in {2, 3, 4}.
Divisibility poly_divisible_by_alpha2(const HomogeneousPoly& coeffs, const Matrix& a);

/// Values at y of the pieces of
///   b^4 beta^2 alpha^4 [Ric_{a,c} - (n-1)(3 theta F + sigma F^2)]
///     = nu beta^4 r_00^2 + alpha^2 beta^3 P1 + alpha^4 beta^2 P2 + alpha^6 beta P3 + alpha^8 P4.
struct RicacPolys {
  double nu_term = 0.0, P1 = 0.0, P2 = 0.0, P3 = 0.0, P4 = 0.0;
  double total(const AbInvariants& v) const;
};
RicacPolys ricac_polys(const AbInvariants& v, double hess_f, const WeightConfig& cfg, const Vector& theta,
                       double sigma, const Vector& y);
/// Coefficient tensor of P1, assembled from r_{ij;k}, r_ij, r_k, s_k, f_k.
HomogeneousPoly p1_tensor(const AbTensors& t, const WeightConfig& cfg);

// ---- checkers ----

struct CheckOptions {
  double tol = 1e-6;          // existential fits and theorem conditions
  int directions = 12;        // per chart point
  std::uint64_t seed = 0;
  double min_w0 = 0.1;        // h-unit directions keep W_0 > min_w0, away from the cone boundary
};

struct Condition {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool precondition = false;
  bool informational = false;  // reported, never affects the verdict
  bool pass() const { return residual <= tolerance; }
};

enum class Verdict { Pass, Fail, PreconditionFailed };
const char* verdict_name(Verdict v);

struct SampleRecord {
  std::vector<double> x;
  std::map<std::string, double> scalars;
};

struct TheoremReport {
  std::string theorem;
  WeightConfig cfg;
  std::vector<Condition> conditions;
  std::vector<SampleRecord> samples;
  Verdict verdict = Verdict::Pass;
  std::string message;
};

/// Navigation-side characterization (nu != 0): R_ij = 0 and
/// Ric^h + a(n+1) Hess_h f - c(n+1)^2 df (x) df = (n-1) mu h.
TheoremReport thm41_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt = {});
/// (alpha, beta) characterization (nu != 0).
TheoremReport thm44_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt = {});
/// nu = 0, kappa != 0.
TheoremReport thm51_check(const KropinaSpace& space, const WeightConfig& cfg,
                          const std::vector<std::vector<double>>& points, const CheckOptions& opt = {});
/// Projective Ricci curvature (kappa = nu = 0).
TheoremReport thm61_check(const KropinaSpace& space, const std::vector<std::vector<double>>& points,
                          const CheckOptions& opt = {});

/// Checkers selected by regime: thm41 and thm44 for nu != 0, thm51 or thm61 otherwise.
std::vector<TheoremReport> check_auto(const KropinaSpace& space, const WeightConfig& cfg,
                                      const std::vector<std::vector<double>>& points, const CheckOptions& opt = {});

}  // namespace kwb
