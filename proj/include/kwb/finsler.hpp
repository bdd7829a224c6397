#pragma once

// Generic Finsler pipeline: everything is derived from L = F^2 by jet
// differentiation over the combined (x, y) block of 2n variables. Variables
// 0..n-1 are x, n..2n-1 are y.
//
//   g_ij = 1/2 L_{y^i y^j}
//   G^i  = 1/4 g^{il} (L_{x^k y^l} y^k - L_{x^l})
//   R^i_k = 2 G^i_{x^k} - G^i_{x^m y^k} y^m + 2 G^m G^i_{y^m y^k} - G^i_{y^m} G^m_{y^k}
//   tau  = ln(sqrt(det g) / sigma)
//   S    = y^m tau_{x^m} - 2 G^j tau_{y^j},  Sdot = the same operator applied to S
//
// R^i_k needs second derivatives of G, so curvature runs with order-4 jets.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kwb/expr.hpp"
#include "kwb/riemannian.hpp"
#include "kwb/tensor.hpp"

namespace kwb {

struct SublevelBox {
  Vector lo, hi;
};

class FinslerEvaluator {
 public:
  virtual ~FinslerEvaluator() = default;
  virtual int dim() const = 0;
  virtual bool in_domain(std::span<const double> x, std::span<const double> y) const = 0;
  virtual double F(std::span<const double> x, std::span<const double> y) const = 0;
  /// F^2 over jets. Evaluated only after the base point passed in_domain.
  virtual Jet L(std::span<const Jet> x, std::span<const Jet> y) const = 0;

  /// Axis-aligned box holding {y : F(x, y) < 1}, when known in closed form.
  virtual std::optional<SublevelBox> sublevel_box(std::span<const double>) const { return std::nullopt; }
  virtual bool has_closed_bh() const { return false; }
  virtual double closed_bh(std::span<const double> x) const;
  virtual Jet closed_bh(std::span<const Jet> x) const;
};

using FinslerPtr = std::shared_ptr<const FinslerEvaluator>;

/// F = sqrt(g(y, y)).
FinslerPtr riemannian_finsler(RiemannianMetric g);
/// F = alpha^2 / beta on beta > 0. `b` holds the covector components b_i.
FinslerPtr kropina_ab_finsler(RiemannianMetric a, VectorFieldW b);
/// F = h^2 / (2 W_0) on W_0 = h(W, y) > 0.
FinslerPtr kropina_nav_finsler(RiemannianMetric h, VectorFieldW W);

/// Evaluator from plain callables; used for scaled and synthetic metrics.
struct FunctionFinslerSpec {
  int n = 0;
  std::function<bool(std::span<const double>, std::span<const double>)> in_domain;
  std::function<double(std::span<const double>, std::span<const double>)> F;
  std::function<Jet(std::span<const Jet>, std::span<const Jet>)> L;
};
FinslerPtr function_finsler(FunctionFinslerSpec spec);
/// F scaled by a constant factor.
FinslerPtr scaled_finsler(FinslerPtr base, double factor);

struct VolumeDensity {
  enum class Kind { BusemannHausdorff, Weighted, Custom };
  Kind kind = Kind::Custom;
  std::function<double(std::span<const double>)> value;
  std::function<Jet(std::span<const Jet>)> jet;

  /// Throws DomainError if the density is not positive at x.
  double operator()(std::span<const double> x) const;
};

/// sqrt(det g).
VolumeDensity riemannian_volume(const RiemannianMetric& g);
/// Closed-form Busemann-Hausdorff density of an evaluator that provides one.
VolumeDensity closed_bh_density(FinslerPtr F);
/// e^{-(n+1) f} times `base`.
VolumeDensity weighted_density(VolumeDensity base, const Expr& f, int n);

Matrix fundamental_tensor(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y);
Vector spray_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y);
Matrix riemann_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y);
double ricci_generic(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y);
double distortion(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                  std::span<const double> y);
double s_curvature_generic(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                           std::span<const double> y);
double sdot_generic(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                    std::span<const double> y);
/// f_{x^i x^j} y^i y^j - 2 f_{x^i} G^i.
double hess_F(const Expr& f, const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y);

struct CurvatureSample {
  Matrix g;
  Vector G;
  Matrix N;  // N^i_j = G^i_{y^j}
  Matrix R;  // R^i_k
  double Ric = 0.0;
  double tau = 0.0;
  double S = 0.0;
  double Sdot = 0.0;
  std::optional<double> hess;
};

/// One order-4 pass producing every field. `f` is optional.
CurvatureSample curvature_sample(const FinslerEvaluator& F, const VolumeDensity& sigma, std::span<const double> x,
                                 std::span<const double> y, const Expr* f = nullptr);

/// Jets of L, g, g^{-1} and G at (x, y) for a given jet order (>= 2).
struct SprayJets {
  int n = 0;
  int order = 0;
  std::vector<Jet> x, y;  // seeded variables of the 2n space
  Jet L;                  // order K
  JetMatrix g;            // order K-2
  JetMatrix g_inv;        // order K-2
  std::vector<Jet> G;     // order K-2
};
SprayJets spray_jets(const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y, int order);

struct GeodesicPoint {
  double t = 0.0;
  Vector c, v;
};

/// Classical RK4 for c'' = -2 G(c, c'). t_end may be negative.
std::vector<GeodesicPoint> geodesic_flow(const FinslerEvaluator& F, std::span<const double> x,
                                         std::span<const double> y, double t_end, int steps);

struct CurveDerivatives {
  double d1 = 0.0;
  double d2 = 0.0;
};

/// First and second t-derivatives at 0 of phi(c(t), c'(t)) along the geodesic
/// through (x, y). Central differences at h and h/2 with Richardson
/// extrapolation; both directions are integrated with a fixed step h/substeps.
CurveDerivatives geodesic_derivatives(
    const FinslerEvaluator& F, std::span<const double> x, std::span<const double> y,
    const std::function<double(std::span<const double>, std::span<const double>)>& phi, double h = 1e-2,
    int substeps = 16);

struct BhDensityEstimate {
  double sigma = 0.0;
  double standard_error = 0.0;  // of sigma
  double volume = 0.0;          // of {F < 1}
  double volume_se = 0.0;
  std::int64_t samples = 0;
  std::int64_t accepted = 0;
  SublevelBox box;
  std::optional<double> closed_form;
};

/// Monte-Carlo Busemann-Hausdorff density: Vol(B^n) / Vol{y : F(x, y) < 1}.
/// Uniform samples in a box around the sublevel set; sample i depends only on
/// (seed, i).
BhDensityEstimate bh_density(const FinslerEvaluator& F, std::span<const double> x, std::int64_t mc_samples,
                             std::uint64_t seed);

double unit_ball_volume(int n);

}  // namespace kwb
