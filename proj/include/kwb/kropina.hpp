#pragma once

// A Kropina metric F = alpha^2 / beta held in both of its representations:
//
//   (alpha, beta):      a_ij(x), b_i(x), on the cone beta = b_i y^i > 0
//   navigation (h, W):  F = h^2 / (2 W_0), |W|_h = 1
//
// linked through a positive gauge b(x) = |beta|_alpha:
//
//   a_ij = (b^2/4) h_ij,  b_i = (b^2/2) h_ij W^j,
//   h_ij = (4/b^2) a_ij,  W^i = (1/2) a^{ij} b_j.
//
// Any positive gauge describes the same F; the canonical one is b = 2.

#include <span>
#include <utility>
#include <vector>

#include "kwb/expr.hpp"
#include "kwb/finsler.hpp"
#include "kwb/riemannian.hpp"
#include "kwb/rng.hpp"

namespace kwb {

enum class Representation { Navigation, AlphaBeta };

class KropinaSpace {
 public:
  /// Builds the (alpha, beta) view symbolically from navigation data.
  static KropinaSpace from_navigation(RiemannianMetric h, VectorFieldW W, Expr gauge = Expr::constant(2.0),
                                      Expr f = Expr::constant(0.0));
  /// Builds the navigation view symbolically; needs n <= 4 (explicit cofactors).
  static KropinaSpace from_alpha_beta(RiemannianMetric a, VectorFieldW b, Expr f = Expr::constant(0.0));

  int dim() const noexcept { return a_.dim(); }
  Representation source() const noexcept { return source_; }

  const RiemannianMetric& a() const noexcept { return a_; }
  const VectorFieldW& b() const noexcept { return b_; }
  const RiemannianMetric& h() const noexcept { return h_; }
  const VectorFieldW& W() const noexcept { return W_; }
  const Expr& gauge() const noexcept { return gauge_; }
  const Expr& f() const noexcept { return f_; }
  /// ln(2 / b).
  const Expr& rho() const noexcept { return rho_; }

  /// Same navigation data, new gauge.
  KropinaSpace regauged(Expr gauge) const;
  KropinaSpace with_weight(Expr f) const;

  /// F through the view the space was defined in (cheaper expressions).
  FinslerPtr finsler() const;
  FinslerPtr finsler_ab() const;
  FinslerPtr finsler_nav() const;

  /// (2/b)^n sqrt(det a), which equals sqrt(det h).
  VolumeDensity bh_density() const;
  /// e^{-(n+1) f} times the Busemann-Hausdorff density.
  VolumeDensity weighted_density() const;

  /// Largest violation at x of: |W|_h = 1, a = e^{-2 rho} h, b_i = 2 e^{-2 rho} W_i,
  /// |beta|_alpha^2 = b^2 = 4 e^{-2 rho}.
  double consistency_residual(std::span<const double> x) const;
  /// | |W|_h - 1 | at x.
  double unit_norm_defect(std::span<const double> x) const;

 private:
  KropinaSpace(Representation source, RiemannianMetric a, VectorFieldW b, RiemannianMetric h, VectorFieldW W,
               Expr gauge, Expr f);

  Representation source_;
  RiemannianMetric a_;
  VectorFieldW b_;
  RiemannianMetric h_;
  VectorFieldW W_;
  Expr gauge_;
  Expr f_;
  Expr rho_;
  CompiledExpr gauge_c_;
};

/// W / |W|_h, symbolically.
VectorFieldW normalize_wind(const RiemannianMetric& h, const VectorFieldW& W);

/// Navigation data of the space: h_ij = (4/b^2) a_ij, W^i = b^i / 2.
std::pair<RiemannianMetric, VectorFieldW> ab_to_nav(const KropinaSpace& space);

/// alpha = (b/2) h, beta = (b^2/2) W_0 as component expressions. Throws
/// PreconditionFailure when |W|_h deviates from 1 by more than 1e-8 at any
/// check point, or the gauge is not positive there.
std::pair<RiemannianMetric, VectorFieldW> nav_to_ab(const RiemannianMetric& h, const VectorFieldW& W,
                                                    const Expr& gauge,
                                                    const std::vector<std::vector<double>>& check_points);

/// h-unit directions with W_0 > min_w0 at x. Candidate j draws normals
/// j*n .. j*n+n-1 from rng, so the result depends only on (rng, x). Throws
/// PreconditionFailure when fewer than `count` survive 100 * count candidates.
std::vector<std::vector<double>> sample_directions(const KropinaSpace& space, std::span<const double> x, int count,
                                                   const CounterRng& rng, double min_w0 = 1e-3);
/// Fraction of the first `trials` candidates of sample_directions with beta > 0.
double admissibility_rate(const KropinaSpace& space, std::span<const double> x, int trials, const CounterRng& rng);

/// Symbolic determinant and adjugate (cofactor expansion), n <= 4.
Expr symbolic_determinant(const std::vector<Expr>& m, int n);
std::vector<Expr> symbolic_adjugate(const std::vector<Expr>& m, int n);

}  // namespace kwb
