#pragma once

// Closed-form curvature of a Kropina metric F = alpha^2 / beta.
//
// Lowercase invariants are built from beta with the Levi-Civita connection of
// alpha (";"):
//   r_ij = (b_{i;j} + b_{j;i}) / 2,  s_ij = (b_{i;j} - b_{j;i}) / 2,
//   r^i_j = a^{ik} r_kj,  r_j = b^i r_ij,  r^i = a^{ij} r_j,  r = r_ij b^i b^j,
//   s^i_j = a^{ik} s_kj,  s_j = b^i s_ij,  s^i = a^{ij} s_j,
//   e_ij = r_ij + b_i s_j + b_j s_i.
// A trailing 0 means contraction with y.
//
// Navigation-side quantities use the Levi-Civita connection of h ("|"):
//   R_ij = (W_{i|j} + W_{j|i}) / 2,  S_ij = (W_{i|j} - W_{j|i}) / 2, ...
// and Rbar^m_{kij} is the curvature of h in the convention of riemannian.hpp.

#include <optional>
#include <span>

#include "kwb/kropina.hpp"
#include "kwb/riemannian.hpp"
#include "kwb/tensor.hpp"

namespace kwb {

/// Least-squares fit of r_00 = eta alpha^2 over the directions e_i and e_i + e_j.
struct IsotropyFit {
  double eta = 0.0;
  double residual = 0.0;  // sqrt of the summed squared misfit
  double scale = 0.0;     // max(|r|_max, 1)
  bool holds = false;     // residual < tol * scale
};

/// Every y-independent ingredient at one point x.
struct AbTensors {
  int n = 0;
  Matrix a, a_inv;
  Vector b, b_up;
  double b2 = 0.0;
  Matrix r, s, r_up, s_up, e;
  Vector r_vec, s_vec, r_up_vec, s_up_vec;
  double r_scalar = 0.0;
  Tensor3 r_cov, s_cov;     // r_{ij;k}, s_{ij;k}
  Matrix r_vec_cov;         // r_{j;k}
  Matrix s_vec_cov;         // s_{j;k}
  Tensor3 gamma_a;          // Christoffel symbols of alpha
  Matrix ricci_a;
  IsotropyFit isotropy;
  Vector eta_grad;          // d_k (a^{ij} r_ij / n); equals eta_k when isotropic
  Vector f_grad;            // f_i
  Matrix f_partial2;        // d_i d_j f
  Matrix f_hess_a;          // f_{;ij}
};

AbTensors ab_tensors(const KropinaSpace& space, std::span<const double> x, double isotropy_tol = 1e-8);

/// y-contractions of AbTensors. Throws ConicDomainError unless beta > 0.
struct AbInvariants {
  int n = 0;
  double alpha2 = 0.0, beta = 0.0, F = 0.0, b2 = 0.0;
  double r00 = 0.0, r0 = 0.0, s0 = 0.0, r = 0.0, rkk = 0.0;
  Vector s_i0;     // s_{i0}
  Vector s_up0;    // s^i_0
  Vector r_0i;     // r_{0i}
  double r00_0 = 0.0;     // r_{00;0}
  double r00_k_bk = 0.0;  // r_{00;k} b^k
  double r0_0 = 0.0;      // r_{0;0}
  double s0_0 = 0.0;      // s_{0;0}
  double s0_k_bk = 0.0;   // s_{0;k} b^k
  double sk0_k = 0.0;     // s^k_{0;k}
  double sk_k = 0.0;      // s^k_{;k}
  double sk_sk0 = 0.0;    // s_k s^k_0
  double sk_sk = 0.0;     // s^k s_k
  double sjk_skj = 0.0;   // s^j_k s^k_j
  double rk_sk0 = 0.0;    // r_k s^k_0
  double r0k_sk = 0.0;    // r_{0k} s^k
  double r0k_sk0 = 0.0;   // r_{0k} s^k_0
  double ri_si = 0.0;     // r_i s^i
  double ski_rik = 0.0;   // s^k_i r^i_k
  double ric_alpha = 0.0;
  Vector G_alpha;
  std::optional<double> eta;
  double eta_0 = 0.0, bk_etak = 0.0;
  double f0 = 0.0;
  double f_00 = 0.0;      // d_i d_j f y^i y^j
  double hess_f_alpha = 0.0;
};

AbInvariants ab_invariants(const AbTensors& t, std::span<const double> y);
AbInvariants ab_invariants(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);

/// G^i = G^i_alpha + T^i.
Vector kropina_spray_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> y);
Vector kropina_spray_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);
/// Ric = Ric^alpha + T.
double kropina_ricci_closed(const AbInvariants& v);
double kropina_ricci_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);
/// (n+1)/b^2 (r_0 - r_00 / F).
double s_bh_closed(const AbInvariants& v);
double s_bh_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);
/// S of the weighted density e^{-(n+1) f} sigma_BH: S_BH + (n+1) f_0.
double s_weighted_closed(const AbInvariants& v);
/// f_{x^i x^j} y^i y^j - 2 f_i G^i with the closed spray.
double hess_f_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> y);
/// Sdot / (n+1) for the weighted density, Hess_F f(y) included.
double s_dot_closed(const AbInvariants& v, const AbTensors& t, std::span<const double> y);
double s_dot_closed(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);

/// Conformal-Killing test for beta at a point.
struct ConformalCheck {
  double psi = 0.0;       // L_B a = psi a
  double residual = 0.0;  // |L_B a - psi a|_max / max(|L_B a|_max, 1)
};
/// Lie derivative of alpha along B = beta^sharp from plain partial derivatives.
ConformalCheck beta_conformal(const KropinaSpace& space, std::span<const double> x);

// ---- navigation side ----

struct NavTensors {
  int n = 0;
  Matrix h, h_inv;
  Tensor3 gamma;        // of h
  Tensor4 riemann;      // Rbar^m_{kij}
  Matrix ricci;
  WInvariants w;
  Tensor3 w_second;     // W_{k|i|j}
  double rho = 0.0;
  Vector rho_grad, rho_up;
};

NavTensors nav_tensors(const RiemannianMetric& h, const VectorFieldW& W, const Expr& rho, std::span<const double> x);
NavTensors nav_tensors(const KropinaSpace& space, std::span<const double> x);

struct RsFromNav {
  double r00 = 0.0;
  Vector s_up0;
  double s0 = 0.0;
};
/// r_00, s^i_0, s_0 from R, S and rho.
RsFromNav rs_from_RS(const NavTensors& t, std::span<const double> y);
RsFromNav rs_from_RS(const KropinaSpace& space, std::span<const double> x, std::span<const double> y);

/// G^i = G^i_h - F S^i_0 - (1/2F)(R_00 + 2F S_0)(y^i - F W^i). Throws ConicDomainError when W_0 <= 0.
Vector nav_spray(const NavTensors& t, std::span<const double> y);
Vector nav_spray(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                 std::span<const double> y);

/// Throws PreconditionFailure unless |R_ij|_max < tol and |S_j|_max < tol.
void require_isotropic_s(const NavTensors& t, double tol);

/// R^i_k under R_ij = 0, S_j = 0, with xi^i = y^i - F W^i:
///   R^i_k = Rbar^i_k - 2F Rbar^i_{pkq} y^p W^q - (xi_k/W_0) Rbar^i_{pmq} y^p y^q W^m
///         + F Rbar^i_{kmq} y^m W^q - F^2 S^m_k S^i_m + (xi_k/W_0) F S^m_0 S^i_m.
Matrix nav_riemann_isotropic(const NavTensors& t, std::span<const double> y, double tol = 1e-8);
Matrix nav_riemann_isotropic(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                             std::span<const double> y, double tol = 1e-8);
/// Ric = Ric_h(y, y) - 2F Ric_h(y, W) - F^2 S^m_i S^i_m.
double nav_ricci_isotropic(const NavTensors& t, std::span<const double> y, double tol = 1e-8);
double nav_ricci_isotropic(const RiemannianMetric& h, const VectorFieldW& W, std::span<const double> x,
                           std::span<const double> y, double tol = 1e-8);

/// Residuals of the Killing-field identities at (x, y), each max-abs over i, k:
///   S^i_{0|k} = Rbar^i_{pkq} y^p W^q
///   S^i_{0|0} = -Rbar^i_{pmq} y^p y^q W^m
///   S_{0|k}   = S_mk S^m_0 + W_m Rbar^m_{pkq} y^p W^q
///   S^m_0 S^i_m = W^m Rbar^i_{pmq} W^p y^q   (needs S_j = 0 as well)
struct KillingIdentityResiduals {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s_square = 0.0;
};
KillingIdentityResiduals killing_identities(const NavTensors& t, std::span<const double> y);

}  // namespace kwb
