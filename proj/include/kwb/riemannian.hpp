#pragma once

// Levi-Civita machinery for a Riemannian metric given by component expressions.
//
// Curvature convention: riemann(m, k, i, j) is R^m_{kij} with
//   R^m_{kij} = d_i G^m_{jk} - d_j G^m_{ik} + G^m_{ip} G^p_{jk} - G^m_{jp} G^p_{ik},
// which is the placement for which the Ricci identity reads
//   W_{k|i|j} - W_{k|j|i} = W_m R^m_{kij}.
// Ricci is Ric_{kj} = R^m_{kmj}; it is positive on round spheres.
// Second covariant derivatives are ordered by differentiation: T_{k|i|j} is the
// j-derivative of T_{k|i}.

#include <span>
#include <string>
#include <vector>

#include "kwb/expr.hpp"
#include "kwb/tensor.hpp"

namespace kwb {

class RiemannianMetric {
 public:
  /// `components` is row-major n x n. Symmetry and definiteness are checked
  /// numerically wherever the metric is evaluated at a plain point.
  RiemannianMetric(int n, std::vector<Expr> components, std::string role = "h");

  static RiemannianMetric euclidean(int n, std::string role = "h");

  int dim() const noexcept { return n_; }
  const std::string& role() const noexcept { return role_; }
  const Expr& component(int i, int j) const { return exprs_[static_cast<std::size_t>(i * n_ + j)]; }
  const std::vector<Expr>& components() const noexcept { return exprs_; }
  const CompiledExpr& compiled(int i, int j) const { return compiled_[static_cast<std::size_t>(i * n_ + j)]; }

  /// Components at a plain point. Throws SingularMatrix if not positive-definite.
  Matrix at(std::span<const double> x) const;
  /// Components as jets (any space, any order); no definiteness check.
  JetMatrix at(std::span<const Jet> x) const;

 private:
  int n_;
  std::string role_;
  std::vector<Expr> exprs_;
  std::vector<CompiledExpr> compiled_;
};

/// Component expressions of a vector field; also used for covector fields.
class VectorFieldW {
 public:
  explicit VectorFieldW(std::vector<Expr> components);
  int dim() const noexcept { return static_cast<int>(exprs_.size()); }
  const Expr& component(int i) const { return exprs_[static_cast<std::size_t>(i)]; }
  const std::vector<Expr>& components() const noexcept { return exprs_; }
  const CompiledExpr& compiled(int i) const { return compiled_[static_cast<std::size_t>(i)]; }
  Vector at(std::span<const double> x) const;
  std::vector<Jet> at(std::span<const Jet> x) const;

 private:
  std::vector<Expr> exprs_;
  std::vector<CompiledExpr> compiled_;
};

/// Order-2 jets of the metric at x and everything derived from them.
struct LeviCivita {
  int n = 0;
  std::vector<Jet> x;   // seeded coordinates, n variables, order 2
  JetMatrix g;          // order 2
  JetMatrix g_inv;      // order 2
  std::vector<Jet> gamma;  // G^k_ij at [(k*n + i)*n + j], order 1
  Matrix g_val, g_inv_val;

  const Jet& Gamma(int k, int i, int j) const { return gamma[static_cast<std::size_t>((k * n + i) * n + j)]; }
  double Gamma_val(int k, int i, int j) const { return Gamma(k, i, j).value(); }
};

LeviCivita levi_civita(const RiemannianMetric& g, std::span<const double> x);

/// Covariant derivative of a covector given as jets (order >= 1) in the chart
/// variables of lc. Returns w_{k|i} at [k*n + i], one order lower (capped at 1).
std::vector<Jet> cov_derivative_covector(const LeviCivita& lc, const std::vector<Jet>& w);
/// Covariant derivative of a (0,2)-tensor given as jets at [k*n + i]:
/// returns T_{ki|j} as a Tensor3 (k, i, j).
Tensor3 cov_derivative_2tensor(const LeviCivita& lc, const std::vector<Jet>& t);

Tensor3 christoffel(const LeviCivita& lc);
Tensor4 riemann(const LeviCivita& lc);
Matrix ricci(const Tensor4& riemann);

Tensor3 christoffel(const RiemannianMetric& g, std::span<const double> x);
/// R^m_{kij} indexed (m, k, i, j).
Tensor4 riemann_h(const RiemannianMetric& g, std::span<const double> x);
/// g_{lm} R^m_{kij} indexed (l, k, i, j).
Tensor4 lower_first(const Tensor4& r, const Matrix& g);
Matrix ricci_h(const RiemannianMetric& g, std::span<const double> x);
/// f_{ij} = d_i d_j f - G^m_ij d_m f.
Matrix hess_h(const Expr& f, const RiemannianMetric& g, std::span<const double> x);

struct WInvariants {
  Vector W;        // W^i
  Vector W_low;    // W_i
  Matrix cov;      // W_{i|j}
  Matrix R;        // R_ij = (W_{i|j} + W_{j|i}) / 2
  Matrix S;        // S_ij = (W_{i|j} - W_{j|i}) / 2
  Matrix S_up;     // S^i_j = h^{ik} S_kj
  Vector S_vec;    // S_j = W^i S_ij
  Vector R_vec;    // R_j = W^i R_ij
  double R_scalar = 0.0;  // R_j W^j
};

WInvariants w_invariants(const RiemannianMetric& g, const VectorFieldW& W, std::span<const double> x);
WInvariants w_invariants(const LeviCivita& lc, const VectorFieldW& W);
/// W_{k|i|j} indexed (k, i, j).
Tensor3 second_cov_w(const RiemannianMetric& g, const VectorFieldW& W, std::span<const double> x);
Tensor3 second_cov_w(const LeviCivita& lc, const VectorFieldW& W);

/// Everything a Kropina formula reads from the Riemannian side at one point.
struct CovDerivPack {
  LeviCivita lc;
  Tensor3 gamma;     // G^k_ij
  Tensor4 riemann;   // R^m_{kij}
  Matrix ricci;
  Vector f_grad;     // f_i
  Matrix f_hess;     // f_ij
};

CovDerivPack cov_deriv_pack(const RiemannianMetric& g, const Expr& f, std::span<const double> x);

/// Seeded coordinate jets for x in an n-variable space of the given order.
std::vector<Jet> seed_point(std::span<const double> x, int order);

}  // namespace kwb
