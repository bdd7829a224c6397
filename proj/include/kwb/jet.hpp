#pragma once

// Truncated multivariate Taylor arithmetic.
//
// A Jet stores the Taylor coefficients of a function of m variables about a
// base point, up to total degree K. Coefficients are kept densely, ordered by
// total degree and then lexicographically, so the coefficients of any lower
// order truncation form a prefix of the array. All arithmetic is exact
// truncated-series arithmetic; operands of different order combine at the
// lower order.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kwb {

inline constexpr int kMaxJetVars = 8;
inline constexpr int kMaxJetOrder = 4;

class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(int vars);
  MultiIndex(std::initializer_list<int> exponents);

  static MultiIndex unit(int vars, int var);

  int vars() const noexcept { return vars_; }
  int degree() const noexcept;
  int operator[](int var) const { return exps_.at(static_cast<std::size_t>(var)); }
  void set(int var, int exponent);

  /// Product of the factorials of the exponents.
  double factorial() const noexcept;

  MultiIndex operator+(const MultiIndex& other) const;
  bool operator==(const MultiIndex& other) const noexcept = default;

  std::string str() const;

 private:
  std::array<std::uint8_t, kMaxJetVars> exps_{};
  std::uint8_t vars_ = 0;
};

/// Immutable index tables shared by every jet with the same (vars, order).
class JetSpace {
 public:
  struct Product {
    std::uint32_t lhs;
    std::uint32_t rhs;
    std::uint32_t out;
  };
  struct DerivativeTerm {
    std::uint32_t source;
    double factor;
  };

  /// Cached, thread-safe accessor.
  static std::shared_ptr<const JetSpace> get(int vars, int order);

  int vars() const noexcept { return vars_; }
  int order() const noexcept { return order_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const MultiIndex& index(std::size_t position) const { return indices_.at(position); }
  std::optional<std::size_t> find(const MultiIndex& idx) const;
  /// Number of coefficients of total degree <= d.
  std::size_t prefix_size(int degree) const;

  std::span<const Product> products() const noexcept { return products_; }
  /// For each coefficient of the order-1 space, where its value comes from
  /// when differentiating with respect to `var`.
  std::span<const DerivativeTerm> derivative_map(int var) const;

  JetSpace(int vars, int order);

 private:
  int vars_;
  int order_;
  std::vector<MultiIndex> indices_;
  std::vector<std::size_t> prefix_;
  std::vector<Product> products_;
  std::vector<std::vector<DerivativeTerm>> derivative_maps_;
};

class Jet {
 public:
  Jet() = default;
  /// Constant jet.
  Jet(std::shared_ptr<const JetSpace> space, double value);

  /// The coordinate function x_var seeded at `value`.
  static Jet variable(std::shared_ptr<const JetSpace> space, int var, double value);

  bool valid() const noexcept { return space_ != nullptr; }
  const JetSpace& space() const { return *space_; }
  const std::shared_ptr<const JetSpace>& space_ptr() const noexcept { return space_; }
  int order() const noexcept { return space_->order(); }
  int vars() const noexcept { return space_->vars(); }

  double value() const noexcept { return coeffs_[0]; }
  std::span<const double> coefficients() const noexcept { return coeffs_; }
  double coefficient(const MultiIndex& idx) const;

  /// The true partial derivative: idx! times the Taylor coefficient.
  double partial(const MultiIndex& idx) const;

  /// d/dx_var, one order lower.
  Jet derivative(int var) const;
  Jet truncate(int order) const;

  Jet operator-() const;
  Jet& operator+=(const Jet& rhs);
  Jet& operator-=(const Jet& rhs);
  Jet& operator*=(const Jet& rhs);
  Jet& operator/=(const Jet& rhs);
  Jet& operator+=(double rhs);
  Jet& operator-=(double rhs);
  Jet& operator*=(double rhs);
  Jet& operator/=(double rhs);

  friend Jet operator+(Jet lhs, const Jet& rhs) { return lhs += rhs; }
  friend Jet operator-(Jet lhs, const Jet& rhs) { return lhs -= rhs; }
  friend Jet operator*(const Jet& lhs, const Jet& rhs);
  friend Jet operator/(const Jet& lhs, const Jet& rhs);
  friend Jet operator+(Jet lhs, double rhs) { return lhs += rhs; }
  friend Jet operator-(Jet lhs, double rhs) { return lhs -= rhs; }
  friend Jet operator*(Jet lhs, double rhs) { return lhs *= rhs; }
  friend Jet operator/(Jet lhs, double rhs) { return lhs /= rhs; }
  friend Jet operator+(double lhs, Jet rhs) { return rhs += lhs; }
  friend Jet operator-(double lhs, const Jet& rhs) { return (-rhs) += lhs; }
  friend Jet operator*(double lhs, Jet rhs) { return rhs *= lhs; }
  friend Jet operator/(double lhs, const Jet& rhs);

 private:
  Jet(std::shared_ptr<const JetSpace> space, std::vector<double> coeffs)
      : space_(std::move(space)), coeffs_(std::move(coeffs)) {}

  // Applies f(u) = sum_k taylor[k] * (u - u0)^k.
  friend Jet compose(const Jet& u, std::span<const double> taylor);

  std::shared_ptr<const JetSpace> space_;
  std::vector<double> coeffs_;
};

Jet compose(const Jet& u, std::span<const double> taylor);

Jet sin(const Jet& u);
Jet cos(const Jet& u);
Jet exp(const Jet& u);
/// Natural log; requires u.value() > 0.
Jet log(const Jet& u);
/// Requires u.value() > 0.
Jet sqrt(const Jet& u);
Jet reciprocal(const Jet& u);
Jet pow(const Jet& u, int exponent);

inline double value_of(double v) noexcept { return v; }
inline double value_of(const Jet& j) noexcept { return j.value(); }

/// A constant of the same kind as `like` (a plain number, or a jet in the same space).
inline double constant_like(double, double v) noexcept { return v; }
inline Jet constant_like(const Jet& like, double v) { return Jet(like.space_ptr(), v); }

}  // namespace kwb
