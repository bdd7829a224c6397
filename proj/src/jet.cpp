#include "kwb/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <utility>

#include "kwb/errors.hpp"

namespace kwb {

MultiIndex::MultiIndex(int vars) {
  if (vars < 0 || vars > kMaxJetVars) throw Error("multi-index: unsupported variable count");
  vars_ = static_cast<std::uint8_t>(vars);
}

MultiIndex::MultiIndex(std::initializer_list<int> exponents) : MultiIndex(static_cast<int>(exponents.size())) {
  int var = 0;
  for (int e : exponents) set(var++, e);
}

MultiIndex MultiIndex::unit(int vars, int var) {
  MultiIndex m(vars);
  m.set(var, 1);
  return m;
}

int MultiIndex::degree() const noexcept {
  int d = 0;
  for (int v = 0; v < vars_; ++v) d += exps_[static_cast<std::size_t>(v)];
  return d;
}

void MultiIndex::set(int var, int exponent) {
  if (var < 0 || var >= vars_) throw Error("multi-index: variable out of range");
  if (exponent < 0 || exponent > 255) throw Error("multi-index: exponent out of range");
  exps_[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(exponent);
}

double MultiIndex::factorial() const noexcept {
  double f = 1.0;
  for (int v = 0; v < vars_; ++v)
    for (int k = 2; k <= exps_[static_cast<std::size_t>(v)]; ++k) f *= k;
  return f;
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  if (other.vars_ != vars_) throw Error("multi-index: variable count mismatch");
  MultiIndex out(vars_);
  for (int v = 0; v < vars_; ++v) out.set(v, (*this)[v] + other[v]);
  return out;
}

std::string MultiIndex::str() const {
  std::ostringstream os;
  os << '(';
  for (int v = 0; v < vars_; ++v) os << (v ? "," : "") << (*this)[v];
  os << ')';
  return os.str();
}

namespace {

void enumerate(int vars, int degree, int var, MultiIndex& cur, std::vector<MultiIndex>& out) {
  if (var == vars - 1) {
    cur.set(var, degree);
    out.push_back(cur);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    cur.set(var, e);
    enumerate(vars, degree - e, var + 1, cur, out);
  }
}

}  // namespace

JetSpace::JetSpace(int vars, int order) : vars_(vars), order_(order) {
  if (vars < 1 || vars > kMaxJetVars) throw Error("jet space: variable count must be in [1, 8]");
  if (order < 0 || order > kMaxJetOrder) throw Error("jet space: order must be in [0, 4]");
  for (int d = 0; d <= order; ++d) {
    MultiIndex cur(vars);
    enumerate(vars, d, 0, cur, indices_);
    prefix_.push_back(indices_.size());
  }
  for (std::size_t i = 0; i < indices_.size(); ++i) {
    for (std::size_t j = 0; j < indices_.size(); ++j) {
      if (indices_[i].degree() + indices_[j].degree() > order) continue;
      const auto k = find(indices_[i] + indices_[j]);
      products_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                           static_cast<std::uint32_t>(*k)});
    }
  }
  if (order > 0) {
    derivative_maps_.resize(static_cast<std::size_t>(vars));
    const std::size_t lower = prefix_size(order - 1);
    for (int v = 0; v < vars; ++v) {
      auto& map = derivative_maps_[static_cast<std::size_t>(v)];
      map.reserve(lower);
      for (std::size_t p = 0; p < lower; ++p) {
        MultiIndex raised = indices_[p] + MultiIndex::unit(vars, v);
        map.push_back({static_cast<std::uint32_t>(*find(raised)), static_cast<double>(raised[v])});
      }
    }
  }
}

std::optional<std::size_t> JetSpace::find(const MultiIndex& idx) const {
  if (idx.vars() != vars_) return std::nullopt;
  const int d = idx.degree();
  if (d > order_) return std::nullopt;
  const std::size_t begin = d == 0 ? 0 : prefix_[static_cast<std::size_t>(d - 1)];
  const std::size_t end = prefix_[static_cast<std::size_t>(d)];
  // Within one degree the enumeration is lexicographically decreasing.
  for (std::size_t p = begin; p < end; ++p)
    if (indices_[p] == idx) return p;
  return std::nullopt;
}

std::size_t JetSpace::prefix_size(int degree) const {
  if (degree < 0) return 0;
  return prefix_.at(static_cast<std::size_t>(std::min(degree, order_)));
}

std::span<const JetSpace::DerivativeTerm> JetSpace::derivative_map(int var) const {
  if (order_ == 0) throw OrderOverflow("cannot differentiate an order-0 jet");
  return derivative_maps_.at(static_cast<std::size_t>(var));
}

std::shared_ptr<const JetSpace> JetSpace::get(int vars, int order) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetSpace>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{vars, order}];
  if (!slot) slot = std::make_shared<const JetSpace>(vars, order);
  return slot;
}

Jet::Jet(std::shared_ptr<const JetSpace> space, double value)
    : space_(std::move(space)), coeffs_(space_->size(), 0.0) {
  coeffs_[0] = value;
}

Jet Jet::variable(std::shared_ptr<const JetSpace> space, int var, double value) {
  Jet j(space, value);
  if (var < 0 || var >= space->vars()) throw Error("jet variable index out of range");
  if (space->order() >= 1) j.coeffs_[*space->find(MultiIndex::unit(space->vars(), var))] = 1.0;
  return j;
}

double Jet::coefficient(const MultiIndex& idx) const {
  if (idx.degree() > order())
    throw OrderOverflow("derivative of degree " + std::to_string(idx.degree()) + " requested from an order-" +
                        std::to_string(order()) + " jet");
  const auto p = space_->find(idx);
  if (!p) throw Error("multi-index does not match jet variable count");
  return coeffs_[*p];
}

double Jet::partial(const MultiIndex& idx) const { return coefficient(idx) * idx.factorial(); }

Jet Jet::derivative(int var) const {
  auto lower = JetSpace::get(vars(), order() - 1);
  const auto map = space_->derivative_map(var);
  std::vector<double> out(map.size());
  for (std::size_t p = 0; p < map.size(); ++p) out[p] = map[p].factor * coeffs_[map[p].source];
  return Jet(std::move(lower), std::move(out));
}

Jet Jet::truncate(int order) const {
  if (order >= this->order()) return *this;
  auto lower = JetSpace::get(vars(), order);
  std::vector<double> out(coeffs_.begin(), coeffs_.begin() + static_cast<std::ptrdiff_t>(lower->size()));
  return Jet(std::move(lower), std::move(out));
}

namespace {

void require_same_vars(const Jet& a, const Jet& b) {
  if (!a.valid() || !b.valid()) throw Error("jet arithmetic on an uninitialised jet");
  if (a.vars() != b.vars()) throw Error("jet arithmetic across different variable counts");
}

}  // namespace

Jet Jet::operator-() const {
  Jet out = *this;
  for (double& c : out.coeffs_) c = -c;
  return out;
}

Jet& Jet::operator+=(const Jet& rhs) {
  require_same_vars(*this, rhs);
  if (rhs.order() < order()) *this = truncate(rhs.order());
  for (std::size_t p = 0; p < coeffs_.size(); ++p) coeffs_[p] += rhs.coeffs_[p];
  return *this;
}

Jet& Jet::operator-=(const Jet& rhs) {
  require_same_vars(*this, rhs);
  if (rhs.order() < order()) *this = truncate(rhs.order());
  for (std::size_t p = 0; p < coeffs_.size(); ++p) coeffs_[p] -= rhs.coeffs_[p];
  return *this;
}

Jet& Jet::operator*=(const Jet& rhs) { return *this = *this * rhs; }
Jet& Jet::operator/=(const Jet& rhs) { return *this = *this / rhs; }

Jet& Jet::operator+=(double rhs) {
  coeffs_[0] += rhs;
  return *this;
}
Jet& Jet::operator-=(double rhs) {
  coeffs_[0] -= rhs;
  return *this;
}
Jet& Jet::operator*=(double rhs) {
  for (double& c : coeffs_) c *= rhs;
  return *this;
}
Jet& Jet::operator/=(double rhs) {
  for (double& c : coeffs_) c /= rhs;
  return *this;
}

Jet operator*(const Jet& lhs, const Jet& rhs) {
  require_same_vars(lhs, rhs);
  const auto& space = lhs.order() <= rhs.order() ? lhs.space_ : rhs.space_;
  std::vector<double> out(space->size(), 0.0);
  const double* a = lhs.coeffs_.data();
  const double* b = rhs.coeffs_.data();
  for (const auto& p : space->products()) out[p.out] += a[p.lhs] * b[p.rhs];
  return Jet(space, std::move(out));
}

Jet operator/(const Jet& lhs, const Jet& rhs) { return lhs * reciprocal(rhs); }

Jet operator/(double lhs, const Jet& rhs) { return reciprocal(rhs) * lhs; }

Jet compose(const Jet& u, std::span<const double> taylor) {
  // Horner in the nilpotent part: f(u0 + d) = t0 + d (t1 + d (t2 + ...)).
  Jet delta = u;
  delta.coeffs_[0] = 0.0;
  const int k_max = std::min<int>(u.order(), static_cast<int>(taylor.size()) - 1);
  Jet acc(u.space_, taylor[static_cast<std::size_t>(k_max)]);
  for (int k = k_max - 1; k >= 0; --k) {
    acc = acc * delta;
    acc.coeffs_[0] += taylor[static_cast<std::size_t>(k)];
  }
  return acc;
}

namespace {

constexpr double kInvFactorial[] = {1.0, 1.0, 1.0 / 2.0, 1.0 / 6.0, 1.0 / 24.0};

}  // namespace

Jet sin(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double d[] = {s, c, -s, -c, s};
  double t[5];
  for (int k = 0; k < 5; ++k) t[k] = d[k] * kInvFactorial[k];
  return compose(u, t);
}

Jet cos(const Jet& u) {
  const double s = std::sin(u.value()), c = std::cos(u.value());
  const double d[] = {c, -s, -c, s, c};
  double t[5];
  for (int k = 0; k < 5; ++k) t[k] = d[k] * kInvFactorial[k];
  return compose(u, t);
}

Jet exp(const Jet& u) {
  const double e = std::exp(u.value());
  double t[5];
  for (int k = 0; k < 5; ++k) t[k] = e * kInvFactorial[k];
  return compose(u, t);
}

Jet log(const Jet& u) {
  const double u0 = u.value();
  if (!(u0 > 0.0)) throw DomainError("ln of nonpositive value");
  // k-th Taylor coefficient of ln about u0 is (-1)^(k-1) / (k u0^k).
  double t[5] = {std::log(u0), 0, 0, 0, 0};
  double p = 1.0;
  for (int k = 1; k < 5; ++k) {
    p /= u0;
    t[k] = ((k % 2) ? 1.0 : -1.0) * p / k;
  }
  return compose(u, t);
}

namespace {

// Taylor coefficients of v^power about u0 (binomial series).
Jet real_power(const Jet& u, double power) {
  const double u0 = u.value();
  double t[5];
  double falling = 1.0;
  for (int k = 0; k < 5; ++k) {
    t[k] = falling * std::pow(u0, power - k) * kInvFactorial[k];
    falling *= (power - k);
  }
  return compose(u, t);
}

}  // namespace

Jet sqrt(const Jet& u) {
  if (!(u.value() > 0.0)) throw DomainError("sqrt of nonpositive value");
  return real_power(u, 0.5);
}

Jet reciprocal(const Jet& u) {
  if (u.value() == 0.0) throw DomainError("division by zero");
  return real_power(u, -1.0);
}

Jet pow(const Jet& u, int exponent) {
  if (exponent < 0) return reciprocal(pow(u, -exponent));
  Jet result(u.space_ptr(), 1.0);
  Jet base = u;
  for (int e = exponent; e > 0; e >>= 1) {
    if (e & 1) result = result * base;
    if (e > 1) base = base * base;
  }
  return result;
}

}  // namespace kwb
