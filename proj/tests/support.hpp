#pragma once

// Shared generators for randomized tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "kwb/errors.hpp"
#include "kwb/expr.hpp"
#include "kwb/finsler.hpp"
#include "kwb/riemannian.hpp"
#include "kwb/rng.hpp"

namespace kwb::testing {

class RandomSource {
 public:
  RandomSource(std::uint64_t seed, std::uint64_t stream) : rng_(seed, stream) {}
  double uniform() { return rng_.uniform(counter_++); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int pick(int k) { return static_cast<int>(uniform() * k); }

  /// c0 + sum c_i x_i + sum c_ij x_i x_j with small coefficients.
  Expr quadratic(int n, double scale) {
    Expr e = Expr::constant(round(uniform(-scale, scale)));
    for (int i = 0; i < n; ++i) {
      e = e + Expr::constant(round(uniform(-scale, scale))) * Expr::variable(i);
      for (int j = i; j < n; ++j)
        e = e + Expr::constant(round(uniform(-scale, scale))) * Expr::variable(i) * Expr::variable(j);
    }
    return e;
  }

  /// 2 I + P^T P with P random quadratics: positive-definite everywhere.
  std::vector<Expr> metric(int n, double scale = 0.3) {
    std::vector<Expr> p;
    for (int k = 0; k < n * n; ++k) p.push_back(quadratic(n, scale));
    std::vector<Expr> g(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Expr s = Expr::constant(i == j ? 2.0 : 0.0);
        for (int k = 0; k < n; ++k) s = s + p[k * n + i] * p[k * n + j];
        g[i * n + j] = s;
        g[j * n + i] = s;
      }
    return g;
  }

  std::vector<Expr> field(int n, double scale = 0.5) {
    std::vector<Expr> w;
    for (int i = 0; i < n; ++i) w.push_back(quadratic(n, scale) + Expr::constant(i == 0 ? 1.5 : 0.0));
    return w;
  }

  std::vector<double> point(int n, double lo = -0.5, double hi = 0.5) {
    std::vector<double> x(static_cast<std::size_t>(n));
    for (auto& v : x) v = uniform(lo, hi);
    return x;
  }

 private:
  static double round(double v) { return static_cast<double>(static_cast<long long>(v * 1000.0)) / 1000.0; }
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};


/// Random direction with beta >= margin * alpha * |b| for F = alpha^2 / beta.
inline std::vector<double> kropina_direction(const RiemannianMetric& a, const VectorFieldW& b,
                                             const std::vector<double>& x, RandomSource& rs, double margin = 0.2) {
  const Matrix A = a.at(x);
  const Vector B = b.at(x);
  const double bnorm = std::sqrt(B.dot(A.ldlt().solve(B)));
  const int n = a.dim();
  for (int attempt = 0; attempt < 10000; ++attempt) {
    Vector y(n);
    for (int i = 0; i < n; ++i) y(i) = rs.uniform(-1.0, 1.0);
    const double alpha = std::sqrt(y.dot(A * y));
    if (alpha < 0.2) continue;
    if (B.dot(y) >= margin * alpha * bnorm) return std::vector<double>(y.data(), y.data() + n);
  }
  throw Error("no admissible direction found");
}

}  // namespace kwb::testing
