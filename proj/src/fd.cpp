#include "kwb/fd.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "kwb/errors.hpp"

namespace kwb {

namespace {

using Stencil = std::vector<std::pair<int, double>>;  // (offset in steps, weight * h^order)

const Stencil& stencil(int order) {
  static const Stencil s0{{0, 1.0}};
  static const Stencil s1{{-1, -0.5}, {1, 0.5}};
  static const Stencil s2{{-1, 1.0}, {0, -2.0}, {1, 1.0}};
  static const Stencil s3{{-2, -0.5}, {-1, 1.0}, {1, -1.0}, {2, 0.5}};
  switch (order) {
    case 0: return s0;
    case 1: return s1;
    case 2: return s2;
    default: return s3;
  }
}

double product_stencil(const ScalarFunction& fn, std::vector<double>& x, const MultiIndex& idx, double h, int var) {
  if (var == idx.vars()) {
    const double v = fn(x);
    if (!std::isfinite(v)) throw NonFinite("fd_partial: non-finite function value");
    return v;
  }
  const int e = idx[var];
  if (e == 0) return product_stencil(fn, x, idx, h, var + 1);
  const double x0 = x[static_cast<std::size_t>(var)];
  double sum = 0.0;
  for (const auto& [offset, weight] : stencil(e)) {
    x[static_cast<std::size_t>(var)] = x0 + offset * h;
    sum += weight * product_stencil(fn, x, idx, h, var + 1);
  }
  x[static_cast<std::size_t>(var)] = x0;
  return sum / std::pow(h, e);
}

}  // namespace

double fd_partial(const ScalarFunction& fn, std::span<const double> point, const MultiIndex& idx, double step) {
  if (idx.degree() > 3) throw OrderOverflow("fd_partial supports total degree <= 3");
  if (static_cast<std::size_t>(idx.vars()) != point.size()) throw Error("fd_partial: multi-index/point size mismatch");
  if (!(step > 0.0)) throw Error("fd_partial: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  if (idx.degree() == 0) return product_stencil(fn, x, idx, step, 0);
  const double coarse = product_stencil(fn, x, idx, step, 0);
  const double fine = product_stencil(fn, x, idx, 0.5 * step, 0);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace kwb
