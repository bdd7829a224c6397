#include "kwb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "kwb/errors.hpp"

namespace kwb {

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}

Matrix JetMatrix::values() const {
  Matrix out(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out(i, j) = (*this)(i, j).value();
  return out;
}

Vector values(const std::vector<Jet>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].value();
  return out;
}

namespace {

double scale_of(const JetMatrix& m) {
  double s = 0.0;
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) s = std::max(s, std::abs(m(i, j).value()));
  return s;
}

}  // namespace

JetMatrix inverse(const JetMatrix& m, double rel_tol) {
  const int n = m.dim();
  JetMatrix a = m;
  const Jet zero = constant_like(m(0, 0), 0.0);
  const Jet one = constant_like(m(0, 0), 1.0);
  JetMatrix inv(n, zero);
  for (int i = 0; i < n; ++i) inv(i, i) = one;
  const double scale = scale_of(m);
  if (scale == 0.0) throw SingularMatrix("matrix is zero");
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col).value()) > std::abs(a(piv, col).value())) piv = r;
    if (std::abs(a(piv, col).value()) <= rel_tol * scale) throw SingularMatrix("matrix is singular");
    if (piv != col)
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    const Jet pinv = reciprocal(a(col, col));
    for (int j = 0; j < n; ++j) {
      a(col, j) = a(col, j) * pinv;
      inv(col, j) = inv(col, j) * pinv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const Jet factor = a(r, col);
      for (int j = 0; j < n; ++j) {
        a(r, j) -= factor * a(col, j);
        inv(r, j) -= factor * inv(col, j);
      }
    }
  }
  return inv;
}

Jet determinant(const JetMatrix& m) {
  const int n = m.dim();
  JetMatrix a = m;
  Jet det = constant_like(m(0, 0), 1.0);
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a(r, col).value()) > std::abs(a(piv, col).value())) piv = r;
    if (a(piv, col).value() == 0.0) throw SingularMatrix("matrix is singular");
    if (piv != col) {
      for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
      det = -det;
    }
    det *= a(col, col);
    const Jet pinv = reciprocal(a(col, col));
    for (int r = col + 1; r < n; ++r) {
      const Jet factor = a(r, col) * pinv;
      for (int j = col; j < n; ++j) a(r, j) -= factor * a(col, j);
    }
  }
  return det;
}

}  // namespace kwb
