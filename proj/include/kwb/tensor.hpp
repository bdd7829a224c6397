#pragma once

// Small dense tensors over a chart of dimension n, plus jet-valued matrices.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "kwb/jet.hpp"

namespace kwb {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Rank-3 array, index (a, b, c), each in [0, n).
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int n) : n_(n), v_(static_cast<std::size_t>(n * n * n), 0.0) {}
  int dim() const noexcept { return n_; }
  double& operator()(int a, int b, int c) { return v_[idx(a, b, c)]; }
  double operator()(int a, int b, int c) const { return v_[idx(a, b, c)]; }
  double max_abs() const;

 private:
  std::size_t idx(int a, int b, int c) const { return static_cast<std::size_t>((a * n_ + b) * n_ + c); }
  int n_ = 0;
  std::vector<double> v_;
};

/// Rank-4 array, index (a, b, c, d).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int n) : n_(n), v_(static_cast<std::size_t>(n * n * n * n), 0.0) {}
  int dim() const noexcept { return n_; }
  double& operator()(int a, int b, int c, int d) { return v_[idx(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return v_[idx(a, b, c, d)]; }
  double max_abs() const;

 private:
  std::size_t idx(int a, int b, int c, int d) const {
    return static_cast<std::size_t>(((a * n_ + b) * n_ + c) * n_ + d);
  }
  int n_ = 0;
  std::vector<double> v_;
};

/// Row-major n x n matrix of jets.
class JetMatrix {
 public:
  JetMatrix() = default;
  JetMatrix(int n, const Jet& fill) : n_(n), v_(static_cast<std::size_t>(n * n), fill) {}
  int dim() const noexcept { return n_; }
  Jet& operator()(int i, int j) { return v_[static_cast<std::size_t>(i * n_ + j)]; }
  const Jet& operator()(int i, int j) const { return v_[static_cast<std::size_t>(i * n_ + j)]; }
  Matrix values() const;

 private:
  int n_ = 0;
  std::vector<Jet> v_;
};

/// Gauss-Jordan inverse with partial pivoting on the base values.
/// Throws SingularMatrix when a pivot falls below rel_tol times the largest entry.
JetMatrix inverse(const JetMatrix& m, double rel_tol = 1e-13);
/// Determinant by elimination; jets carry its derivatives.
Jet determinant(const JetMatrix& m);

Vector values(const std::vector<Jet>& v);

}  // namespace kwb
