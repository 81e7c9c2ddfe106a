// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace splitsim {

/// The only 1-D numeric container in the project.
using Vector = std::vector<double>;

/// Dense row-major matrix of doubles; the only 2-D numeric container.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vector data_;
};

enum class ElemOp { Add, Sub, Mul };
enum class ActivationKind { Tanh, Sigmoid };

/// result[i] = sum_j m(i,j) * v[j]; requires m.cols == v.size().
Vector matvec(const Matrix& m, const Vector& v);

/// result[j] = sum_i m(i,j) * v[i]; requires m.rows == v.size().
Vector matvec_transposed(const Matrix& m, const Vector& v);

/// Per-element add / sub / mul of two equal-length vectors.
Vector elementwise(ElemOp op, const Vector& a, const Vector& b);

/// Element-wise tanh or logistic sigmoid.
Vector activation(ActivationKind kind, const Vector& v);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// In-place helpers used by the layer implementations.
void add_in_place(Vector& a, const Vector& b);
void add_outer(Matrix& m, const Vector& a, const Vector& b);  // m += a * b^T
double dot(const Vector& a, const Vector& b);

bool all_finite(const Vector& v);

}  // namespace splitsim
