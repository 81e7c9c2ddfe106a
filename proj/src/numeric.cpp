// Copyright 2026 the splitsim authors
// SPDX-License-Identifier: Apache-2.0

#include "splitsim/numeric.hpp"

#include <cmath>
#include <string>

#include "splitsim/error.hpp"

namespace splitsim {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Vector matvec(const Matrix& m, const Vector& v) {
  contract(m.cols() == v.size(), "matvec: matrix " + shape_str(m) +
                                     " incompatible with vector of length " +
                                     std::to_string(v.size()));
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) acc += m(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
  contract(m.rows() == v.size(), "matvec_transposed: matrix " + shape_str(m) +
                                     " incompatible with vector of length " +
                                     std::to_string(v.size()));
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j) * v[i];
  }
  return out;
}

Vector elementwise(ElemOp op, const Vector& a, const Vector& b) {
  contract(a.size() == b.size(),
           "elementwise: length " + std::to_string(a.size()) + " vs " +
               std::to_string(b.size()));
  Vector out(a.size());
  switch (op) {
    case ElemOp::Add:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      break;
    case ElemOp::Sub:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
      break;
    case ElemOp::Mul:
      for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      break;
  }
  return out;
}

Vector activation(ActivationKind kind, const Vector& v) {
  Vector out(v.size());
  if (kind == ActivationKind::Tanh) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  }
  return out;
}

void add_in_place(Vector& a, const Vector& b) {
  contract(a.size() == b.size(),
           "add_in_place: length " + std::to_string(a.size()) + " vs " +
               std::to_string(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

void add_outer(Matrix& m, const Vector& a, const Vector& b) {
  contract(m.rows() == a.size() && m.cols() == b.size(),
           "add_outer: matrix " + shape_str(m) + " vs outer product " +
               std::to_string(a.size()) + "x" + std::to_string(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) += a[i] * b[j];
  }
}

double dot(const Vector& a, const Vector& b) {
  contract(a.size() == b.size(), "dot: length " + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool all_finite(const Vector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace splitsim
