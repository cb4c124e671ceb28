// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace moral {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws ShapeError when data.size() != rows * cols and ArgumentError on
  // non-finite entries.
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix column(std::span<const double> v);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value);
  bool all_finite() const;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

// y = A x
Vector matvec(const Matrix& a, std::span<const double> x);
// y = A^T x
Vector matvec_transposed(const Matrix& a, std::span<const double> x);
// acc += A^T x
void add_matvec_transposed(const Matrix& a, std::span<const double> x, std::span<double> acc);
// acc += scale * u v^T
void add_outer(Matrix& acc, std::span<const double> u, std::span<const double> v, double scale = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
// Returns v / ||v||. Throws DegenerateVectorError for a zero vector.
Vector normalized(std::span<const double> v);

// Numerically stable softmax (max subtraction). Throws ArgumentError on empty
// or non-finite input.
Vector softmax(std::span<const double> logits);

// Cosine similarity clamped to [-1, 1]. Throws ShapeError on length mismatch
// and DegenerateVectorError when either vector has zero norm.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Error measure for gradient audits: |a - n| / max(|a|, |n|, floor). The
// floor turns the measure into an absolute one for gradients near zero, where
// central differences cannot resolve relative error.
inline constexpr double kRelativeErrorFloor = 1e-3;
double relative_error(double analytic, double numeric);

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::size_t step_count = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t rows, std::size_t cols, double learning_rate = 1e-4);
};

// One bias-corrected Adam update of params in place.
void adam_step(Matrix& params, const Matrix& grads, AdamState& state);

}  // namespace moral
