#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vdlg/rng.hpp"

namespace vdlg {

// Dense row-major matrix of 64-bit floats. Rank is at most 2; vectors are 1 x n.
// Values are plain storage: Tensor itself does no gradient bookkeeping (see autodiff.hpp).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::int64_t rows, std::int64_t cols, double fill = 0.0);

  static Tensor from_rows(std::int64_t rows, std::int64_t cols, std::vector<double> values);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor randn(std::int64_t rows, std::int64_t cols, Rng& rng, double stddev = 1.0);

  std::int64_t rows() const { return rows_; }
  std::int64_t cols() const { return cols_; }
  std::int64_t size() const { return rows_ * cols_; }
  std::vector<std::int64_t> shape() const { return {rows_, cols_}; }

  double& at(std::int64_t r, std::int64_t c) { return v_[r * cols_ + c]; }
  double at(std::int64_t r, std::int64_t c) const { return v_[r * cols_ + c]; }
  double& operator[](std::int64_t i) { return v_[i]; }
  double operator[](std::int64_t i) const { return v_[i]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

  double item() const;  // requires size() == 1
  bool all_finite() const;
  void fill(double v);

 private:
  std::int64_t rows_ = 0;
  std::int64_t cols_ = 0;
  std::vector<double> v_;
};

// Numerically stable softmax over all elements of x (shape preserved).
// Throws NumericalError("empty softmax") on empty input.
Tensor softmax(const Tensor& x);

// KL(p || q) for two distributions that sum to 1 within 1e-9.
// Throws NumericalError("KL support") where p_i > 0 and q_i == 0.
double kl_divergence(const Tensor& p_target, const Tensor& q_model);

// -log softmax(logits)[target_index], computed via log-sum-exp.
double cross_entropy(const Tensor& logits, std::int64_t target_index);

// Stable binary cross-entropy of sigmoid(logit) against label in {0, 1}.
double binary_cross_entropy_logit(double logit, double label);

double log_sum_exp(std::span<const double> x);

}  // namespace vdlg
