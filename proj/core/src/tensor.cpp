#include "vdlg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vdlg/errors.hpp"

namespace vdlg {

Tensor::Tensor(std::int64_t rows, std::int64_t cols, double fill)
    : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows * cols), fill) {
  if (rows < 0 || cols < 0) throw NumericalError("negative tensor extent");
}

Tensor Tensor::from_rows(std::int64_t rows, std::int64_t cols, std::vector<double> values) {
  if (static_cast<std::int64_t>(values.size()) != rows * cols)
    throw NumericalError("tensor shape/value count mismatch");
  Tensor t;
  t.rows_ = rows;
  t.cols_ = cols;
  t.v_ = std::move(values);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  auto n = static_cast<std::int64_t>(values.size());
  return from_rows(1, n, std::move(values));
}

Tensor Tensor::scalar(double v) { return from_rows(1, 1, {v}); }

Tensor Tensor::randn(std::int64_t rows, std::int64_t cols, Rng& rng, double stddev) {
  Tensor t(rows, cols);
  for (auto& x : t.v_) x = rng.normal(0.0, stddev);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw NumericalError("item() on non-scalar tensor");
  return v_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

void Tensor::fill(double v) { std::fill(v_.begin(), v_.end(), v); }

double log_sum_exp(std::span<const double> x) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : x) m = std::max(m, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

Tensor softmax(const Tensor& x) {
  if (x.size() == 0) throw NumericalError("empty softmax");
  double m = *std::max_element(x.values().begin(), x.values().end());
  Tensor out(x.rows(), x.cols());
  double sum = 0.0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - m);
    sum += out[i];
  }
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] /= sum;
  return out;
}

double kl_divergence(const Tensor& p_target, const Tensor& q_model) {
  if (p_target.size() != q_model.size())
    throw NumericalError("KL divergence: size mismatch");
  double sp = 0.0, sq = 0.0;
  for (std::int64_t i = 0; i < p_target.size(); ++i) {
    sp += p_target[i];
    sq += q_model[i];
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
    throw NumericalError("KL divergence: inputs must sum to 1");
  double kl = 0.0;
  for (std::int64_t i = 0; i < p_target.size(); ++i) {
    double p = p_target[i];
    if (p <= 0.0) continue;
    double q = q_model[i];
    if (q <= 0.0) throw NumericalError("KL support");
    kl += p * (std::log(p) - std::log(q));
  }
  // clamp tiny negative round-off from p ~= q
  return kl < 0.0 && kl > -1e-15 ? 0.0 : kl;
}

double cross_entropy(const Tensor& logits, std::int64_t target_index) {
  if (target_index < 0 || target_index >= logits.size())
    throw NumericalError("cross_entropy: target index out of range");
  return log_sum_exp(logits.values()) - logits[target_index];
}

double binary_cross_entropy_logit(double logit, double label) {
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

}  // namespace vdlg
