#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vdlg/tensor.hpp"

namespace vdlg {

// A named trainable tensor. Value and gradient live here, outside any tape, so
// gradients can accumulate across the per-instance graphs of one batch.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;  // sized on first optimizer step
  Tensor adam_v;
};

// Registry of parameters (name -> tensor). Iteration order is creation order.
class ParamStore {
 public:
  Parameter& create(const std::string& name, Tensor init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t size() const { return order_.size(); }
  void zero_grad();
  std::int64_t coordinate_count() const;

 private:
  std::vector<std::unique_ptr<Parameter>> order_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over matrix-granular operations. A tape records one forward
// graph (define-by-run); backward() visits the recorded nodes exactly once in
// reverse creation order and accumulates into Parameter::grad for every
// parameter leaf it touched. Single-writer: one tape must not be shared across
// threads, but disjoint tapes over a read-only ParamStore are safe.
class Tape {
 public:
  Var input(Tensor value);
  Var param(Parameter& p);  // idempotent: same Parameter -> same Var within a tape

  Var matmul(Var a, Var b);     // (m x k) * (k x n)
  Var matmul_nt(Var a, Var b);  // (m x k) * (n x k)^T
  Var add(Var a, Var b);        // same shape, or b a broadcast 1 x c row
  Var add_scaled(Var a, Var b, double s);  // a + s * b
  Var scale(Var a, double s);
  Var select_rows(Var a, std::vector<int> idx);
  Var concat_rows(Var a, Var b);
  Var slice_cols(Var a, std::int64_t c0, std::int64_t c1);
  Var concat_cols(const std::vector<Var>& parts);
  // Row-wise softmax; keys with keep[j] == 0 get zero probability in every row.
  // Throws NumericalError if a row has no remaining keys.
  Var masked_softmax_rows(Var scores, const std::vector<std::uint8_t>* keep = nullptr);
  Var gelu(Var a);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-12);
  Var dropout(Var a, double rate, Rng& rng);  // rate == 0 returns a unchanged

  // Mean over rows of -log softmax(row)[target[row]].
  Var softmax_xent_mean(Var logits, std::vector<int> targets);
  // Sum over rows of KL(p_row || softmax(logits_row)); p rows are constants.
  Var kl_vs_softmax_sum(Tensor p_rows, Var logits);
  Var bce_with_logit(Var logit, double label);

  void backward(Var scalar_loss);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;  // zero-sized if the node was off the loss path
  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<Parameter*>& touched_params() const { return touched_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily during backward
    std::function<void(Tape&, std::int32_t self)> back;
  };

  Var emit(Tensor value, std::function<void(Tape&, std::int32_t)> back);
  Tensor& grad_of(std::int32_t id);  // ensure allocated
  bool grad_live(std::int32_t id) const;

  std::vector<Node> nodes_;
  std::vector<Parameter*> touched_;
  std::unordered_map<const Parameter*, std::int32_t> param_vars_;
  friend double grad_check(const std::function<Var(Tape&)>&, std::span<Parameter* const>, double);
};

// Compares reverse-mode gradients of a deterministic scalar-valued graph builder
// against central finite differences, coordinate by coordinate, over the given
// parameters. Returns max over coordinates of |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
// epsilon must lie in [1e-7, 1e-3]. Throws NumericalError on non-finite gradients.
double grad_check(const std::function<Var(Tape&)>& build_loss,
                  std::span<Parameter* const> params, double epsilon);

}  // namespace vdlg
