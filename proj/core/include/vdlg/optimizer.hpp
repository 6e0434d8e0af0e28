#pragma once

#include "vdlg/autodiff.hpp"

namespace vdlg {

// Adam with bias correction. Hyperparameter defaults are the usual ones; the
// learning rate is supplied per step by the schedule.
class Adam {
 public:
  struct Hyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() : h_() {}
  explicit Adam(Hyper h) : h_(h) {}

  // Applies one update to every parameter in the store using its accumulated
  // gradient, then leaves gradients untouched (caller zeroes them).
  void step(ParamStore& params, double learning_rate);

  std::int64_t steps_taken() const { return t_; }

 private:
  Hyper h_;
  std::int64_t t_ = 0;
};

}  // namespace vdlg
