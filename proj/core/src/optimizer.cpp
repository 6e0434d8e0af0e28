#include "vdlg/optimizer.hpp"

#include <cmath>

#include "vdlg/errors.hpp"

namespace vdlg {

void Adam::step(ParamStore& params, double learning_rate) {
  ++t_;
  double bc1 = 1.0 - std::pow(h_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(h_.beta2, static_cast<double>(t_));
  for (Parameter* p : params.all()) {
    if (p->adam_m.size() == 0) {
      p->adam_m = Tensor(p->value.rows(), p->value.cols());
      p->adam_v = Tensor(p->value.rows(), p->value.cols());
    }
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      p->adam_m[i] = h_.beta1 * p->adam_m[i] + (1.0 - h_.beta1) * g;
      p->adam_v[i] = h_.beta2 * p->adam_v[i] + (1.0 - h_.beta2) * g * g;
      double mhat = p->adam_m[i] / bc1;
      double vhat = p->adam_v[i] / bc2;
      p->value[i] -= learning_rate * mhat / (std::sqrt(vhat) + h_.eps);
    }
    if (!p->value.all_finite())
      throw NumericalError("non-finite parameter after Adam step: " + p->name);
  }
}

}  // namespace vdlg
