#include "vdlg/autodiff.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>

#include "vdlg/errors.hpp"

namespace vdlg {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EMat>;
using CMap = Eigen::Map<const EMat>;

namespace {
Map map(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }
CMap cmap(const Tensor& t) { return CMap(t.data(), t.rows(), t.cols()); }
}  // namespace

Parameter& ParamStore::create(const std::string& name, Tensor init) {
  if (by_name_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(init.rows(), init.cols());
  p->value = std::move(init);
  Parameter* raw = p.get();
  order_.push_back(std::move(p));
  by_name_[name] = raw;
  return *raw;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw ConfigError("unknown parameter: " + name);
  return *p;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(order_.size());
  for (auto& p : order_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(order_.size());
  for (auto& p : order_) out.push_back(p.get());
  return out;
}

void ParamStore::zero_grad() {
  for (auto& p : order_) p->grad.fill(0.0);
}

std::int64_t ParamStore::coordinate_count() const {
  std::int64_t n = 0;
  for (auto& p : order_) n += p->value.size();
  return n;
}

Var Tape::emit(Tensor value, std::function<void(Tape&, std::int32_t)> back) {
  Node n;
  n.value = std::move(value);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::int32_t>(nodes_.size()) - 1};
}

Tensor& Tape::grad_of(std::int32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor(n.value.rows(), n.value.cols());
  return n.grad;
}

bool Tape::grad_live(std::int32_t id) const { return nodes_[id].grad.size() != 0; }

const Tensor& Tape::value(Var v) const { return nodes_.at(v.id).value; }
const Tensor& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

Var Tape::input(Tensor value) { return emit(std::move(value), nullptr); }

Var Tape::param(Parameter& p) {
  auto it = param_vars_.find(&p);
  if (it != param_vars_.end()) return Var{it->second};
  Parameter* pp = &p;
  Var v = emit(p.value, [pp](Tape& t, std::int32_t self) {
    map(pp->grad) += cmap(t.nodes_[self].grad);
  });
  param_vars_[&p] = v.id;
  touched_.push_back(&p);
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) throw NumericalError("matmul shape mismatch");
  Tensor C(A.rows(), B.cols());
  map(C) = cmap(A) * cmap(B);
  return emit(std::move(C), [a, b](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    map(t.grad_of(a.id)) += cmap(g) * cmap(t.value(b)).transpose();
    map(t.grad_of(b.id)) += cmap(t.value(a)).transpose() * cmap(g);
  });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.cols()) throw NumericalError("matmul_nt shape mismatch");
  Tensor C(A.rows(), B.rows());
  map(C) = cmap(A) * cmap(B).transpose();
  return emit(std::move(C), [a, b](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    map(t.grad_of(a.id)) += cmap(g) * cmap(t.value(b));
    map(t.grad_of(b.id)) += cmap(g).transpose() * cmap(t.value(a));
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  bool broadcast = B.rows() == 1 && A.rows() != 1;
  if (A.cols() != B.cols() || (!broadcast && A.rows() != B.rows()))
    throw NumericalError("add shape mismatch");
  Tensor C(A.rows(), A.cols());
  if (broadcast)
    map(C) = cmap(A).rowwise() + cmap(B).row(0);
  else
    map(C) = cmap(A) + cmap(B);
  return emit(std::move(C), [a, b, broadcast](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    map(t.grad_of(a.id)) += cmap(g);
    if (broadcast)
      map(t.grad_of(b.id)).row(0) += cmap(g).colwise().sum();
    else
      map(t.grad_of(b.id)) += cmap(g);
  });
}

Var Tape::add_scaled(Var a, Var b, double s) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw NumericalError("add_scaled shape mismatch");
  Tensor C(A.rows(), A.cols());
  map(C) = cmap(A) + s * cmap(B);
  return emit(std::move(C), [a, b, s](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    map(t.grad_of(a.id)) += cmap(g);
    map(t.grad_of(b.id)) += s * cmap(g);
  });
}

Var Tape::scale(Var a, double s) {
  Tensor C(value(a).rows(), value(a).cols());
  map(C) = s * cmap(value(a));
  return emit(std::move(C), [a, s](Tape& t, std::int32_t self) {
    map(t.grad_of(a.id)) += s * cmap(t.nodes_[self].grad);
  });
}

Var Tape::select_rows(Var a, std::vector<int> idx) {
  const Tensor& A = value(a);
  Tensor C(static_cast<std::int64_t>(idx.size()), A.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= A.rows()) throw NumericalError("select_rows index out of range");
    map(C).row(static_cast<std::int64_t>(r)) = cmap(A).row(idx[r]);
  }
  return emit(std::move(C), [a, idx = std::move(idx)](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    Map ga = map(t.grad_of(a.id));
    for (std::size_t r = 0; r < idx.size(); ++r)
      ga.row(idx[r]) += cmap(g).row(static_cast<std::int64_t>(r));
  });
}

Var Tape::concat_rows(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.cols()) throw NumericalError("concat_rows width mismatch");
  Tensor C(A.rows() + B.rows(), A.cols());
  map(C).topRows(A.rows()) = cmap(A);
  map(C).bottomRows(B.rows()) = cmap(B);
  std::int64_t na = A.rows();
  return emit(std::move(C), [a, b, na](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    std::int64_t nb = t.value(b).rows();
    map(t.grad_of(a.id)) += cmap(g).topRows(na);
    map(t.grad_of(b.id)) += cmap(g).bottomRows(nb);
  });
}

Var Tape::slice_cols(Var a, std::int64_t c0, std::int64_t c1) {
  const Tensor& A = value(a);
  if (c0 < 0 || c1 > A.cols() || c0 >= c1) throw NumericalError("slice_cols bad range");
  Tensor C(A.rows(), c1 - c0);
  map(C) = cmap(A).middleCols(c0, c1 - c0);
  return emit(std::move(C), [a, c0, c1](Tape& t, std::int32_t self) {
    map(t.grad_of(a.id)).middleCols(c0, c1 - c0) += cmap(t.nodes_[self].grad);
  });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw NumericalError("concat_cols: no inputs");
  std::int64_t rows = value(parts[0]).rows();
  std::int64_t cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw NumericalError("concat_cols height mismatch");
    cols += value(p).cols();
  }
  Tensor C(rows, cols);
  std::int64_t off = 0;
  for (Var p : parts) {
    map(C).middleCols(off, value(p).cols()) = cmap(value(p));
    off += value(p).cols();
  }
  return emit(std::move(C), [parts](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    std::int64_t off = 0;
    for (Var p : parts) {
      std::int64_t w = t.value(p).cols();
      map(t.grad_of(p.id)) += cmap(g).middleCols(off, w);
      off += w;
    }
  });
}

Var Tape::masked_softmax_rows(Var scores, const std::vector<std::uint8_t>* keep) {
  const Tensor& S = value(scores);
  if (keep && static_cast<std::int64_t>(keep->size()) != S.cols())
    throw NumericalError("softmax mask length mismatch");
  Tensor P(S.rows(), S.cols());
  for (std::int64_t r = 0; r < S.rows(); ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < S.cols(); ++c)
      if (!keep || (*keep)[c]) m = std::max(m, S.at(r, c));
    if (!std::isfinite(m)) throw NumericalError("attention row fully masked");
    double sum = 0.0;
    for (std::int64_t c = 0; c < S.cols(); ++c) {
      if (!keep || (*keep)[c]) {
        P.at(r, c) = std::exp(S.at(r, c) - m);
        sum += P.at(r, c);
      } else {
        P.at(r, c) = 0.0;
      }
    }
    for (std::int64_t c = 0; c < S.cols(); ++c) P.at(r, c) /= sum;
  }
  // dS = P .* (dP - rowdot(dP, P))
  return emit(std::move(P), [scores](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& P = t.nodes_[self].value;
    Map gs = map(t.grad_of(scores.id));
    for (std::int64_t r = 0; r < P.rows(); ++r) {
      double dot = cmap(g).row(r).dot(cmap(P).row(r));
      gs.row(r) += (cmap(g).row(r).array() - dot).matrix().cwiseProduct(cmap(P).row(r));
    }
  });
}

namespace {
double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double gelu_bwd(double x) {
  double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}
}  // namespace

Var Tape::gelu(Var a) {
  const Tensor& A = value(a);
  Tensor C(A.rows(), A.cols());
  for (std::int64_t i = 0; i < A.size(); ++i) C[i] = gelu_fwd(A[i]);
  return emit(std::move(C), [a](Tape& t, std::int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_of(a.id);
    for (std::int64_t i = 0; i < x.size(); ++i) ga[i] += g[i] * gelu_bwd(x[i]);
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = value(x);
  const Tensor& G = value(gamma);
  const Tensor& B = value(beta);
  if (G.rows() != 1 || B.rows() != 1 || G.cols() != X.cols() || B.cols() != X.cols())
    throw NumericalError("layer_norm parameter shape mismatch");
  std::int64_t d = X.cols();
  Tensor Y(X.rows(), d);
  Tensor xhat(X.rows(), d);
  Tensor inv_std(X.rows(), 1);
  for (std::int64_t r = 0; r < X.rows(); ++r) {
    double mu = cmap(X).row(r).mean();
    double var = (cmap(X).row(r).array() - mu).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std.at(r, 0) = is;
    map(xhat).row(r) = ((cmap(X).row(r).array() - mu) * is).matrix();
    map(Y).row(r) =
        (cmap(G).row(0).array() * map(xhat).row(r).array() + cmap(B).row(0).array()).matrix();
  }
  return emit(std::move(Y),
              [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                  Tape& t, std::int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                std::int64_t d = g.cols();
                Map gx = map(t.grad_of(x.id));
                Map gg = map(t.grad_of(gamma.id));
                Map gb = map(t.grad_of(beta.id));
                const auto gm = cmap(g);
                const auto xh = cmap(xhat);
                for (std::int64_t r = 0; r < g.rows(); ++r) {
                  Eigen::RowVectorXd gy_g =
                      gm.row(r).cwiseProduct(cmap(t.value(gamma)).row(0));
                  double m1 = gy_g.mean();
                  double m2 = gy_g.cwiseProduct(xh.row(r)).mean();
                  gx.row(r) += ((gy_g.array() - m1 - xh.row(r).array() * m2) *
                                inv_std.at(r, 0)).matrix();
                  gg.row(0) += gm.row(r).cwiseProduct(xh.row(r));
                  gb.row(0) += gm.row(r);
                  (void)d;
                }
              });
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  if (rate == 0.0) return a;
  if (rate < 0.0 || rate >= 1.0) throw NumericalError("dropout rate out of range");
  const Tensor& A = value(a);
  Tensor mask(A.rows(), A.cols());
  double keep_scale = 1.0 / (1.0 - rate);
  for (std::int64_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
  Tensor C(A.rows(), A.cols());
  map(C) = cmap(A).cwiseProduct(cmap(mask));
  return emit(std::move(C), [a, mask = std::move(mask)](Tape& t, std::int32_t self) {
    map(t.grad_of(a.id)) += cmap(t.nodes_[self].grad).cwiseProduct(cmap(mask));
  });
}

Var Tape::softmax_xent_mean(Var logits, std::vector<int> targets) {
  const Tensor& L = value(logits);
  if (static_cast<std::int64_t>(targets.size()) != L.rows())
    throw NumericalError("softmax_xent target count mismatch");
  std::int64_t m = L.rows();
  if (m == 0) throw NumericalError("softmax_xent on empty logits");
  Tensor probs(L.rows(), L.cols());
  double loss = 0.0;
  for (std::int64_t r = 0; r < m; ++r) {
    int tgt = targets[r];
    if (tgt < 0 || tgt >= L.cols()) throw NumericalError("cross_entropy: target index out of range");
    double mx = cmap(L).row(r).maxCoeff();
    double sum = 0.0;
    for (std::int64_t c = 0; c < L.cols(); ++c) {
      probs.at(r, c) = std::exp(L.at(r, c) - mx);
      sum += probs.at(r, c);
    }
    for (std::int64_t c = 0; c < L.cols(); ++c) probs.at(r, c) /= sum;
    loss += mx + std::log(sum) - L.at(r, tgt);
  }
  loss /= static_cast<double>(m);
  return emit(Tensor::scalar(loss),
              [logits, targets = std::move(targets), probs = std::move(probs)](
                  Tape& t, std::int32_t self) {
                double g = t.nodes_[self].grad.item();
                std::int64_t m = probs.rows();
                Map gl = map(t.grad_of(logits.id));
                gl += (g / static_cast<double>(m)) * cmap(probs);
                for (std::int64_t r = 0; r < m; ++r)
                  gl(r, targets[static_cast<std::size_t>(r)]) -= g / static_cast<double>(m);
              });
}

Var Tape::kl_vs_softmax_sum(Tensor p_rows, Var logits) {
  const Tensor& L = value(logits);
  if (p_rows.rows() != L.rows() || p_rows.cols() != L.cols())
    throw NumericalError("kl_vs_softmax shape mismatch");
  Tensor q(L.rows(), L.cols());
  double loss = 0.0;
  for (std::int64_t r = 0; r < L.rows(); ++r) {
    double mx = cmap(L).row(r).maxCoeff();
    double sum = 0.0;
    for (std::int64_t c = 0; c < L.cols(); ++c) {
      q.at(r, c) = std::exp(L.at(r, c) - mx);
      sum += q.at(r, c);
    }
    double lse = mx + std::log(sum);
    for (std::int64_t c = 0; c < L.cols(); ++c) {
      q.at(r, c) /= sum;
      double p = p_rows.at(r, c);
      if (p > 0.0) loss += p * (std::log(p) - (L.at(r, c) - lse));
    }
  }
  return emit(Tensor::scalar(loss),
              [logits, p_rows = std::move(p_rows), q = std::move(q)](Tape& t, std::int32_t self) {
                double g = t.nodes_[self].grad.item();
                map(t.grad_of(logits.id)) += g * (cmap(q) - cmap(p_rows));
              });
}

Var Tape::bce_with_logit(Var logit, double label) {
  const Tensor& L = value(logit);
  if (L.size() != 1) throw NumericalError("bce_with_logit expects a scalar logit");
  double l = L.item();
  double loss = binary_cross_entropy_logit(l, label);
  return emit(Tensor::scalar(loss), [logit, label, l](Tape& t, std::int32_t self) {
    double g = t.nodes_[self].grad.item();
    double sig = 1.0 / (1.0 + std::exp(-l));
    t.grad_of(logit.id)[0] += g * (sig - label);
  });
}

void Tape::backward(Var scalar_loss) {
  if (!scalar_loss.valid() || value(scalar_loss).size() != 1)
    throw NumericalError("backward requires a scalar loss");
  grad_of(scalar_loss.id)[0] = 1.0;
  for (std::int32_t i = scalar_loss.id; i >= 0; --i) {
    if (!grad_live(i)) continue;  // off the loss path
    if (nodes_[i].back) nodes_[i].back(*this, i);
  }
}

double grad_check(const std::function<Var(Tape&)>& build_loss,
                  std::span<Parameter* const> params, double epsilon) {
  if (epsilon < 1e-7 || epsilon > 1e-3)
    throw NumericalError("grad_check epsilon out of [1e-7, 1e-3]");

  for (Parameter* p : params) p->grad.fill(0.0);
  {
    Tape tape;
    Var loss = build_loss(tape);
    tape.backward(loss);
  }
  std::vector<Tensor> g_ad;
  g_ad.reserve(params.size());
  for (Parameter* p : params) {
    if (!p->grad.all_finite())
      throw NumericalError("grad_check: non-finite gradient in " + p->name);
    g_ad.push_back(p->grad);
  }

  auto eval = [&]() {
    Tape tape;
    Var loss = build_loss(tape);
    return tape.value(loss).item();
  };

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      double keep = p->value[i];
      p->value[i] = keep + epsilon;
      double f_plus = eval();
      p->value[i] = keep - epsilon;
      double f_minus = eval();
      p->value[i] = keep;
      double g_fd = (f_plus - f_minus) / (2.0 * epsilon);
      double g = g_ad[pi][i];
      double rel = std::abs(g - g_fd) / std::max(1e-8, std::abs(g) + std::abs(g_fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace vdlg
