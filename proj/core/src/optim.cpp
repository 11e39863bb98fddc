#include "mxfr/optim.hpp"

#include <cmath>

namespace mxfr {

AdaDeltaState AdaDeltaState::init(const ParamStore& store, double rho,
                                  double eps) {
  AdaDeltaState s;
  s.rho = rho;
  s.eps = eps;
  for (const auto& [name, t] : store.params) {
    s.avg_sq_grad.emplace(name, Tensor(t.shape));
    s.avg_sq_delta.emplace(name, Tensor(t.shape));
  }
  return s;
}

void adadelta_step(ParamStore& store, AdaDeltaState& state) {
  for (auto& [name, x] : store.params) {
    const Tensor& g = store.grads.at(name);
    Tensor& eg = state.avg_sq_grad.at(name);
    Tensor& ed = state.avg_sq_delta.at(name);
    for (int64_t i = 0; i < x.size(); ++i) {
      double gi = g.data[i];
      eg.data[i] = state.rho * eg.data[i] + (1.0 - state.rho) * gi * gi;
      double dx = -std::sqrt(ed.data[i] + state.eps) /
                  std::sqrt(eg.data[i] + state.eps) * gi;
      ed.data[i] = state.rho * ed.data[i] + (1.0 - state.rho) * dx * dx;
      x.data[i] += dx;
    }
  }
}

GradCheckReport grad_check(
    ParamStore& store,
    const std::function<double(ParamStore&, bool want_grads)>& f, double h) {
  store.zero_grads();
  f(store, true);
  std::map<std::string, Tensor> analytic = store.grads;

  GradCheckReport report;
  for (auto& [name, x] : store.params) {
    const Tensor& a = analytic.at(name);
    for (int64_t i = 0; i < x.size(); ++i) {
      double orig = x.data[i];
      x.data[i] = orig + h;
      double fp = f(store, false);
      x.data[i] = orig - h;
      double fm = f(store, false);
      x.data[i] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double den = std::max({std::abs(a.data[i]), std::abs(numeric), 1e-8});
      double rel = std::abs(a.data[i] - numeric) / den;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {name, static_cast<int>(i), a.data[i], numeric, rel};
      }
    }
  }
  return report;
}

}  // namespace mxfr
