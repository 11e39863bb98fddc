#pragma once

#include <functional>
#include <string>

#include "mxfr/tape.hpp"
#include "mxfr/tensor.hpp"

namespace mxfr {

// Running averages E[g^2] and E[dx^2], per parameter, both zero-initialized.
struct AdaDeltaState {
  std::map<std::string, Tensor> avg_sq_grad;
  std::map<std::string, Tensor> avg_sq_delta;
  double rho = 0.95;
  double eps = 1e-6;

  static AdaDeltaState init(const ParamStore& store, double rho = 0.95,
                            double eps = 1e-6);
};

// One AdaDelta update over every parameter, reading store.grads in place:
//   E[g^2]  <- rho E[g^2] + (1-rho) g^2
//   dx       = -(sqrt(E[dx^2]+eps) / sqrt(E[g^2]+eps)) g
//   E[dx^2] <- rho E[dx^2] + (1-rho) dx^2
//   x       <- x + dx
void adadelta_step(ParamStore& store, AdaDeltaState& state);

struct GradCheckEntry {
  std::string param;
  int coordinate = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  GradCheckEntry worst;
  double max_rel_err = 0.0;
  bool passed(double tolerance) const { return max_rel_err < tolerance; }
};

// Central-difference check of analytic gradients. `f(store, want_grads)`
// returns the loss; when want_grads it must also accumulate gradients into
// store.grads (which grad_check zeroes beforehand). Relative error per
// coordinate is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(
    ParamStore& store,
    const std::function<double(ParamStore&, bool want_grads)>& f,
    double h = 1e-5);

}  // namespace mxfr
