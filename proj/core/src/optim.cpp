#include "ratsnas/optim.hpp"

#include <cmath>

#include "ratsnas/errors.hpp"

namespace ratsnas {

AdamState make_adam(const std::vector<Tensor>& params, double lr, double beta1,
                    double beta2, double eps) {
  AdamState state;
  state.lr = lr;
  state.beta1 = beta1;
  state.beta2 = beta2;
  state.eps = eps;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const Tensor& p : params) {
    state.m.push_back(Tensor::zeros_like(p));
    state.v.push_back(Tensor::zeros_like(p));
  }
  return state;
}

void adam_update(std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                 AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeMismatchError("adam: parameter count mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    if (!params[pi].same_shape(grads[pi])) {
      throw ShapeMismatchError("adam: gradient shape mismatch");
    }
    Tensor& p = params[pi];
    Tensor& m = state.m[pi];
    Tensor& v = state.v[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = grads[pi][i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  Tensor t = Tensor::matrix(fan_in, fan_out);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-a, a);
  return t;
}

}  // namespace ratsnas
