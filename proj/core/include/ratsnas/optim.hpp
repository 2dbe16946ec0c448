#pragma once

#include <cstddef>
#include <vector>

#include "ratsnas/rng.hpp"
#include "ratsnas/tensor.hpp"

namespace ratsnas {

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const std::vector<Tensor>& params, double lr = 1e-3,
                    double beta1 = 0.9, double beta2 = 0.999,
                    double eps = 1e-8);

// Standard Adam recurrence with bias correction; mutates params in place and
// advances state.step.
void adam_update(std::vector<Tensor>& params,
                 const std::vector<Tensor>& grads, AdamState& state);

// Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace ratsnas
