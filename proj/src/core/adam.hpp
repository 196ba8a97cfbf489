#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/autodiff.hpp"

namespace diffanon {

// Named trainable leaf. Models expose their parameters as a flat list;
// the optimizer and checkpoint writer walk it in declaration order.
struct Param {
  std::string name;
  Var var;
};

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments

  static AdamState init(const std::vector<Param>& params, double lr);
};

// One bias-corrected Adam update from the gradients accumulated in each
// parameter's node. Gradients are zeroed afterwards.
void adam_step(std::vector<Param>& params, AdamState& state);

void zero_grads(std::vector<Param>& params);

}  // namespace diffanon
