#include "core/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace diffanon {

AdamState AdamState::init(const std::vector<Param>& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Param& p : params) {
    s.m.push_back(Tensor::zeros(p.var->value.shape));
    s.v.push_back(Tensor::zeros(p.var->value.shape));
  }
  return s;
}

void adam_step(std::vector<Param>& params, AdamState& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("adam_step: state does not match parameter list");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Node& node = *params[i].var;
    node.ensure_grad();
    if (!node.value.same_shape(state.m[i]))
      throw std::invalid_argument("adam_step: moment shape mismatch for " + params[i].name);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    for (std::size_t j = 0; j < node.value.data.size(); ++j) {
      const double g = node.grad.data[j];
      m.data[j] = state.beta1 * m.data[j] + (1.0 - state.beta1) * g;
      v.data[j] = state.beta2 * v.data[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m.data[j] / bc1;
      const double v_hat = v.data[j] / bc2;
      node.value.data[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
  zero_grads(params);
}

void zero_grads(std::vector<Param>& params) {
  for (Param& p : params) {
    p.var->ensure_grad();
    std::fill(p.var->grad.data.begin(), p.var->grad.data.end(), 0.0);
  }
}

}  // namespace diffanon
