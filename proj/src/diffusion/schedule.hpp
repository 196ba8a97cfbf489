#pragma once

#include <utility>
#include <vector>

#include "core/tensor.hpp"

namespace diffanon {

// Forward-process variance schedule. Arrays are indexed t-1 for
// t in [1, t_steps]; alpha_bar(0) is defined as 1.
struct NoiseSchedule {
  int t_steps = 0;
  std::vector<double> betas;
  std::vector<double> alphas;      // alpha_t = 1 - beta_t
  std::vector<double> alpha_bars;  // cumulative product of alpha, strictly decreasing

  double beta(int t) const { return betas.at(t - 1); }
  double alpha(int t) const { return alphas.at(t - 1); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bars.at(t - 1); }
};

// Linear beta interpolation inclusive of both endpoints.
NoiseSchedule make_linear_schedule(int t_steps, double beta_start, double beta_end);

struct ForwardSample {
  Tensor x_t;
  Tensor eps;
  int t = 0;
  Tensor x0_ref;
};

// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps. The caller
// supplies eps so every draw stays seed-controlled.
ForwardSample forward_noise(const Tensor& x0, int t, Tensor eps, const NoiseSchedule& sched);

// Deterministic reverse update (eta = 0): recover eps_hat from the
// x0 estimate, then re-noise to t_prev. alpha_bar(0) = 1 makes the final
// step return x0_hat exactly.
Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& x0_hat,
                 const NoiseSchedule& sched);

// Evenly spaced descending (t, t_prev) pairs over [1, t_steps], ending at
// t_prev = 0.
std::vector<std::pair<int, int>> ddim_timestep_grid(int t_steps, int n_infer);

}  // namespace diffanon
