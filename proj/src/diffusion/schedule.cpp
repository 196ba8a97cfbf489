#include "diffusion/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace diffanon {

NoiseSchedule make_linear_schedule(int t_steps, double beta_start, double beta_end) {
  if (t_steps < 2) throw std::invalid_argument("schedule: t_steps must be >= 2");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.t_steps = t_steps;
  s.betas.resize(t_steps);
  s.alphas.resize(t_steps);
  s.alpha_bars.resize(t_steps);
  double prod = 1.0;
  for (int i = 0; i < t_steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(t_steps - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[i] = 1.0 - s.betas[i];
    prod *= s.alphas[i];
    s.alpha_bars[i] = prod;
  }
  return s;
}

ForwardSample forward_noise(const Tensor& x0, int t, Tensor eps, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.t_steps)
    throw std::out_of_range("forward_noise: t out of range [1, " +
                            std::to_string(sched.t_steps) + "]");
  if (!x0.same_shape(eps))
    throw std::invalid_argument("forward_noise: eps shape must match x0");
  const double ab = sched.alpha_bar(t);
  const double sa = std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  ForwardSample out;
  out.t = t;
  out.x0_ref = x0;
  out.x_t = Tensor::zeros(x0.shape);
  for (std::size_t i = 0; i < x0.data.size(); ++i)
    out.x_t.data[i] = sa * x0.data[i] + sb * eps.data[i];
  out.eps = std::move(eps);
  return out;
}

Tensor ddim_step(const Tensor& x_t, int t, int t_prev, const Tensor& x0_hat,
                 const NoiseSchedule& sched) {
  if (!(t > t_prev && t_prev >= 0))
    throw std::invalid_argument("ddim_step: require t > t_prev >= 0");
  if (t > sched.t_steps) throw std::out_of_range("ddim_step: t beyond schedule");
  if (!x_t.same_shape(x0_hat))
    throw std::invalid_argument("ddim_step: x0_hat shape must match x_t");
  const double ab_t = sched.alpha_bar(t);
  const double ab_p = sched.alpha_bar(t_prev);
  const double sa_t = std::sqrt(ab_t);
  const double sb_t = std::sqrt(1.0 - ab_t);
  const double sa_p = std::sqrt(ab_p);
  const double sb_p = std::sqrt(1.0 - ab_p);
  Tensor out = Tensor::zeros(x_t.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double eps_hat = (x_t.data[i] - sa_t * x0_hat.data[i]) / sb_t;
    out.data[i] = sa_p * x0_hat.data[i] + sb_p * eps_hat;
  }
  return out;
}

std::vector<std::pair<int, int>> ddim_timestep_grid(int t_steps, int n_infer) {
  if (n_infer < 1 || n_infer > t_steps)
    throw std::invalid_argument("ddim_timestep_grid: n_infer must be in [1, t_steps]");
  std::vector<int> ts(n_infer + 1);
  for (int i = 0; i <= n_infer; ++i) {
    const double v = static_cast<double>(t_steps) * static_cast<double>(n_infer - i) /
                     static_cast<double>(n_infer);
    ts[i] = static_cast<int>(std::lround(v));
  }
  ts[0] = t_steps;
  ts[n_infer] = 0;
  std::vector<std::pair<int, int>> grid;
  grid.reserve(n_infer);
  for (int i = 0; i < n_infer; ++i) {
    int t = ts[i], t_prev = ts[i + 1];
    if (t <= t_prev) continue;  // collapse duplicates from rounding
    grid.emplace_back(t, t_prev);
  }
  return grid;
}

}  // namespace diffanon
