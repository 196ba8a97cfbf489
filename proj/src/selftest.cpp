#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "core/adam.hpp"
#include "core/autodiff.hpp"
#include "eval/metrics.hpp"
#include "guide/guidance.hpp"
#include "model/backbone.hpp"
#include "train/trainer.hpp"

namespace diffanon {

namespace {

struct Check {
  std::string name;
  std::function<bool()> fn;
};

bool check_schedule() {
  const NoiseSchedule s = make_linear_schedule(2, 0.5, 0.5);
  if (std::abs(s.alpha_bar(1) - 0.5) > 1e-15 || std::abs(s.alpha_bar(2) - 0.25) > 1e-15)
    return false;
  const NoiseSchedule d = make_linear_schedule(200, 1e-4, 0.02);
  for (int t = 1; t <= d.t_steps; ++t) {
    if (t > 1 && !(d.alpha_bar(t) < d.alpha_bar(t - 1))) return false;
    const double sa = std::sqrt(d.alpha_bar(t)), sb = std::sqrt(1.0 - d.alpha_bar(t));
    if (std::abs(sa * sa + sb * sb - 1.0) > 1e-12) return false;
  }
  return true;
}

bool check_ddim_oracle() {
  SplitMix64 rng(11);
  const NoiseSchedule s = make_linear_schedule(50, 1e-4, 0.02);
  const Tensor x0 = Tensor::randn({4, 6}, rng);
  Tensor eps = Tensor::randn({4, 6}, rng);
  Tensor x = forward_noise(x0, s.t_steps, std::move(eps), s).x_t;
  for (const auto& [t, t_prev] : ddim_timestep_grid(s.t_steps, s.t_steps))
    x = ddim_step(x, t, t_prev, x0, s);
  return max_abs_diff(x, x0) <= 1e-8;
}

bool check_cfg_identities() {
  SplitMix64 rng(22);
  BackboneConfig cfg;
  cfg.n_blocks = 2;
  cfg.channels = 8;
  cfg.embed_dim = 8;
  cfg.cond_pro_dim = 4;
  cfg.cond_spk_dim = 4;
  cfg.t_embed_dim = 8;
  DenoiserModel model(cfg, rng);
  // Non-zero output head so the identities are exercised on real values.
  for (Param& p : model.params())
    if (p.name.rfind("out_proj", 0) == 0)
      for (double& v : p.var->value.data) v = rng.uniform(-0.3, 0.3);

  const int L = 10;
  const Tensor x_t = Tensor::randn({8, L}, rng);
  const Tensor c_sem = Tensor::randn({8, L}, rng);
  const Tensor c_pro = Tensor::randn({4, L}, rng);
  std::vector<double> psi_v = {0.3, -0.2, 0.5, 0.1};
  const Tensor psi = repeat_across_frames(psi_v, L);

  const Tensor cond = model.predict_x0(x_t, 7, {c_sem, c_pro, psi});
  const Tensor uncond = model.predict_x0(x_t, 7, {c_sem, std::nullopt, psi});
  if (!bitwise_equal(cfg_prosody(model, x_t, 7, c_sem, c_pro, psi, 1.0), cond)) return false;
  if (!bitwise_equal(cfg_prosody(model, x_t, 7, c_sem, c_pro, psi, 0.0), uncond)) return false;
  if (!bitwise_equal(cfg_speaker(model, x_t, 7, c_sem, psi, 0.0), uncond)) return false;

  // Null condition and explicit zero tensor must agree bitwise.
  const Tensor zero_pro = Tensor::zeros({4, L});
  const Tensor with_null = model.predict_x0(x_t, 3, {c_sem, std::nullopt, psi});
  const Tensor with_zero = model.predict_x0(x_t, 3, {c_sem, zero_pro, psi});
  return bitwise_equal(with_null, with_zero);
}

bool check_eer_hand_case() {
  const TrialScores scores = {{4.0, true}, {5.0, true}, {1.0, true},
                              {2.0, false}, {3.0, false}, {6.0, false}};
  return std::abs(compute_eer(scores) - 100.0 / 3.0) < 1e-9;
}

bool check_spearman_hand_case() {
  const double rho = spearman({1.0, 2.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0});
  return std::abs(rho - 3.0 / std::sqrt(10.0)) < 1e-12;
}

bool check_drop_law() {
  SplitMix64 rng(33);
  const int n = 100000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) counts[static_cast<int>(sample_drop_pattern(rng))] += 1;
  const double p_all = 100.0 * counts[0] / n;
  const double p_pro = 100.0 * counts[1] / n;
  const double p_both = 100.0 * counts[2] / n;
  return std::abs(p_all - 50.0) <= 1.0 && std::abs(p_pro - 30.0) <= 1.0 &&
         std::abs(p_both - 20.0) <= 1.0;
}

bool check_adam_quadratic() {
  std::vector<Param> params;
  params.push_back({"w", make_var(Tensor::scalar(1.0), true)});
  AdamState opt = AdamState::init(params, 0.1);
  for (int i = 0; i < 100; ++i) {
    GradTape tape;
    GradTape::Scope scope(tape);
    Var loss = mul(params[0].var, params[0].var);
    tape.backward(loss);
    adam_step(params, opt);
  }
  return std::abs(params[0].var->value.item()) < 1e-2;
}

bool check_gradients() {
  SplitMix64 rng(44);
  std::vector<Param> params;
  params.push_back({"w1", make_var(Tensor::randn({4, 3}, rng), true)});
  params.push_back({"w2", make_var(Tensor::randn({2, 4}, rng), true)});
  const Tensor x = Tensor::randn({3, 5}, rng);
  const Tensor y = Tensor::randn({2, 5}, rng);

  const auto loss_value = [&] {
    Var h = matmul(make_const(params[0].var->value), make_const(x));
    h = silu(h);
    Var out = matmul(make_const(params[1].var->value), h);
    return mse_loss(out, make_const(y))->value.item();
  };

  GradTape tape;
  {
    GradTape::Scope scope(tape);
    Var h = silu(matmul(params[0].var, make_const(x)));
    Var out = matmul(params[1].var, h);
    tape.backward(mse_loss(out, make_const(y)));
  }

  const double h_step = 1e-5;
  for (Param& p : params) {
    for (std::size_t i = 0; i < p.var->value.data.size(); ++i) {
      const double keep = p.var->value.data[i];
      p.var->value.data[i] = keep + h_step;
      const double up = loss_value();
      p.var->value.data[i] = keep - h_step;
      const double dn = loss_value();
      p.var->value.data[i] = keep;
      const double fd = (up - dn) / (2.0 * h_step);
      const double ad = p.var->grad.data[i];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-8});
      if (std::abs(fd - ad) > 1e-8 && std::abs(fd - ad) / denom > 1e-4) return false;
    }
  }
  return true;
}

}  // namespace

int run_selftest(std::ostream& out) {
  const Check checks[] = {
      {"schedule construction and identities", check_schedule},
      {"ddim oracle consistency", check_ddim_oracle},
      {"cfg algebraic identities (bitwise)", check_cfg_identities},
      {"eer hand-constructed case", check_eer_hand_case},
      {"spearman tie handling", check_spearman_hand_case},
      {"condition drop law 50/30/20", check_drop_law},
      {"adam quadratic convergence", check_adam_quadratic},
      {"autodiff vs finite differences", check_gradients},
  };
  int failed = 0;
  for (const Check& c : checks) {
    bool ok = false;
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      out << "FAIL " << c.name << " (" << e.what() << ")\n";
      ++failed;
      continue;
    }
    out << (ok ? "ok   " : "FAIL ") << c.name << "\n";
    if (!ok) ++failed;
  }
  return failed;
}

}  // namespace diffanon
