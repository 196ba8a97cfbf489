#pragma once

#include <optional>
#include <vector>

#include "core/adam.hpp"
#include "core/autodiff.hpp"
#include "diffusion/schedule.hpp"

namespace diffanon {

struct BackboneConfig {
  int n_blocks = 6;
  int kernel = 5;
  int channels = 32;
  int cond_pro_dim = 8;
  int cond_spk_dim = 8;
  int embed_dim = 32;  // must equal channels: the content condition is added unprojected
  int t_embed_dim = 32;

  // Reference constants for the full-size model; the defaults above are
  // the CPU-scale configuration actually trained here.
  static BackboneConfig full_scale() {
    BackboneConfig c;
    c.n_blocks = 40;
    c.kernel = 5;
    c.channels = 1024;
    c.cond_pro_dim = 256;
    c.cond_spk_dim = 256;
    c.embed_dim = 1024;
    c.t_embed_dim = 1024;
    return c;
  }

  void validate() const;
};

// The condition triple. c_sem is mandatory; a missing c_pro/c_spk is the
// null condition and contributes an exact zero add (the model materializes
// zeros, so null and an explicit zero tensor take the same code path).
struct ConditionBundle {
  Tensor c_sem;                 // [embed_dim, L]
  std::optional<Tensor> c_pro;  // [cond_pro_dim, L]
  std::optional<Tensor> c_spk;  // [cond_spk_dim, L], constant across frames
};

// Sinusoidal base encoding (pre-MLP): [sin(t*w_0..), cos(t*w_0..)] halves.
Tensor timestep_embedding(int t, int t_embed_dim);

// Stack of gated residual conv blocks predicting the clean embedding x0
// from (x_t, t, conditions). Conditioning is additive: projected prosody
// and speaker conditions plus the unprojected content condition enter at
// the input, and the content condition is re-added at every block input.
class DenoiserModel {
 public:
  DenoiserModel(const BackboneConfig& config, SplitMix64& rng);

  Var predict_x0(const Var& x_t, int t, const ConditionBundle& conds) const;
  Tensor predict_x0(const Tensor& x_t, int t, const ConditionBundle& conds) const;

  const BackboneConfig& config() const { return config_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  std::int64_t param_count() const;

 private:
  struct Block {
    Var filter_w, filter_b;
    Var gate_w, gate_b;
    Var res_w, res_b;
    Var skip_w, skip_b;
  };

  Var param(const std::string& name, Tensor init);
  void check_bundle(const Tensor& x_t, const ConditionBundle& conds) const;

  BackboneConfig config_;
  std::vector<Param> params_;
  Var in_w_, in_b_;
  Var tmlp_w1_, tmlp_b1_, tmlp_w2_, tmlp_b2_;
  Var proj_pro_w_;  // bias-free so a zero condition contributes exactly zero
  Var proj_spk_w_;
  std::vector<Block> blocks_;
  Var out_w_, out_b_;  // zero-initialized: the untrained model predicts 0
};

// Eq.-style x-prediction objective: mean squared error between the clean
// target and the model estimate at the sampled timestep.
Var x0_training_loss(const DenoiserModel& model, const ForwardSample& sample,
                     const ConditionBundle& conds);

}  // namespace diffanon
