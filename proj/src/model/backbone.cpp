#include "model/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace diffanon {

namespace {

Tensor fan_in_uniform(std::vector<int> shape, int fan_in, SplitMix64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void BackboneConfig::validate() const {
  if (n_blocks < 1) throw std::invalid_argument("backbone: n_blocks must be >= 1");
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("backbone: kernel must be odd");
  if (channels < 1 || cond_pro_dim < 1 || cond_spk_dim < 1)
    throw std::invalid_argument("backbone: dims must be positive");
  if (embed_dim != channels)
    throw std::invalid_argument("backbone: embed_dim must equal channels (content condition is added unprojected)");
  if (t_embed_dim < 2 || t_embed_dim % 2 != 0)
    throw std::invalid_argument("backbone: t_embed_dim must be even and >= 2");
}

Tensor timestep_embedding(int t, int t_embed_dim) {
  if (t < 0) throw std::invalid_argument("timestep_embedding: t must be >= 0");
  if (t_embed_dim < 2 || t_embed_dim % 2 != 0)
    throw std::invalid_argument("timestep_embedding: dim must be even and >= 2");
  const int half = t_embed_dim / 2;
  Tensor emb = Tensor::zeros({t_embed_dim, 1});
  for (int i = 0; i < half; ++i) {
    const double exponent = half > 1 ? static_cast<double>(i) / static_cast<double>(half - 1) : 0.0;
    const double freq = std::pow(10000.0, -exponent);
    emb.data[i] = std::sin(t * freq);
    emb.data[half + i] = std::cos(t * freq);
  }
  return emb;
}

DenoiserModel::DenoiserModel(const BackboneConfig& config, SplitMix64& rng) : config_(config) {
  config_.validate();
  const int C = config_.channels;
  const int D = config_.embed_dim;
  const int K = config_.kernel;
  const int TE = config_.t_embed_dim;

  in_w_ = param("in_proj.w", fan_in_uniform({C, D, 1}, D, rng));
  in_b_ = param("in_proj.b", Tensor::zeros({C}));
  tmlp_w1_ = param("t_mlp.w1", fan_in_uniform({C, TE}, TE, rng));
  tmlp_b1_ = param("t_mlp.b1", Tensor::zeros({C}));
  tmlp_w2_ = param("t_mlp.w2", fan_in_uniform({C, C}, C, rng));
  tmlp_b2_ = param("t_mlp.b2", Tensor::zeros({C}));
  proj_pro_w_ = param("proj_pro.w", fan_in_uniform({C, config_.cond_pro_dim, 1}, config_.cond_pro_dim, rng));
  proj_spk_w_ = param("proj_spk.w", fan_in_uniform({C, config_.cond_spk_dim, 1}, config_.cond_spk_dim, rng));

  blocks_.resize(config_.n_blocks);
  for (int i = 0; i < config_.n_blocks; ++i) {
    const std::string prefix = "block" + std::to_string(i);
    Block& b = blocks_[i];
    b.filter_w = param(prefix + ".filter.w", fan_in_uniform({C, C, K}, C * K, rng));
    b.filter_b = param(prefix + ".filter.b", Tensor::zeros({C}));
    b.gate_w = param(prefix + ".gate.w", fan_in_uniform({C, C, K}, C * K, rng));
    b.gate_b = param(prefix + ".gate.b", Tensor::zeros({C}));
    b.res_w = param(prefix + ".res.w", fan_in_uniform({C, C, 1}, C, rng));
    b.res_b = param(prefix + ".res.b", Tensor::zeros({C}));
    b.skip_w = param(prefix + ".skip.w", fan_in_uniform({C, C, 1}, C, rng));
    b.skip_b = param(prefix + ".skip.b", Tensor::zeros({C}));
  }
  out_w_ = param("out_proj.w", Tensor::zeros({D, C, 1}));
  out_b_ = param("out_proj.b", Tensor::zeros({D}));
}

Var DenoiserModel::param(const std::string& name, Tensor init) {
  Var v = make_var(std::move(init), true);
  params_.push_back({name, v});
  return v;
}

std::int64_t DenoiserModel::param_count() const {
  std::int64_t n = 0;
  for (const Param& p : params_) n += p.var->value.size();
  return n;
}

void DenoiserModel::check_bundle(const Tensor& x_t, const ConditionBundle& conds) const {
  if (x_t.rank() != 2 || x_t.rows() != config_.embed_dim)
    throw std::invalid_argument("predict_x0: x_t must be [embed_dim, L]");
  const int L = x_t.cols();
  if (conds.c_sem.rank() != 2 || conds.c_sem.rows() != config_.embed_dim || conds.c_sem.cols() != L)
    throw std::invalid_argument("predict_x0: c_sem must be [embed_dim, L] and match x_t frames");
  if (conds.c_pro &&
      (conds.c_pro->rank() != 2 || conds.c_pro->rows() != config_.cond_pro_dim || conds.c_pro->cols() != L))
    throw std::invalid_argument("predict_x0: c_pro must be [cond_pro_dim, L]");
  if (conds.c_spk &&
      (conds.c_spk->rank() != 2 || conds.c_spk->rows() != config_.cond_spk_dim || conds.c_spk->cols() != L))
    throw std::invalid_argument("predict_x0: c_spk must be [cond_spk_dim, L]");
}

Var DenoiserModel::predict_x0(const Var& x_t, int t, const ConditionBundle& conds) const {
  check_bundle(x_t->value, conds);
  const int L = x_t->value.cols();

  // Null conditions run through the same projection path as explicit zeros.
  Var c_sem = make_const(conds.c_sem);
  Var c_pro = make_const(conds.c_pro ? *conds.c_pro : Tensor::zeros({config_.cond_pro_dim, L}));
  Var c_spk = make_const(conds.c_spk ? *conds.c_spk : Tensor::zeros({config_.cond_spk_dim, L}));

  Var temb = make_const(timestep_embedding(t, config_.t_embed_dim));
  temb = add(matmul(tmlp_w1_, temb), tmlp_b1_);
  temb = silu(temb);
  temb = add(matmul(tmlp_w2_, temb), tmlp_b2_);

  Var h = conv1d(x_t, in_w_, in_b_);
  h = add(h, c_sem);
  h = add(h, conv1d(c_pro, proj_pro_w_));
  h = add(h, conv1d(c_spk, proj_spk_w_));
  h = add_channel(h, temb);

  Var skip_sum;
  for (const Block& b : blocks_) {
    Var u = add(h, c_sem);
    Var z = gated(conv1d(u, b.filter_w, b.filter_b), conv1d(u, b.gate_w, b.gate_b));
    h = add(h, conv1d(z, b.res_w, b.res_b));
    Var skip = conv1d(z, b.skip_w, b.skip_b);
    skip_sum = skip_sum ? add(skip_sum, skip) : skip;
  }
  skip_sum = mul_scalar(skip_sum, 1.0 / std::sqrt(static_cast<double>(config_.n_blocks)));
  return conv1d(skip_sum, out_w_, out_b_);
}

Tensor DenoiserModel::predict_x0(const Tensor& x_t, int t, const ConditionBundle& conds) const {
  return predict_x0(make_const(x_t), t, conds)->value;
}

Var x0_training_loss(const DenoiserModel& model, const ForwardSample& sample,
                     const ConditionBundle& conds) {
  Var pred = model.predict_x0(make_const(sample.x_t), sample.t, conds);
  return mse_loss(pred, make_const(sample.x0_ref));
}

}  // namespace diffanon
