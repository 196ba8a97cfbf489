#include "guide/guidance.hpp"

#include <cmath>
#include <stdexcept>

namespace diffanon {

std::string guidance_mode_name(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::kPlain: return "plain";
    case GuidanceMode::kProsodyCfg: return "prosody_cfg";
    case GuidanceMode::kSpeakerCfg: return "speaker_cfg";
  }
  return "unknown";
}

void GuidanceSpec::validate() const {
  if (w_pro < 0.0 || w_spk < 0.0) throw std::invalid_argument("guidance: weights must be >= 0");
  if (n_infer_steps < 1) throw std::invalid_argument("guidance: n_infer_steps must be >= 1");
  if (mode == GuidanceMode::kProsodyCfg && !pseudo_speaker)
    throw std::invalid_argument("guidance: prosody CFG requires a pseudo-speaker");
  if (mode == GuidanceMode::kSpeakerCfg && !pseudo_speaker)
    throw std::invalid_argument("guidance: speaker CFG requires a pseudo-speaker");
  if (mode == GuidanceMode::kSpeakerCfg && plain_use_prosody)
    throw std::invalid_argument("guidance: speaker CFG keeps the prosody condition null");
}

std::vector<double> mean_embedding(const std::vector<std::vector<double>>& utt_embeddings) {
  if (utt_embeddings.empty()) throw std::invalid_argument("mean_embedding: empty list");
  std::vector<double> mean(utt_embeddings.front().size(), 0.0);
  for (const auto& e : utt_embeddings) {
    if (e.size() != mean.size()) throw std::invalid_argument("mean_embedding: ragged embeddings");
    for (std::size_t i = 0; i < e.size(); ++i) mean[i] += e[i];
  }
  for (double& v : mean) v /= static_cast<double>(utt_embeddings.size());
  return mean;
}

PseudoSpeakerPool build_pseudo_speaker_pool(const World& world, int utt_per_speaker,
                                            std::uint64_t seed) {
  if (utt_per_speaker < 1)
    throw std::invalid_argument("build_pseudo_speaker_pool: utt_per_speaker must be >= 1");
  PseudoSpeakerPool pool;
  for (int spk : world.train_speakers()) {
    std::vector<std::vector<double>> embs;
    embs.reserve(utt_per_speaker);
    for (int j = 0; j < utt_per_speaker; ++j) {
      SplitMix64 rng(derive_seed(seed, "pool/spk" + std::to_string(spk) + "/utt" + std::to_string(j)));
      const ToyUtterance u = world.make_utterance(spk, rng);
      // Utterance-level embedding: the frame-constant speaker condition.
      std::vector<double> e(u.c_spk.rows());
      for (int r = 0; r < u.c_spk.rows(); ++r) e[r] = u.c_spk(r, 0);
      embs.push_back(std::move(e));
    }
    pool.entries.push_back({spk, mean_embedding(embs)});
  }
  return pool;
}

const PseudoSpeakerPool::Entry& sample_pseudo_speaker(const PseudoSpeakerPool& pool,
                                                      SplitMix64& rng) {
  if (pool.entries.empty()) throw std::invalid_argument("sample_pseudo_speaker: empty pool");
  const int i = rng.uniform_int(0, static_cast<int>(pool.entries.size()) - 1);
  return pool.entries[static_cast<std::size_t>(i)];
}

Tensor repeat_across_frames(const std::vector<double>& v, int frames) {
  if (v.empty() || frames < 1) throw std::invalid_argument("repeat_across_frames: bad arguments");
  Tensor t = Tensor::zeros({static_cast<int>(v.size()), frames});
  for (int r = 0; r < t.rows(); ++r)
    for (int c = 0; c < frames; ++c) t(r, c) = v[static_cast<std::size_t>(r)];
  return t;
}

Tensor cfg_prosody(const DenoiserModel& model, const Tensor& x_t, int t, const Tensor& c_sem,
                   const Tensor& c_pro, const Tensor& psi, double w_pro) {
  ConditionBundle uncond{c_sem, std::nullopt, psi};
  ConditionBundle cond{c_sem, c_pro, psi};
  const Tensor u = model.predict_x0(x_t, t, uncond);
  const Tensor c = model.predict_x0(x_t, t, cond);
  if (w_pro == 1.0) return c;
  if (w_pro == 0.0) return u;
  Tensor out = Tensor::zeros(u.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = u.data[i] + w_pro * (c.data[i] - u.data[i]);
  return out;
}

Tensor cfg_speaker(const DenoiserModel& model, const Tensor& x_t, int t, const Tensor& c_sem,
                   const Tensor& psi, double w_spk) {
  ConditionBundle cond{c_sem, std::nullopt, psi};
  ConditionBundle uncond{c_sem, std::nullopt, std::nullopt};
  const Tensor c = model.predict_x0(x_t, t, cond);
  const Tensor u = model.predict_x0(x_t, t, uncond);
  if (w_spk == 0.0) return c;
  Tensor out = Tensor::zeros(c.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (w_spk + 1.0) * c.data[i] - w_spk * u.data[i];
  return out;
}

Tensor prosody_mean_shift(const Tensor& c_pro, double delta) {
  Tensor out = c_pro;
  for (double& v : out.data) v += delta;
  return out;
}

Tensor prosody_mean_shift(const Tensor& c_pro, const std::vector<double>& delta) {
  if (c_pro.rank() != 2 || static_cast<int>(delta.size()) != c_pro.rows())
    throw std::invalid_argument("prosody_mean_shift: delta must have one entry per channel");
  Tensor out = c_pro;
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += delta[static_cast<std::size_t>(r)];
  return out;
}

namespace {

// Per-channel standard deviation of the source prosody condition; the
// pitch-shift delta is expressed in these units.
std::vector<double> channel_std(const Tensor& t) {
  std::vector<double> out(static_cast<std::size_t>(t.rows()), 0.0);
  for (int r = 0; r < t.rows(); ++r) {
    double mean = 0.0;
    for (int c = 0; c < t.cols(); ++c) mean += t(r, c);
    mean /= t.cols();
    double var = 0.0;
    for (int c = 0; c < t.cols(); ++c) {
      const double d = t(r, c) - mean;
      var += d * d;
    }
    out[static_cast<std::size_t>(r)] = std::sqrt(var / t.cols());
  }
  return out;
}

}  // namespace

Tensor anonymize(const DenoiserModel& model, const NoiseSchedule& sched, const GuidanceSpec& spec,
                 const ToyUtterance& source, SplitMix64& rng) {
  spec.validate();
  if (spec.n_infer_steps > sched.t_steps)
    throw std::invalid_argument("anonymize: n_infer_steps exceeds schedule length");
  const int L = source.c_sem.cols();

  Tensor c_pro = source.c_pro;
  if (spec.pitch_shift != 0.0) {
    std::vector<double> delta = channel_std(c_pro);
    for (double& d : delta) d *= spec.pitch_shift;
    c_pro = prosody_mean_shift(c_pro, delta);
  }
  std::optional<Tensor> psi;
  if (spec.pseudo_speaker) psi = repeat_across_frames(*spec.pseudo_speaker, L);

  Tensor x = Tensor::randn(source.x0.shape, rng);
  for (const auto& [t, t_prev] : ddim_timestep_grid(sched.t_steps, spec.n_infer_steps)) {
    Tensor x0_hat;
    switch (spec.mode) {
      case GuidanceMode::kProsodyCfg:
        x0_hat = cfg_prosody(model, x, t, source.c_sem, c_pro, *psi, spec.w_pro);
        break;
      case GuidanceMode::kSpeakerCfg:
        x0_hat = cfg_speaker(model, x, t, source.c_sem, *psi, spec.w_spk);
        break;
      case GuidanceMode::kPlain: {
        ConditionBundle b{source.c_sem,
                          spec.plain_use_prosody ? std::optional<Tensor>(c_pro) : std::nullopt,
                          psi};
        x0_hat = model.predict_x0(x, t, b);
        break;
      }
    }
    x = ddim_step(x, t, t_prev, x0_hat, sched);
  }
  return x;
}

}  // namespace diffanon
