#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "model/backbone.hpp"
#include "world/world.hpp"

namespace diffanon {

enum class GuidanceMode { kPlain, kProsodyCfg, kSpeakerCfg };

std::string guidance_mode_name(GuidanceMode mode);

// Inference-time controls. The content condition always comes from the
// source; the source speaker condition is never supplied at inference.
struct GuidanceSpec {
  GuidanceMode mode = GuidanceMode::kProsodyCfg;
  double w_pro = 1.0;
  double w_spk = 0.0;
  // Pseudo-speaker embedding (cond_spk_dim). Required for prosody and
  // speaker CFG; optional for plain (absent = null speaker condition).
  std::optional<std::vector<double>> pseudo_speaker;
  int n_infer_steps = 50;
  bool plain_use_prosody = false;  // plain mode: condition on the source prosody
  double pitch_shift = 0.0;        // mean shift of c_pro, in channel-std units

  void validate() const;
};

struct PseudoSpeakerPool {
  struct Entry {
    int label = -1;
    std::vector<double> embedding;
  };
  std::vector<Entry> entries;
};

// Mean of per-utterance embeddings; the pooled representation of one
// speaker.
std::vector<double> mean_embedding(const std::vector<std::vector<double>>& utt_embeddings);

// One pool entry per training speaker, pooled over utt_per_speaker
// utterance-level embeddings. Pool speakers are the training half of the
// world, disjoint from evaluation sources by construction.
PseudoSpeakerPool build_pseudo_speaker_pool(const World& world, int utt_per_speaker,
                                            std::uint64_t seed);

const PseudoSpeakerPool::Entry& sample_pseudo_speaker(const PseudoSpeakerPool& pool,
                                                      SplitMix64& rng);

// Repeats an utterance-level vector across frames.
Tensor repeat_across_frames(const std::vector<double>& v, int frames);

// Prosody-adjusted guidance: uncond + w * (cond - uncond), both passes
// sharing the pseudo-speaker condition. w = 1 and w = 0 return the
// corresponding pass directly so the algebraic identities hold bitwise.
Tensor cfg_prosody(const DenoiserModel& model, const Tensor& x_t, int t, const Tensor& c_sem,
                   const Tensor& c_pro, const Tensor& psi, double w_pro);

// Pseudo-speaker guidance: (w+1) * cond - w * fully-unconditional, with the
// prosody condition null in both passes.
Tensor cfg_speaker(const DenoiserModel& model, const Tensor& x_t, int t, const Tensor& c_sem,
                   const Tensor& psi, double w_spk);

// Adds a constant to every frame (per channel when delta is a vector).
Tensor prosody_mean_shift(const Tensor& c_pro, double delta);
Tensor prosody_mean_shift(const Tensor& c_pro, const std::vector<double>& delta);

// Full anonymization sampler: x_T ~ N(0, I) from the caller's rng, then
// the DDIM grid with the spec's guidance mode at every step.
Tensor anonymize(const DenoiserModel& model, const NoiseSchedule& sched, const GuidanceSpec& spec,
                 const ToyUtterance& source, SplitMix64& rng);

}  // namespace diffanon
