#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace diffanon {

struct WorldConfig {
  int n_speakers = 16;  // first half trains (and forms the pseudo pool), second half evaluates
  int n_semantic_tokens = 12;
  int frames = 64;
  int embed_dim = 32;
  int cond_pro_dim = 8;
  int cond_spk_dim = 8;
  double leakage = 0.5;  // lambda: strength of speaker identity carried by prosody
  double residual_noise_std = 0.05;
  std::uint64_t seed = 1234;

  void validate() const;
};

// One synthetic utterance: the clean embedding plus all ground-truth
// factors that produced it.
struct ToyUtterance {
  Tensor x0;     // [embed_dim, L]
  Tensor c_sem;  // [embed_dim, L], piecewise-constant token embeddings
  Tensor prosody;  // [1, L] scalar trajectory p
  Tensor c_pro;  // [cond_pro_dim, L]
  Tensor c_spk;  // [cond_spk_dim, L], constant across frames
  int speaker_id = -1;
};

struct SpeakerBank {
  // Unit vectors, pairwise cosine < 0.5 (enforced at generation).
  std::vector<std::vector<double>> vectors;
  // offset_k[t] = s_k . H[:,t]: the speaker-patterned prosody component.
  std::vector<std::vector<double>> prosody_offsets;
};

struct Factors {
  Tensor semantic;             // [embed_dim, L]: token-span component
  std::vector<double> p_hat;   // [L]: recovered prosody trajectory
  std::vector<double> s_hat;   // [cond_spk_dim]: recovered speaker vector
};

// Fixed linear-Gaussian world. The embedding decomposes into a semantic
// token component, a prosody component B_p * phi(p) with the frame-wise
// lift phi(p) = [p, p^2, sin p], a constant speaker component B_s * s, and
// isotropic residual noise. Prosody leaks identity: p carries
// lambda * (s_k . H) where H is a fixed pattern bank, so the
// prosody-identity relation is the same map for every speaker and remains
// informative for speakers never seen in training.
class World {
 public:
  static World generate(const WorldConfig& cfg);

  ToyUtterance make_utterance(int speaker_id, SplitMix64& rng) const;

  // Least-squares decomposition onto the known subspaces (token span,
  // range of B_p, range of B_s). Exact for noise-free assembled inputs.
  Factors project_factors(const Tensor& x) const;

  const WorldConfig& config() const { return cfg_; }
  const SpeakerBank& bank() const { return bank_; }

  std::vector<int> train_speakers() const;
  std::vector<int> eval_speakers() const;

  // Assembly maps, exposed for analytic test constructions.
  const Eigen::MatrixXd& token_table() const { return tokens_; }  // [D, n_tokens]
  const Eigen::MatrixXd& prosody_mix() const { return b_p_; }     // [D, 3]
  const Eigen::MatrixXd& speaker_mix() const { return b_s_; }     // [D, S]
  const Eigen::MatrixXd& pattern_bank() const { return h_; }      // [S, L]
  const std::vector<double>& prosody_encoder() const { return e_enc_; }

  Tensor assemble(const Tensor& c_sem, const std::vector<double>& p,
                  const std::vector<double>& s, SplitMix64* noise_rng) const;

  // One x0 file per utterance (raw little-endian f32, row-major
  // [embed_dim, L]) plus a JSON-lines index.
  void dump_dataset(const std::string& dir, int utt_per_speaker, std::uint64_t seed) const;

 private:
  WorldConfig cfg_;
  SpeakerBank bank_;
  Eigen::MatrixXd tokens_;  // columns scaled to token_scale
  Eigen::MatrixXd b_p_;
  Eigen::MatrixXd b_s_;
  Eigen::MatrixXd h_;
  std::vector<double> e_enc_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> basis_qr_;
  int n_basis_ = 0;
};

}  // namespace diffanon
