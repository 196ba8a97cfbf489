#include "world/world.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "util/fileio.hpp"

namespace diffanon {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Component scales tuned so the assembled embedding has roughly unit
// per-entry variance against the standard-normal diffusion noise.
constexpr double kTokenScale = 3.0;
constexpr double kSpeakerScale = 3.0;
constexpr double kProsodyColScale[3] = {1.5, 0.6, 1.0};
// RMS of the speaker-patterned prosody component; the content sinusoids
// below sit around RMS 0.6, so identity dominates the trajectory at
// leakage 1 and still shows through at 0.5.
constexpr double kPatternScale = 2.0;

Eigen::MatrixXd orthonormal_columns(int rows, int cols, SplitMix64& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.gaussian();
  // Gram-Schmidt; random Gaussian columns are independent with probability 1.
  for (int c = 0; c < cols; ++c) {
    for (int p = 0; p < c; ++p) m.col(c) -= m.col(p).dot(m.col(c)) * m.col(p);
    const double n = m.col(c).norm();
    if (n < 1e-9) throw std::runtime_error("world: degenerate random basis");
    m.col(c) /= n;
  }
  return m;
}

}  // namespace

void WorldConfig::validate() const {
  if (n_speakers < 2) throw std::invalid_argument("world: need at least 2 speakers");
  if (frames < 4) throw std::invalid_argument("world: need at least 4 frames");
  if (n_semantic_tokens < 2) throw std::invalid_argument("world: need at least 2 semantic tokens");
  if (embed_dim < n_semantic_tokens + 3 + cond_spk_dim)
    throw std::invalid_argument(
        "world: embed_dim too small for disjoint semantic/prosody/speaker subspaces");
  if (leakage < 0.0 || leakage > 1.0) throw std::invalid_argument("world: leakage must be in [0,1]");
  if (residual_noise_std < 0.0) throw std::invalid_argument("world: negative noise std");
  if (cond_pro_dim < 1 || cond_spk_dim < 1) throw std::invalid_argument("world: bad condition dims");
}

World World::generate(const WorldConfig& cfg) {
  cfg.validate();
  World w;
  w.cfg_ = cfg;
  SplitMix64 rng(derive_seed(cfg.seed, "world/gen"));
  const int D = cfg.embed_dim;
  const int S = cfg.cond_spk_dim;
  const int L = cfg.frames;

  w.tokens_ = Eigen::MatrixXd(D, cfg.n_semantic_tokens);
  for (int c = 0; c < cfg.n_semantic_tokens; ++c) {
    Eigen::VectorXd v(D);
    for (int r = 0; r < D; ++r) v(r) = rng.gaussian();
    w.tokens_.col(c) = v * (kTokenScale / v.norm());
  }

  w.b_p_ = orthonormal_columns(D, 3, rng);
  for (int c = 0; c < 3; ++c) w.b_p_.col(c) *= kProsodyColScale[c];
  w.b_s_ = orthonormal_columns(D, S, rng) * kSpeakerScale;

  // Fixed low-frequency pattern bank: the prosody<->identity relation is a
  // single world-level map, not a per-speaker lookup.
  w.h_ = Eigen::MatrixXd(S, L);
  for (int j = 0; j < S; ++j) {
    const double freq = 0.5 + 0.25 * j;
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int t = 0; t < L; ++t)
      w.h_(j, t) = kPatternScale * std::sqrt(2.0) *
                   std::sin(kTwoPi * freq * t / static_cast<double>(L) + phase);
  }

  w.e_enc_.resize(cfg.cond_pro_dim);
  for (double& e : w.e_enc_) {
    const double mag = rng.uniform(0.6, 1.4);
    e = rng.uniform() < 0.5 ? -mag : mag;
  }

  // Speaker unit vectors with pairwise cosine < 0.5, by rejection.
  w.bank_.vectors.reserve(cfg.n_speakers);
  int attempts = 0;
  while (static_cast<int>(w.bank_.vectors.size()) < cfg.n_speakers) {
    if (++attempts > 100000) throw std::runtime_error("world: speaker sampling did not converge");
    std::vector<double> s(S);
    double norm = 0.0;
    for (double& v : s) {
      v = rng.gaussian();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : s) v /= norm;
    bool ok = true;
    for (const auto& other : w.bank_.vectors) {
      double dot = 0.0;
      for (int j = 0; j < S; ++j) dot += s[j] * other[j];
      if (dot >= 0.5) {
        ok = false;
        break;
      }
    }
    if (ok) w.bank_.vectors.push_back(std::move(s));
  }

  w.bank_.prosody_offsets.resize(cfg.n_speakers);
  for (int k = 0; k < cfg.n_speakers; ++k) {
    auto& off = w.bank_.prosody_offsets[k];
    off.resize(L);
    for (int t = 0; t < L; ++t) {
      double v = 0.0;
      for (int j = 0; j < S; ++j) v += w.bank_.vectors[k][j] * w.h_(j, t);
      off[t] = v;
    }
  }

  const int n_basis = cfg.n_semantic_tokens + 3 + S;
  Eigen::MatrixXd basis(D, n_basis);
  basis.leftCols(cfg.n_semantic_tokens) = w.tokens_;
  basis.middleCols(cfg.n_semantic_tokens, 3) = w.b_p_;
  basis.rightCols(S) = w.b_s_;
  const auto svd = basis.jacobiSvd();
  const double cond_ratio =
      svd.singularValues()(svd.singularValues().size() - 1) / svd.singularValues()(0);
  if (!(cond_ratio > 1e-8))
    throw std::runtime_error("world: ill-conditioned factor basis; choose another seed");
  w.basis_qr_ = basis.colPivHouseholderQr();
  w.n_basis_ = n_basis;
  return w;
}

std::vector<int> World::train_speakers() const {
  std::vector<int> ids;
  for (int k = 0; k < cfg_.n_speakers / 2; ++k) ids.push_back(k);
  return ids;
}

std::vector<int> World::eval_speakers() const {
  std::vector<int> ids;
  for (int k = cfg_.n_speakers / 2; k < cfg_.n_speakers; ++k) ids.push_back(k);
  return ids;
}

Tensor World::assemble(const Tensor& c_sem, const std::vector<double>& p,
                       const std::vector<double>& s, SplitMix64* noise_rng) const {
  const int D = cfg_.embed_dim;
  const int L = cfg_.frames;
  if (c_sem.rank() != 2 || c_sem.rows() != D || c_sem.cols() != L)
    throw std::invalid_argument("assemble: c_sem must be [embed_dim, frames]");
  if (static_cast<int>(p.size()) != L) throw std::invalid_argument("assemble: p must have L frames");
  if (static_cast<int>(s.size()) != cfg_.cond_spk_dim)
    throw std::invalid_argument("assemble: s must have cond_spk_dim entries");

  Eigen::VectorXd spk = Eigen::VectorXd::Zero(D);
  for (int j = 0; j < cfg_.cond_spk_dim; ++j) spk += b_s_.col(j) * s[j];

  Tensor x0 = c_sem;
  for (int t = 0; t < L; ++t) {
    const double pt = p[t];
    const double phi[3] = {pt, pt * pt, std::sin(pt)};
    for (int r = 0; r < D; ++r) {
      double v = x0(r, t) + spk(r);
      for (int c = 0; c < 3; ++c) v += b_p_(r, c) * phi[c];
      if (noise_rng) v += cfg_.residual_noise_std * noise_rng->gaussian();
      x0(r, t) = v;
    }
  }
  return x0;
}

ToyUtterance World::make_utterance(int speaker_id, SplitMix64& rng) const {
  if (speaker_id < 0 || speaker_id >= cfg_.n_speakers)
    throw std::out_of_range("make_utterance: unknown speaker");
  const int D = cfg_.embed_dim;
  const int L = cfg_.frames;
  const double lam = cfg_.leakage;

  ToyUtterance u;
  u.speaker_id = speaker_id;

  // Piecewise-constant token segments of length ~L/8.
  u.c_sem = Tensor::zeros({D, L});
  const int seg_len = std::max(1, L / 8);
  for (int start = 0; start < L; start += seg_len) {
    const int tok = rng.uniform_int(0, cfg_.n_semantic_tokens - 1);
    for (int t = start; t < std::min(L, start + seg_len); ++t)
      for (int r = 0; r < D; ++r) u.c_sem(r, t) = tokens_(r, tok);
  }

  // Content prosody: three random-phase sinusoids, higher-frequency band
  // than the speaker pattern bank.
  double amp[3], freq[3], phase[3];
  for (int i = 0; i < 3; ++i) {
    amp[i] = rng.uniform(0.3, 0.7);
    freq[i] = rng.uniform(2.5, 8.0);
    phase[i] = rng.uniform(0.0, kTwoPi);
  }
  const auto& offset = bank_.prosody_offsets[speaker_id];
  u.prosody = Tensor::zeros({1, L});
  for (int t = 0; t < L; ++t) {
    double pc = 0.0;
    for (int i = 0; i < 3; ++i)
      pc += amp[i] * std::sin(kTwoPi * freq[i] * t / static_cast<double>(L) + phase[i]);
    u.prosody.data[t] = pc + lam * offset[t];
  }

  // Imperfect speaker normalization: only (1 - lambda) of the per-speaker
  // mean trajectory (lambda * offset) is removed before encoding.
  u.c_pro = Tensor::zeros({cfg_.cond_pro_dim, L});
  for (int t = 0; t < L; ++t) {
    const double normed = u.prosody.data[t] - (1.0 - lam) * (lam * offset[t]);
    for (int j = 0; j < cfg_.cond_pro_dim; ++j) u.c_pro(j, t) = e_enc_[j] * normed;
  }

  const auto& s = bank_.vectors[speaker_id];
  u.c_spk = Tensor::zeros({cfg_.cond_spk_dim, L});
  for (int j = 0; j < cfg_.cond_spk_dim; ++j)
    for (int t = 0; t < L; ++t) u.c_spk(j, t) = s[j];

  std::vector<double> p(u.prosody.data.begin(), u.prosody.data.end());
  u.x0 = assemble(u.c_sem, p, s, cfg_.residual_noise_std > 0.0 ? &rng : nullptr);
  return u;
}

Factors World::project_factors(const Tensor& x) const {
  const int D = cfg_.embed_dim;
  const int L = cfg_.frames;
  if (x.rank() != 2 || x.rows() != D || x.cols() != L)
    throw std::invalid_argument("project_factors: x must be [embed_dim, frames]");
  const int n_tok = cfg_.n_semantic_tokens;
  const int S = cfg_.cond_spk_dim;

  Factors f;
  f.semantic = Tensor::zeros({D, L});
  f.p_hat.assign(L, 0.0);
  f.s_hat.assign(S, 0.0);

  Eigen::VectorXd col(D);
  for (int t = 0; t < L; ++t) {
    for (int r = 0; r < D; ++r) col(r) = x(r, t);
    Eigen::VectorXd coef = basis_qr_.solve(col);
    Eigen::VectorXd sem = tokens_ * coef.head(n_tok);
    for (int r = 0; r < D; ++r) f.semantic(r, t) = sem(r);
    f.p_hat[t] = coef(n_tok);  // first component of the phi lift is p itself
    for (int j = 0; j < S; ++j) f.s_hat[j] += coef(n_tok + 3 + j);
  }
  for (double& v : f.s_hat) v /= static_cast<double>(L);
  return f;
}

void World::dump_dataset(const std::string& dir, int utt_per_speaker, std::uint64_t seed) const {
  if (utt_per_speaker < 1) throw std::invalid_argument("dump_dataset: utt_per_speaker must be >= 1");
  std::filesystem::create_directories(dir);
  std::ofstream index(dir + "/index.jsonl", std::ios::binary);
  if (!index) throw std::runtime_error("dump_dataset: cannot write index in " + dir);
  for (int k = 0; k < cfg_.n_speakers; ++k) {
    for (int j = 0; j < utt_per_speaker; ++j) {
      const std::string utt_id = "utt_" + std::to_string(k) + "_" + std::to_string(j);
      const std::uint64_t utt_seed = derive_seed(seed, "dump/" + utt_id);
      SplitMix64 rng(utt_seed);
      const ToyUtterance u = make_utterance(k, rng);
      write_f32_tensor(dir + "/" + utt_id + ".f32", u.x0);
      nlohmann::json line = {{"utt", utt_id}, {"speaker", k}, {"seed", utt_seed}};
      index << line.dump() << "\n";
    }
  }
}

}  // namespace diffanon
