#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "guide/guidance.hpp"
#include "world/world.hpp"

namespace diffanon {

// (score, is_same_speaker) verification trials.
using TrialScores = std::vector<std::pair<double, bool>>;

// Equal error rate in percent, linearly interpolated between adjacent
// operating points and folded to [0, 50] by label symmetry. Throws when a
// class is missing.
double compute_eer(const TrialScores& scores);

// Spearman rank correlation with average ranks for ties. Returns NaN when
// either input is constant (undefined ranks).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// One enrolled utterance embedding with its speaker label.
struct EnrollEntry {
  int speaker = -1;
  Tensor embedding;  // [embed_dim, L]
};

// Cosine scoring of recovered speaker vectors against per-speaker
// enrollment centroids. Trials are all (trial, enrolled speaker) pairs,
// subsampled to max_trials with the given seed. Enrollment utterances are
// disjoint from trials by construction of the inputs.
TrialScores speaker_attack(const World& world, const std::vector<EnrollEntry>& enrollment,
                           const std::vector<int>& trial_speakers,
                           const std::vector<Tensor>& trial_embeddings, int max_trials,
                           std::uint64_t subsample_seed);

struct ProsodyUtility {
  double mean_spearman = 0.0;
  int skipped = 0;  // pairs with a constant trajectory (undefined ranks)
};

// Mean rank correlation between source prosody and the trajectory
// recovered from each anonymized embedding.
ProsodyUtility prosody_utility(const std::vector<ToyUtterance>& originals,
                               const std::vector<Tensor>& anonymized, const World& world);

// Mean squared error between the semantic component of each anonymized
// embedding and the source content condition.
double content_utility(const std::vector<ToyUtterance>& originals,
                       const std::vector<Tensor>& anonymized, const World& world);

// Nearest-centroid speaker classification from the prosody condition
// alone; the measurable form of the prosody-leaks-identity premise.
double leakage_probe_accuracy(const World& world, int train_utt_per_speaker,
                              int test_utt_per_speaker, std::uint64_t seed);

struct MetricsReport {
  std::string mode;       // prosody_cfg / plain_psi / plain_null / speaker_cfg / prosody_cfg_shift
  std::string w_pro_csv;  // numeric, or "null" when the prosody condition is dropped
  double w_pro = 0.0;     // meaningful only when w_pro_csv is numeric
  double w_spk = 0.0;
  double eer = 0.0;       // lazy attacker (enrolled on originals)
  double eer_semi = 0.0;  // attacker enrolled on independently anonymized utterances
  double prosody_corr = 0.0;
  double content_err = 0.0;
  int n_utterances = 0;
  std::uint64_t seed = 0;
  int skipped_prosody_pairs = 0;
};

struct SweepOptions {
  int n_utt = 200;
  int enroll_per_speaker = 6;
  int pool_utt_per_speaker = 5;
  int n_infer_steps = 50;
  int max_trials = 2000;
  int threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 7;
};

// Evaluation-side description of one operating point. The pseudo-speaker
// is drawn fresh per utterance unless pinned (or absent, for the
// null-speaker point).
struct EvalPoint {
  GuidanceMode mode = GuidanceMode::kProsodyCfg;
  double w_pro = 1.0;
  double w_spk = 0.0;
  bool plain_use_prosody = false;
  double pitch_shift = 0.0;
  enum class PseudoChoice { kNone, kPerUtterance, kFixed };
  PseudoChoice pseudo = PseudoChoice::kPerUtterance;
  std::vector<double> fixed_pseudo;
  std::string mode_csv;
  std::string w_pro_csv;
};

// The full operating-point sweep: one report per prosody guidance weight,
// then the four extra points (plain null/psi, plain null/null, speaker CFG
// at w_spk = 3, and prosody CFG at w = 1 with a 1-channel-std mean shift).
std::vector<MetricsReport> sweep_tradeoff(const DenoiserModel& model, const World& world,
                                          const NoiseSchedule& sched,
                                          const std::vector<double>& weights,
                                          const SweepOptions& opts);

// Single operating point with the same evaluation protocol as the sweep.
MetricsReport eval_operating_point(const DenoiserModel& model, const World& world,
                                   const NoiseSchedule& sched, const EvalPoint& point,
                                   const SweepOptions& opts);

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& r);
std::string metrics_json(const MetricsReport& r);
// Two-column prosody_corr,eer file over the weight-sweep rows.
std::string tradeoff_csv(const std::vector<MetricsReport>& reports, std::size_t n_weight_rows);

}  // namespace diffanon
