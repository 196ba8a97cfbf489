#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "core/adam.hpp"
#include "model/backbone.hpp"
#include "util/config.hpp"
#include "world/world.hpp"

namespace diffanon {

// Condition-dropping patterns. There is deliberately no "speaker dropped,
// prosody kept" pattern: prosody carries identity, and training that
// combination teaches the model to re-derive the speaker from prosody.
enum class DropPattern { kAll, kDropProsody, kDropProsodySpeaker };

// Categorical draw with probabilities (0.5, 0.3, 0.2).
DropPattern sample_drop_pattern(SplitMix64& rng);

ConditionBundle apply_drop_pattern(const ToyUtterance& u, DropPattern pattern);

// One optimizer step on the batch-mean x-prediction loss. Per item: draw
// t uniform in [1, t_steps], draw eps, noise to x_t, draw a drop pattern.
// Returns the batch loss. Throws on divergence (non-finite or > 1e6).
double train_step(DenoiserModel& model, const std::vector<ToyUtterance>& batch,
                  SplitMix64& rng, const NoiseSchedule& sched, AdamState& opt);

struct TrainLoopResult {
  double final_loss = 0.0;
  std::vector<std::pair<int, double>> loss_log;  // (step, loss) every log_every steps
};

// Runs cfg.train.steps steps from start_step, drawing fresh batches from
// the world's training speakers. Writes interval checkpoints and the final
// checkpoint into out_dir when non-empty. The single rng stream drives
// batch synthesis and noise draws, so its u64 state in a checkpoint is the
// complete stochastic state of the loop.
TrainLoopResult train_loop(const RunConfig& cfg, const World& world, DenoiserModel& model,
                           AdamState& opt, SplitMix64& rng, std::uint64_t start_step,
                           const std::string& out_dir);

// End-to-end: generate world, build model, train, write loss.csv and
// model checkpoint into out_dir.
struct TrainOutcome {
  double final_loss = 0.0;
  std::string checkpoint_path;
  std::string loss_csv_path;
};
TrainOutcome run_training(const RunConfig& cfg, const std::string& out_dir);

// ---- checkpoint format ----------------------------------------------------
// "DANON" magic, u32 version, length-prefixed config text, named tensor
// shape table, little-endian f32 blobs (parameters, then Adam first and
// second moments), u64 Adam step, u64 rng state, u64 step counter.
inline constexpr char kCheckpointMagic[5] = {'D', 'A', 'N', 'O', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig cfg;
  std::vector<std::pair<std::string, Tensor>> params;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
  std::uint64_t adam_step = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t step = 0;
};

void save_checkpoint(const std::string& path, const RunConfig& cfg, const DenoiserModel& model,
                     const AdamState& opt, std::uint64_t rng_state, std::uint64_t step);
Checkpoint load_checkpoint(const std::string& path);

// Instantiates the model/optimizer described by a checkpoint. Parameter
// names and shapes must match the config's architecture exactly.
DenoiserModel restore_model(const Checkpoint& ckpt);
AdamState restore_adam(const Checkpoint& ckpt, const std::vector<Param>& params);

}  // namespace diffanon
