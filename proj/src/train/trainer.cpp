#include "train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "util/fileio.hpp"

namespace diffanon {

DropPattern sample_drop_pattern(SplitMix64& rng) {
  const double u = rng.uniform();
  if (u < 0.5) return DropPattern::kAll;
  if (u < 0.8) return DropPattern::kDropProsody;
  return DropPattern::kDropProsodySpeaker;
}

ConditionBundle apply_drop_pattern(const ToyUtterance& u, DropPattern pattern) {
  ConditionBundle b;
  b.c_sem = u.c_sem;
  switch (pattern) {
    case DropPattern::kAll:
      b.c_pro = u.c_pro;
      b.c_spk = u.c_spk;
      break;
    case DropPattern::kDropProsody:
      b.c_spk = u.c_spk;
      break;
    case DropPattern::kDropProsodySpeaker:
      break;
  }
  return b;
}

double train_step(DenoiserModel& model, const std::vector<ToyUtterance>& batch,
                  SplitMix64& rng, const NoiseSchedule& sched, AdamState& opt) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  GradTape tape;
  GradTape::Scope scope(tape);

  Var total;
  for (const ToyUtterance& u : batch) {
    const int t = rng.uniform_int(1, sched.t_steps);
    Tensor eps = Tensor::randn(u.x0.shape, rng);
    const ForwardSample sample = forward_noise(u.x0, t, std::move(eps), sched);
    const ConditionBundle conds = apply_drop_pattern(u, sample_drop_pattern(rng));
    Var item = x0_training_loss(model, sample, conds);
    total = total ? add(total, item) : item;
  }
  Var loss = mul_scalar(total, 1.0 / static_cast<double>(batch.size()));

  const double loss_value = loss->value.item();
  if (!std::isfinite(loss_value) || loss_value > 1e6) {
    std::ostringstream os;
    os << "train_step: loss diverged (" << loss_value << ") at adam step " << opt.step + 1;
    throw std::runtime_error(os.str());
  }

  tape.backward(loss);
  adam_step(model.params(), opt);
  return loss_value;
}

TrainLoopResult train_loop(const RunConfig& cfg, const World& world, DenoiserModel& model,
                           AdamState& opt, SplitMix64& rng, std::uint64_t start_step,
                           const std::string& out_dir) {
  const NoiseSchedule sched =
      make_linear_schedule(cfg.train.t_steps, cfg.train.beta_start, cfg.train.beta_end);
  const std::vector<int> speakers = world.train_speakers();
  if (speakers.empty()) throw std::invalid_argument("train_loop: world has no training speakers");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  TrainLoopResult result;
  double last = 0.0;
  for (std::uint64_t step = start_step; step < static_cast<std::uint64_t>(cfg.train.steps); ++step) {
    std::vector<ToyUtterance> batch;
    batch.reserve(cfg.train.batch);
    for (int i = 0; i < cfg.train.batch; ++i) {
      const int spk = speakers[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(speakers.size()) - 1))];
      batch.push_back(world.make_utterance(spk, rng));
    }
    last = train_step(model, batch, rng, sched, opt);
    const std::uint64_t done = step + 1;
    if (cfg.train.log_every > 0 &&
        (done % static_cast<std::uint64_t>(cfg.train.log_every) == 0 ||
         done == static_cast<std::uint64_t>(cfg.train.steps)))
      result.loss_log.emplace_back(static_cast<int>(done), last);
    if (!out_dir.empty() && cfg.train.checkpoint_every > 0 &&
        done % static_cast<std::uint64_t>(cfg.train.checkpoint_every) == 0 &&
        done != static_cast<std::uint64_t>(cfg.train.steps))
      save_checkpoint(out_dir + "/ckpt_step" + std::to_string(done) + ".danon", cfg, model, opt,
                      rng.state, done);
  }
  result.final_loss = last;
  return result;
}

TrainOutcome run_training(const RunConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  const World world = World::generate(cfg.world);

  SplitMix64 init_rng(derive_seed(cfg.seed, "model/init"));
  DenoiserModel model(cfg.model, init_rng);
  AdamState opt = AdamState::init(model.params(), cfg.train.lr);
  SplitMix64 rng(derive_seed(cfg.seed, "train"));

  const TrainLoopResult res = train_loop(cfg, world, model, opt, rng, 0, out_dir);

  TrainOutcome out;
  out.final_loss = res.final_loss;
  out.loss_csv_path = out_dir + "/loss.csv";
  std::ostringstream csv;
  csv << "step,loss\n";
  csv.precision(17);
  for (const auto& [step, loss] : res.loss_log) csv << step << "," << loss << "\n";
  write_text_file(out.loss_csv_path, csv.str());

  out.checkpoint_path = out_dir + "/model.danon";
  save_checkpoint(out.checkpoint_path, cfg, model, opt, rng.state,
                  static_cast<std::uint64_t>(cfg.train.steps));
  return out;
}

// ---- checkpoint I/O --------------------------------------------------------

void save_checkpoint(const std::string& path, const RunConfig& cfg, const DenoiserModel& model,
                     const AdamState& opt, std::uint64_t rng_state, std::uint64_t step) {
  const std::vector<Param>& params = model.params();
  if (opt.m.size() != params.size() || opt.v.size() != params.size())
    throw std::invalid_argument("save_checkpoint: optimizer state does not match model");

  std::string out;
  out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);

  const std::string cfg_text = cfg.serialize();
  put_u32(out, static_cast<std::uint32_t>(cfg_text.size()));
  out += cfg_text;

  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Param& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_u32(out, static_cast<std::uint32_t>(p.var->value.shape.size()));
    for (int d : p.var->value.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const Param& p : params)
    for (double v : p.var->value.data) put_f32(out, static_cast<float>(v));
  for (const Tensor& t : opt.m)
    for (double v : t.data) put_f32(out, static_cast<float>(v));
  for (const Tensor& t : opt.v)
    for (double v : t.data) put_f32(out, static_cast<float>(v));
  put_u64(out, opt.step);
  put_u64(out, rng_state);
  put_u64(out, step);

  write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string in = read_text_file(path);
  std::size_t pos = 0;
  if (in.size() < sizeof(kCheckpointMagic) ||
      in.compare(0, sizeof(kCheckpointMagic), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  pos += sizeof(kCheckpointMagic);
  const std::uint32_t version = get_u32(in, pos);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const std::uint32_t cfg_len = get_u32(in, pos);
  if (pos + cfg_len > in.size()) throw std::runtime_error("checkpoint: truncated config record");
  ck.cfg = RunConfig::parse(in.substr(pos, cfg_len));
  pos += cfg_len;

  const std::uint32_t n_params = get_u32(in, pos);
  std::vector<std::vector<int>> shapes(n_params);
  ck.params.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t name_len = get_u32(in, pos);
    if (pos + name_len > in.size()) throw std::runtime_error("checkpoint: truncated name");
    std::string name = in.substr(pos, name_len);
    pos += name_len;
    const std::uint32_t ndim = get_u32(in, pos);
    std::vector<int> shape(ndim);
    for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<int>(get_u32(in, pos));
    shapes[i] = shape;
    ck.params.emplace_back(std::move(name), Tensor::zeros(shape));
  }
  for (auto& [name, tensor] : ck.params)
    for (double& v : tensor.data) v = static_cast<double>(get_f32(in, pos));
  ck.adam_m.reserve(n_params);
  ck.adam_v.reserve(n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    Tensor t = Tensor::zeros(shapes[i]);
    for (double& v : t.data) v = static_cast<double>(get_f32(in, pos));
    ck.adam_m.push_back(std::move(t));
  }
  for (std::uint32_t i = 0; i < n_params; ++i) {
    Tensor t = Tensor::zeros(shapes[i]);
    for (double& v : t.data) v = static_cast<double>(get_f32(in, pos));
    ck.adam_v.push_back(std::move(t));
  }
  ck.adam_step = get_u64(in, pos);
  ck.rng_state = get_u64(in, pos);
  ck.step = get_u64(in, pos);
  if (pos != in.size()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return ck;
}

DenoiserModel restore_model(const Checkpoint& ckpt) {
  SplitMix64 dummy(0);
  DenoiserModel model(ckpt.cfg.model, dummy);
  std::vector<Param>& params = model.params();
  if (params.size() != ckpt.params.size())
    throw std::runtime_error("checkpoint: parameter count does not match architecture");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = ckpt.params[i];
    if (params[i].name != name || params[i].var->value.shape != tensor.shape)
      throw std::runtime_error("checkpoint: parameter mismatch at " + name);
    params[i].var->value = tensor;
  }
  return model;
}

AdamState restore_adam(const Checkpoint& ckpt, const std::vector<Param>& params) {
  AdamState opt = AdamState::init(params, ckpt.cfg.train.lr);
  if (ckpt.adam_m.size() != params.size() || ckpt.adam_v.size() != params.size())
    throw std::runtime_error("checkpoint: optimizer state does not match architecture");
  opt.m = ckpt.adam_m;
  opt.v = ckpt.adam_v;
  opt.step = ckpt.adam_step;
  return opt;
}

}  // namespace diffanon
