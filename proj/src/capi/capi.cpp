#include "diffanon.h"

#include <cstring>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

#include <json.hpp>

#include "eval/metrics.hpp"
#include "guide/guidance.hpp"
#include "selftest.hpp"
#include "train/trainer.hpp"
#include "util/fileio.hpp"

using namespace diffanon;

namespace {

thread_local std::string g_last_error;

da_status fail(da_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
da_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DA_OK;
  } catch (const std::invalid_argument& e) {
    return fail(DA_ERR_ARG, e.what());
  } catch (const std::out_of_range& e) {
    return fail(DA_ERR_ARG, e.what());
  } catch (const std::logic_error& e) {
    return fail(DA_ERR_ARG, e.what());
  } catch (const std::exception& e) {
    return fail(DA_ERR_RUNTIME, e.what());
  }
}

constexpr int kPoolUttPerSpeaker = 5;

}  // namespace

struct da_world {
  RunConfig cfg;
  World world;
};

struct da_model {
  RunConfig cfg;
  std::string cfg_text;
  World world;
  DenoiserModel model;
  NoiseSchedule sched;
  PseudoSpeakerPool pool;
};

namespace {

GuidanceSpec guidance_from_opts(const da_model& m, const da_guidance_opts& o, uint64_t seed,
                                int* pseudo_label) {
  GuidanceSpec spec;
  switch (o.mode) {
    case DA_MODE_PLAIN: spec.mode = GuidanceMode::kPlain; break;
    case DA_MODE_PROSODY_CFG: spec.mode = GuidanceMode::kProsodyCfg; break;
    case DA_MODE_SPEAKER_CFG: spec.mode = GuidanceMode::kSpeakerCfg; break;
    default: throw std::invalid_argument("guidance: unknown mode " + std::to_string(o.mode));
  }
  if (o.w_pro < 0.0 || o.w_pro > 2.0)
    throw std::invalid_argument("guidance: w_pro must be in [0, 2]");
  spec.w_pro = o.w_pro;
  spec.w_spk = o.w_spk;
  spec.plain_use_prosody = o.plain_use_prosody != 0;
  spec.pitch_shift = o.pitch_shift;
  spec.n_infer_steps = o.n_infer_steps > 0 ? o.n_infer_steps : m.cfg.guidance.n_infer_steps;

  if (pseudo_label) *pseudo_label = -1;
  if (o.pseudo_speaker >= 0) {
    if (o.pseudo_speaker >= static_cast<int>(m.pool.entries.size()))
      throw std::invalid_argument("guidance: pseudo-speaker index out of range");
    const auto& e = m.pool.entries[static_cast<std::size_t>(o.pseudo_speaker)];
    spec.pseudo_speaker = e.embedding;
    if (pseudo_label) *pseudo_label = e.label;
  } else if (o.pseudo_speaker == -1) {
    SplitMix64 rng(derive_seed(seed, "pseudo"));
    const auto& e = sample_pseudo_speaker(m.pool, rng);
    spec.pseudo_speaker = e.embedding;
    if (pseudo_label) *pseudo_label = e.label;
  } else if (o.pseudo_speaker != -2) {
    throw std::invalid_argument("guidance: pseudo_speaker must be a pool index, -1 or -2");
  }
  spec.validate();
  return spec;
}

SweepOptions sweep_options_from(const da_model& m, const da_eval_opts* o) {
  SweepOptions s;
  if (o) {
    if (o->n_utt > 0) s.n_utt = o->n_utt;
    if (o->n_infer_steps > 0) s.n_infer_steps = o->n_infer_steps;
    else s.n_infer_steps = m.cfg.guidance.n_infer_steps;
    s.threads = o->threads;
    s.seed = o->seed;
  } else {
    s.n_infer_steps = m.cfg.guidance.n_infer_steps;
  }
  return s;
}

}  // namespace

extern "C" {

const char* da_version(void) { return "0.1.0"; }

const char* da_last_error(void) { return g_last_error.c_str(); }

da_status da_world_create(const char* config_text, da_world** out_world) {
  if (!out_world) return fail(DA_ERR_ARG, "da_world_create: out_world is NULL");
  *out_world = nullptr;
  return guarded([&] {
    RunConfig cfg = RunConfig::parse(config_text ? config_text : "");
    cfg.world.validate();
    auto w = std::make_unique<da_world>(da_world{cfg, World::generate(cfg.world)});
    *out_world = w.release();
  });
}

void da_world_destroy(da_world* world) { delete world; }

da_status da_world_dump(const da_world* world, const char* out_dir, int32_t utt_per_speaker) {
  if (!world || !out_dir) return fail(DA_ERR_ARG, "da_world_dump: NULL argument");
  return guarded(
      [&] { world->world.dump_dataset(out_dir, utt_per_speaker, world->cfg.seed); });
}

da_status da_train(const char* config_text, const char* out_dir, double* out_final_loss) {
  if (!out_dir) return fail(DA_ERR_ARG, "da_train: out_dir is NULL");
  return guarded([&] {
    const RunConfig cfg = RunConfig::parse(config_text ? config_text : "");
    const TrainOutcome outcome = run_training(cfg, out_dir);
    if (out_final_loss) *out_final_loss = outcome.final_loss;
  });
}

da_status da_model_load(const char* checkpoint_path, da_model** out_model) {
  if (!checkpoint_path || !out_model) return fail(DA_ERR_ARG, "da_model_load: NULL argument");
  *out_model = nullptr;
  return guarded([&] {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    auto m = std::make_unique<da_model>(da_model{
        ck.cfg, ck.cfg.serialize(), World::generate(ck.cfg.world), restore_model(ck),
        make_linear_schedule(ck.cfg.train.t_steps, ck.cfg.train.beta_start, ck.cfg.train.beta_end),
        {}});
    m->pool = build_pseudo_speaker_pool(m->world, kPoolUttPerSpeaker,
                                        derive_seed(ck.cfg.seed, "pool"));
    *out_model = m.release();
  });
}

void da_model_destroy(da_model* model) { delete model; }

da_status da_model_config(const da_model* model, char* buf, size_t buf_len, size_t* out_len) {
  if (!model) return fail(DA_ERR_ARG, "da_model_config: model is NULL");
  if (out_len) *out_len = model->cfg_text.size();
  if (buf && buf_len > 0) {
    const size_t n = std::min(buf_len - 1, model->cfg_text.size());
    std::memcpy(buf, model->cfg_text.data(), n);
    buf[n] = '\0';
  }
  g_last_error.clear();
  return DA_OK;
}

da_status da_anonymize(const da_model* model, int32_t source_speaker, int32_t source_utt,
                       const da_guidance_opts* opts, uint64_t seed, const char* out_path,
                       const char* report_json_path) {
  if (!model || !opts || !out_path) return fail(DA_ERR_ARG, "da_anonymize: NULL argument");
  return guarded([&] {
    if (source_speaker < 0 || source_speaker >= model->cfg.world.n_speakers)
      throw std::invalid_argument("da_anonymize: source speaker out of range");
    if (source_utt < 0) throw std::invalid_argument("da_anonymize: source utterance must be >= 0");

    int pseudo_label = -1;
    const GuidanceSpec spec = guidance_from_opts(*model, *opts, seed, &pseudo_label);

    SplitMix64 src_rng(derive_seed(model->cfg.seed, "source/" + std::to_string(source_speaker) +
                                                        "/" + std::to_string(source_utt)));
    const ToyUtterance source = model->world.make_utterance(source_speaker, src_rng);

    SplitMix64 rng(derive_seed(seed, "anonymize"));
    const Tensor out = anonymize(model->model, model->sched, spec, source, rng);
    write_f32_tensor(out_path, out);

    if (report_json_path) {
      nlohmann::json j = {
          {"mode", guidance_mode_name(spec.mode)},
          {"w_pro", spec.w_pro},
          {"w_spk", spec.w_spk},
          {"plain_use_prosody", spec.plain_use_prosody},
          {"pitch_shift", spec.pitch_shift},
          {"n_infer_steps", spec.n_infer_steps},
          {"pseudo_speaker", pseudo_label},
          {"source_speaker", source_speaker},
          {"source_utt", source_utt},
          {"seed", seed},
          {"embed_dim", model->cfg.world.embed_dim},
          {"frames", model->cfg.world.frames},
          {"output", out_path},
      };
      write_text_file(report_json_path, j.dump() + "\n");
    }
  });
}

da_status da_sweep(const da_model* model, const double* weights, int32_t n_weights,
                   const da_eval_opts* opts, const char* metrics_csv_path,
                   const char* tradeoff_csv_path) {
  if (!model || !metrics_csv_path || !tradeoff_csv_path)
    return fail(DA_ERR_ARG, "da_sweep: NULL argument");
  if (weights == nullptr && n_weights != 0)
    return fail(DA_ERR_ARG, "da_sweep: weights is NULL but n_weights > 0");
  return guarded([&] {
    std::vector<double> w;
    if (weights && n_weights > 0)
      w.assign(weights, weights + n_weights);
    else
      w = {1.0, 0.8, 0.5, 0.2, 0.0};
    for (double x : w)
      if (x < 0.0 || x > 2.0) throw std::invalid_argument("da_sweep: weights must be in [0, 2]");

    const SweepOptions so = sweep_options_from(*model, opts);
    const std::vector<MetricsReport> reports =
        sweep_tradeoff(model->model, model->world, model->sched, w, so);

    std::string csv = metrics_csv_header() + "\n";
    for (const MetricsReport& r : reports) csv += metrics_csv_row(r) + "\n";
    write_text_file(metrics_csv_path, csv);
    write_text_file(tradeoff_csv_path, tradeoff_csv(reports, w.size()));
  });
}

da_status da_eval_point(const da_model* model, const da_guidance_opts* guidance,
                        const da_eval_opts* opts, const char* csv_path, const char* json_path) {
  if (!model || !guidance) return fail(DA_ERR_ARG, "da_eval_point: NULL argument");
  return guarded([&] {
    // Validate the guidance options through the same path as anonymize.
    const uint64_t seed = opts ? opts->seed : 7;
    (void)guidance_from_opts(*model, *guidance, seed, nullptr);

    EvalPoint p;
    switch (guidance->mode) {
      case DA_MODE_PLAIN: p.mode = GuidanceMode::kPlain; break;
      case DA_MODE_PROSODY_CFG: p.mode = GuidanceMode::kProsodyCfg; break;
      case DA_MODE_SPEAKER_CFG: p.mode = GuidanceMode::kSpeakerCfg; break;
      default: throw std::invalid_argument("da_eval_point: unknown mode");
    }
    p.w_pro = guidance->w_pro;
    p.w_spk = guidance->w_spk;
    p.plain_use_prosody = guidance->plain_use_prosody != 0;
    p.pitch_shift = guidance->pitch_shift;
    if (guidance->pseudo_speaker == -2) {
      p.pseudo = EvalPoint::PseudoChoice::kNone;
    } else if (guidance->pseudo_speaker >= 0) {
      p.pseudo = EvalPoint::PseudoChoice::kFixed;
      p.fixed_pseudo =
          model->pool.entries[static_cast<std::size_t>(guidance->pseudo_speaker)].embedding;
    } else {
      p.pseudo = EvalPoint::PseudoChoice::kPerUtterance;
    }

    SweepOptions so = sweep_options_from(*model, opts);
    if (guidance->n_infer_steps > 0) so.n_infer_steps = guidance->n_infer_steps;
    const MetricsReport r = eval_operating_point(model->model, model->world, model->sched, p, so);

    if (csv_path) write_text_file(csv_path, metrics_csv_header() + "\n" + metrics_csv_row(r) + "\n");
    if (json_path) write_text_file(json_path, metrics_json(r) + "\n");
  });
}

da_status da_selftest(void) {
  return guarded([&] {
    if (run_selftest(std::cout) != 0) throw std::runtime_error("selftest: checks failed");
  });
}

}  // extern "C"
