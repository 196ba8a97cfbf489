// Command-line frontend for the diffanon shared library. Exit codes:
// 0 success, 1 usage/configuration error, 2 runtime failure.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffanon.h"

namespace {

int report_status(da_status st) {
  if (st == DA_OK) return 0;
  std::cerr << "error: " << da_last_error() << "\n";
  return st == DA_ERR_ARG ? 1 : 2;
}

std::string default_out_dir() {
  const char* env = std::getenv("DIFFANON_OUT_DIR");
  return env && *env ? env : "out";
}

std::string read_config_file(const std::string& path) {
  if (path.empty()) return "";
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file " << path << "\n";
    std::exit(1);
  }
  std::ostringstream body;
  body << in.rdbuf();
  return body.str();
}

struct ConfigArgs {
  std::string path;
  std::uint64_t seed = 7;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", path, "Config file (sectioned key=value text)")
        ->check(CLI::ExistingFile);
    seed_opt = cmd.add_option("--seed", seed, "Global seed override");
  }

  std::string text() const {
    std::string t = read_config_file(path);
    if (seed_opt && seed_opt->count() > 0)
      t += "\n[run]\nseed = " + std::to_string(seed) + "\n";
    return t;
  }
};

struct GuidanceArgs {
  std::string mode = "prosody-cfg";
  double w_pro = 1.0;
  double w_spk = 0.0;
  bool with_prosody = false;
  bool no_pseudo = false;
  int pseudo_speaker = -1;
  double pitch_shift = 0.0;
  int infer_steps = 0;
  CLI::Option* w_pro_opt = nullptr;
  CLI::Option* w_spk_opt = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--mode", mode, "Guidance mode")
        ->check(CLI::IsMember({"plain", "prosody-cfg", "speaker-cfg"}));
    w_pro_opt = cmd.add_option("--w-pro", w_pro, "Prosody guidance weight in [0, 2]");
    w_spk_opt = cmd.add_option("--w-spk", w_spk, "Speaker guidance weight");
    cmd.add_flag("--with-prosody", with_prosody, "Plain mode: condition on source prosody");
    auto* pseudo = cmd.add_option("--pseudo-speaker", pseudo_speaker,
                                  "Pseudo-speaker pool index (-1 = seeded random draw)");
    cmd.add_flag("--no-pseudo", no_pseudo, "Null speaker condition (plain mode only)")
        ->excludes(pseudo);
    cmd.add_option("--pitch-shift", pitch_shift,
                   "Mean shift of the prosody condition (channel-std units)");
    cmd.add_option("--infer-steps", infer_steps, "DDIM steps (0 = config default)");
  }

  // Returns false (usage error) on conflicting flags.
  bool fill(da_guidance_opts& o) const {
    o = {};
    if (mode == "plain") o.mode = DA_MODE_PLAIN;
    else if (mode == "prosody-cfg") o.mode = DA_MODE_PROSODY_CFG;
    else o.mode = DA_MODE_SPEAKER_CFG;
    if (o.mode == DA_MODE_SPEAKER_CFG && w_pro_opt->count() > 0) {
      std::cerr << "error: --w-pro conflicts with --mode speaker-cfg\n";
      return false;
    }
    if (o.mode == DA_MODE_SPEAKER_CFG && with_prosody) {
      std::cerr << "error: --with-prosody conflicts with --mode speaker-cfg\n";
      return false;
    }
    if (w_pro < 0.0 || w_pro > 2.0) {
      std::cerr << "error: --w-pro must be in [0, 2]\n";
      return false;
    }
    if (w_pro > 1.0)
      std::cerr << "warning: w_pro " << w_pro << " extrapolates beyond the studied [0, 1] range\n";
    o.w_pro = w_pro;
    o.w_spk = w_spk;
    o.plain_use_prosody = with_prosody ? 1 : 0;
    o.pseudo_speaker = no_pseudo ? -2 : pseudo_speaker;
    o.pitch_shift = pitch_shift;
    o.n_infer_steps = infer_steps;
    return true;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controllable prosody-preserving anonymization over a synthetic codec-embedding world"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(da_version()));

  // gen-world
  auto* gen = app.add_subcommand("gen-world", "Generate the synthetic world and dump a dataset");
  ConfigArgs gen_cfg;
  gen_cfg.attach(*gen);
  std::string gen_out = default_out_dir();
  int gen_utt = 10;
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_option("--utt-per-speaker", gen_utt, "Utterances per speaker")->check(CLI::PositiveNumber);

  // train
  auto* train = app.add_subcommand("train", "Train the denoiser and write checkpoints");
  ConfigArgs train_cfg;
  train_cfg.attach(*train);
  std::string train_out = default_out_dir();
  train->add_option("--out", train_out, "Output directory");

  // anonymize
  auto* anon = app.add_subcommand("anonymize", "Anonymize one source utterance");
  std::string anon_ckpt;
  anon->add_option("--checkpoint", anon_ckpt, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  int src_speaker = 0, src_utt = 0;
  anon->add_option("--source-speaker", src_speaker, "Source speaker id")->required();
  anon->add_option("--source-utt", src_utt, "Source utterance index");
  GuidanceArgs anon_guide;
  anon_guide.attach(*anon);
  std::uint64_t anon_seed = 7;
  anon->add_option("--seed", anon_seed, "Sampling seed");
  std::string anon_out, anon_report;
  anon->add_option("--out", anon_out, "Output embedding file (.f32)");
  anon->add_option("--report", anon_report, "One-line JSON report path");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Prosody-weight sweep with the extra operating points");
  std::string sweep_ckpt;
  sweep->add_option("--checkpoint", sweep_ckpt, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  std::vector<double> sweep_weights;
  sweep->add_option("--weights", sweep_weights, "Prosody guidance weights")->delimiter(',');
  int sweep_n_utt = 200, sweep_threads = 0, sweep_infer = 0;
  std::uint64_t sweep_seed = 7;
  sweep->add_option("--n-utt", sweep_n_utt, "Evaluation utterances")->check(CLI::PositiveNumber);
  sweep->add_option("--threads", sweep_threads, "Worker threads (0 = hardware)");
  sweep->add_option("--infer-steps", sweep_infer, "DDIM steps (0 = config default)");
  sweep->add_option("--seed", sweep_seed, "Evaluation seed");
  std::string sweep_metrics, sweep_tradeoff;
  sweep->add_option("--out-metrics", sweep_metrics, "Metrics CSV path");
  sweep->add_option("--out-tradeoff", sweep_tradeoff, "Trade-off CSV path");

  // eval
  auto* ev = app.add_subcommand("eval", "Metrics for a single operating point");
  std::string eval_ckpt;
  ev->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  GuidanceArgs eval_guide;
  eval_guide.attach(*ev);
  int eval_n_utt = 200, eval_threads = 0;
  std::uint64_t eval_seed = 7;
  ev->add_option("--n-utt", eval_n_utt, "Evaluation utterances")->check(CLI::PositiveNumber);
  ev->add_option("--threads", eval_threads, "Worker threads (0 = hardware)");
  ev->add_option("--seed", eval_seed, "Evaluation seed");
  std::string eval_csv, eval_json;
  ev->add_option("--out-csv", eval_csv, "Metrics CSV path");
  ev->add_option("--out-json", eval_json, "Metrics JSON path");

  // selftest
  app.add_subcommand("selftest", "Run the built-in oracle and invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (gen->parsed()) {
    da_world* world = nullptr;
    da_status st = da_world_create(gen_cfg.text().c_str(), &world);
    if (st != DA_OK) return report_status(st);
    st = da_world_dump(world, gen_out.c_str(), gen_utt);
    da_world_destroy(world);
    if (st == DA_OK)
      std::cout << "world dataset written to " << gen_out << "\n";
    return report_status(st);
  }

  if (train->parsed()) {
    double final_loss = 0.0;
    const da_status st = da_train(train_cfg.text().c_str(), train_out.c_str(), &final_loss);
    if (st == DA_OK) {
      std::cout.precision(12);
      std::cout << "final loss " << final_loss << "\n"
                << "checkpoint " << train_out << "/model.danon\n";
    }
    return report_status(st);
  }

  if (anon->parsed()) {
    da_guidance_opts opts;
    if (!anon_guide.fill(opts)) return 1;
    if (anon_out.empty()) anon_out = default_out_dir() + "/anonymized.f32";
    if (anon_report.empty()) anon_report = default_out_dir() + "/anonymize_report.json";
    da_model* model = nullptr;
    da_status st = da_model_load(anon_ckpt.c_str(), &model);
    if (st != DA_OK) return report_status(st);
    st = da_anonymize(model, src_speaker, src_utt, &opts, anon_seed, anon_out.c_str(),
                      anon_report.c_str());
    da_model_destroy(model);
    if (st == DA_OK)
      std::cout << "anonymized embedding written to " << anon_out << "\n";
    return report_status(st);
  }

  if (sweep->parsed()) {
    if (sweep_metrics.empty()) sweep_metrics = default_out_dir() + "/metrics.csv";
    if (sweep_tradeoff.empty()) sweep_tradeoff = default_out_dir() + "/tradeoff.csv";
    da_model* model = nullptr;
    da_status st = da_model_load(sweep_ckpt.c_str(), &model);
    if (st != DA_OK) return report_status(st);
    da_eval_opts opts{sweep_n_utt, sweep_infer, sweep_threads, sweep_seed};
    st = da_sweep(model, sweep_weights.empty() ? nullptr : sweep_weights.data(),
                  static_cast<int32_t>(sweep_weights.size()), &opts, sweep_metrics.c_str(),
                  sweep_tradeoff.c_str());
    da_model_destroy(model);
    if (st == DA_OK)
      std::cout << "metrics written to " << sweep_metrics << "\n"
                << "trade-off curve written to " << sweep_tradeoff << "\n";
    return report_status(st);
  }

  if (ev->parsed()) {
    da_guidance_opts gopts;
    if (!eval_guide.fill(gopts)) return 1;
    if (eval_csv.empty()) eval_csv = default_out_dir() + "/eval.csv";
    if (eval_json.empty()) eval_json = default_out_dir() + "/eval.json";
    da_model* model = nullptr;
    da_status st = da_model_load(eval_ckpt.c_str(), &model);
    if (st != DA_OK) return report_status(st);
    da_eval_opts opts{eval_n_utt, 0, eval_threads, eval_seed};
    st = da_eval_point(model, &gopts, &opts, eval_csv.c_str(), eval_json.c_str());
    da_model_destroy(model);
    if (st == DA_OK) std::cout << "metrics written to " << eval_csv << "\n";
    return report_status(st);
  }

  // selftest
  return report_status(da_selftest());
}
