#pragma once

#include <cstdint>
#include <string>

#include "model/backbone.hpp"
#include "world/world.hpp"

namespace diffanon {

struct TrainConfig {
  int steps = 3000;
  int batch = 8;
  double lr = 1e-4;
  int checkpoint_every = 1000;
  int log_every = 1;
  int t_steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  // Reference scale: 400k steps, lr 1e-4, batch 8, 1000 diffusion steps.
  static TrainConfig full_scale() {
    TrainConfig c;
    c.steps = 400000;
    c.batch = 8;
    c.lr = 1e-4;
    c.t_steps = 1000;
    return c;
  }
};

struct GuidanceDefaults {
  double w_pro = 1.0;
  double w_spk = 0.0;
  int n_infer_steps = 50;  // reference scale uses 100
  double pitch_shift = 0.0;
};

// Everything a run needs, parsed from sectioned key=value text. Every key
// has a default, so the empty string is a valid config. Component seeds
// are derived from the single global seed as
// derive_seed(seed, "<component label>"); no other seed enters the system.
struct RunConfig {
  WorldConfig world;
  TrainConfig train;
  BackboneConfig model;
  GuidanceDefaults guidance;
  std::uint64_t seed = 7;
  std::string out_dir = "out";
  int threads = 0;  // 0 = hardware concurrency

  static RunConfig defaults() { return parse(""); }
  // Throws std::invalid_argument on unknown keys or malformed lines.
  static RunConfig parse(const std::string& text);
  static RunConfig parse_file(const std::string& path);
  std::string serialize() const;

  // Cross-field checks (world dims vs model dims).
  void validate() const;
};

}  // namespace diffanon
