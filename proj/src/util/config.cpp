#include "util/config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace diffanon {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct KvReader {
  std::map<std::string, std::string> values;

  void load(const std::string& text) {
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw std::invalid_argument("config line " + std::to_string(line_no) +
                                      ": unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string val = trim(line.substr(eq + 1));
      if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
      values[section + "." + key] = val;
    }
  }

  template <typename T>
  void take(const std::string& key, T& out) {
    auto it = values.find(key);
    if (it == values.end()) return;
    std::istringstream is(it->second);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw std::invalid_argument("config: bad value for " + key + ": '" + it->second + "'");
    out = v;
    values.erase(it);
  }

  void take(const std::string& key, std::string& out) {
    auto it = values.find(key);
    if (it == values.end()) return;
    out = it->second;
    values.erase(it);
  }
};

}  // namespace

RunConfig RunConfig::parse(const std::string& text) {
  KvReader r;
  r.load(text);
  RunConfig c;

  r.take("run.seed", c.seed);
  r.take("run.out_dir", c.out_dir);
  r.take("run.threads", c.threads);

  r.take("world.n_speakers", c.world.n_speakers);
  r.take("world.n_semantic_tokens", c.world.n_semantic_tokens);
  r.take("world.frames", c.world.frames);
  r.take("world.embed_dim", c.world.embed_dim);
  r.take("world.cond_pro_dim", c.world.cond_pro_dim);
  r.take("world.cond_spk_dim", c.world.cond_spk_dim);
  r.take("world.leakage", c.world.leakage);
  r.take("world.residual_noise_std", c.world.residual_noise_std);

  r.take("model.n_blocks", c.model.n_blocks);
  r.take("model.kernel", c.model.kernel);
  r.take("model.channels", c.model.channels);
  r.take("model.t_embed_dim", c.model.t_embed_dim);

  r.take("train.steps", c.train.steps);
  r.take("train.batch", c.train.batch);
  r.take("train.lr", c.train.lr);
  r.take("train.checkpoint_every", c.train.checkpoint_every);
  r.take("train.log_every", c.train.log_every);

  r.take("diffusion.t_steps", c.train.t_steps);
  r.take("diffusion.beta_start", c.train.beta_start);
  r.take("diffusion.beta_end", c.train.beta_end);

  r.take("guidance.w_pro", c.guidance.w_pro);
  r.take("guidance.w_spk", c.guidance.w_spk);
  r.take("guidance.n_infer_steps", c.guidance.n_infer_steps);
  r.take("guidance.pitch_shift", c.guidance.pitch_shift);

  if (!r.values.empty())
    throw std::invalid_argument("config: unknown key '" + r.values.begin()->first + "'");

  // The world seed is never a config key: it derives from the global seed.
  c.world.seed = derive_seed(c.seed, "world");
  // The model adds the content condition unprojected, so its dims follow
  // the world's.
  c.model.embed_dim = c.model.channels;
  c.model.cond_pro_dim = c.world.cond_pro_dim;
  c.model.cond_spk_dim = c.world.cond_spk_dim;
  return c;
}

RunConfig RunConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream body;
  body << in.rdbuf();
  return parse(body.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os.precision(17);
  os << "[run]\n"
     << "seed = " << seed << "\n"
     << "out_dir = " << out_dir << "\n"
     << "threads = " << threads << "\n\n";
  os << "[world]\n"
     << "n_speakers = " << world.n_speakers << "\n"
     << "n_semantic_tokens = " << world.n_semantic_tokens << "\n"
     << "frames = " << world.frames << "\n"
     << "embed_dim = " << world.embed_dim << "\n"
     << "cond_pro_dim = " << world.cond_pro_dim << "\n"
     << "cond_spk_dim = " << world.cond_spk_dim << "\n"
     << "leakage = " << world.leakage << "\n"
     << "residual_noise_std = " << world.residual_noise_std << "\n\n";
  os << "[model]\n"
     << "n_blocks = " << model.n_blocks << "\n"
     << "kernel = " << model.kernel << "\n"
     << "channels = " << model.channels << "\n"
     << "t_embed_dim = " << model.t_embed_dim << "\n\n";
  os << "[train]\n"
     << "steps = " << train.steps << "\n"
     << "batch = " << train.batch << "\n"
     << "lr = " << train.lr << "\n"
     << "checkpoint_every = " << train.checkpoint_every << "\n"
     << "log_every = " << train.log_every << "\n\n";
  os << "[diffusion]\n"
     << "t_steps = " << train.t_steps << "\n"
     << "beta_start = " << train.beta_start << "\n"
     << "beta_end = " << train.beta_end << "\n\n";
  os << "[guidance]\n"
     << "w_pro = " << guidance.w_pro << "\n"
     << "w_spk = " << guidance.w_spk << "\n"
     << "n_infer_steps = " << guidance.n_infer_steps << "\n"
     << "pitch_shift = " << guidance.pitch_shift << "\n";
  return os.str();
}

void RunConfig::validate() const {
  world.validate();
  model.validate();
  if (world.embed_dim != model.embed_dim)
    throw std::invalid_argument(
        "config: world.embed_dim must equal model.channels (content conditioning is unprojected)");
  if (train.steps < 0 || train.batch < 1) throw std::invalid_argument("config: bad train settings");
  if (train.lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (guidance.n_infer_steps < 1 || guidance.n_infer_steps > train.t_steps)
    throw std::invalid_argument("config: n_infer_steps must be in [1, t_steps]");
  if (guidance.w_pro < 0.0 || guidance.w_pro > 2.0)
    throw std::invalid_argument("config: w_pro must be in [0, 2]");
  if (guidance.w_spk < 0.0) throw std::invalid_argument("config: w_spk must be >= 0");
}

}  // namespace diffanon
