#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace diffanon {

namespace {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  int t = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  t = std::max(1, std::min(t, n));
  if (t == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(t);
  for (int w = 0; w < t; ++w)
    workers.emplace_back([&, w] {
      for (int i = w; i < n; i += t) fn(i);
    });
  for (auto& th : workers) th.join();
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Fractional ranks (1-based) with average ranks on ties.
std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double compute_eer(const TrialScores& scores) {
  std::size_t n_same = 0, n_diff = 0;
  for (const auto& [s, same] : scores) (same ? n_same : n_diff) += 1;
  if (n_same == 0 || n_diff == 0)
    throw std::invalid_argument("compute_eer: need both same- and different-speaker trials");

  TrialScores sorted = scores;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  // Walk operating points from accept-none to accept-all; FAR rises while
  // FRR falls, so far - frr crosses zero exactly once.
  double prev_far = 0.0, prev_frr = 1.0;
  std::size_t acc_same = 0, acc_diff = 0;
  double eer = 50.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1].first == sorted[i].first) ++j;
    for (std::size_t k = i; k <= j; ++k) (sorted[k].second ? acc_same : acc_diff) += 1;
    const double far = static_cast<double>(acc_diff) / static_cast<double>(n_diff);
    const double frr = 1.0 - static_cast<double>(acc_same) / static_cast<double>(n_same);
    if (far >= frr) {
      const double d_prev = prev_far - prev_frr;
      const double d_cur = far - frr;
      const double t = (d_cur == d_prev) ? 0.0 : -d_prev / (d_cur - d_prev);
      eer = 100.0 * (prev_far + t * (far - prev_far));
      break;
    }
    prev_far = far;
    prev_frr = frr;
    i = j + 1;
  }
  return eer > 50.0 ? 100.0 - eer : eer;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equally sized vectors of length >= 2");
  const std::vector<double> ra = fractional_ranks(a);
  const std::vector<double> rb = fractional_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return cov / std::sqrt(va * vb);
}

TrialScores speaker_attack(const World& world, const std::vector<EnrollEntry>& enrollment,
                           const std::vector<int>& trial_speakers,
                           const std::vector<Tensor>& trial_embeddings, int max_trials,
                           std::uint64_t subsample_seed) {
  if (trial_speakers.size() != trial_embeddings.size())
    throw std::invalid_argument("speaker_attack: trial labels and embeddings must align");
  if (enrollment.empty()) throw std::invalid_argument("speaker_attack: empty enrollment");

  // Per-speaker centroids of the recovered speaker vectors.
  std::vector<int> speakers;
  std::vector<std::vector<double>> centroids;
  std::vector<int> counts;
  for (const EnrollEntry& e : enrollment) {
    const Factors f = world.project_factors(e.embedding);
    auto it = std::find(speakers.begin(), speakers.end(), e.speaker);
    if (it == speakers.end()) {
      speakers.push_back(e.speaker);
      centroids.push_back(f.s_hat);
      counts.push_back(1);
    } else {
      const std::size_t idx = static_cast<std::size_t>(it - speakers.begin());
      for (std::size_t j = 0; j < f.s_hat.size(); ++j) centroids[idx][j] += f.s_hat[j];
      counts[idx] += 1;
    }
  }
  if (speakers.size() < 2) throw std::invalid_argument("speaker_attack: need at least 2 speakers");
  for (std::size_t i = 0; i < centroids.size(); ++i)
    for (double& v : centroids[i]) v /= static_cast<double>(counts[i]);

  std::vector<std::vector<double>> trial_s(trial_embeddings.size());
  for (std::size_t i = 0; i < trial_embeddings.size(); ++i)
    trial_s[i] = world.project_factors(trial_embeddings[i]).s_hat;

  TrialScores all;
  all.reserve(trial_s.size() * speakers.size());
  for (std::size_t i = 0; i < trial_s.size(); ++i)
    for (std::size_t k = 0; k < speakers.size(); ++k)
      all.emplace_back(cosine(trial_s[i], centroids[k]), trial_speakers[i] == speakers[k]);

  if (max_trials > 0 && static_cast<int>(all.size()) > max_trials) {
    SplitMix64 rng(derive_seed(subsample_seed, "attack/subsample"));
    for (std::size_t i = all.size(); i > 1; --i)
      std::swap(all[i - 1], all[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    all.resize(static_cast<std::size_t>(max_trials));
  }
  return all;
}

ProsodyUtility prosody_utility(const std::vector<ToyUtterance>& originals,
                               const std::vector<Tensor>& anonymized, const World& world) {
  if (originals.size() != anonymized.size())
    throw std::invalid_argument("prosody_utility: lists must align");
  ProsodyUtility out;
  double acc = 0.0;
  int used = 0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const std::vector<double> p(originals[i].prosody.data.begin(), originals[i].prosody.data.end());
    const std::vector<double> p_hat = world.project_factors(anonymized[i]).p_hat;
    const double rho = spearman(p, p_hat);
    if (std::isnan(rho)) {
      out.skipped += 1;
      continue;
    }
    acc += rho;
    used += 1;
  }
  out.mean_spearman = used > 0 ? acc / used : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double content_utility(const std::vector<ToyUtterance>& originals,
                       const std::vector<Tensor>& anonymized, const World& world) {
  if (originals.size() != anonymized.size())
    throw std::invalid_argument("content_utility: lists must align");
  double acc = 0.0;
  for (std::size_t i = 0; i < originals.size(); ++i) {
    const Factors f = world.project_factors(anonymized[i]);
    double mse = 0.0;
    for (std::size_t j = 0; j < f.semantic.data.size(); ++j) {
      const double d = f.semantic.data[j] - originals[i].c_sem.data[j];
      mse += d * d;
    }
    acc += mse / static_cast<double>(f.semantic.data.size());
  }
  return acc / static_cast<double>(originals.size());
}

double leakage_probe_accuracy(const World& world, int train_utt_per_speaker,
                              int test_utt_per_speaker, std::uint64_t seed) {
  const int n_spk = world.config().n_speakers;
  const auto flatten = [](const ToyUtterance& u) {
    return std::vector<double>(u.c_pro.data.begin(), u.c_pro.data.end());
  };

  std::vector<std::vector<double>> centroids(n_spk);
  for (int k = 0; k < n_spk; ++k) {
    std::vector<double> c;
    for (int j = 0; j < train_utt_per_speaker; ++j) {
      SplitMix64 rng(derive_seed(seed, "probe/train/" + std::to_string(k) + "/" + std::to_string(j)));
      const std::vector<double> f = flatten(world.make_utterance(k, rng));
      if (c.empty()) c.assign(f.size(), 0.0);
      for (std::size_t i = 0; i < f.size(); ++i) c[i] += f[i];
    }
    for (double& v : c) v /= static_cast<double>(train_utt_per_speaker);
    centroids[k] = std::move(c);
  }

  int correct = 0, total = 0;
  for (int k = 0; k < n_spk; ++k) {
    for (int j = 0; j < test_utt_per_speaker; ++j) {
      SplitMix64 rng(derive_seed(seed, "probe/test/" + std::to_string(k) + "/" + std::to_string(j)));
      const std::vector<double> f = flatten(world.make_utterance(k, rng));
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < n_spk; ++c) {
        double d = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
          const double diff = f[i] - centroids[c][i];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      correct += best == k ? 1 : 0;
      total += 1;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

struct EvalFixtures {
  std::vector<ToyUtterance> sources;
  std::vector<int> source_speakers;
  std::vector<ToyUtterance> enroll;
  std::vector<int> enroll_speakers;
  PseudoSpeakerPool pool;
  std::vector<int> pseudo_index_per_source;  // shared across operating points
};

EvalFixtures make_fixtures(const World& world, const SweepOptions& opts) {
  EvalFixtures fx;
  const std::vector<int> eval_ids = world.eval_speakers();
  if (eval_ids.size() < 2) throw std::invalid_argument("sweep: need at least 2 evaluation speakers");

  fx.sources.reserve(opts.n_utt);
  for (int i = 0; i < opts.n_utt; ++i) {
    const int spk = eval_ids[static_cast<std::size_t>(i) % eval_ids.size()];
    SplitMix64 rng(derive_seed(opts.seed, "eval/source/" + std::to_string(i)));
    fx.sources.push_back(world.make_utterance(spk, rng));
    fx.source_speakers.push_back(spk);
  }
  for (int spk : eval_ids) {
    for (int j = 0; j < opts.enroll_per_speaker; ++j) {
      SplitMix64 rng(
          derive_seed(opts.seed, "eval/enroll/" + std::to_string(spk) + "/" + std::to_string(j)));
      fx.enroll.push_back(world.make_utterance(spk, rng));
      fx.enroll_speakers.push_back(spk);
    }
  }
  fx.pool = build_pseudo_speaker_pool(world, opts.pool_utt_per_speaker, derive_seed(opts.seed, "pool"));
  fx.pseudo_index_per_source.reserve(opts.n_utt);
  for (int i = 0; i < opts.n_utt; ++i) {
    SplitMix64 rng(derive_seed(opts.seed, "eval/pseudo/" + std::to_string(i)));
    fx.pseudo_index_per_source.push_back(
        rng.uniform_int(0, static_cast<int>(fx.pool.entries.size()) - 1));
  }
  return fx;
}

GuidanceSpec spec_for(const EvalPoint& point, const EvalFixtures& fx, int pseudo_index,
                      int n_infer_steps) {
  GuidanceSpec spec;
  spec.mode = point.mode;
  spec.w_pro = point.w_pro;
  spec.w_spk = point.w_spk;
  spec.plain_use_prosody = point.plain_use_prosody;
  spec.pitch_shift = point.pitch_shift;
  spec.n_infer_steps = n_infer_steps;
  switch (point.pseudo) {
    case EvalPoint::PseudoChoice::kNone:
      break;
    case EvalPoint::PseudoChoice::kFixed:
      spec.pseudo_speaker = point.fixed_pseudo;
      break;
    case EvalPoint::PseudoChoice::kPerUtterance:
      spec.pseudo_speaker = fx.pool.entries[static_cast<std::size_t>(pseudo_index)].embedding;
      break;
  }
  return spec;
}

std::string format_weight(double w) {
  std::ostringstream os;
  os << w;
  return os.str();
}

MetricsReport eval_point_with_fixtures(const DenoiserModel& model, const World& world,
                                       const NoiseSchedule& sched, const EvalPoint& point,
                                       const SweepOptions& opts, const EvalFixtures& fx,
                                       const std::string& pid) {
  const int n = static_cast<int>(fx.sources.size());
  std::vector<Tensor> anonymized(n);
  parallel_for(n, opts.threads, [&](int i) {
    const GuidanceSpec spec =
        spec_for(point, fx, fx.pseudo_index_per_source[static_cast<std::size_t>(i)],
                 opts.n_infer_steps);
    SplitMix64 rng(derive_seed(opts.seed, "anon/" + pid + "/" + std::to_string(i)));
    anonymized[static_cast<std::size_t>(i)] =
        anonymize(model, sched, spec, fx.sources[static_cast<std::size_t>(i)], rng);
  });

  // Semi-informed attacker: enrollment re-anonymized at the same operating
  // point with independent pseudo-speaker draws.
  const int ne = static_cast<int>(fx.enroll.size());
  std::vector<Tensor> enroll_anon(ne);
  parallel_for(ne, opts.threads, [&](int j) {
    int pseudo_index = 0;
    if (point.pseudo == EvalPoint::PseudoChoice::kPerUtterance) {
      SplitMix64 draw(derive_seed(opts.seed, "semi-pseudo/" + pid + "/" + std::to_string(j)));
      pseudo_index = draw.uniform_int(0, static_cast<int>(fx.pool.entries.size()) - 1);
    }
    const GuidanceSpec spec = spec_for(point, fx, pseudo_index, opts.n_infer_steps);
    SplitMix64 rng(derive_seed(opts.seed, "semi-anon/" + pid + "/" + std::to_string(j)));
    enroll_anon[static_cast<std::size_t>(j)] =
        anonymize(model, sched, spec, fx.enroll[static_cast<std::size_t>(j)], rng);
  });

  std::vector<EnrollEntry> lazy_enroll, semi_enroll;
  for (std::size_t j = 0; j < fx.enroll.size(); ++j) {
    lazy_enroll.push_back({fx.enroll_speakers[j], fx.enroll[j].x0});
    semi_enroll.push_back({fx.enroll_speakers[j], enroll_anon[j]});
  }

  MetricsReport r;
  r.mode = point.mode_csv;
  r.w_pro_csv = point.w_pro_csv;
  r.w_pro = point.w_pro;
  r.w_spk = point.w_spk;
  r.eer = compute_eer(speaker_attack(world, lazy_enroll, fx.source_speakers, anonymized,
                                     opts.max_trials, opts.seed));
  r.eer_semi = compute_eer(speaker_attack(world, semi_enroll, fx.source_speakers, anonymized,
                                          opts.max_trials, opts.seed));
  const ProsodyUtility pu = prosody_utility(fx.sources, anonymized, world);
  r.prosody_corr = pu.mean_spearman;
  r.skipped_prosody_pairs = pu.skipped;
  r.content_err = content_utility(fx.sources, anonymized, world);
  r.n_utterances = n;
  r.seed = opts.seed;
  return r;
}

}  // namespace

std::vector<MetricsReport> sweep_tradeoff(const DenoiserModel& model, const World& world,
                                          const NoiseSchedule& sched,
                                          const std::vector<double>& weights,
                                          const SweepOptions& opts) {
  const EvalFixtures fx = make_fixtures(world, opts);
  std::vector<MetricsReport> reports;

  for (double w : weights) {
    EvalPoint p;
    p.mode = GuidanceMode::kProsodyCfg;
    p.w_pro = w;
    p.pseudo = EvalPoint::PseudoChoice::kPerUtterance;
    p.mode_csv = "prosody_cfg";
    p.w_pro_csv = format_weight(w);
    reports.push_back(eval_point_with_fixtures(model, world, sched, p, opts, fx,
                                               "w" + format_weight(w)));
  }
  {
    EvalPoint p;
    p.mode = GuidanceMode::kPlain;
    p.pseudo = EvalPoint::PseudoChoice::kPerUtterance;
    p.mode_csv = "plain_psi";
    p.w_pro_csv = "null";
    reports.push_back(eval_point_with_fixtures(model, world, sched, p, opts, fx, "plain_psi"));
  }
  {
    EvalPoint p;
    p.mode = GuidanceMode::kPlain;
    p.pseudo = EvalPoint::PseudoChoice::kNone;
    p.mode_csv = "plain_null";
    p.w_pro_csv = "null";
    reports.push_back(eval_point_with_fixtures(model, world, sched, p, opts, fx, "plain_null"));
  }
  {
    EvalPoint p;
    p.mode = GuidanceMode::kSpeakerCfg;
    p.w_spk = 3.0;
    p.pseudo = EvalPoint::PseudoChoice::kPerUtterance;
    p.mode_csv = "speaker_cfg";
    p.w_pro_csv = "null";
    reports.push_back(eval_point_with_fixtures(model, world, sched, p, opts, fx, "speaker_cfg_w3"));
  }
  {
    EvalPoint p;
    p.mode = GuidanceMode::kProsodyCfg;
    p.w_pro = 1.0;
    p.pitch_shift = 1.0;
    p.pseudo = EvalPoint::PseudoChoice::kPerUtterance;
    p.mode_csv = "prosody_cfg_shift";
    p.w_pro_csv = "1";
    reports.push_back(eval_point_with_fixtures(model, world, sched, p, opts, fx, "shift_w1"));
  }
  return reports;
}

MetricsReport eval_operating_point(const DenoiserModel& model, const World& world,
                                   const NoiseSchedule& sched, const EvalPoint& point,
                                   const SweepOptions& opts) {
  const EvalFixtures fx = make_fixtures(world, opts);
  EvalPoint p = point;
  if (p.mode_csv.empty()) p.mode_csv = guidance_mode_name(p.mode);
  if (p.w_pro_csv.empty())
    p.w_pro_csv = (p.mode == GuidanceMode::kProsodyCfg ||
                   (p.mode == GuidanceMode::kPlain && p.plain_use_prosody))
                      ? format_weight(p.w_pro)
                      : "null";
  return eval_point_with_fixtures(model, world, sched, p, opts, fx, "point");
}

std::string metrics_csv_header() {
  return "w_pro,w_spk,mode,eer,eer_semi,prosody_corr,content_err,n_utt,seed";
}

std::string metrics_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os.precision(12);
  os << r.w_pro_csv << "," << r.w_spk << "," << r.mode << "," << r.eer << "," << r.eer_semi << ","
     << r.prosody_corr << "," << r.content_err << "," << r.n_utterances << "," << r.seed;
  return os.str();
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::json j = {
      {"mode", r.mode},
      {"w_pro", r.w_pro_csv},
      {"w_spk", r.w_spk},
      {"eer", r.eer},
      {"eer_semi", r.eer_semi},
      {"prosody_corr", r.prosody_corr},
      {"content_err", r.content_err},
      {"n_utterances", r.n_utterances},
      {"seed", r.seed},
      {"skipped_prosody_pairs", r.skipped_prosody_pairs},
  };
  return j.dump();
}

std::string tradeoff_csv(const std::vector<MetricsReport>& reports, std::size_t n_weight_rows) {
  std::ostringstream os;
  os.precision(12);
  os << "prosody_corr,eer\n";
  for (std::size_t i = 0; i < std::min(n_weight_rows, reports.size()); ++i)
    os << reports[i].prosody_corr << "," << reports[i].eer << "\n";
  return os.str();
}

}  // namespace diffanon
