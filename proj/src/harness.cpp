#include "specseek/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <unordered_map>

#include "specseek/errors.hpp"

namespace specseek::harness {

namespace {

std::string format_int(long long v) { return std::to_string(v); }

void trace_step(std::ostream& out, int step, int action_code,
                const env::RadioState& s, const env::StepResult& res) {
  char fc_buf[32], bw_buf[32];
  std::snprintf(fc_buf, sizeof(fc_buf), "%.10g", s.fc);
  std::snprintf(bw_buf, sizeof(bw_buf), "%.10g", s.bw);
  out << step << '\t' << action_code << '\t' << fc_buf << '\t' << bw_buf
      << '\t' << env::name(res.event) << '\t' << format_g6(res.reward) << '\t'
      << (res.done ? 1 : 0) << '\n';
}

}  // namespace

std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

int GreedyPolicy::act(const env::Observation& obs, Rng& rng) {
  const std::vector<float> scalars{obs.fc_norm, obs.bw_norm};
  nn::forward<float>(*params_, obs.spectrum, scalars, cache_);
  return agent::select_action(cache_.q(), 0.0, rng);
}

void ScriptedPolicy::begin_episode() {
  detected_ = false;
  ascending_ = false;
  have_prev_ = false;
  prev_fc_norm_ = 0.0f;
}

int ScriptedPolicy::act(const env::Observation& obs, Rng&) {
  if (detected_) return static_cast<int>(env::Action::Finish);
  const float peak =
      *std::max_element(obs.spectrum.begin(), obs.spectrum.end());
  if (peak > 2.0f) {
    detected_ = true;
    return static_cast<int>(env::Action::Detect);
  }
  if (!ascending_) {
    // The left clamp is reached when FreqDown stops moving the tuner.
    if (have_prev_ && obs.fc_norm == prev_fc_norm_) {
      ascending_ = true;
    } else {
      have_prev_ = true;
      prev_fc_norm_ = obs.fc_norm;
      return static_cast<int>(env::Action::FreqDown);
    }
  }
  return static_cast<int>(env::Action::FreqUp);
}

EpisodeStats run_episode(const env::EnvConfig& cfg, Policy& policy, Rng& rng,
                         std::ostream* trace) {
  auto [state, obs] = env::reset(cfg, rng);
  policy.begin_episode();
  EpisodeStats stats;
  env::Event last_event = env::Event::Move;
  while (!state.done) {
    const int a = policy.act(obs, rng);
    auto [next, res] = env::step(state, env::action_from_code(a), cfg, rng);
    stats.total_reward += res.reward;
    if (res.event == env::Event::DetectTrue) stats.detect_tp += 1;
    if (res.event == env::Event::DetectFalse) stats.detect_fp += 1;
    last_event = res.event;
    state = std::move(next);
    if (trace != nullptr) {
      trace_step(*trace, state.steps, a, state, res);
    }
    obs = std::move(res.obs);
  }
  stats.length = state.steps;
  stats.finish_correct = (last_event == env::Event::FinishTrue);
  stats.final_depth = env::zoom_depth(state.bw, cfg);
  return stats;
}

namespace {

// State key for the tuner search lattice. All reachable fc/bw values are
// integral in Hz for sane configs, so rounding is exact.
struct SearchKey {
  long long fc;
  long long bw;
  uint64_t mask;
  bool operator==(const SearchKey& o) const {
    return fc == o.fc && bw == o.bw && mask == o.mask;
  }
};

struct SearchKeyHash {
  size_t operator()(const SearchKey& k) const {
    size_t h = std::hash<long long>()(k.fc);
    h ^= std::hash<long long>()(k.bw) + 0x9e3779b9u + (h << 6) + (h >> 2);
    h ^= std::hash<uint64_t>()(k.mask) + 0x9e3779b9u + (h << 6) + (h >> 2);
    return h;
  }
};

struct SearchNode {
  double fc;
  double bw;
  uint64_t mask;
  int parent;
  env::Action action;
};

env::RadioState make_search_state(double fc, double bw, uint64_t mask,
                                  std::span<const double> signals) {
  env::RadioState s;
  s.fc = fc;
  s.bw = bw;
  s.signals.assign(signals.begin(), signals.end());
  s.found.resize(signals.size());
  s.detect_depths.assign(signals.size(), -1);
  for (size_t i = 0; i < signals.size(); ++i) {
    s.found[i] = (mask >> i) & 1u;
  }
  return s;
}

uint64_t mask_of(const env::RadioState& s) {
  uint64_t m = 0;
  for (size_t i = 0; i < s.found.size(); ++i) {
    if (s.found[i]) m |= (1ull << i);
  }
  return m;
}

}  // namespace

std::vector<env::Action> optimal_episode_actions(
    const env::EnvConfig& cfg, std::span<const double> signal_freqs) {
  cfg.validate();
  if (signal_freqs.empty() || signal_freqs.size() > 63) {
    throw ConfigError("optimal_episode_actions: 1..63 signals supported");
  }

  std::vector<SearchNode> nodes;
  std::unordered_map<SearchKey, int, SearchKeyHash> visited;
  auto key_of = [](double fc, double bw, uint64_t mask) {
    return SearchKey{std::llround(fc), std::llround(bw), mask};
  };

  const double fc0 = (cfg.fc_min + cfg.fc_max) / 2.0;
  nodes.push_back({fc0, cfg.bw_max, 0, -1, env::Action::Finish});
  visited.emplace(key_of(fc0, cfg.bw_max, 0), 0);

  std::deque<int> frontier{0};
  int goal = -1;
  while (!frontier.empty() && goal < 0) {
    const int cur = frontier.front();
    frontier.pop_front();
    for (int code = 0; code < env::kNumActions && goal < 0; ++code) {
      const env::Action a = static_cast<env::Action>(code);
      const SearchNode n = nodes[cur];
      env::RadioState before =
          make_search_state(n.fc, n.bw, n.mask, signal_freqs);
      env::RadioState after = env::apply_action(before, a, cfg);
      const env::Event ev = env::classify_event(before, a, after, cfg);
      if (a == env::Action::Finish) {
        if (ev == env::Event::FinishTrue) {
          nodes.push_back({after.fc, after.bw, n.mask, cur, a});
          goal = static_cast<int>(nodes.size()) - 1;
        }
        continue;  // FinishFalse ends the episode without success
      }
      const uint64_t mask = mask_of(after);
      const SearchKey k = key_of(after.fc, after.bw, mask);
      if (visited.contains(k)) continue;
      nodes.push_back({after.fc, after.bw, mask, cur, a});
      const int id = static_cast<int>(nodes.size()) - 1;
      visited.emplace(k, id);
      frontier.push_back(id);
    }
  }
  if (goal < 0) {
    throw UsageError("optimal_episode_actions: no finishing sequence exists");
  }
  std::vector<env::Action> plan;
  for (int id = goal; nodes[id].parent >= 0; id = nodes[id].parent) {
    plan.push_back(nodes[id].action);
  }
  std::reverse(plan.begin(), plan.end());
  return plan;
}

int optimal_episode_length(const env::EnvConfig& cfg,
                           std::span<const double> signal_freqs) {
  return static_cast<int>(optimal_episode_actions(cfg, signal_freqs).size());
}

namespace {

void write_metrics_row(std::ostream& f, const MetricsRow& r) {
  f << format_int(r.episode) << ',' << format_int(r.ep.length) << ','
    << format_g6(r.ep.total_reward) << ',' << format_int(r.ep.detect_tp)
    << ',' << format_int(r.ep.detect_fp) << ','
    << (r.ep.finish_correct ? 1 : 0) << ',' << format_g6(r.mean_loss) << ','
    << format_g6(r.mean_max_q) << ',' << format_g6(r.mean_min_q) << ','
    << format_g6(r.epsilon) << '\n';
}

}  // namespace

void write_metrics_csv(std::span<const MetricsRow> rows,
                       const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) write_metrics_row(f, r);
  f.flush();
  if (!f) throw IoError("write failed: " + path);
}

namespace {

std::string checkpoint_name(int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%08lld.ckpt",
                static_cast<long long>(step));
  return buf;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TrainSummary train(const env::EnvConfig& env_cfg,
                   const agent::AgentConfig& agent_cfg,
                   const nn::NetworkSpec& net_spec, const TrainOptions& opts) {
  env_cfg.validate();
  agent_cfg.validate();
  net_spec.validate();

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);

  Rng master(opts.seed);
  Rng rng_init = master.spawn(1);
  Rng rng_env = master.spawn(2);
  Rng rng_agent = master.spawn(3);

  agent::Agent agent(net_spec, agent_cfg, rng_init);
  agent::ReplayBuffer buffer(agent_cfg.replay_capacity);

  const std::string metrics_path =
      (fs::path(opts.out_dir) / "metrics.csv").string();
  const std::string final_path =
      (fs::path(opts.out_dir) / "final.ckpt").string();

  // Opened before any training so an unwritable out_dir fails immediately;
  // rows stream out as episodes complete.
  std::ofstream metrics(metrics_path, std::ios::binary | std::ios::trunc);
  if (!metrics) throw IoError("cannot open for writing: " + metrics_path);
  metrics << kMetricsHeader << '\n';

  int64_t episodes = 0;
  std::vector<double> episode_rewards;

  auto [state, obs] = env::reset(env_cfg, rng_env);
  EpisodeStats ep;
  env::Event last_event = env::Event::Move;
  double loss_sum = 0.0;
  int64_t loss_count = 0;
  double qmax_sum = 0.0, qmin_sum = 0.0;
  int64_t decision_count = 0;

  for (int64_t t = 1; t <= opts.total_env_steps; ++t) {
    const agent::Agent::Decision d =
        agent.act(obs, agent_cfg.epsilon, rng_agent);
    qmax_sum += d.q_max;
    qmin_sum += d.q_min;
    decision_count += 1;

    auto [next, res] =
        env::step(state, env::action_from_code(d.action), env_cfg, rng_env);
    buffer.push({std::move(obs), d.action, static_cast<float>(res.reward),
                 res.obs, res.done});
    obs = std::move(res.obs);
    state = std::move(next);

    ep.total_reward += res.reward;
    if (res.event == env::Event::DetectTrue) ep.detect_tp += 1;
    if (res.event == env::Event::DetectFalse) ep.detect_fp += 1;
    last_event = res.event;

    if (t % agent_cfg.train_every == 0) {
      if (const auto loss = agent.train_step(buffer, rng_agent)) {
        loss_sum += *loss;
        loss_count += 1;
      }
    }

    if (res.done) {
      ep.length = state.steps;
      ep.finish_correct = (last_event == env::Event::FinishTrue);
      ep.final_depth = env::zoom_depth(state.bw, env_cfg);
      MetricsRow row;
      row.episode = static_cast<int>(++episodes);
      row.ep = ep;
      row.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
      row.mean_max_q =
          decision_count > 0 ? qmax_sum / decision_count : 0.0;
      row.mean_min_q =
          decision_count > 0 ? qmin_sum / decision_count : 0.0;
      row.epsilon = agent_cfg.epsilon;
      write_metrics_row(metrics, row);
      episode_rewards.push_back(ep.total_reward);

      std::tie(state, obs) = env::reset(env_cfg, rng_env);
      ep = EpisodeStats{};
      last_event = env::Event::Move;
      loss_sum = 0.0;
      loss_count = 0;
      qmax_sum = qmin_sum = 0.0;
      decision_count = 0;
    }

    if (opts.checkpoint_every > 0 && t % opts.checkpoint_every == 0) {
      const std::string path =
          (fs::path(opts.out_dir) / checkpoint_name(t)).string();
      nn::save_checkpoint(agent.online(), &agent.adam(), path);
    }
  }

  nn::save_checkpoint(agent.online(), &agent.adam(), final_path);
  metrics.flush();
  if (!metrics) throw IoError("write failed: " + metrics_path);

  TrainSummary summary;
  summary.episodes = episodes;
  summary.env_steps = opts.total_env_steps;
  summary.checkpoint_path = final_path;
  summary.metrics_path = metrics_path;
  const size_t n = episode_rewards.size();
  if (n > 0) {
    const size_t tail = std::min<size_t>(n, 100);
    summary.final100_mean_reward = mean_of(
        std::span(episode_rewards).subspan(n - tail, tail));
    const size_t decile = std::max<size_t>(1, n / 10);
    if (n >= 100) {
      // 100-episode moving average, full windows: ma[k] covers episodes
      // k-99..k (1-based k >= 100). Average its values over the first and
      // last deciles of the episode axis.
      std::vector<double> ma;
      ma.reserve(n - 99);
      double window = 0.0;
      for (size_t i = 0; i < 100; ++i) window += episode_rewards[i];
      ma.push_back(window / 100.0);
      for (size_t i = 100; i < n; ++i) {
        window += episode_rewards[i] - episode_rewards[i - 100];
        ma.push_back(window / 100.0);
      }
      double first_sum = 0.0;
      size_t first_count = 0;
      double last_sum = 0.0;
      size_t last_count = 0;
      for (size_t k = 0; k < ma.size(); ++k) {
        const size_t episode = k + 100;  // 1-based episode the window ends on
        if (episode <= decile) {
          first_sum += ma[k];
          first_count += 1;
        }
        if (episode > n - decile) {
          last_sum += ma[k];
          last_count += 1;
        }
      }
      // A decile shorter than the window leaves no full window inside the
      // first decile; fall back to the earliest window.
      summary.first_decile_ma_reward =
          first_count > 0 ? first_sum / first_count : ma.front();
      summary.last_decile_ma_reward =
          last_count > 0 ? last_sum / last_count : ma.back();
    } else {
      summary.first_decile_ma_reward =
          mean_of(std::span(episode_rewards).subspan(0, decile));
      summary.last_decile_ma_reward =
          mean_of(std::span(episode_rewards).subspan(n - decile, decile));
    }
  }
  return summary;
}

EvalAggregate evaluate(const env::EnvConfig& cfg, Policy& policy,
                       int n_episodes, uint64_t seed) {
  cfg.validate();
  if (n_episodes < 1) {
    throw ConfigError("evaluate: n_episodes must be >= 1");
  }
  std::vector<double> rewards(n_episodes);
  long long tp = 0, fp = 0, finishes = 0;
  double length_sum = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    Rng rng(seed + static_cast<uint64_t>(i));
    const EpisodeStats s = run_episode(cfg, policy, rng);
    rewards[i] = s.total_reward;
    tp += s.detect_tp;
    fp += s.detect_fp;
    finishes += s.finish_correct ? 1 : 0;
    length_sum += s.length;
  }
  EvalAggregate agg;
  agg.episodes = n_episodes;
  agg.mean_reward = mean_of(rewards);
  double var = 0.0;
  for (double r : rewards) {
    var += (r - agg.mean_reward) * (r - agg.mean_reward);
  }
  agg.std_reward = std::sqrt(var / n_episodes);
  agg.mean_length = length_sum / n_episodes;
  agg.detect_precision =
      (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                    : 0.0;
  agg.finish_accuracy = static_cast<double>(finishes) / n_episodes;
  return agg;
}

EvalAggregate evaluate_checkpoint(const std::string& checkpoint_path,
                                  const env::EnvConfig& cfg, int n_episodes,
                                  uint64_t seed) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint_path);
  if (ckpt.params.spec.n_bins != cfg.n_bins) {
    throw ConfigError(
        "checkpoint/env mismatch: network expects n_bins=" +
        std::to_string(ckpt.params.spec.n_bins) + ", env provides " +
        std::to_string(cfg.n_bins));
  }
  GreedyPolicy policy(ckpt.params);
  return evaluate(cfg, policy, n_episodes, seed);
}

}  // namespace specseek::harness
