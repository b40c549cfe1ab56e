#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "specseek/agent.hpp"
#include "specseek/env.hpp"
#include "specseek/nn.hpp"
#include "specseek/rng.hpp"

namespace specseek::harness {

struct EpisodeStats {
  double total_reward = 0.0;
  int length = 0;
  int detect_tp = 0;
  int detect_fp = 0;
  bool finish_correct = false;
  int final_depth = 0;
};

struct MetricsRow {
  int episode = 0;
  EpisodeStats ep;
  double mean_loss = 0.0;
  double mean_max_q = 0.0;
  double mean_min_q = 0.0;
  double epsilon = 0.0;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin_episode() {}
  virtual int act(const env::Observation& obs, Rng& rng) = 0;
};

class RandomPolicy final : public Policy {
 public:
  int act(const env::Observation&, Rng& rng) override {
    return static_cast<int>(rng.uniform_int(env::kNumActions));
  }
};

// Greedy (epsilon = 0) policy over a fixed parameter snapshot.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const nn::NetworkParams<float>& params)
      : params_(&params) {}
  int act(const env::Observation& obs, Rng& rng) override;

 private:
  const nn::NetworkParams<float>* params_;
  nn::ForwardCache<float> cache_;
};

// Expert scan heuristic: pans FreqDown to the band's left edge (watching for
// the signal on the way), then FreqUp across the band; a normalized spectrum
// bin above 2.0 triggers Detect, then Finish. Resets its scan state at each
// episode start.
class ScriptedPolicy final : public Policy {
 public:
  void begin_episode() override;
  int act(const env::Observation& obs, Rng& rng) override;

 private:
  bool detected_ = false;
  bool ascending_ = false;
  bool have_prev_ = false;
  float prev_fc_norm_ = 0.0f;
};

// Runs one reset-to-termination episode. If `trace` is given, emits one
// tab-separated line per step: step, action_code, fc_hz, bw_hz, event,
// reward, done.
EpisodeStats run_episode(const env::EnvConfig& cfg, Policy& policy, Rng& rng,
                         std::ostream* trace = nullptr);

struct TrainOptions {
  int64_t total_env_steps = 75'000;
  uint64_t seed = 1;
  std::string out_dir;
  int64_t checkpoint_every = 10'000;
};

struct TrainSummary {
  int64_t episodes = 0;
  int64_t env_steps = 0;
  double final100_mean_reward = 0.0;
  // Mean of the 100-episode moving average of total_reward over the first
  // and last deciles of training (full windows; raw decile means when the
  // run is shorter than 100 episodes).
  double first_decile_ma_reward = 0.0;
  double last_decile_ma_reward = 0.0;
  std::string checkpoint_path;
  std::string metrics_path;
};

// Interleaves epsilon-greedy env steps, replay pushes and train steps;
// writes metrics.csv (one row per completed episode), periodic checkpoints
// and final.ckpt under out_dir. Fully deterministic given the seed.
TrainSummary train(const env::EnvConfig& env_cfg,
                   const agent::AgentConfig& agent_cfg,
                   const nn::NetworkSpec& net_spec, const TrainOptions& opts);

struct EvalAggregate {
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double mean_length = 0.0;
  double detect_precision = 0.0;  // pooled tp / (tp + fp), 0 when undefined
  double finish_accuracy = 0.0;
  int episodes = 0;
};

// n_episodes greedy/scripted/random episodes on per-episode rng streams
// seeded with (seed + episode index).
EvalAggregate evaluate(const env::EnvConfig& cfg, Policy& policy,
                       int n_episodes, uint64_t seed);

// Loads a checkpoint, validates it against the env config and evaluates the
// greedy policy.
EvalAggregate evaluate_checkpoint(const std::string& checkpoint_path,
                                  const env::EnvConfig& cfg, int n_episodes,
                                  uint64_t seed);

// Shortest action sequence reaching FinishTrue under deterministic tuning
// dynamics (rewards ignored), by breadth-first search over
// (fc, bw, found-set) states. Actions are expanded in code order, so the
// returned plan is the lexicographically first among the shortest.
std::vector<env::Action> optimal_episode_actions(
    const env::EnvConfig& cfg, std::span<const double> signal_freqs);

int optimal_episode_length(const env::EnvConfig& cfg,
                           std::span<const double> signal_freqs);

inline constexpr const char* kMetricsHeader =
    "episode,steps,total_reward,detect_tp,detect_fp,finish_correct,"
    "mean_loss,mean_max_q,mean_min_q,epsilon";

void write_metrics_csv(std::span<const MetricsRow> rows,
                       const std::string& path);

// Formats a real with 6 significant digits, the CSV/trace convention.
std::string format_g6(double v);

}  // namespace specseek::harness
