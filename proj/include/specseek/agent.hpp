#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "specseek/env.hpp"
#include "specseek/nn.hpp"
#include "specseek/rng.hpp"

namespace specseek::agent {

// One (S_t, A_t, R_{t+1}, S_{t+1}, done) record.
struct Transition {
  env::Observation s;
  int a = 0;
  float r = 0.0f;
  env::Observation s_next;
  bool done = false;
};

enum class QMode : int { Single = 0, Double = 1 };

struct AgentConfig {
  double gamma = 0.99;
  double epsilon = 0.1;  // constant; no decay schedule
  int batch_size = 32;
  QMode mode = QMode::Single;
  int target_sync_period = 1000;  // double mode only
  size_t warmup = 1000;           // minimum buffer size before training
  int train_every = 1;            // env steps per gradient step
  size_t replay_capacity = 1'000'000;
  double lr = 0.001;

  void validate() const;  // ConfigError
};

// Bounded FIFO ring; eviction is strictly oldest-first. Storage grows on
// demand up to the capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition t);
  size_t size() const { return ring_.size(); }
  size_t capacity() const { return capacity_; }
  // Logical index 0 is the oldest retained transition.
  const Transition& at(size_t idx) const;

 private:
  size_t capacity_;
  size_t head_ = 0;  // slot the next push overwrites once full
  std::vector<Transition> ring_;
};

// Epsilon-greedy over the 7 q-values: greedy (lowest-index tie-break) with
// probability 1-epsilon, uniform otherwise.
int select_action(std::span<const float> q, double epsilon, Rng& rng);

// Uniform sample without replacement; SizeError if the buffer is underfull.
std::vector<Transition> sample(const ReplayBuffer& buffer, size_t batch_size,
                               Rng& rng);

// Single-Q target: r + gamma * max_a q_next[a]; r alone when done.
template <typename T>
T td_target_single(T r, bool done, T gamma, std::span<const T> q_next) {
  if (done) return r;
  return r + gamma * q_next[nn::argmax(q_next)];
}

// Double-Q target: the online net picks the action, the target net scores it.
template <typename T>
T td_target_double(T r, bool done, T gamma, std::span<const T> q_next_online,
                   std::span<const T> q_next_target) {
  if (done) return r;
  return r + gamma * q_next_target[nn::argmax(q_next_online)];
}

std::vector<float> compute_targets_single(std::span<const Transition> batch,
                                          const nn::NetworkParams<float>& net,
                                          float gamma);

std::vector<float> compute_targets_double(
    std::span<const Transition> batch, const nn::NetworkParams<float>& online,
    const nn::NetworkParams<float>& target, float gamma);

// Owns the online network, the target copy, the Adam state and the train
// step counter.
class Agent {
 public:
  Agent(const nn::NetworkSpec& spec, const AgentConfig& cfg, Rng& init_rng);

  struct Decision {
    int action;
    float q_max;
    float q_min;
  };

  // Forward pass + epsilon-greedy selection.
  Decision act(const env::Observation& obs, double epsilon, Rng& rng);

  // One replayed gradient step: sample, targets per mode, MSE on the taken
  // actions, one Adam update. Returns the pre-update loss, or nullopt while
  // the buffer is below the warmup size. In double mode the target weights
  // are refreshed every target_sync_period train steps, before that step's
  // targets are computed.
  std::optional<float> train_step(const ReplayBuffer& buffer, Rng& rng);

  const nn::NetworkParams<float>& online() const { return online_; }
  const nn::NetworkParams<float>& target() const { return target_; }
  const nn::AdamState<float>& adam() const { return adam_; }
  const AgentConfig& config() const { return cfg_; }
  int64_t train_steps() const { return train_steps_; }

 private:
  AgentConfig cfg_;
  nn::NetworkParams<float> online_;
  nn::NetworkParams<float> target_;
  nn::AdamState<float> adam_;
  int64_t train_steps_ = 0;
  nn::ForwardCache<float> cache_;
  nn::ForwardCache<float> cache_aux_;
  nn::Gradients<float> grads_;
};

}  // namespace specseek::agent
