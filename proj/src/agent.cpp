#include "specseek/agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "specseek/errors.hpp"

namespace specseek::agent {

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw ConfigError("AgentConfig: gamma must be in [0, 1)");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ConfigError("AgentConfig: epsilon must be in [0, 1]");
  }
  if (batch_size < 1) {
    throw ConfigError("AgentConfig: batch_size must be >= 1");
  }
  if (target_sync_period < 1) {
    throw ConfigError("AgentConfig: target_sync_period must be >= 1");
  }
  if (train_every < 1) {
    throw ConfigError("AgentConfig: train_every must be >= 1");
  }
  if (replay_capacity < 1) {
    throw ConfigError("AgentConfig: replay_capacity must be >= 1");
  }
  if (!(lr > 0.0)) {
    throw ConfigError("AgentConfig: lr must be > 0");
  }
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
    return;
  }
  // Full: overwrite the oldest slot.
  ring_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(size_t idx) const {
  if (idx >= ring_.size()) {
    throw UsageError("ReplayBuffer::at: index out of range");
  }
  return ring_[(head_ + idx) % ring_.size()];
}

int select_action(std::span<const float> q, double epsilon, Rng& rng) {
  if (rng.uniform() < epsilon) {
    return static_cast<int>(rng.uniform_int(q.size()));
  }
  return nn::argmax(q);
}

std::vector<Transition> sample(const ReplayBuffer& buffer, size_t batch_size,
                               Rng& rng) {
  const size_t n = buffer.size();
  if (n < batch_size) {
    throw SizeError("sample: buffer holds " + std::to_string(n) +
                    " transitions, need " + std::to_string(batch_size));
  }
  std::vector<Transition> out;
  out.reserve(batch_size);
  if (batch_size * 2 >= n) {
    // Dense draw: partial Fisher-Yates over all indices.
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < batch_size; ++i) {
      const size_t j = i + rng.uniform_int(n - i);
      std::swap(idx[i], idx[j]);
      out.push_back(buffer.at(idx[i]));
    }
  } else {
    std::unordered_set<size_t> seen;
    while (out.size() < batch_size) {
      const size_t i = rng.uniform_int(n);
      if (seen.insert(i).second) out.push_back(buffer.at(i));
    }
  }
  return out;
}

namespace {

void check_finite(std::span<const float> q) {
  for (float v : q) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite Q value in target computation");
    }
  }
}

}  // namespace

std::vector<float> compute_targets_single(std::span<const Transition> batch,
                                          const nn::NetworkParams<float>& net,
                                          float gamma) {
  if (batch.empty()) throw UsageError("compute_targets_single: empty batch");
  std::vector<float> y(batch.size());
  nn::ForwardCache<float> cache;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    if (t.done) {
      y[i] = t.r;
      continue;
    }
    nn::forward<float>(net, t.s_next.spectrum,
                       std::vector<float>{t.s_next.fc_norm, t.s_next.bw_norm},
                       cache);
    check_finite(cache.q());
    y[i] = td_target_single<float>(t.r, false, gamma, cache.q());
  }
  return y;
}

std::vector<float> compute_targets_double(
    std::span<const Transition> batch, const nn::NetworkParams<float>& online,
    const nn::NetworkParams<float>& target, float gamma) {
  if (batch.empty()) throw UsageError("compute_targets_double: empty batch");
  if (online.layers.size() != target.layers.size()) {
    throw ConfigError("compute_targets_double: online/target spec mismatch");
  }
  for (size_t i = 0; i < online.layers.size(); ++i) {
    if (online.w[i].size() != target.w[i].size() ||
        online.b[i].size() != target.b[i].size()) {
      throw ConfigError("compute_targets_double: online/target spec mismatch");
    }
  }
  std::vector<float> y(batch.size());
  nn::ForwardCache<float> cache_online, cache_target;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    if (t.done) {
      y[i] = t.r;
      continue;
    }
    const std::vector<float> scalars{t.s_next.fc_norm, t.s_next.bw_norm};
    nn::forward<float>(online, t.s_next.spectrum, scalars, cache_online);
    nn::forward<float>(target, t.s_next.spectrum, scalars, cache_target);
    check_finite(cache_online.q());
    check_finite(cache_target.q());
    y[i] = td_target_double<float>(t.r, false, gamma, cache_online.q(),
                                   cache_target.q());
  }
  return y;
}

Agent::Agent(const nn::NetworkSpec& spec, const AgentConfig& cfg, Rng& init_rng)
    : cfg_(cfg) {
  cfg_.validate();
  spec.validate();
  online_ = nn::init_network<float>(spec, init_rng);
  target_ = online_;
  adam_ = nn::make_adam<float>(online_, static_cast<float>(cfg_.lr));
  grads_ = nn::make_gradients(online_);
}

Agent::Decision Agent::act(const env::Observation& obs, double epsilon,
                           Rng& rng) {
  const std::vector<float> scalars{obs.fc_norm, obs.bw_norm};
  nn::forward<float>(online_, obs.spectrum, scalars, cache_);
  const std::vector<float>& q = cache_.q();
  Decision d;
  d.action = select_action(q, epsilon, rng);
  d.q_max = *std::max_element(q.begin(), q.end());
  d.q_min = *std::min_element(q.begin(), q.end());
  return d;
}

std::optional<float> Agent::train_step(const ReplayBuffer& buffer, Rng& rng) {
  if (buffer.size() < cfg_.warmup ||
      buffer.size() < static_cast<size_t>(cfg_.batch_size)) {
    return std::nullopt;
  }

  train_steps_ += 1;
  if (cfg_.mode == QMode::Double &&
      train_steps_ % cfg_.target_sync_period == 0) {
    target_ = online_;
  }

  const std::vector<Transition> batch =
      sample(buffer, static_cast<size_t>(cfg_.batch_size), rng);
  const float gamma = static_cast<float>(cfg_.gamma);
  const std::vector<float> targets =
      cfg_.mode == QMode::Single
          ? compute_targets_single(batch, online_, gamma)
          : compute_targets_double(batch, online_, target_, gamma);

  grads_.zero();
  std::vector<float> dq(static_cast<size_t>(online_.spec.n_actions), 0.0f);
  const float inv_b = 1.0f / static_cast<float>(batch.size());
  float loss = 0.0f;
  for (size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    nn::forward<float>(online_, t.s.spectrum,
                       std::vector<float>{t.s.fc_norm, t.s.bw_norm}, cache_);
    const float err = cache_.q()[t.a] - targets[i];
    loss += err * err;
    // d/dq_a of mean squared error; other outputs carry no gradient.
    dq[t.a] = 2.0f * err * inv_b;
    nn::backward<float>(online_, cache_, dq, grads_);
    dq[t.a] = 0.0f;
  }
  loss *= inv_b;

  nn::adam_step(online_, grads_, adam_);
  return loss;
}

}  // namespace specseek::agent
