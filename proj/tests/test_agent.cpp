#include <doctest.h>

#include <cmath>
#include <deque>
#include <vector>

#include "specseek/agent.hpp"
#include "specseek/errors.hpp"
#include "specseek/rng.hpp"

using namespace specseek;
using agent::Agent;
using agent::AgentConfig;
using agent::QMode;
using agent::ReplayBuffer;
using agent::Transition;
using env::Observation;

namespace {

Observation make_obs(int n_bins, float fill, float fc_norm, float bw_norm) {
  Observation o;
  o.spectrum.assign(n_bins, fill);
  o.fc_norm = fc_norm;
  o.bw_norm = bw_norm;
  return o;
}

Transition make_transition(int n_bins, int a, float r, bool done,
                           float tint = 0.0f) {
  Transition t;
  t.s = make_obs(n_bins, 0.8f + tint, 0.5f, 0.0f);
  t.a = a;
  t.r = r;
  t.s_next = make_obs(n_bins, -0.6f + tint, 0.4f, 0.0f);
  t.done = done;
  return t;
}

nn::NetworkSpec tiny_spec() {
  nn::NetworkSpec spec;
  spec.n_bins = 16;
  spec.spectrum_path = {{4, 4, 2, true}};
  spec.scalar_path = {{6, true}};
  spec.head = {{10, true}, {7, false}};
  return spec;
}

}  // namespace

TEST_CASE("select_action is greedy at epsilon zero with lowest-index ties") {
  Rng rng(1);
  const std::vector<float> spiked{0, 0, 0, 5, 0, 0, 0};
  CHECK(agent::select_action(spiked, 0.0, rng) == 3);
  const std::vector<float> flat(7, 0.25f);
  CHECK(agent::select_action(flat, 0.0, rng) == 0);
  const std::vector<float> pair{1, 3, 3, 1, 0, 0, 0};
  CHECK(agent::select_action(pair, 0.0, rng) == 1);
}

TEST_CASE("select_action at epsilon one is uniform over the 7 actions") {
  Rng rng(2);
  const std::vector<float> q{9, 0, 0, 0, 0, 0, 0};
  int counts[7] = {};
  const int n = 7000;
  for (int i = 0; i < n; ++i) counts[agent::select_action(q, 1.0, rng)] += 1;
  const double sigma = std::sqrt(n * (1.0 / 7) * (6.0 / 7));
  for (int c : counts) CHECK(std::abs(c - 1000) <= 3.0 * sigma);
}

TEST_CASE("epsilon-greedy mixes greedy and uniform at the documented rate") {
  Rng rng(3);
  const std::vector<float> q{0, 0, 9, 0, 0, 0, 0};
  const double eps = 0.1;
  const int n = 20000;
  int greedy = 0;
  for (int i = 0; i < n; ++i) {
    if (agent::select_action(q, eps, rng) == 2) greedy += 1;
  }
  const double p = 1 - eps + eps / 7;
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(greedy - n * p) <= 3.0 * sigma);
}

TEST_CASE("replay buffer evicts strictly oldest-first") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 4; ++i) {
    buf.push(make_transition(8, i, static_cast<float>(i), false));
  }
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).a == 1);
  CHECK(buf.at(1).a == 2);
  CHECK(buf.at(2).a == 3);

  ReplayBuffer one(10);
  one.push(make_transition(8, 0, 0.0f, false));
  CHECK(one.size() == 1);
}

TEST_CASE("replay buffer matches a reference deque under random traffic") {
  Rng rng(7);
  const size_t cap = 17;
  ReplayBuffer buf(cap);
  std::deque<int> reference;
  int next_tag = 0;
  for (int op = 0; op < 2000; ++op) {
    buf.push(make_transition(8, next_tag % 7, static_cast<float>(next_tag),
                             false));
    reference.push_back(next_tag);
    ++next_tag;
    if (reference.size() > cap) reference.pop_front();
    REQUIRE(buf.size() == reference.size());
    if (op % 37 == 0) {
      for (size_t i = 0; i < reference.size(); ++i) {
        CHECK(buf.at(i).r == static_cast<float>(reference[i]));
      }
    }
    // A sampled batch only ever contains retained transitions.
    if (buf.size() >= 5 && op % 11 == 0) {
      for (const Transition& t : agent::sample(buf, 5, rng)) {
        const int tag = static_cast<int>(t.r);
        CHECK(tag > next_tag - 1 - static_cast<int>(cap));
        CHECK(tag < next_tag);
      }
    }
  }
}

TEST_CASE("sampling the whole buffer yields a permutation") {
  Rng rng(9);
  ReplayBuffer buf(32);
  for (int i = 0; i < 32; ++i) {
    buf.push(make_transition(8, i % 7, static_cast<float>(i), false));
  }
  const std::vector<Transition> batch = agent::sample(buf, 32, rng);
  REQUIRE(batch.size() == 32);
  std::vector<int> seen(32, 0);
  for (const Transition& t : batch) seen[static_cast<int>(t.r)] += 1;
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("sampling an underfull buffer is an error") {
  Rng rng(9);
  ReplayBuffer buf(64);
  for (int i = 0; i < 31; ++i) {
    buf.push(make_transition(8, 0, 0.0f, false));
  }
  CHECK_THROWS_AS(agent::sample(buf, 32, rng), SizeError);
}

TEST_CASE("per-index inclusion frequency is uniform") {
  Rng rng(11);
  ReplayBuffer buf(100);
  for (int i = 0; i < 100; ++i) {
    buf.push(make_transition(8, i % 7, static_cast<float>(i), false));
  }
  const int trials = 10000, batch = 10;
  std::vector<int> hits(100, 0);
  for (int trial = 0; trial < trials; ++trial) {
    for (const Transition& t : agent::sample(buf, batch, rng)) {
      hits[static_cast<int>(t.r)] += 1;
    }
  }
  const double p = static_cast<double>(batch) / 100.0;
  const double sigma = std::sqrt(trials * p * (1 - p));
  for (int h : hits) CHECK(std::abs(h - trials * p) <= 3.0 * sigma);
}

TEST_CASE("td targets follow equations for single and double modes") {
  const std::vector<float> q_next{0.5f, 0.2f, 0.1f, 0.0f, 0.0f, 0.0f, 0.0f};
  CHECK(agent::td_target_single<float>(1.0f, false, 0.99f, q_next) ==
        doctest::Approx(1.495f));
  CHECK(agent::td_target_single<float>(-1.0f, true, 0.99f, q_next) == -1.0f);
  CHECK(agent::td_target_single<float>(0.7f, false, 0.0f, q_next) == 0.7f);

  const std::vector<float> online{0.2f, 0.7f};
  const std::vector<float> target{0.9f, 0.1f};
  CHECK(agent::td_target_double<float>(0.0f, false, 0.99f, online, target) ==
        doctest::Approx(0.099f));
  CHECK(agent::td_target_double<float>(2.0f, true, 0.99f, online, target) ==
        2.0f);
}

TEST_CASE("double targets equal single targets when the nets coincide") {
  Rng rng(13);
  const auto spec = tiny_spec();
  const auto net = nn::init_network<float>(spec, rng, false);
  std::vector<Transition> batch;
  Rng trng(14);
  for (int i = 0; i < 16; ++i) {
    Transition t = make_transition(16, i % 7, static_cast<float>(i % 3) - 1,
                                   i % 5 == 0,
                                   static_cast<float>(trng.gauss()) * 0.3f);
    batch.push_back(t);
  }
  const auto single = agent::compute_targets_single(batch, net, 0.99f);
  const auto dbl = agent::compute_targets_double(batch, net, net, 0.99f);
  REQUIRE(single.size() == dbl.size());
  for (size_t i = 0; i < single.size(); ++i) CHECK(single[i] == dbl[i]);
}

TEST_CASE("terminal targets ignore the networks and gamma") {
  Rng rng(15);
  const auto spec = tiny_spec();
  const auto net_a = nn::init_network<float>(spec, rng, false);
  const auto net_b = nn::init_network<float>(spec, rng, false);
  std::vector<Transition> batch{make_transition(16, 2, -3.5f, true)};
  for (float gamma : {0.0f, 0.5f, 0.99f}) {
    CHECK(agent::compute_targets_single(batch, net_a, gamma)[0] == -3.5f);
    CHECK(agent::compute_targets_single(batch, net_b, gamma)[0] == -3.5f);
    CHECK(agent::compute_targets_double(batch, net_a, net_b, gamma)[0] ==
          -3.5f);
  }
}

TEST_CASE("train_step is a no-op below the warmup size") {
  AgentConfig cfg;
  cfg.warmup = 50;
  cfg.batch_size = 4;
  Rng rng(17);
  Agent agent(tiny_spec(), cfg, rng);
  ReplayBuffer buf(100);
  for (int i = 0; i < 49; ++i) {
    buf.push(make_transition(16, i % 7, 1.0f, false));
  }
  const auto w_before = agent.online().w;
  CHECK_FALSE(agent.train_step(buf, rng).has_value());
  CHECK(agent.train_steps() == 0);
  CHECK(agent.online().w == w_before);
}

TEST_CASE("a batch already on target has zero loss and moves nothing") {
  // Zero-initialized head gives Q == 0 everywhere; terminal rewards of 0
  // give Y == 0, so the TD error vanishes identically.
  AgentConfig cfg;
  cfg.warmup = 8;
  cfg.batch_size = 8;
  Rng rng(19);
  Agent agent(tiny_spec(), cfg, rng);
  ReplayBuffer buf(100);
  for (int i = 0; i < 16; ++i) {
    buf.push(make_transition(16, i % 7, 0.0f, true));
  }
  const auto w_before = agent.online().w;
  const auto loss = agent.train_step(buf, rng);
  REQUIRE(loss.has_value());
  CHECK(*loss == 0.0f);
  CHECK(agent.online().w == w_before);
  CHECK(agent.train_steps() == 1);
}

TEST_CASE("train_step fits a degenerate regression problem") {
  AgentConfig cfg;
  cfg.warmup = 32;
  cfg.batch_size = 32;
  cfg.lr = 0.01;
  Rng rng(21);
  Agent agent(tiny_spec(), cfg, rng);
  ReplayBuffer buf(64);
  // One repeated terminal transition: the target is the constant reward 3.
  for (int i = 0; i < 32; ++i) {
    buf.push(make_transition(16, 4, 3.0f, true));
  }
  float initial = 0.0f;
  float final_mean = 0.0f;
  for (int step = 0; step < 200; ++step) {
    const auto loss = agent.train_step(buf, rng);
    REQUIRE(loss.has_value());
    if (step == 0) initial = *loss;
    if (step >= 180) final_mean += *loss / 20.0f;
  }
  CHECK(initial == doctest::Approx(9.0f));
  CHECK(final_mean < 1e-3f * initial);
}

TEST_CASE("double mode refreshes the target net on the sync schedule") {
  AgentConfig cfg;
  cfg.warmup = 4;
  cfg.batch_size = 4;
  cfg.mode = QMode::Double;
  cfg.target_sync_period = 5;
  Rng rng(23);
  Agent agent(tiny_spec(), cfg, rng);
  ReplayBuffer buf(100);
  Rng trng(24);
  for (int i = 0; i < 20; ++i) {
    buf.push(make_transition(16, i % 7, static_cast<float>(i % 3),
                             i % 4 == 0,
                             static_cast<float>(trng.gauss()) * 0.2f));
  }
  // Steps 1..4: the target still equals the initial online copy.
  const auto target_at_init = agent.target().w;
  for (int step = 1; step <= 4; ++step) {
    agent.train_step(buf, rng);
    CHECK(agent.target().w == target_at_init);
  }
  // Step 5 copies theta' <- theta before computing its targets.
  const auto online_before_step5 = agent.online().w;
  agent.train_step(buf, rng);
  CHECK(agent.target().w == online_before_step5);
  // Step 6 shares that same target.
  agent.train_step(buf, rng);
  CHECK(agent.target().w == online_before_step5);
}

TEST_CASE("gradients flow only through the taken action") {
  // Two nets identical except the head rows of non-taken actions: the
  // backward pass for action 2 must agree on every shared parameter.
  Rng rng(25);
  const auto spec = tiny_spec();
  auto net_a = nn::init_network<float>(spec, rng, false);
  auto net_b = net_a;
  const size_t head = net_b.layers.size() - 1;
  const int in = net_b.layers[head].in_channels;
  for (int o = 0; o < 7; ++o) {
    if (o == 2) continue;
    for (int i = 0; i < in; ++i) {
      net_b.w[head][o * in + i] *= 5.0f;
    }
    net_b.b[head][o] += 1.0f;
  }

  Rng in_rng(26);
  std::vector<float> spectrum(16), scalars(2);
  for (auto& v : spectrum) v = static_cast<float>(in_rng.gauss());
  for (auto& v : scalars) v = static_cast<float>(in_rng.gauss());

  nn::ForwardCache<float> ca, cb;
  nn::forward<float>(net_a, spectrum, scalars, ca);
  nn::forward<float>(net_b, spectrum, scalars, cb);
  std::vector<float> dq(7, 0.0f);
  dq[2] = 1.7f;
  auto ga = nn::make_gradients(net_a);
  auto gb = nn::make_gradients(net_b);
  nn::backward<float>(net_a, ca, dq, ga);
  nn::backward<float>(net_b, cb, dq, gb);

  for (size_t layer = 0; layer < ga.w.size(); ++layer) {
    if (layer == head) {
      // Non-taken rows carry no gradient in either net.
      for (int o = 0; o < 7; ++o) {
        for (int i = 0; i < in; ++i) {
          if (o != 2) {
            CHECK(ga.w[layer][o * in + i] == 0.0f);
            CHECK(gb.w[layer][o * in + i] == 0.0f);
          } else {
            CHECK(ga.w[layer][o * in + i] == gb.w[layer][o * in + i]);
          }
        }
      }
    } else {
      CHECK(ga.w[layer] == gb.w[layer]);
      CHECK(ga.b[layer] == gb.b[layer]);
    }
  }
}

TEST_CASE("agent config validation") {
  AgentConfig cfg;
  cfg.gamma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AgentConfig{};
  cfg.epsilon = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AgentConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(AgentConfig{}.validate());
}
