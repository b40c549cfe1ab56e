#pragma once

#include <cstdint>
#include <string>

#include "specseek/agent.hpp"
#include "specseek/env.hpp"
#include "specseek/nn.hpp"

namespace specseek {

// Union of environment, agent and network settings plus run parameters.
// Defaults match the documented experiment values (gamma 0.99, epsilon 0.1,
// lr 0.001, replay capacity 1,000,000).
struct RunConfig {
  env::EnvConfig env;
  agent::AgentConfig agent;

  int conv1_channels = 16, conv1_width = 8, conv1_stride = 2;
  int conv2_channels = 16, conv2_width = 4, conv2_stride = 2;
  int scalar_units = 32;
  int hidden_units = 64;

  int64_t total_env_steps = 75'000;
  uint64_t seed = 1;
  std::string out_dir = "out";

  nn::NetworkSpec network_spec() const;
  void validate() const;
};

// Line-oriented "key = value" format; '#' starts a comment; whitespace is
// insignificant; unknown keys are rejected. Errors name the key and line.
RunConfig parse_config_text(const std::string& text,
                            const std::string& origin);
RunConfig parse_config(const std::string& path);

}  // namespace specseek
