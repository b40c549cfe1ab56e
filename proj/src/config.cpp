#include "specseek/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "specseek/errors.hpp"

namespace specseek {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& origin, int line,
                       const std::string& msg) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_real(const std::string& origin, int line, const std::string& key,
                  const std::string& value) {
  char* end = nullptr;
  const double v = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || !std::isfinite(v)) {
    fail(origin, line, "key '" + key + "': unparsable real '" + value + "'");
  }
  return v;
}

long long parse_int(const std::string& origin, int line,
                    const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long v = std::strtoll(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0') {
    fail(origin, line, "key '" + key + "': unparsable integer '" + value + "'");
  }
  return v;
}

}  // namespace

nn::NetworkSpec RunConfig::network_spec() const {
  nn::NetworkSpec spec;
  spec.n_bins = env.n_bins;
  spec.spectrum_path = {{conv1_channels, conv1_width, conv1_stride, true},
                        {conv2_channels, conv2_width, conv2_stride, true}};
  spec.scalar_path = {{scalar_units, true}};
  spec.head = {{hidden_units, true}, {env::kNumActions, false}};
  return spec;
}

void RunConfig::validate() const {
  env.validate();
  agent.validate();
  network_spec().validate();
  if (total_env_steps < 0) {
    throw ConfigError("total_env_steps must be >= 0");
  }
}

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  RunConfig cfg;
  std::map<std::string, int> set_lines;

  // key -> handler(value, line)
  std::map<std::string, std::function<void(const std::string&, const std::string&, int)>>
      handlers;
  auto add_real = [&](const std::string& key, double& target) {
    handlers[key] = [&target, &origin](const std::string& k,
                                       const std::string& v, int line) {
      target = parse_real(origin, line, k, v);
    };
  };
  auto add_int = [&](const std::string& key, int& target) {
    handlers[key] = [&target, &origin](const std::string& k,
                                       const std::string& v, int line) {
      target = static_cast<int>(parse_int(origin, line, k, v));
    };
  };

  add_real("fc_min", cfg.env.fc_min);
  add_real("fc_max", cfg.env.fc_max);
  add_real("bw_max", cfg.env.bw_max);
  add_real("bw_min", cfg.env.bw_min);
  add_int("n_bins", cfg.env.n_bins);
  add_real("snr_db", cfg.env.snr_db);
  add_int("n_signals", cfg.env.n_signals);
  add_int("max_steps", cfg.env.max_steps);
  add_real("step_penalty", cfg.env.step_penalty);
  handlers["scheme"] = [&](const std::string& k, const std::string& v,
                           int line) {
    if (v == "A") cfg.env.scheme = env::Scheme::A;
    else if (v == "B") cfg.env.scheme = env::Scheme::B;
    else if (v == "C") cfg.env.scheme = env::Scheme::C;
    else fail(origin, line, "key '" + k + "': expected A, B or C, got '" + v + "'");
  };

  add_real("gamma", cfg.agent.gamma);
  add_real("epsilon", cfg.agent.epsilon);
  add_int("batch_size", cfg.agent.batch_size);
  handlers["mode"] = [&](const std::string& k, const std::string& v,
                         int line) {
    if (v == "single") cfg.agent.mode = agent::QMode::Single;
    else if (v == "double") cfg.agent.mode = agent::QMode::Double;
    else fail(origin, line, "key '" + k + "': expected single or double, got '" + v + "'");
  };
  add_int("target_sync_period", cfg.agent.target_sync_period);
  handlers["warmup"] = [&](const std::string& k, const std::string& v,
                           int line) {
    const long long n = parse_int(origin, line, k, v);
    if (n < 0) fail(origin, line, "key '" + k + "': must be >= 0");
    cfg.agent.warmup = static_cast<size_t>(n);
  };
  add_int("train_every", cfg.agent.train_every);
  handlers["replay_capacity"] = [&](const std::string& k, const std::string& v,
                                    int line) {
    const long long n = parse_int(origin, line, k, v);
    if (n < 1) fail(origin, line, "key '" + k + "': must be >= 1");
    cfg.agent.replay_capacity = static_cast<size_t>(n);
  };
  add_real("lr", cfg.agent.lr);

  add_int("conv1_channels", cfg.conv1_channels);
  add_int("conv1_width", cfg.conv1_width);
  add_int("conv1_stride", cfg.conv1_stride);
  add_int("conv2_channels", cfg.conv2_channels);
  add_int("conv2_width", cfg.conv2_width);
  add_int("conv2_stride", cfg.conv2_stride);
  add_int("scalar_units", cfg.scalar_units);
  add_int("hidden_units", cfg.hidden_units);

  handlers["total_env_steps"] = [&](const std::string& k, const std::string& v,
                                    int line) {
    cfg.total_env_steps = parse_int(origin, line, k, v);
  };
  handlers["seed"] = [&](const std::string& k, const std::string& v,
                         int line) {
    const long long n = parse_int(origin, line, k, v);
    if (n < 0) fail(origin, line, "key '" + k + "': must be >= 0");
    cfg.seed = static_cast<uint64_t>(n);
  };
  handlers["out_dir"] = [&](const std::string&, const std::string& v, int) {
    cfg.out_dir = v;
  };

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      fail(origin, line_no, "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(origin, line_no, "empty key");
    const auto it = handlers.find(key);
    if (it == handlers.end()) {
      fail(origin, line_no, "unknown key '" + key + "'");
    }
    it->second(key, value, line_no);
    set_lines[key] = line_no;
  }

  // Canonicalize bw_min onto the exact halving ladder so tuner arithmetic
  // stays exact, then validate everything, attributing failures to the key.
  try {
    cfg.env.validate();
    const int k = cfg.env.depth_max();
    cfg.env.bw_min = cfg.env.bw_max / std::exp2(k);
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    // Attribute the failure to the earliest-mentioned key that was set.
    size_t best_pos = std::string::npos;
    int best_line = 0;
    for (const auto& [key, line] : set_lines) {
      const size_t pos = msg.find(key);
      if (pos < best_pos) {
        best_pos = pos;
        best_line = line;
      }
    }
    if (best_pos != std::string::npos) fail(origin, best_line, msg);
    throw ConfigError(origin + ": " + msg);
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + std::string(e.what()));
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

}  // namespace specseek
