#include "specseek/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specseek/dsp.hpp"
#include "specseek/errors.hpp"

namespace specseek::env {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

double clamp_fc(double fc, double bw, const EnvConfig& cfg) {
  return std::clamp(fc, cfg.fc_min + bw / 2.0, cfg.fc_max - bw / 2.0);
}

bool in_window(double freq, double fc, double bw) {
  return freq >= fc - bw / 2.0 && freq <= fc + bw / 2.0;
}

// Lowest-index unfound signal inside the window, or -1.
int find_unfound(const RadioState& s, double fc, double bw) {
  for (size_t i = 0; i < s.signals.size(); ++i) {
    if (!s.found[i] && in_window(s.signals[i], fc, bw)) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

bool all_found(const RadioState& s) {
  return std::all_of(s.found.begin(), s.found.end(),
                     [](uint8_t f) { return f != 0; });
}

}  // namespace

const char* name(Action a) {
  switch (a) {
    case Action::FreqDown: return "FreqDown";
    case Action::FreqUp: return "FreqUp";
    case Action::BwDownLeft: return "BwDownLeft";
    case Action::BwDownRight: return "BwDownRight";
    case Action::BwMax: return "BwMax";
    case Action::Detect: return "Detect";
    case Action::Finish: return "Finish";
  }
  return "?";
}

Action action_from_code(int code) {
  if (code < 0 || code >= kNumActions) {
    throw UsageError("action code out of range: " + std::to_string(code));
  }
  return static_cast<Action>(code);
}

const char* name(Event e) {
  switch (e) {
    case Event::DetectTrue: return "DetectTrue";
    case Event::DetectFalse: return "DetectFalse";
    case Event::BwTrue: return "BwTrue";
    case Event::BwFalse: return "BwFalse";
    case Event::FinishTrue: return "FinishTrue";
    case Event::FinishFalse: return "FinishFalse";
    case Event::Move: return "Move";
  }
  return "?";
}

void EnvConfig::validate() const {
  if (!(fc_min > 0.0)) {
    throw ConfigError("EnvConfig: fc_min must be > 0");
  }
  if (!(fc_min < fc_max)) {
    throw ConfigError("EnvConfig: fc_min must be < fc_max");
  }
  if (!(bw_min > 0.0) || !(bw_min <= bw_max)) {
    throw ConfigError("EnvConfig: bw_min must satisfy 0 < bw_min <= bw_max");
  }
  const double ratio = bw_max / bw_min;
  const double k = std::round(std::log2(ratio));
  if (k < 0.0 || std::abs(ratio - std::exp2(k)) > 1e-9 * ratio) {
    throw ConfigError("EnvConfig: bw_max/bw_min must be a power of two");
  }
  if (!(fc_max - fc_min >= bw_max)) {
    throw ConfigError("EnvConfig: band span fc_max - fc_min must be >= bw_max");
  }
  if (n_bins < 8 || !is_pow2(n_bins)) {
    throw ConfigError("EnvConfig: n_bins must be a power of two >= 8");
  }
  if (n_signals < 1) {
    throw ConfigError("EnvConfig: n_signals must be >= 1");
  }
  if (max_steps < 1) {
    throw ConfigError("EnvConfig: max_steps must be >= 1");
  }
}

double EnvConfig::noise_sigma() const {
  return std::pow(10.0, -snr_db / 20.0);
}

int EnvConfig::depth_max() const {
  return static_cast<int>(std::lround(std::log2(bw_max / bw_min)));
}

int zoom_depth(double bw, const EnvConfig& cfg) {
  return static_cast<int>(std::lround(std::log2(cfg.bw_max / bw)));
}

Observation make_observation(const RadioState& state, const EnvConfig& cfg,
                             Rng& rng) {
  dsp::WindowSpec window{state.fc, state.bw, cfg.n_bins};
  std::vector<dsp::ToneSpec> tones;
  tones.reserve(state.signals.size());
  for (double f : state.signals) tones.push_back({f, 1.0});
  const dsp::ComplexVec x =
      dsp::synth_baseband(window, tones, {cfg.noise_sigma()}, rng);
  const std::vector<double> o = dsp::normalize_psd(dsp::periodogram(x));

  Observation obs;
  obs.spectrum.resize(o.size());
  for (size_t i = 0; i < o.size(); ++i) {
    obs.spectrum[i] = static_cast<float>(o[i]);
  }
  obs.fc_norm =
      static_cast<float>((state.fc - cfg.fc_min) / (cfg.fc_max - cfg.fc_min));
  const double depth_span = std::log2(cfg.bw_max / cfg.bw_min);
  obs.bw_norm = depth_span > 0.0
                    ? static_cast<float>(std::log2(cfg.bw_max / state.bw) /
                                         depth_span)
                    : 0.0f;
  return obs;
}

std::pair<RadioState, Observation> reset(const EnvConfig& cfg, Rng& rng) {
  cfg.validate();
  RadioState s;
  s.fc = (cfg.fc_min + cfg.fc_max) / 2.0;
  s.bw = cfg.bw_max;
  s.signals.resize(cfg.n_signals);
  for (double& f : s.signals) f = rng.uniform(cfg.fc_min, cfg.fc_max);
  s.found.assign(cfg.n_signals, 0);
  s.detect_depths.assign(cfg.n_signals, -1);
  s.steps = 0;
  s.done = false;
  Observation obs = make_observation(s, cfg, rng);
  return {std::move(s), std::move(obs)};
}

RadioState apply_action(const RadioState& state, Action a,
                        const EnvConfig& cfg) {
  if (state.done) {
    throw UsageError("apply_action: episode already finished");
  }
  RadioState s = state;
  switch (a) {
    case Action::FreqDown:
      s.fc -= s.bw / 2.0;
      break;
    case Action::FreqUp:
      s.fc += s.bw / 2.0;
      break;
    case Action::BwDownLeft:
      s.bw = std::max(s.bw / 2.0, cfg.bw_min);
      s.fc -= s.bw / 2.0;
      break;
    case Action::BwDownRight:
      s.bw = std::max(s.bw / 2.0, cfg.bw_min);
      s.fc += s.bw / 2.0;
      break;
    case Action::BwMax:
      s.bw = cfg.bw_max;
      break;
    case Action::Detect:
    case Action::Finish:
      break;
  }
  s.fc = clamp_fc(s.fc, s.bw, cfg);
  return s;
}

Event classify_event(const RadioState& before, Action a, RadioState& after,
                     const EnvConfig& cfg) {
  switch (a) {
    case Action::Detect: {
      const int hit = find_unfound(before, before.fc, before.bw);
      if (hit < 0) return Event::DetectFalse;
      after.found[hit] = 1;
      after.detect_depths[hit] = zoom_depth(before.bw, cfg);
      return Event::DetectTrue;
    }
    case Action::BwDownLeft:
    case Action::BwDownRight:
      return find_unfound(after, after.fc, after.bw) >= 0 ? Event::BwTrue
                                                          : Event::BwFalse;
    case Action::Finish:
      return all_found(before) ? Event::FinishTrue : Event::FinishFalse;
    case Action::FreqDown:
    case Action::FreqUp:
    case Action::BwMax:
      return Event::Move;
  }
  return Event::Move;
}

double reward(Event e, const RadioState& after, const EnvConfig& cfg) {
  double r = 0.0;
  switch (cfg.scheme) {
    case Scheme::A:
      if (e == Event::DetectTrue || e == Event::BwTrue ||
          e == Event::FinishTrue) {
        r = 1.0;
      }
      break;
    case Scheme::B:
      if (e == Event::DetectTrue || e == Event::BwTrue ||
          e == Event::FinishTrue) {
        r = 1.0;
      } else if (e == Event::DetectFalse || e == Event::FinishFalse) {
        r = -1.0;
      }
      break;
    case Scheme::C:
      if (e == Event::FinishTrue) {
        for (size_t i = 0; i < after.found.size(); ++i) {
          if (after.found[i]) r += static_cast<double>(after.detect_depths[i]);
        }
      }
      break;
  }
  return r + cfg.step_penalty;
}

std::pair<RadioState, StepResult> step(const RadioState& state, Action a,
                                       const EnvConfig& cfg, Rng& rng) {
  if (state.done) {
    throw UsageError("step: episode already finished");
  }
  RadioState next = apply_action(state, a, cfg);
  const Event event = classify_event(state, a, next, cfg);
  const double r = reward(event, next, cfg);
  next.steps = state.steps + 1;
  next.done = (a == Action::Finish) || (next.steps >= cfg.max_steps);

  StepResult res;
  res.obs = make_observation(next, cfg, rng);
  res.reward = r;
  res.done = next.done;
  res.event = event;
  return {std::move(next), std::move(res)};
}

}  // namespace specseek::env
