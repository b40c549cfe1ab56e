#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "specseek/rng.hpp"

namespace specseek::env {

// The seven discrete radio actions, in fixed order; integer codes 0..6.
enum class Action : int {
  FreqDown = 0,
  FreqUp = 1,
  BwDownLeft = 2,
  BwDownRight = 3,
  BwMax = 4,
  Detect = 5,
  Finish = 6,
};

inline constexpr int kNumActions = 7;

const char* name(Action a);
Action action_from_code(int code);  // UsageError outside 0..6

enum class Scheme : int { A = 0, B = 1, C = 2 };

enum class Event : int {
  DetectTrue = 0,
  DetectFalse = 1,
  BwTrue = 2,
  BwFalse = 3,
  FinishTrue = 4,
  FinishFalse = 5,
  Move = 6,
};

inline constexpr int kNumEvents = 7;

const char* name(Event e);

struct EnvConfig {
  double fc_min = 100e6;
  double fc_max = 200e6;
  double bw_max = 20e6;
  double bw_min = 1.25e6;
  int n_bins = 64;
  double snr_db = 15.0;  // tone SNR, amplitude^2 / sigma^2 in dB (amplitude 1)
  int n_signals = 1;
  int max_steps = 100;
  Scheme scheme = Scheme::A;
  double step_penalty = 0.0;

  void validate() const;  // ConfigError naming the offending field

  // Per-sample complex noise std for unit tone amplitude.
  double noise_sigma() const;
  // Ladder depth of bw_min: log2(bw_max / bw_min).
  int depth_max() const;
};

// The value-function input: normalized spectrum plus two tuner scalars.
struct Observation {
  std::vector<float> spectrum;
  float fc_norm = 0.0f;  // (fc - fc_min) / (fc_max - fc_min)
  float bw_norm = 0.0f;  // log2(bw_max/bw) / log2(bw_max/bw_min)
};

struct RadioState {
  double fc = 0.0;
  double bw = 0.0;
  std::vector<double> signals;       // hidden tone frequencies, Hz
  std::vector<uint8_t> found;        // per-signal flags
  std::vector<int> detect_depths;    // zoom depth at detection, -1 until found
  int steps = 0;
  bool done = false;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  Event event = Event::Move;
};

// Zoom depth of a ladder bandwidth: log2(bw_max / bw).
int zoom_depth(double bw, const EnvConfig& cfg);

// Draws the hidden signals uniformly over [fc_min, fc_max], tunes to band
// center at full bandwidth and returns the initial observation.
std::pair<RadioState, Observation> reset(const EnvConfig& cfg, Rng& rng);

// Pure tuning update for one action; fc is clamped afterwards so the window
// stays inside [fc_min, fc_max]. Throws UsageError on a finished state.
RadioState apply_action(const RadioState& state, Action a,
                        const EnvConfig& cfg);

// Classifies the action outcome. Detect marks the lowest-index unfound
// signal inside `before`'s window (inclusive edges) and records its depth in
// `after`; zoom success is judged against `after`'s window.
Event classify_event(const RadioState& before, Action a, RadioState& after,
                     const EnvConfig& cfg);

// Table of per-event rewards under the configured scheme, plus step_penalty.
// Scheme C pays FinishTrue the sum of recorded detection depths.
double reward(Event e, const RadioState& after, const EnvConfig& cfg);

// apply_action + classify_event + reward, step accounting, termination on
// Finish or the step cap, and a fresh-noise observation of the new window.
std::pair<RadioState, StepResult> step(const RadioState& state, Action a,
                                       const EnvConfig& cfg, Rng& rng);

// Spectrum observation of the current window with fresh noise.
Observation make_observation(const RadioState& state, const EnvConfig& cfg,
                             Rng& rng);

}  // namespace specseek::env
