#pragma once

#include <complex>
#include <vector>

#include "specseek/rng.hpp"

namespace specseek::dsp {

// A tuned, decimated receiver view of the band.
struct WindowSpec {
  double fc = 0.0;  // center frequency, Hz
  double bw = 0.0;  // bandwidth, Hz
  int n_bins = 0;   // samples per window == spectrum bins; power of two >= 8

  // Throws ConfigError on violated invariants (bw > 0, n_bins a power of
  // two >= 8, fc > bw/2 so all window frequencies are positive).
  void validate() const;
};

struct ToneSpec {
  double freq = 0.0;       // Hz
  double amplitude = 0.0;  // linear, >= 0
};

struct NoiseSpec {
  double sigma = 0.0;  // per-sample complex noise std (linear), > 0
};

using ComplexVec = std::vector<std::complex<double>>;

// Complex-baseband samples of the window. Each tone with |freq - fc| <= bw/2
// mixes down to amplitude * exp(j*2*pi*(freq - fc)/bw * n); tones outside the
// window contribute nothing. Circular complex Gaussian noise is added with
// per-component std sigma/sqrt(2). Deterministic given the rng state.
ComplexVec synth_baseband(const WindowSpec& window,
                          const std::vector<ToneSpec>& tones,
                          const NoiseSpec& noise, Rng& rng);

// In-place radix-2 decimation-in-time FFT. Length must be a power of two
// (SizeError otherwise).
void fft(ComplexVec& x);

// P[k] = |DFT(x)[k]|^2 / N, rotated so bin 0 is the window's low edge
// (-bw/2) and bin N-1 its high edge. Under this normalization the bin sum
// equals the time-domain energy sum (Parseval).
std::vector<double> periodogram(const ComplexVec& x);

// d = 10*log10(P + 1e-12), then o = (d - mean(d)) / (std(d) + 1e-6).
// Finite for all non-negative inputs; a flat window maps to all zeros.
std::vector<double> normalize_psd(const std::vector<double>& p);

}  // namespace specseek::dsp
