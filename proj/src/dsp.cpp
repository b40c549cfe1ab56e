#include "specseek/dsp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "specseek/errors.hpp"

namespace specseek::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void WindowSpec::validate() const {
  if (!(bw > 0.0)) {
    throw ConfigError("WindowSpec: bw must be > 0, got " + std::to_string(bw));
  }
  if (n_bins < 8 || !is_pow2(n_bins)) {
    throw ConfigError("WindowSpec: n_bins must be a power of two >= 8, got " +
                      std::to_string(n_bins));
  }
  if (!(fc > bw / 2.0)) {
    throw ConfigError("WindowSpec: fc must exceed bw/2, got fc=" +
                      std::to_string(fc) + " bw=" + std::to_string(bw));
  }
}

ComplexVec synth_baseband(const WindowSpec& window,
                          const std::vector<ToneSpec>& tones,
                          const NoiseSpec& noise, Rng& rng) {
  window.validate();
  if (!(noise.sigma > 0.0)) {
    throw ConfigError("NoiseSpec: sigma must be > 0");
  }
  for (const ToneSpec& t : tones) {
    if (t.amplitude < 0.0) {
      throw ConfigError("ToneSpec: amplitude must be >= 0");
    }
  }

  const int n = window.n_bins;
  ComplexVec x(n, {0.0, 0.0});

  for (const ToneSpec& t : tones) {
    const double off = t.freq - window.fc;
    if (std::abs(off) > window.bw / 2.0) continue;
    const double nu = off / window.bw;  // normalized frequency in [-1/2, 1/2]
    const double w = 2.0 * std::numbers::pi * nu;
    for (int i = 0; i < n; ++i) {
      x[i] += std::polar(t.amplitude, w * i);
    }
  }

  const double s = noise.sigma / std::numbers::sqrt2;
  for (int i = 0; i < n; ++i) {
    const double re = rng.gauss();
    const double im = rng.gauss();
    x[i] += std::complex<double>(s * re, s * im);
  }
  return x;
}

void fft(ComplexVec& x) {
  const size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw SizeError("fft: length must be a power of two, got " +
                    std::to_string(n));
  }
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> periodogram(const ComplexVec& x) {
  const size_t n = x.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw SizeError("periodogram: length must be a power of two, got " +
                    std::to_string(n));
  }
  ComplexVec spec = x;
  fft(spec);
  // Rotate so index 0 carries -bw/2 and index n-1 the highest frequency.
  std::vector<double> p(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t k = (i + n / 2) % n;
    p[i] = std::norm(spec[k]) / static_cast<double>(n);
  }
  return p;
}

std::vector<double> normalize_psd(const std::vector<double>& p) {
  const size_t n = p.size();
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) {
    d[i] = 10.0 * std::log10(p[i] + 1e-12);
  }
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double denom = std::sqrt(var) + 1e-6;
  std::vector<double> o(n);
  for (size_t i = 0; i < n; ++i) {
    o[i] = (d[i] - mean) / denom;
  }
  return o;
}

}  // namespace specseek::dsp
