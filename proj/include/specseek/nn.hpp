#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specseek/errors.hpp"
#include "specseek/rng.hpp"

namespace specseek::nn {

struct ConvSpec {
  int out_channels = 0;
  int width = 0;
  int stride = 0;
  bool relu = true;
};

struct DenseSpec {
  int out_units = 0;
  bool relu = true;
};

// Two-path action-value network: 1-D conv stack over the spectrum, dense
// stack over the tuner scalars, activations concatenated into a dense head
// that ends in a linear layer of n_actions outputs.
struct NetworkSpec {
  std::vector<ConvSpec> spectrum_path;
  std::vector<DenseSpec> scalar_path;
  std::vector<DenseSpec> head;
  int n_bins = 64;
  int n_scalars = 2;
  int n_actions = 7;

  static NetworkSpec defaults(int n_bins = 64);
  void validate() const;  // ConfigError
};

enum class LayerKind : int { Conv = 0, Dense = 1 };

// Resolved per-layer geometry in storage order: spectrum path, scalar path,
// head. Dense layers use in_channels/out_channels as unit counts.
struct LayerShape {
  LayerKind kind = LayerKind::Dense;
  int in_channels = 0;
  int out_channels = 0;
  int width = 0;   // conv only
  int stride = 0;  // conv only
  int in_len = 0;  // conv spatial input length
  int out_len = 0; // conv spatial output length
  bool relu = false;

  size_t weight_count() const {
    return kind == LayerKind::Conv
               ? static_cast<size_t>(out_channels) * in_channels * width
               : static_cast<size_t>(out_channels) * in_channels;
  }
  size_t bias_count() const { return static_cast<size_t>(out_channels); }
  // Activation element count (conv: out_channels * out_len).
  size_t out_size() const {
    return kind == LayerKind::Conv
               ? static_cast<size_t>(out_channels) * out_len
               : static_cast<size_t>(out_channels);
  }
  size_t in_size() const {
    return kind == LayerKind::Conv
               ? static_cast<size_t>(in_channels) * in_len
               : static_cast<size_t>(in_channels);
  }
};

// Resolves and validates the layer list for a spec.
std::vector<LayerShape> plan_layers(const NetworkSpec& spec);

template <typename T>
struct NetworkParams {
  NetworkSpec spec;
  std::vector<LayerShape> layers;
  std::vector<std::vector<T>> w;  // per layer, conv [out][in][width], dense [out][in]
  std::vector<std::vector<T>> b;  // per layer
};

// Hidden weights uniform on +/- sqrt(6/(fan_in+fan_out)), hidden biases zero;
// the final head layer's weights and biases are exactly zero unless
// zero_head is false (used by verification code that needs live gradients
// everywhere). Deterministic given the rng.
template <typename T>
NetworkParams<T> init_network(const NetworkSpec& spec, Rng& rng,
                              bool zero_head = true);

template <typename T>
struct ForwardCache {
  std::vector<T> spectrum;             // input copy
  std::vector<T> scalars;              // input copy
  std::vector<std::vector<T>> z;       // per-layer pre-activations
  std::vector<std::vector<T>> a;       // per-layer activations
  std::vector<T> concat;               // head input
  const std::vector<T>& q() const { return a.back(); }
};

// Pure function of (params, inputs); fills the cache for backprop.
template <typename T>
void forward(const NetworkParams<T>& net, std::span<const T> spectrum,
             std::span<const T> scalars, ForwardCache<T>& cache);

template <typename T>
struct Gradients {
  std::vector<std::vector<T>> w;
  std::vector<std::vector<T>> b;
  void zero() {
    for (auto& g : w) std::fill(g.begin(), g.end(), T(0));
    for (auto& g : b) std::fill(g.begin(), g.end(), T(0));
  }
};

template <typename T>
Gradients<T> make_gradients(const NetworkParams<T>& net);

// Accumulates exact gradients of dot(q, dq) with respect to every parameter
// into `out`. The cache must come from a forward pass over `net`.
template <typename T>
void backward(const NetworkParams<T>& net, const ForwardCache<T>& cache,
              std::span<const T> dq, Gradients<T>& out);

template <typename T>
struct AdamState {
  T lr = T(0.001);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  int64_t t = 0;
  std::vector<std::vector<T>> m_w, v_w, m_b, v_b;
};

template <typename T>
AdamState<T> make_adam(const NetworkParams<T>& net, T lr = T(0.001));

// Bias-corrected Adam update in place. Refuses non-finite gradients
// (NumericError) without touching params or state.
template <typename T>
void adam_step(NetworkParams<T>& net, const Gradients<T>& grads,
               AdamState<T>& state);

// Lowest-index argmax, the fixed tie-break used everywhere.
template <typename T>
int argmax(std::span<const T> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// ---- Checkpoint I/O (32-bit production params) ----
// Format: ASCII line "SPECSEEK-CKPT v1", then one line of space-separated
// integers (layer count, n_bins, n_scalars, the three path lengths, then a
// kind-tagged shape tuple per layer), then raw little-endian float32 arrays,
// weights then bias per layer in declaration order. An optional Adam block
// starts with the ASCII line "ADAM": m then v arrays in the same layout plus
// a little-endian 64-bit step counter.

void save_checkpoint(const NetworkParams<float>& net,
                     const AdamState<float>* adam, const std::string& path);

struct Checkpoint {
  NetworkParams<float> params;
  std::optional<AdamState<float>> adam;
};

Checkpoint load_checkpoint(const std::string& path);

// ---- Gradient verification (64-bit mode) ----

struct GradCheckLayer {
  std::string name;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckLayer> layers;
  double max_rel_err = 0.0;
  bool pass = false;
  double tolerance = 0.0;
};

// Central finite differences (h = 1e-5) against backward() on at least 20
// randomly chosen parameters per layer, in double precision.
GradCheckReport gradcheck(const NetworkSpec& spec, Rng& rng, double tolerance);

// ---- template implementations ----

template <typename T>
NetworkParams<T> init_network(const NetworkSpec& spec, Rng& rng,
                              bool zero_head) {
  NetworkParams<T> net;
  net.spec = spec;
  net.layers = plan_layers(spec);
  const size_t n_layers = net.layers.size();
  net.w.resize(n_layers);
  net.b.resize(n_layers);
  for (size_t i = 0; i < n_layers; ++i) {
    const LayerShape& ls = net.layers[i];
    net.w[i].assign(ls.weight_count(), T(0));
    net.b[i].assign(ls.bias_count(), T(0));
    const bool is_output = (i + 1 == n_layers);
    if (is_output && zero_head) continue;
    const double fan_in = ls.kind == LayerKind::Conv
                              ? double(ls.in_channels) * ls.width
                              : double(ls.in_channels);
    const double fan_out = ls.kind == LayerKind::Conv
                               ? double(ls.out_channels) * ls.width
                               : double(ls.out_channels);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (T& v : net.w[i]) v = static_cast<T>(rng.uniform(-limit, limit));
  }
  return net;
}

namespace detail {

template <typename T>
void dense_forward(const LayerShape& ls, const std::vector<T>& w,
                   const std::vector<T>& b, const T* x, T* z, T* a) {
  const int in = ls.in_channels;
  const int out = ls.out_channels;
  for (int o = 0; o < out; ++o) {
    const T* wr = w.data() + static_cast<size_t>(o) * in;
    T acc = b[o];
    for (int i = 0; i < in; ++i) acc += wr[i] * x[i];
    z[o] = acc;
    a[o] = ls.relu && acc < T(0) ? T(0) : acc;
  }
}

template <typename T>
void conv_forward(const LayerShape& ls, const std::vector<T>& w,
                  const std::vector<T>& b, const T* x, T* z, T* a) {
  const int ic = ls.in_channels, oc = ls.out_channels;
  const int width = ls.width, stride = ls.stride;
  const int in_len = ls.in_len, out_len = ls.out_len;
  for (int o = 0; o < oc; ++o) {
    const T* wo = w.data() + static_cast<size_t>(o) * ic * width;
    T* zo = z + static_cast<size_t>(o) * out_len;
    T* ao = a + static_cast<size_t>(o) * out_len;
    for (int p = 0; p < out_len; ++p) {
      T acc = b[o];
      const int base = p * stride;
      for (int c = 0; c < ic; ++c) {
        const T* wc = wo + static_cast<size_t>(c) * width;
        const T* xc = x + static_cast<size_t>(c) * in_len + base;
        for (int k = 0; k < width; ++k) acc += wc[k] * xc[k];
      }
      zo[p] = acc;
      ao[p] = ls.relu && acc < T(0) ? T(0) : acc;
    }
  }
}

template <typename T>
void dense_backward(const LayerShape& ls, const std::vector<T>& w,
                    const T* x, const T* z, const T* da, T* gw, T* gb,
                    T* dx) {
  const int in = ls.in_channels;
  const int out = ls.out_channels;
  if (dx) std::fill(dx, dx + in, T(0));
  for (int o = 0; o < out; ++o) {
    T dz = da[o];
    if (ls.relu && z[o] <= T(0)) dz = T(0);
    if (dz == T(0)) continue;
    const T* wr = w.data() + static_cast<size_t>(o) * in;
    T* gr = gw + static_cast<size_t>(o) * in;
    gb[o] += dz;
    for (int i = 0; i < in; ++i) gr[i] += dz * x[i];
    if (dx) {
      for (int i = 0; i < in; ++i) dx[i] += dz * wr[i];
    }
  }
}

template <typename T>
void conv_backward(const LayerShape& ls, const std::vector<T>& w, const T* x,
                   const T* z, const T* da, T* gw, T* gb, T* dx) {
  const int ic = ls.in_channels, oc = ls.out_channels;
  const int width = ls.width, stride = ls.stride;
  const int in_len = ls.in_len, out_len = ls.out_len;
  if (dx) std::fill(dx, dx + static_cast<size_t>(ic) * in_len, T(0));
  for (int o = 0; o < oc; ++o) {
    const T* wo = w.data() + static_cast<size_t>(o) * ic * width;
    T* go = gw + static_cast<size_t>(o) * ic * width;
    const T* zo = z + static_cast<size_t>(o) * out_len;
    const T* dao = da + static_cast<size_t>(o) * out_len;
    for (int p = 0; p < out_len; ++p) {
      T dz = dao[p];
      if (ls.relu && zo[p] <= T(0)) dz = T(0);
      if (dz == T(0)) continue;
      gb[o] += dz;
      const int base = p * stride;
      for (int c = 0; c < ic; ++c) {
        const T* wc = wo + static_cast<size_t>(c) * width;
        T* gc = go + static_cast<size_t>(c) * width;
        const T* xc = x + static_cast<size_t>(c) * in_len + base;
        for (int k = 0; k < width; ++k) gc[k] += dz * xc[k];
        if (dx) {
          T* dxc = dx + static_cast<size_t>(c) * in_len + base;
          for (int k = 0; k < width; ++k) dxc[k] += dz * wc[k];
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
void forward(const NetworkParams<T>& net, std::span<const T> spectrum,
             std::span<const T> scalars, ForwardCache<T>& cache) {
  const NetworkSpec& spec = net.spec;
  if (static_cast<int>(spectrum.size()) != spec.n_bins ||
      static_cast<int>(scalars.size()) != spec.n_scalars) {
    throw SizeError("forward: input lengths " +
                    std::to_string(spectrum.size()) + "/" +
                    std::to_string(scalars.size()) + " do not match spec " +
                    std::to_string(spec.n_bins) + "/" +
                    std::to_string(spec.n_scalars));
  }
  const size_t n_layers = net.layers.size();
  cache.spectrum.assign(spectrum.begin(), spectrum.end());
  cache.scalars.assign(scalars.begin(), scalars.end());
  cache.z.resize(n_layers);
  cache.a.resize(n_layers);
  for (size_t i = 0; i < n_layers; ++i) {
    cache.z[i].resize(net.layers[i].out_size());
    cache.a[i].resize(net.layers[i].out_size());
  }

  const size_t nc = spec.spectrum_path.size();
  const size_t ns = spec.scalar_path.size();

  const T* x = cache.spectrum.data();
  for (size_t i = 0; i < nc; ++i) {
    detail::conv_forward(net.layers[i], net.w[i], net.b[i], x,
                         cache.z[i].data(), cache.a[i].data());
    x = cache.a[i].data();
  }
  const T* conv_out = nc > 0 ? cache.a[nc - 1].data() : cache.spectrum.data();
  const size_t conv_out_n =
      nc > 0 ? net.layers[nc - 1].out_size() : cache.spectrum.size();

  const T* s = cache.scalars.data();
  for (size_t i = nc; i < nc + ns; ++i) {
    detail::dense_forward(net.layers[i], net.w[i], net.b[i], s,
                          cache.z[i].data(), cache.a[i].data());
    s = cache.a[i].data();
  }
  const T* scalar_out =
      ns > 0 ? cache.a[nc + ns - 1].data() : cache.scalars.data();
  const size_t scalar_out_n =
      ns > 0 ? net.layers[nc + ns - 1].out_size() : cache.scalars.size();

  cache.concat.resize(conv_out_n + scalar_out_n);
  std::copy(conv_out, conv_out + conv_out_n, cache.concat.data());
  std::copy(scalar_out, scalar_out + scalar_out_n,
            cache.concat.data() + conv_out_n);

  const T* h = cache.concat.data();
  for (size_t i = nc + ns; i < n_layers; ++i) {
    detail::dense_forward(net.layers[i], net.w[i], net.b[i], h,
                          cache.z[i].data(), cache.a[i].data());
    h = cache.a[i].data();
  }
}

template <typename T>
Gradients<T> make_gradients(const NetworkParams<T>& net) {
  Gradients<T> g;
  g.w.resize(net.layers.size());
  g.b.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    g.w[i].assign(net.layers[i].weight_count(), T(0));
    g.b[i].assign(net.layers[i].bias_count(), T(0));
  }
  return g;
}

template <typename T>
void backward(const NetworkParams<T>& net, const ForwardCache<T>& cache,
              std::span<const T> dq, Gradients<T>& out) {
  const NetworkSpec& spec = net.spec;
  const size_t n_layers = net.layers.size();
  if (cache.a.size() != n_layers ||
      static_cast<int>(dq.size()) != spec.n_actions) {
    throw UsageError("backward: cache or dq does not match the network");
  }
  for (size_t i = 0; i < n_layers; ++i) {
    if (cache.a[i].size() != net.layers[i].out_size() ||
        cache.z[i].size() != net.layers[i].out_size()) {
      throw UsageError("backward: cache does not match the network");
    }
  }
  if (cache.concat.size() !=
      net.layers[spec.spectrum_path.size() + spec.scalar_path.size()]
          .in_size()) {
    throw UsageError("backward: cache does not match the network");
  }
  const size_t nc = spec.spectrum_path.size();
  const size_t ns = spec.scalar_path.size();
  const size_t conv_out_n =
      nc > 0 ? net.layers[nc - 1].out_size() : cache.spectrum.size();

  // Head, walking back to the concat node.
  std::vector<T> da(dq.begin(), dq.end());
  std::vector<T> dx;
  for (size_t i = n_layers; i-- > nc + ns;) {
    const T* x_in = i == nc + ns ? cache.concat.data() : cache.a[i - 1].data();
    dx.assign(net.layers[i].in_size(), T(0));
    detail::dense_backward(net.layers[i], net.w[i], x_in, cache.z[i].data(),
                           da.data(), out.w[i].data(), out.b[i].data(),
                           dx.data());
    da = dx;
  }

  // Split the concat gradient into the two paths.
  std::vector<T> d_conv(da.begin(), da.begin() + conv_out_n);
  std::vector<T> d_scalar(da.begin() + conv_out_n, da.end());

  for (size_t i = nc + ns; i-- > nc;) {
    const T* x_in = i == nc ? cache.scalars.data() : cache.a[i - 1].data();
    const bool need_dx = i > nc;
    if (need_dx) dx.assign(net.layers[i].in_size(), T(0));
    detail::dense_backward(net.layers[i], net.w[i], x_in, cache.z[i].data(),
                           d_scalar.data(), out.w[i].data(),
                           out.b[i].data(), need_dx ? dx.data() : nullptr);
    if (need_dx) d_scalar = dx;
  }

  for (size_t i = nc; i-- > 0;) {
    const T* x_in = i == 0 ? cache.spectrum.data() : cache.a[i - 1].data();
    const bool need_dx = i > 0;
    if (need_dx) dx.assign(net.layers[i].in_size(), T(0));
    detail::conv_backward(net.layers[i], net.w[i], x_in, cache.z[i].data(),
                          d_conv.data(), out.w[i].data(), out.b[i].data(),
                          need_dx ? dx.data() : nullptr);
    if (need_dx) d_conv = dx;
  }
}

template <typename T>
AdamState<T> make_adam(const NetworkParams<T>& net, T lr) {
  AdamState<T> st;
  st.lr = lr;
  st.m_w.resize(net.layers.size());
  st.v_w.resize(net.layers.size());
  st.m_b.resize(net.layers.size());
  st.v_b.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    st.m_w[i].assign(net.layers[i].weight_count(), T(0));
    st.v_w[i].assign(net.layers[i].weight_count(), T(0));
    st.m_b[i].assign(net.layers[i].bias_count(), T(0));
    st.v_b[i].assign(net.layers[i].bias_count(), T(0));
  }
  return st;
}

namespace detail {

template <typename T>
void adam_update_array(std::vector<T>& theta, const std::vector<T>& g,
                       std::vector<T>& m, std::vector<T>& v, T lr_t, T beta1,
                       T beta2, T eps, T v_corr) {
  for (size_t i = 0; i < theta.size(); ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    theta[i] -= lr_t * m[i] / (std::sqrt(v[i] * v_corr) + eps);
  }
}

}  // namespace detail

template <typename T>
void adam_step(NetworkParams<T>& net, const Gradients<T>& grads,
               AdamState<T>& state) {
  for (size_t i = 0; i < net.layers.size(); ++i) {
    for (T g : grads.w[i]) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
    for (T g : grads.b[i]) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
  }
  state.t += 1;
  const T bc1 = T(1) - static_cast<T>(std::pow(double(state.beta1), double(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(double(state.beta2), double(state.t)));
  // theta -= lr * m_hat / (sqrt(v_hat) + eps) with m_hat = m/bc1, v_hat = v/bc2.
  const T lr_t = state.lr / bc1;
  const T v_corr = T(1) / bc2;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    detail::adam_update_array(net.w[i], grads.w[i], state.m_w[i],
                              state.v_w[i], lr_t, state.beta1, state.beta2,
                              state.eps, v_corr);
    detail::adam_update_array(net.b[i], grads.b[i], state.m_b[i],
                              state.v_b[i], lr_t, state.beta1, state.beta2,
                              state.eps, v_corr);
  }
}

}  // namespace specseek::nn
