#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "specseek/nn.hpp"

namespace specseek::nn {

namespace {

// f(theta) = dot(q(theta), dq), the scalar whose gradient backward() returns.
double eval_loss(const NetworkParams<double>& net,
                 const std::vector<double>& spectrum,
                 const std::vector<double>& scalars,
                 const std::vector<double>& dq, ForwardCache<double>& cache) {
  forward<double>(net, spectrum, scalars, cache);
  double f = 0.0;
  for (size_t i = 0; i < dq.size(); ++i) f += cache.q()[i] * dq[i];
  return f;
}

std::string layer_label(const LayerShape& ls, size_t index) {
  if (ls.kind == LayerKind::Conv) {
    return "conv" + std::to_string(index) + "(" +
           std::to_string(ls.out_channels) + "x" + std::to_string(ls.width) +
           "s" + std::to_string(ls.stride) + ")";
  }
  return "dense" + std::to_string(index) + "(" +
         std::to_string(ls.in_channels) + "->" +
         std::to_string(ls.out_channels) + ")";
}

}  // namespace

GradCheckReport gradcheck(const NetworkSpec& spec, Rng& rng,
                          double tolerance) {
  spec.validate();
  const double h = 1e-5;
  // Live gradients everywhere: the head is randomly initialized too.
  NetworkParams<double> net = init_network<double>(spec, rng, false);

  // Draw inputs whose pre-activations stay clear of the ReLU kink so the
  // central difference never straddles it.
  std::vector<double> spectrum(spec.n_bins), scalars(spec.n_scalars);
  ForwardCache<double> cache;
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (double& v : spectrum) v = rng.gauss();
    for (double& v : scalars) v = rng.gauss();
    forward<double>(net, spectrum, scalars, cache);
    double closest = 1e300;
    for (const auto& z : cache.z) {
      for (double v : z) closest = std::min(closest, std::abs(v));
    }
    if (closest > 1e-3) break;
  }

  std::vector<double> dq(spec.n_actions);
  for (double& v : dq) v = rng.uniform(-1.0, 1.0);

  Gradients<double> grads = make_gradients(net);
  backward<double>(net, cache, dq, grads);

  GradCheckReport report;
  report.tolerance = tolerance;
  for (size_t li = 0; li < net.layers.size(); ++li) {
    const size_t wc = net.layers[li].weight_count();
    const size_t bc = net.layers[li].bias_count();
    const size_t total = wc + bc;
    const size_t n_checks = std::min<size_t>(total, 24);

    // Sample without replacement across the layer's weights and biases.
    std::vector<size_t> picks;
    if (n_checks == total) {
      picks.resize(total);
      for (size_t i = 0; i < total; ++i) picks[i] = i;
    } else {
      while (picks.size() < n_checks) {
        const size_t c = rng.uniform_int(total);
        if (std::find(picks.begin(), picks.end(), c) == picks.end()) {
          picks.push_back(c);
        }
      }
    }

    GradCheckLayer lr;
    lr.name = layer_label(net.layers[li], li);
    lr.checked = static_cast<int>(picks.size());
    for (size_t p : picks) {
      double* theta = p < wc ? &net.w[li][p] : &net.b[li][p - wc];
      const double analytic = p < wc ? grads.w[li][p] : grads.b[li][p - wc];
      const double saved = *theta;
      *theta = saved + h;
      const double f_plus = eval_loss(net, spectrum, scalars, dq, cache);
      *theta = saved - h;
      const double f_minus = eval_loss(net, spectrum, scalars, dq, cache);
      *theta = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      double err = 0.0;
      if (std::abs(analytic) > 1e-8 || std::abs(numeric) > 1e-8) {
        err = std::abs(analytic - numeric) /
              std::max(std::abs(analytic), std::abs(numeric));
      }
      lr.max_rel_err = std::max(lr.max_rel_err, err);
    }
    report.max_rel_err = std::max(report.max_rel_err, lr.max_rel_err);
    report.layers.push_back(std::move(lr));
  }
  // Restore the cache to the unperturbed point.
  forward<double>(net, spectrum, scalars, cache);
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace specseek::nn
