#include "specseek/nn.hpp"

#include <string>

namespace specseek::nn {

NetworkSpec NetworkSpec::defaults(int n_bins) {
  NetworkSpec spec;
  spec.n_bins = n_bins;
  spec.spectrum_path = {{16, 8, 2, true}, {16, 4, 2, true}};
  spec.scalar_path = {{32, true}};
  spec.head = {{64, true}, {7, false}};
  return spec;
}

void NetworkSpec::validate() const {
  if (n_bins < 1) throw ConfigError("NetworkSpec: n_bins must be >= 1");
  if (n_scalars < 1) throw ConfigError("NetworkSpec: n_scalars must be >= 1");
  if (n_actions < 1) throw ConfigError("NetworkSpec: n_actions must be >= 1");
  if (head.empty()) {
    throw ConfigError("NetworkSpec: head must contain at least one layer");
  }
  if (head.back().out_units != n_actions) {
    throw ConfigError("NetworkSpec: head must end in exactly " +
                      std::to_string(n_actions) + " outputs, got " +
                      std::to_string(head.back().out_units));
  }
  if (head.back().relu) {
    throw ConfigError("NetworkSpec: the output layer must be linear");
  }
  plan_layers(*this);  // validates layer geometry
}

std::vector<LayerShape> plan_layers(const NetworkSpec& spec) {
  std::vector<LayerShape> layers;
  int channels = 1;
  int len = spec.n_bins;
  for (const ConvSpec& c : spec.spectrum_path) {
    if (c.out_channels < 1 || c.width < 1 || c.stride < 1) {
      throw ConfigError("NetworkSpec: conv layer fields must be >= 1");
    }
    const int out_len = (len - c.width) / c.stride + 1;
    if (c.width > len || out_len < 1) {
      throw ConfigError("NetworkSpec: conv width " + std::to_string(c.width) +
                        " does not fit input length " + std::to_string(len));
    }
    LayerShape ls;
    ls.kind = LayerKind::Conv;
    ls.in_channels = channels;
    ls.out_channels = c.out_channels;
    ls.width = c.width;
    ls.stride = c.stride;
    ls.in_len = len;
    ls.out_len = out_len;
    ls.relu = c.relu;
    layers.push_back(ls);
    channels = c.out_channels;
    len = out_len;
  }
  const int conv_out =
      spec.spectrum_path.empty() ? spec.n_bins : channels * len;

  int scalar_units = spec.n_scalars;
  for (const DenseSpec& d : spec.scalar_path) {
    if (d.out_units < 1) {
      throw ConfigError("NetworkSpec: dense out_units must be >= 1");
    }
    LayerShape ls;
    ls.kind = LayerKind::Dense;
    ls.in_channels = scalar_units;
    ls.out_channels = d.out_units;
    ls.relu = d.relu;
    layers.push_back(ls);
    scalar_units = d.out_units;
  }

  int units = conv_out + scalar_units;
  for (const DenseSpec& d : spec.head) {
    if (d.out_units < 1) {
      throw ConfigError("NetworkSpec: dense out_units must be >= 1");
    }
    LayerShape ls;
    ls.kind = LayerKind::Dense;
    ls.in_channels = units;
    ls.out_channels = d.out_units;
    ls.relu = d.relu;
    layers.push_back(ls);
    units = d.out_units;
  }
  return layers;
}

}  // namespace specseek::nn
