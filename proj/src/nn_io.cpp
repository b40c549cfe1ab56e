#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "specseek/nn.hpp"

namespace specseek::nn {

namespace {

constexpr const char* kMagic = "SPECSEEK-CKPT v1";

void put_u32le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32le(std::string& out, float f) {
  uint32_t v;
  std::memcpy(&v, &f, sizeof(v));
  put_u32le(out, v);
}

void put_u64le(std::string& out, uint64_t v) {
  put_u32le(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32le(out, static_cast<uint32_t>(v >> 32));
}

void put_array(std::string& out, const std::vector<float>& a) {
  for (float f : a) put_f32le(out, f);
}

// Sequential reader that tracks its byte offset for error messages.
class Reader {
 public:
  Reader(std::string data, std::string path)
      : data_(std::move(data)), path_(std::move(path)) {}

  size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path_ + ": " + what + " at offset " +
                      std::to_string(pos_));
  }

  std::string line() {
    const size_t nl = data_.find('\n', pos_);
    if (nl == std::string::npos) fail("missing newline");
    std::string s = data_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return s;
  }

  uint32_t u32le() {
    if (pos_ + 4 > data_.size()) fail("truncated file");
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<uint8_t>(data_[pos_ + i]);
    }
    pos_ += 4;
    return v;
  }

  uint64_t u64le() {
    const uint64_t lo = u32le();
    const uint64_t hi = u32le();
    return lo | (hi << 32);
  }

  float f32le() {
    const uint32_t v = u32le();
    float f;
    std::memcpy(&f, &v, sizeof(f));
    return f;
  }

  void read_array(std::vector<float>& out, size_t count) {
    out.resize(count);
    for (size_t i = 0; i < count; ++i) out[i] = f32le();
  }

 private:
  std::string data_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const NetworkParams<float>& net,
                     const AdamState<float>* adam, const std::string& path) {
  std::string out;
  out += kMagic;
  out += '\n';

  std::ostringstream header;
  header << net.layers.size() << ' ' << net.spec.n_bins << ' '
         << net.spec.n_scalars << ' ' << net.spec.spectrum_path.size() << ' '
         << net.spec.scalar_path.size() << ' ' << net.spec.head.size();
  for (const LayerShape& ls : net.layers) {
    header << ' ' << static_cast<int>(ls.kind);
    if (ls.kind == LayerKind::Conv) {
      header << ' ' << ls.out_channels << ' ' << ls.in_channels << ' '
             << ls.width << ' ' << ls.stride << ' ' << (ls.relu ? 1 : 0);
    } else {
      header << ' ' << ls.out_channels << ' ' << ls.in_channels << ' '
             << (ls.relu ? 1 : 0);
    }
  }
  out += header.str();
  out += '\n';

  for (size_t i = 0; i < net.layers.size(); ++i) {
    put_array(out, net.w[i]);
    put_array(out, net.b[i]);
  }

  if (adam != nullptr) {
    out += "ADAM\n";
    for (size_t i = 0; i < net.layers.size(); ++i) {
      put_array(out, adam->m_w[i]);
      put_array(out, adam->m_b[i]);
    }
    for (size_t i = 0; i < net.layers.size(); ++i) {
      put_array(out, adam->v_w[i]);
      put_array(out, adam->v_b[i]);
    }
    put_u64le(out, static_cast<uint64_t>(adam->t));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for reading: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  Reader r(buf.str(), path);

  if (r.line() != kMagic) {
    throw FormatError(path + ": bad magic at offset 0");
  }

  const std::string header = r.line();
  std::istringstream hs(header);
  auto next_int = [&](const char* what) {
    long long v;
    if (!(hs >> v)) r.fail(std::string("header missing ") + what);
    return v;
  };
  const long long n_layers = next_int("layer count");
  NetworkSpec spec;
  spec.n_bins = static_cast<int>(next_int("n_bins"));
  spec.n_scalars = static_cast<int>(next_int("n_scalars"));
  const long long n_conv = next_int("spectrum path size");
  const long long n_scalar = next_int("scalar path size");
  const long long n_head = next_int("head size");
  if (n_layers != n_conv + n_scalar + n_head || n_layers < 1) {
    r.fail("inconsistent layer counts");
  }
  for (long long i = 0; i < n_layers; ++i) {
    const long long kind = next_int("layer kind");
    if (kind == 0) {
      ConvSpec c;
      c.out_channels = static_cast<int>(next_int("out_channels"));
      next_int("in_channels");
      c.width = static_cast<int>(next_int("width"));
      c.stride = static_cast<int>(next_int("stride"));
      c.relu = next_int("relu flag") != 0;
      if (i >= n_conv) r.fail("conv layer outside spectrum path");
      spec.spectrum_path.push_back(c);
    } else if (kind == 1) {
      DenseSpec d;
      d.out_units = static_cast<int>(next_int("out_units"));
      next_int("in_units");
      d.relu = next_int("relu flag") != 0;
      if (i < n_conv) r.fail("dense layer inside spectrum path");
      if (i < n_conv + n_scalar) {
        spec.scalar_path.push_back(d);
      } else {
        spec.head.push_back(d);
      }
    } else {
      r.fail("unknown layer kind");
    }
  }
  std::string extra;
  if (hs >> extra) r.fail("trailing header fields");
  spec.n_actions = spec.head.back().out_units;

  NetworkParams<float> net;
  net.spec = spec;
  try {
    net.layers = plan_layers(spec);
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid network shape: ") + e.what());
  }

  // Re-derive the header from the parsed spec; any disagreement means the
  // declared shapes are internally inconsistent.
  {
    std::istringstream declared(header);
    long long v;
    std::vector<long long> declared_ints;
    while (declared >> v) declared_ints.push_back(v);
    std::vector<long long> expect = {
        static_cast<long long>(net.layers.size()), spec.n_bins,
        spec.n_scalars, static_cast<long long>(spec.spectrum_path.size()),
        static_cast<long long>(spec.scalar_path.size()),
        static_cast<long long>(spec.head.size())};
    for (const LayerShape& ls : net.layers) {
      expect.push_back(static_cast<long long>(ls.kind));
      if (ls.kind == LayerKind::Conv) {
        expect.insert(expect.end(),
                      {ls.out_channels, ls.in_channels, ls.width, ls.stride,
                       ls.relu ? 1 : 0});
      } else {
        expect.insert(expect.end(),
                      {ls.out_channels, ls.in_channels, ls.relu ? 1 : 0});
      }
    }
    if (declared_ints != expect) {
      r.fail("declared shapes do not match the layer geometry");
    }
  }

  net.w.resize(net.layers.size());
  net.b.resize(net.layers.size());
  for (size_t i = 0; i < net.layers.size(); ++i) {
    r.read_array(net.w[i], net.layers[i].weight_count());
    r.read_array(net.b[i], net.layers[i].bias_count());
  }
  for (size_t i = 0; i < net.layers.size(); ++i) {
    for (float v : net.w[i]) {
      if (!std::isfinite(v)) r.fail("non-finite parameter");
    }
    for (float v : net.b[i]) {
      if (!std::isfinite(v)) r.fail("non-finite parameter");
    }
  }

  Checkpoint ckpt;
  ckpt.params = std::move(net);
  if (r.at_end()) return ckpt;

  if (r.line() != "ADAM") r.fail("unexpected trailing data");
  AdamState<float> adam = make_adam(ckpt.params);
  for (size_t i = 0; i < ckpt.params.layers.size(); ++i) {
    r.read_array(adam.m_w[i], ckpt.params.layers[i].weight_count());
    r.read_array(adam.m_b[i], ckpt.params.layers[i].bias_count());
  }
  for (size_t i = 0; i < ckpt.params.layers.size(); ++i) {
    r.read_array(adam.v_w[i], ckpt.params.layers[i].weight_count());
    r.read_array(adam.v_b[i], ckpt.params.layers[i].bias_count());
  }
  adam.t = static_cast<int64_t>(r.u64le());
  if (!r.at_end()) r.fail("unexpected trailing data");
  ckpt.adam = std::move(adam);
  return ckpt;
}

}  // namespace specseek::nn
