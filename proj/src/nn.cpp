#include "son/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "son/error.hpp"

namespace son::nn {

namespace {

constexpr char kMlpMagic[8] = {'S', 'O', 'N', 'M', 'L', 'P', '\0', '\0'};
constexpr std::uint32_t kMlpVersion = 1;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kLinear:
      break;
  }
  return z;
}

// Derivative expressed through the activation output y.
double activate_grad(Activation a, double y) {
  switch (a) {
    case Activation::kRelu:
      return y > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kLinear:
      break;
  }
  return 1.0;
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu:
      return "relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kLinear:
      break;
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("an MLP needs at least an input and an output layer");
  for (auto s : layer_sizes) {
    if (s == 0) throw ConfigError("MLP layer sizes must be positive");
  }
}

std::size_t MlpSpec::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) n += (layer_sizes[l] + 1) * layer_sizes[l + 1];
  return n;
}

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    offsets_.push_back(off);
    off += (spec_.layer_sizes[l] + 1) * spec_.layer_sizes[l + 1];
  }
  params_.assign(off, 0.0);
}

std::size_t Mlp::bias_offset(std::size_t layer) const {
  return offsets_[layer] + spec_.layer_sizes[layer] * spec_.layer_sizes[layer + 1];
}

Mlp Mlp::init(MlpSpec spec, Rng& rng) {
  Mlp net(std::move(spec));
  for (std::size_t l = 0; l < net.spec_.num_layers(); ++l) {
    const auto in = net.spec_.layer_sizes[l];
    const auto out = net.spec_.layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    double* w = net.params_.data() + net.offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = uniform(rng, -bound, bound);
  }
  return net;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  ForwardCache cache;
  forward_batch(input, 1, cache);
  return std::move(cache.act.back());
}

void Mlp::forward_batch(std::span<const double> inputs, std::size_t batch, ForwardCache& cache) const {
  const auto& sizes = spec_.layer_sizes;
  if (inputs.size() != batch * sizes.front()) {
    throw DimensionError("MLP input has " + std::to_string(inputs.size()) + " values, expected " +
                         std::to_string(batch) + " x " + std::to_string(sizes.front()));
  }
  const std::size_t L = spec_.num_layers();
  cache.batch = batch;
  cache.act.resize(L + 1);
  cache.act[0].assign(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const Activation a = l + 1 == L ? spec_.output : spec_.hidden;
    const double* W = params_.data() + offsets_[l];
    const double* bias = W + in * out;
    const auto& x = cache.act[l];
    auto& y = cache.act[l + 1];
    y.resize(batch * out);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* xb = x.data() + b * in;
      double* yb = y.data() + b * out;
      for (std::size_t o = 0; o < out; ++o) {
        const double* w = W + o * in;
        double z = bias[o];
        for (std::size_t i = 0; i < in; ++i) z += w[i] * xb[i];
        yb[o] = activate(a, z);
      }
    }
  }
}

std::vector<double> Mlp::backward(const ForwardCache& cache, std::span<const double> out_grad,
                                  std::span<double> param_grad) const {
  const auto& sizes = spec_.layer_sizes;
  const std::size_t L = spec_.num_layers();
  const std::size_t batch = cache.batch;
  if (cache.act.size() != L + 1) throw DimensionError("forward cache does not match this network");
  if (out_grad.size() != batch * sizes.back()) {
    throw DimensionError("output gradient has " + std::to_string(out_grad.size()) + " values, expected " +
                         std::to_string(batch * sizes.back()));
  }
  if (!param_grad.empty() && param_grad.size() != params_.size()) {
    throw DimensionError("parameter gradient buffer has the wrong size");
  }
  std::vector<double> delta(out_grad.begin(), out_grad.end());
  std::vector<double> prev;
  for (std::size_t l = L; l-- > 0;) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const Activation a = l + 1 == L ? spec_.output : spec_.hidden;
    const auto& y = cache.act[l + 1];
    const auto& x = cache.act[l];
    for (std::size_t j = 0; j < batch * out; ++j) delta[j] *= activate_grad(a, y[j]);

    const double* W = params_.data() + offsets_[l];
    if (!param_grad.empty()) {
      double* gW = param_grad.data() + offsets_[l];
      double* gb = gW + in * out;
      for (std::size_t b = 0; b < batch; ++b) {
        const double* xb = x.data() + b * in;
        const double* db = delta.data() + b * out;
        for (std::size_t o = 0; o < out; ++o) {
          const double d = db[o];
          if (d == 0.0) continue;
          double* g = gW + o * in;
          for (std::size_t i = 0; i < in; ++i) g[i] += d * xb[i];
          gb[o] += d;
        }
      }
    }
    prev.assign(batch * in, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* db = delta.data() + b * out;
      double* pb = prev.data() + b * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = db[o];
        if (d == 0.0) continue;
        const double* w = W + o * in;
        for (std::size_t i = 0; i < in; ++i) pb[i] += d * w[i];
      }
    }
    delta.swap(prev);
  }
  return delta;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw DimensionError("sgd_step: gradient size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

Adam::Adam(std::size_t num_params, AdamConfig cfg) : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0) {
  if (!(cfg_.lr >= 0.0) || !(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0) || !(cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0) ||
      !(cfg_.eps > 0.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw DimensionError("adam: parameter size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    params[i] -= cfg_.lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

void write_mlp(detail::ByteWriter& out, const Mlp& net) {
  const auto& spec = net.spec();
  out.u32(static_cast<std::uint32_t>(spec.layer_sizes.size()));
  for (auto s : spec.layer_sizes) out.u64(s);
  out.u8(static_cast<std::uint8_t>(spec.hidden));
  out.u8(static_cast<std::uint8_t>(spec.output));
  out.u64(net.params().size());
  out.f64s(net.params());
}

Mlp read_mlp(detail::ByteReader& in) {
  MlpSpec spec;
  const auto layers = in.u32("layer count");
  if (layers < 2 || layers > 64) throw SchemaError("network declares " + std::to_string(layers) + " layers");
  for (std::uint32_t i = 0; i < layers; ++i) {
    const auto s = in.u64("layer size");
    if (s == 0 || s > (1ULL << 24)) throw SchemaError("network declares an invalid layer size");
    spec.layer_sizes.push_back(s);
  }
  const auto h = in.u8("hidden activation");
  const auto o = in.u8("output activation");
  if (h > 2 || o > 2) throw SchemaError("network declares an unknown activation");
  spec.hidden = static_cast<Activation>(h);
  spec.output = static_cast<Activation>(o);
  Mlp net(spec);
  const auto count = in.u64("parameter count");
  if (count != net.params().size()) {
    throw SchemaError("network declares " + std::to_string(count) + " parameters, its layers need " +
                      std::to_string(net.params().size()));
  }
  net.params() = in.f64s(count, "parameters");
  return net;
}

void save_mlp(const Mlp& net, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.bytes(kMlpMagic, sizeof kMlpMagic);
  w.u32(kMlpVersion);
  write_mlp(w, net);
  w.write_file(path);
}

Mlp load_mlp(const std::filesystem::path& path) {
  auto r = detail::ByteReader::from_file(path);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (!std::equal(magic, magic + 8, kMlpMagic)) throw ParseError("not a network file (bad magic)", 0);
  const auto version = r.u32("version");
  if (version != kMlpVersion) throw SchemaError("unsupported network file version " + std::to_string(version));
  auto net = read_mlp(r);
  if (r.remaining() != 0) throw ParseError("trailing bytes after network parameters", r.offset());
  return net;
}

}  // namespace son::nn
