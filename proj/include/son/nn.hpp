#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "son/random.hpp"

namespace son {
namespace detail {
class ByteWriter;
class ByteReader;
}  // namespace detail

namespace nn {

enum class Activation { kRelu, kTanh, kLinear };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct MlpSpec {
  std::vector<std::size_t> layer_sizes;  // input, hidden..., output
  Activation hidden = Activation::kRelu;
  Activation output = Activation::kLinear;

  void validate() const;
  std::size_t num_layers() const { return layer_sizes.size() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t num_params() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

// Post-activation values of every layer for one minibatch; act[0] is the input.
struct ForwardCache {
  std::size_t batch = 0;
  std::vector<std::vector<double>> act;
};

// Dense feed-forward net over one flat parameter vector. Layer l stores its
// weight matrix (out x in, row-major) followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);  // all parameters zero

  // Xavier-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static Mlp init(MlpSpec spec, Rng& rng);

  const MlpSpec& spec() const { return spec_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const;

  std::vector<double> forward(std::span<const double> input) const;

  // `inputs` is batch x input_dim, row-major. The output rows are cache.act.back().
  void forward_batch(std::span<const double> inputs, std::size_t batch, ForwardCache& cache) const;

  // Reverse pass for the scalar sum_b <out_grad_b, y_b>. Parameter gradients
  // are added into `param_grad` (skipped when it is empty); the input gradient
  // (batch x input_dim) is returned.
  std::vector<double> backward(const ForwardCache& cache, std::span<const double> out_grad,
                               std::span<double> param_grad) const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  MlpSpec spec_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t num_params, AdamConfig cfg);

  void step(std::span<double> params, std::span<const double> grads);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  friend bool operator==(const Adam&, const Adam&) = default;

 private:
  AdamConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

void write_mlp(detail::ByteWriter& out, const Mlp& net);
Mlp read_mlp(detail::ByteReader& in);

// Standalone file: magic, version, spec, flat parameters.
void save_mlp(const Mlp& net, const std::filesystem::path& path);
Mlp load_mlp(const std::filesystem::path& path);

}  // namespace nn
}  // namespace son
