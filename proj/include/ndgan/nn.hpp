#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndgan/tensor.hpp"

namespace ndgan {

enum class Activation : std::uint8_t { relu = 0, leaky_relu = 1, tanh = 2, sigmoid = 3, linear = 4, softmax = 5 };

const char* to_string(Activation a);
Activation parse_activation(const std::string& name);

struct LayerSpec {
  std::size_t in_dim = 1;
  std::size_t out_dim = 1;
  Activation activation = Activation::linear;
  bool weight_norm = false;
  double noise_std = 0.0;  // added to the layer output in train mode only
  double slope = 0.2;      // leaky_relu

  bool operator==(const LayerSpec&) const = default;
};

/// Checks extents, noise and that consecutive layers chain; errors name the layer index.
void validate_specs(std::span<const LayerSpec> specs);

/// Builds specs for in -> hidden... -> out, with `hidden_act` on every hidden layer.
std::vector<LayerSpec> make_mlp_specs(std::size_t in_dim, std::span<const std::size_t> hidden, std::size_t out_dim,
                                      Activation hidden_act, Activation out_act, bool weight_norm,
                                      double hidden_noise_std);

struct LayerParams {
  Tensor direction;           // out x in
  std::optional<Tensor> gain;  // out, present iff weight-norm
  Tensor bias;                // out
};

struct MlpParams {
  std::vector<LayerParams> layers;

  /// Parameter tensors in a fixed order: per layer direction, gain (if any), bias.
  std::vector<const Tensor*> tensors() const;
  std::vector<Tensor*> tensors();
  std::vector<std::string> tensor_names() const;
  /// Copy whose tensors are leaves of `tape`.
  MlpParams bind(Tape& tape) const;
  /// Gradients for every tensor of a bound copy, in tensors() order.
  std::vector<Tensor> gradients(const Gradients& grads) const;

  /// Effective weight matrix of a layer (weight norm applied).
  Tensor effective_weight(std::size_t layer) const;
};

/// Directions from N(0, 2/in_dim), gains 1, biases 0.
MlpParams init_mlp(std::span<const LayerSpec> specs, Rng& init);

struct Mlp {
  std::vector<LayerSpec> specs;
  MlpParams params;
};

enum class Mode { train, eval };

struct MlpOutput {
  Tensor output;
  /// Post-activation outputs of every layer but the last, as seen by the next layer.
  std::vector<Tensor> hidden;
};

/// `noise` must be non-null in train mode when any layer has noise_std > 0.
MlpOutput mlp_forward(const MlpParams& params, std::span<const LayerSpec> specs, const Tensor& x, Mode mode,
                      Rng* noise = nullptr);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

AdamState make_adam_state(const MlpParams& params, const AdamConfig& config);
/// Bias-corrected Adam update in place. Throws non_finite naming the parameter.
void adam_step(MlpParams& params, std::span<const Tensor> grads, AdamState& state);
/// The same update on an arbitrary list of tensors.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               std::span<const std::string> names = {});

// Little-endian binary blocks used by model files.
namespace binio {
void write_u8(std::ostream& os, std::uint8_t v);
void write_u32(std::ostream& os, std::uint32_t v);
void write_u64(std::ostream& os, std::uint64_t v);
void write_f64(std::ostream& os, double v);
std::uint8_t read_u8(std::istream& is);
std::uint32_t read_u32(std::istream& is);
std::uint64_t read_u64(std::istream& is);
double read_f64(std::istream& is);
}  // namespace binio

void write_mlp(std::ostream& os, const Mlp& mlp);
Mlp read_mlp(std::istream& is);

}  // namespace ndgan
