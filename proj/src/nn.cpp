#include "ndgan/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

namespace ndgan {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
    case Activation::softmax: return "softmax";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  for (auto a : {Activation::relu, Activation::leaky_relu, Activation::tanh, Activation::sigmoid, Activation::linear,
                 Activation::softmax}) {
    if (name == to_string(a)) return a;
  }
  throw Error(ErrorCode::invalid_argument, "activation", "unknown activation '" + name + "'");
}

void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw Error(ErrorCode::invalid_argument, "mlp", "no layers");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const std::string where = "layer " + std::to_string(i);
    if (s.in_dim == 0 || s.out_dim == 0) throw Error(ErrorCode::invalid_argument, where, "dimensions must be >= 1");
    if (!(s.noise_std >= 0.0) || !std::isfinite(s.noise_std))
      throw Error(ErrorCode::invalid_argument, where, "noise_std must be finite and >= 0");
    if (static_cast<unsigned>(s.activation) > static_cast<unsigned>(Activation::softmax))
      throw Error(ErrorCode::invalid_argument, where, "invalid activation");
    if (i > 0 && specs[i - 1].out_dim != s.in_dim) {
      throw Error(ErrorCode::shape, where,
                  "in_dim " + std::to_string(s.in_dim) + " does not match previous out_dim " +
                      std::to_string(specs[i - 1].out_dim));
    }
  }
}

std::vector<LayerSpec> make_mlp_specs(std::size_t in_dim, std::span<const std::size_t> hidden, std::size_t out_dim,
                                      Activation hidden_act, Activation out_act, bool weight_norm,
                                      double hidden_noise_std) {
  std::vector<LayerSpec> specs;
  std::size_t prev = in_dim;
  for (std::size_t w : hidden) {
    specs.push_back({prev, w, hidden_act, weight_norm, hidden_noise_std, 0.2});
    prev = w;
  }
  specs.push_back({prev, out_dim, out_act, weight_norm, 0.0, 0.2});
  return specs;
}

std::vector<const Tensor*> MlpParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers) {
    out.push_back(&l.direction);
    if (l.gain) out.push_back(&*l.gain);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<Tensor*> MlpParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.direction);
    if (l.gain) out.push_back(&*l.gain);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<std::string> MlpParams::tensor_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer " + std::to_string(i) + " ";
    out.push_back(p + "direction");
    if (layers[i].gain) out.push_back(p + "gain");
    out.push_back(p + "bias");
  }
  return out;
}

MlpParams MlpParams::bind(Tape& tape) const {
  MlpParams out;
  for (const auto& l : layers) {
    LayerParams b{tape.variable(l.direction), std::nullopt, tape.variable(l.bias)};
    if (l.gain) b.gain = tape.variable(*l.gain);
    out.layers.push_back(std::move(b));
  }
  return out;
}

std::vector<Tensor> MlpParams::gradients(const Gradients& grads) const {
  std::vector<Tensor> out;
  for (const Tensor* t : tensors()) out.push_back(grads.of(*t));
  return out;
}

Tensor MlpParams::effective_weight(std::size_t layer) const {
  const auto& l = layers.at(layer);
  return l.gain ? weight_norm(l.direction, *l.gain) : l.direction;
}

MlpParams init_mlp(std::span<const LayerSpec> specs, Rng& init) {
  validate_specs(specs);
  MlpParams params;
  for (const auto& s : specs) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(s.in_dim)));
    std::vector<double> v(s.out_dim * s.in_dim);
    for (double& x : v) x = normal(init);
    LayerParams l{Tensor::matrix(s.out_dim, s.in_dim, std::move(v)), std::nullopt, Tensor::zeros({s.out_dim})};
    if (s.weight_norm) l.gain = Tensor::full({s.out_dim}, 1.0);
    params.layers.push_back(std::move(l));
  }
  return params;
}

namespace {

Tensor activate(const Tensor& x, const LayerSpec& s) {
  switch (s.activation) {
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x, s.slope);
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::linear: return x;
    case Activation::softmax: return softmax(x);
  }
  return x;
}

}  // namespace

MlpOutput mlp_forward(const MlpParams& params, std::span<const LayerSpec> specs, const Tensor& x, Mode mode,
                      Rng* noise) {
  validate_specs(specs);
  if (params.layers.size() != specs.size()) {
    throw Error(ErrorCode::shape, "mlp_forward",
                std::to_string(params.layers.size()) + " parameter layers for " + std::to_string(specs.size()) + " specs");
  }
  if (x.rank() != 2 || x.cols() != specs.front().in_dim) {
    throw Error(ErrorCode::shape, "layer 0",
                "input " + shape_to_string(x.shape()) + " does not match in_dim " + std::to_string(specs.front().in_dim));
  }
  MlpOutput out;
  Tensor h = x;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto& l = params.layers[i];
    if (l.direction.shape() != Shape{s.out_dim, s.in_dim} || l.bias.size() != s.out_dim ||
        l.gain.has_value() != s.weight_norm) {
      throw Error(ErrorCode::shape, "layer " + std::to_string(i), "parameters do not match the layer spec");
    }
    const Tensor w = l.gain ? weight_norm(l.direction, *l.gain) : l.direction;
    h = activate(add(matmul(h, transpose(w)), l.bias), s);
    if (mode == Mode::train && s.noise_std > 0.0) {
      if (noise == nullptr) throw Error(ErrorCode::invalid_argument, "layer " + std::to_string(i), "train-mode noise needs an RNG");
      h = gaussian_noise(h, s.noise_std, *noise);
    }
    if (i + 1 < specs.size()) out.hidden.push_back(h);
  }
  out.output = h;
  return out;
}

AdamState make_adam_state(const MlpParams& params, const AdamConfig& config) {
  AdamState st;
  st.config = config;
  for (const Tensor* t : params.tensors()) {
    st.first_moment.emplace_back(t->size(), 0.0);
    st.second_moment.emplace_back(t->size(), 0.0);
  }
  return st;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               std::span<const std::string> names) {
  const auto name = [&](std::size_t i) { return i < names.size() ? names[i] : "parameter " + std::to_string(i); };
  if (grads.size() != params.size()) {
    throw Error(ErrorCode::shape, "adam_step",
                std::to_string(grads.size()) + " gradients for " + std::to_string(params.size()) + " parameters");
  }
  if (state.first_moment.size() != params.size()) throw Error(ErrorCode::shape, "adam_step", "state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i]->size() || state.first_moment[i].size() != params[i]->size())
      throw Error(ErrorCode::shape, name(i), "gradient not congruent to parameter");
    for (double g : grads[i].values())
      if (!std::isfinite(g)) throw Error(ErrorCode::non_finite, name(i), "non-finite gradient");
  }
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto g = grads[i].values();
    std::vector<double> p(params[i]->values().begin(), params[i]->values().end());
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
    *params[i] = Tensor(params[i]->shape(), std::move(p));
  }
}

void adam_step(MlpParams& params, std::span<const Tensor> grads, AdamState& state) {
  auto ptrs = params.tensors();
  auto names = params.tensor_names();
  adam_step(ptrs, grads, state, names);
}

namespace binio {

void write_u8(std::ostream& os, std::uint8_t v) { os.put(static_cast<char>(v)); }

void write_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void write_f64(std::ostream& os, double v) { write_u64(os, std::bit_cast<std::uint64_t>(v)); }

namespace {
std::uint64_t read_le(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) {
      throw Error(ErrorCode::format, "model file", "unexpected end of data at offset " + std::to_string(static_cast<long long>(is.tellg())));
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}
}  // namespace

std::uint8_t read_u8(std::istream& is) { return static_cast<std::uint8_t>(read_le(is, 1)); }
std::uint32_t read_u32(std::istream& is) { return static_cast<std::uint32_t>(read_le(is, 4)); }
std::uint64_t read_u64(std::istream& is) { return read_le(is, 8); }
double read_f64(std::istream& is) { return std::bit_cast<double>(read_le(is, 8)); }

}  // namespace binio

// Block layout: u32 layer count; per layer u32 in, u32 out, u8 activation,
// u8 weight-norm flag, f64 noise std, f64 slope; then per layer the direction
// (out*in), gain (out, only with weight norm) and bias (out) as f64.
void write_mlp(std::ostream& os, const Mlp& mlp) {
  validate_specs(mlp.specs);
  binio::write_u32(os, static_cast<std::uint32_t>(mlp.specs.size()));
  for (const auto& s : mlp.specs) {
    binio::write_u32(os, static_cast<std::uint32_t>(s.in_dim));
    binio::write_u32(os, static_cast<std::uint32_t>(s.out_dim));
    binio::write_u8(os, static_cast<std::uint8_t>(s.activation));
    binio::write_u8(os, s.weight_norm ? 1 : 0);
    binio::write_f64(os, s.noise_std);
    binio::write_f64(os, s.slope);
  }
  for (const Tensor* t : mlp.params.tensors())
    for (double v : t->values()) binio::write_f64(os, v);
}

Mlp read_mlp(std::istream& is) {
  Mlp mlp;
  const std::uint32_t n = binio::read_u32(is);
  if (n == 0 || n > 1024) throw Error(ErrorCode::format, "model file", "implausible layer count " + std::to_string(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    LayerSpec s;
    s.in_dim = binio::read_u32(is);
    s.out_dim = binio::read_u32(is);
    const std::uint8_t act = binio::read_u8(is);
    if (act > static_cast<std::uint8_t>(Activation::softmax)) throw Error(ErrorCode::format, "model file", "bad activation tag");
    s.activation = static_cast<Activation>(act);
    s.weight_norm = binio::read_u8(is) != 0;
    s.noise_std = binio::read_f64(is);
    s.slope = binio::read_f64(is);
    mlp.specs.push_back(s);
  }
  try {
    validate_specs(mlp.specs);
  } catch (const Error& e) {
    throw Error(ErrorCode::format, "model file", e.what());
  }
  const auto read_tensor = [&](Shape shape) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = binio::read_f64(is);
    return Tensor(std::move(shape), std::move(v));
  };
  for (const auto& s : mlp.specs) {
    LayerParams l;
    l.direction = read_tensor({s.out_dim, s.in_dim});
    if (s.weight_norm) l.gain = read_tensor({s.out_dim});
    l.bias = read_tensor({s.out_dim});
    mlp.params.layers.push_back(std::move(l));
  }
  return mlp;
}

}  // namespace ndgan
