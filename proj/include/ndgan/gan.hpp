#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndgan/data.hpp"
#include "ndgan/nn.hpp"
#include "ndgan/tensor.hpp"

namespace ndgan {

/// D(x) and every log argument are clamped to [kProbClamp, 1 - kProbClamp].
inline constexpr double kProbClamp = 1e-7;

enum class ZPrior : std::uint8_t { standard_normal = 0, uniform = 1 };
enum class GeneratorLoss : std::uint8_t { standard = 0, feature_matching = 1 };

const char* to_string(ZPrior p);
const char* to_string(GeneratorLoss l);
ZPrior parse_z_prior(const std::string& s);
GeneratorLoss parse_generator_loss(const std::string& s);

/// Generator z -> x and a discriminator x -> K+1 logits where index K is "fake".
struct GanModel {
  Mlp generator;
  Mlp discriminator;
  std::size_t num_classes = 1;
  std::size_t feature_layer = 0;  // index into the discriminator's hidden outputs
  std::size_t z_dim = 1;
  ZPrior z_prior = ZPrior::standard_normal;

  std::size_t data_dim() const { return discriminator.specs.front().in_dim; }
  void validate() const;
};

struct GanArchitecture {
  std::size_t data_dim = 2;
  std::size_t num_classes = 1;
  std::size_t z_dim = 16;
  std::vector<std::size_t> generator_hidden{64, 64};
  std::vector<std::size_t> discriminator_hidden{64, 64, 64};
  Activation generator_activation = Activation::relu;
  Activation generator_output = Activation::linear;
  Activation discriminator_activation = Activation::leaky_relu;
  bool discriminator_weight_norm = true;
  bool generator_weight_norm = false;
  double discriminator_noise_std = 0.1;
  ZPrior z_prior = ZPrior::standard_normal;

  /// Small nets for 2D benchmarks.
  static GanArchitecture toy(std::size_t data_dim, std::size_t num_classes);
  /// Five hidden layers ending in a 250-wide feature layer, sigmoid generator output.
  static GanArchitecture image(std::size_t data_dim, std::size_t num_classes);
};

/// Feature layer defaults to the last hidden layer of the discriminator.
GanModel make_gan(const GanArchitecture& arch, Rng& init);

/// Eval-mode class probabilities, rows of width K+1.
Tensor discriminator_probs(const GanModel& model, const Tensor& x);
/// Total real mass 1 - p_fake per row (unclamped).
std::vector<double> real_mass(const Tensor& probs);
/// Eval-mode discriminator features f(x).
Tensor discriminator_features(const GanModel& model, const Tensor& x);

struct LossOptions {
  Mode mode = Mode::eval;
  Rng* noise = nullptr;  // required in train mode when layers carry noise
};

/// Minimized discriminator objective from logits:
/// CE over labelled rows - mean log D(unlabelled) - mean log(1 - D(fake)).
/// Empty batches (zero rows) contribute nothing.
Tensor discriminator_loss_from_logits(const Tensor& labeled_logits, std::span<const std::size_t> labels,
                                      const Tensor& unlabeled_logits, const Tensor& fake_logits,
                                      std::size_t num_classes);

Tensor discriminator_loss(const GanModel& model, const Tensor& labeled, std::span<const std::size_t> labels,
                          const Tensor& unlabeled, const Tensor& fake, const LossOptions& opt = {});

/// mean log(1 - D(G(z))).
Tensor generator_loss_standard(const GanModel& model, const Tensor& z, const LossOptions& opt = {});

/// ||mean f(real) - mean f(G(z))||^2 with the discriminator held fixed.
Tensor generator_loss_feature_matching(const GanModel& model, const Tensor& real, const Tensor& z,
                                       const LossOptions& opt = {});

/// z batch from the model's prior.
Tensor sample_latent(const GanModel& model, std::size_t n, Rng& rng);
/// n draws of G(z).
Tensor sample_generator(const GanModel& model, std::size_t n, Rng& rng);

/// Draws a fake batch of the given size.
using FakeSampler = std::function<Tensor(std::size_t n, Rng& rng)>;

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t total_steps = 1000;
  std::size_t discriminator_steps = 1;  // per generator step
  std::uint64_t seed = 0;
  double labeled_fraction = 1.0;
  /// Overrides labeled_fraction when non-zero.
  std::size_t labeled_per_class = 0;
  bool use_labels = true;
  GeneratorLoss generator_loss = GeneratorLoss::feature_matching;
  AdamConfig discriminator_adam{};
  AdamConfig generator_adam{};
  std::size_t log_every = 100;
  std::size_t probe_size = 512;  // samples used for the logged feature-matching distance

  void validate() const;
};

struct TrainLogRow {
  std::size_t step = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
  double fm_distance = 0.0;
};

struct TrainResult {
  GanModel model;
  std::vector<TrainLogRow> log;
};

/// Alternating Adam training. With `fixed_fakes` the generator is not trained
/// and every fake batch comes from the sampler instead.
TrainResult train_gan(const GanModel& initial, const Dataset& data, const TrainConfig& config,
                      const FakeSampler& fixed_fakes = nullptr);

/// Eval-mode feature-matching distance between a real batch and G(z).
double feature_matching_distance(const GanModel& model, const Tensor& real, const Tensor& z);

std::string training_log_csv(std::span<const TrainLogRow> log);

/// Plain K-way classifier with the discriminator's architecture, used by baselines.
struct Classifier {
  Mlp net;
  std::size_t num_classes = 1;
  std::size_t feature_layer = 0;

  std::size_t data_dim() const { return net.specs.front().in_dim; }
  void validate() const;
};

Classifier make_classifier(const GanArchitecture& arch, Rng& init);
Tensor classifier_probs(const Classifier& c, const Tensor& x);
Tensor classifier_features(const Classifier& c, const Tensor& x);

struct ClassifierTrainResult {
  Classifier model;
  std::vector<TrainLogRow> log;  // g_loss and fm_distance unused
};

/// Cross-entropy training on the labelled rows (labeled_fraction / per-class apply).
ClassifierTrainResult train_classifier(const Classifier& initial, const Dataset& data, const TrainConfig& config);

/// Argmax over the first K columns.
std::vector<std::size_t> predict_classes(const Tensor& probs, std::size_t num_classes);

// Model files: "NDGAN1", u32 version, u8 kind (0 GAN, 1 classifier), u32 K,
// u32 feature layer; GAN: u32 z-dim, u8 prior, generator block, discriminator
// block; classifier: one block. Blocks per write_mlp. Little-endian throughout.
std::string serialize_model(const GanModel& model);
std::string serialize_model(const Classifier& model);

struct LoadedModel {
  std::optional<GanModel> gan;
  std::optional<Classifier> classifier;
};

LoadedModel deserialize_model(const std::string& bytes);
LoadedModel load_model(const std::string& path);

}  // namespace ndgan
