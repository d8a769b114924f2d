#include "ndgan/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace ndgan {

const char* to_string(ZPrior p) { return p == ZPrior::standard_normal ? "standard_normal" : "uniform"; }
const char* to_string(GeneratorLoss l) { return l == GeneratorLoss::standard ? "standard" : "feature_matching"; }

ZPrior parse_z_prior(const std::string& s) {
  if (s == "standard_normal" || s == "normal") return ZPrior::standard_normal;
  if (s == "uniform") return ZPrior::uniform;
  throw Error(ErrorCode::invalid_argument, "z_prior", "unknown prior '" + s + "'");
}

GeneratorLoss parse_generator_loss(const std::string& s) {
  if (s == "standard") return GeneratorLoss::standard;
  if (s == "feature_matching" || s == "fm") return GeneratorLoss::feature_matching;
  throw Error(ErrorCode::invalid_argument, "generator_loss", "unknown generator loss '" + s + "'");
}

void GanModel::validate() const {
  validate_specs(generator.specs);
  validate_specs(discriminator.specs);
  if (num_classes == 0) throw Error(ErrorCode::invalid_argument, "GanModel", "K must be >= 1");
  if (discriminator.specs.back().out_dim != num_classes + 1)
    throw Error(ErrorCode::shape, "GanModel", "discriminator must emit K+1 = " + std::to_string(num_classes + 1) + " logits");
  if (generator.specs.front().in_dim != z_dim) throw Error(ErrorCode::shape, "GanModel", "generator input differs from z-dim");
  if (generator.specs.back().out_dim != data_dim())
    throw Error(ErrorCode::shape, "GanModel", "generator output differs from discriminator input");
  if (feature_layer + 1 >= discriminator.specs.size())
    throw Error(ErrorCode::invalid_argument, "GanModel", "feature layer " + std::to_string(feature_layer) + " is not a hidden layer");
  if (generator.params.layers.size() != generator.specs.size() ||
      discriminator.params.layers.size() != discriminator.specs.size())
    throw Error(ErrorCode::shape, "GanModel", "parameters do not match layer specs");
}

GanArchitecture GanArchitecture::toy(std::size_t data_dim, std::size_t num_classes) {
  GanArchitecture a;
  a.data_dim = data_dim;
  a.num_classes = num_classes;
  return a;
}

GanArchitecture GanArchitecture::image(std::size_t data_dim, std::size_t num_classes) {
  GanArchitecture a;
  a.data_dim = data_dim;
  a.num_classes = num_classes;
  a.z_dim = 100;
  a.generator_hidden = {500, 500, 500, 500, 500};
  a.discriminator_hidden = {512, 384, 256, 250, 250};
  a.generator_output = Activation::sigmoid;
  a.discriminator_activation = Activation::relu;
  return a;
}

namespace {

std::vector<LayerSpec> discriminator_specs(const GanArchitecture& a, std::size_t outputs) {
  return make_mlp_specs(a.data_dim, a.discriminator_hidden, outputs, a.discriminator_activation, Activation::linear,
                        a.discriminator_weight_norm, a.discriminator_noise_std);
}

}  // namespace

GanModel make_gan(const GanArchitecture& a, Rng& init) {
  if (a.discriminator_hidden.empty()) throw Error(ErrorCode::invalid_argument, "make_gan", "discriminator needs a hidden layer");
  GanModel m;
  m.num_classes = a.num_classes;
  m.z_dim = a.z_dim;
  m.z_prior = a.z_prior;
  m.generator.specs = make_mlp_specs(a.z_dim, a.generator_hidden, a.data_dim, a.generator_activation,
                                     a.generator_output, a.generator_weight_norm, 0.0);
  m.discriminator.specs = discriminator_specs(a, a.num_classes + 1);
  m.generator.params = init_mlp(m.generator.specs, init);
  m.discriminator.params = init_mlp(m.discriminator.specs, init);
  m.feature_layer = a.discriminator_hidden.size() - 1;
  m.validate();
  return m;
}

namespace {

void check_input(const char* op, const Tensor& x, std::size_t dim) {
  if (x.rank() != 2 || x.cols() != dim) {
    throw Error(ErrorCode::shape, op,
                "input " + shape_to_string(x.shape()) + " does not match data dimension " + std::to_string(dim));
  }
}

MlpOutput discriminate(const GanModel& m, const Tensor& x, const LossOptions& opt) {
  check_input("discriminator", x, m.data_dim());
  return mlp_forward(m.discriminator.params, m.discriminator.specs, x, opt.mode, opt.noise);
}

Tensor log_real_mass(const Tensor& logits, std::size_t k) {
  const Tensor real = reduce_sum(slice_cols(softmax(logits), 0, k), Axis::last);
  return log(clamp(real, kProbClamp, 1.0 - kProbClamp));
}

Tensor log_fake_mass(const Tensor& logits, std::size_t k) {
  const Tensor fake = slice_cols(softmax(logits), k, k + 1);
  return log(clamp(fake, kProbClamp, 1.0 - kProbClamp));
}

Tensor accumulate(std::optional<Tensor>& total, const Tensor& term) {
  total = total ? add(*total, term) : term;
  return *total;
}

}  // namespace

Tensor discriminator_probs(const GanModel& model, const Tensor& x) {
  return softmax(discriminate(model, x, {}).output);
}

std::vector<double> real_mass(const Tensor& probs) {
  const std::size_t w = probs.cols();
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < w; ++j) s += probs.at(i, j);
    out[i] = s;
  }
  return out;
}

Tensor discriminator_features(const GanModel& model, const Tensor& x) {
  return discriminate(model, x, {}).hidden.at(model.feature_layer);
}

Tensor discriminator_loss_from_logits(const Tensor& labeled_logits, std::span<const std::size_t> labels,
                                      const Tensor& unlabeled_logits, const Tensor& fake_logits,
                                      std::size_t num_classes) {
  const std::size_t k = num_classes;
  for (const Tensor* t : {&labeled_logits, &unlabeled_logits, &fake_logits}) {
    if (t->rows() > 0 && (t->rank() != 2 || t->cols() != k + 1)) {
      throw Error(ErrorCode::shape, "discriminator_loss",
                  "logits " + shape_to_string(t->shape()) + " for K+1 = " + std::to_string(k + 1));
    }
  }
  std::optional<Tensor> total;
  if (labeled_logits.rows() > 0) {
    if (labels.size() != labeled_logits.rows())
      throw Error(ErrorCode::shape, "discriminator_loss", "label count differs from labelled batch size");
    for (std::size_t l : labels)
      if (l >= k) throw Error(ErrorCode::invalid_argument, "discriminator_loss", "label " + std::to_string(l) + " outside 0..K-1");
    accumulate(total, scale(reduce_mean(gather(log_softmax(labeled_logits), labels)), -1.0));
  }
  if (unlabeled_logits.rows() > 0) accumulate(total, scale(reduce_mean(log_real_mass(unlabeled_logits, k)), -1.0));
  if (fake_logits.rows() > 0) accumulate(total, scale(reduce_mean(log_fake_mass(fake_logits, k)), -1.0));
  if (!total) throw Error(ErrorCode::invalid_argument, "discriminator_loss", "all batches are empty");
  return *total;
}

Tensor discriminator_loss(const GanModel& model, const Tensor& labeled, std::span<const std::size_t> labels,
                          const Tensor& unlabeled, const Tensor& fake, const LossOptions& opt) {
  const auto logits = [&](const Tensor& x) {
    return x.rows() > 0 ? discriminate(model, x, opt).output : Tensor::zeros({0, model.num_classes + 1});
  };
  return discriminator_loss_from_logits(logits(labeled), labels, logits(unlabeled), logits(fake), model.num_classes);
}

Tensor generator_loss_standard(const GanModel& model, const Tensor& z, const LossOptions& opt) {
  check_input("generator", z, model.z_dim);
  const Tensor x = mlp_forward(model.generator.params, model.generator.specs, z, opt.mode, opt.noise).output;
  return reduce_mean(log_fake_mass(discriminate(model, x, opt).output, model.num_classes));
}

Tensor generator_loss_feature_matching(const GanModel& model, const Tensor& real, const Tensor& z,
                                       const LossOptions& opt) {
  check_input("generator", z, model.z_dim);
  const Tensor fake = mlp_forward(model.generator.params, model.generator.specs, z, opt.mode, opt.noise).output;
  const Tensor real_mean = reduce_mean(discriminate(model, real, opt).hidden.at(model.feature_layer), Axis::batch);
  const Tensor fake_mean = reduce_mean(discriminate(model, fake, opt).hidden.at(model.feature_layer), Axis::batch);
  return l2_norm_squared(sub(real_mean, fake_mean));
}

double feature_matching_distance(const GanModel& model, const Tensor& real, const Tensor& z) {
  return generator_loss_feature_matching(model, real.detach(), z.detach()).item();
}

namespace {

double fm_distance_batches(const GanModel& model, const Tensor& real, const Tensor& fake) {
  const Tensor a = reduce_mean(discriminator_features(model, real), Axis::batch);
  const Tensor b = reduce_mean(discriminator_features(model, fake), Axis::batch);
  return l2_norm_squared(sub(a, b)).item();
}

}  // namespace

Tensor sample_latent(const GanModel& model, std::size_t n, Rng& rng) {
  std::vector<double> z(n * model.z_dim);
  if (model.z_prior == ZPrior::standard_normal) {
    std::normal_distribution<double> d(0.0, 1.0);
    for (double& v : z) v = d(rng);
  } else {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (double& v : z) v = d(rng);
  }
  return Tensor::matrix(n, model.z_dim, std::move(z));
}

Tensor sample_generator(const GanModel& model, std::size_t n, Rng& rng) {
  const Tensor z = sample_latent(model, n, rng);
  return mlp_forward(model.generator.params, model.generator.specs, z, Mode::eval).output;
}

void TrainConfig::validate() const {
  const char* where = "TrainConfig";
  if (batch_size < 2) throw Error(ErrorCode::invalid_argument, where, "batch_size must be >= 2");
  if (discriminator_steps == 0) throw Error(ErrorCode::invalid_argument, where, "discriminator_steps must be >= 1");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, where, "labeled_fraction must lie in (0, 1]");
  if (log_every == 0) throw Error(ErrorCode::invalid_argument, where, "log_every must be >= 1");
  for (const AdamConfig* a : {&discriminator_adam, &generator_adam}) {
    if (!(a->lr > 0.0) || !(a->beta1 >= 0.0 && a->beta1 < 1.0) || !(a->beta2 >= 0.0 && a->beta2 < 1.0) || !(a->eps > 0.0))
      throw Error(ErrorCode::invalid_argument, where, "invalid Adam hyperparameters");
  }
}

namespace {

/// Cycles through seeded permutations of 0..n-1.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, Rng& rng) : perm_(n), rng_(rng) {
    std::iota(perm_.begin(), perm_.end(), 0);
    std::shuffle(perm_.begin(), perm_.end(), rng_);
  }

  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    if (perm_.empty()) return out;
    while (out.size() < count) {
      if (pos_ == perm_.size()) {
        std::shuffle(perm_.begin(), perm_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(perm_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> perm_;
  std::size_t pos_ = 0;
  Rng& rng_;
};

Dataset choose_labeled(const Dataset& data, const TrainConfig& cfg, Rng& rng) {
  if (!cfg.use_labels || !data.labeled()) return data.subset(std::vector<std::size_t>{});
  if (cfg.labeled_per_class > 0) return subsample_labeled(data, cfg.labeled_per_class, rng()).first;
  if (cfg.labeled_fraction >= 1.0) return data;
  std::vector<std::size_t> rows;
  for (auto idx : data.indices_by_class()) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto take = static_cast<std::size_t>(std::ceil(cfg.labeled_fraction * static_cast<double>(idx.size())));
    idx.resize(std::min(take, idx.size()));
    rows.insert(rows.end(), idx.begin(), idx.end());
  }
  std::sort(rows.begin(), rows.end());
  return data.subset(rows);
}

double checked(const Tensor& loss, std::size_t step, const char* name) {
  const double v = loss.item();
  if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "step " + std::to_string(step), std::string(name) + " is not finite");
  return v;
}

Tensor take(const Dataset& d, const std::vector<std::size_t>& rows) { return d.subset(rows).features; }

}  // namespace

TrainResult train_gan(const GanModel& initial, const Dataset& data, const TrainConfig& cfg,
                      const FakeSampler& fixed_fakes) {
  cfg.validate();
  initial.validate();
  data.validate();
  if (data.dim() != initial.data_dim()) {
    throw Error(ErrorCode::shape, "train_gan",
                "data dimension " + std::to_string(data.dim()) + " differs from model " + std::to_string(initial.data_dim()));
  }
  if (data.size() == 0) throw Error(ErrorCode::invalid_argument, "train_gan", "empty dataset");
  if (cfg.use_labels && data.labeled() && data.num_classes != initial.num_classes) {
    throw Error(ErrorCode::invalid_argument, "train_gan",
                "dataset has K = " + std::to_string(data.num_classes) + ", model expects " + std::to_string(initial.num_classes));
  }

  const RngStreams streams(cfg.seed);
  Rng shuffling = streams.stream("shuffling");
  Rng sampling = streams.stream("sampling");
  Rng noise = streams.stream("noise");
  Rng probe = streams.stream("probe");

  const Dataset labeled = choose_labeled(data, cfg, shuffling);
  BatchSampler labeled_batches(labeled.size(), shuffling);
  BatchSampler real_batches(data.size(), shuffling);
  const std::size_t lab_n = std::min(cfg.batch_size, labeled.size());

  TrainResult result{initial, {}};
  GanModel& model = result.model;
  const bool learn_generator = !fixed_fakes;

  std::vector<std::size_t> probe_rows(data.size());
  std::iota(probe_rows.begin(), probe_rows.end(), 0);
  std::shuffle(probe_rows.begin(), probe_rows.end(), probe);
  probe_rows.resize(std::min(cfg.probe_size, data.size()));
  const Tensor probe_real = take(data, probe_rows);
  const Tensor probe_z = sample_latent(model, probe_rows.size(), probe);
  const Tensor probe_fixed = fixed_fakes ? fixed_fakes(probe_rows.size(), probe) : Tensor();
  const auto probe_distance = [&] {
    const Tensor fake = learn_generator ? mlp_forward(model.generator.params, model.generator.specs, probe_z, Mode::eval).output : probe_fixed;
    return fm_distance_batches(model, probe_real, fake);
  };

  AdamState d_adam = make_adam_state(model.discriminator.params, cfg.discriminator_adam);
  AdamState g_adam = make_adam_state(model.generator.params, cfg.generator_adam);
  const LossOptions train_opt{Mode::train, &noise};

  double d_loss = 0.0, g_loss = 0.0;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const bool log_now = step % cfg.log_every == 0;
    const double fm_now = log_now ? probe_distance() : 0.0;

    for (std::size_t k = 0; k < cfg.discriminator_steps; ++k) {
      const Tensor fake = learn_generator ? sample_generator(model, cfg.batch_size, sampling) : fixed_fakes(cfg.batch_size, sampling);
      const auto lab_rows = labeled_batches.next(lab_n);
      const Dataset lab = labeled.subset(lab_rows);
      const Tensor unl = take(data, real_batches.next(cfg.batch_size));
      std::vector<std::size_t> labels = lab.labels ? *lab.labels : std::vector<std::size_t>{};

      Tape tape;
      GanModel bound = model;
      bound.discriminator.params = model.discriminator.params.bind(tape);
      const Tensor loss = discriminator_loss(bound, lab.features, labels, unl, fake, train_opt);
      d_loss = checked(loss, step, "d_loss");
      const Gradients grads = tape.backward(loss);
      adam_step(model.discriminator.params, bound.discriminator.params.gradients(grads), d_adam);
    }

    if (learn_generator) {
      const Tensor z = sample_latent(model, cfg.batch_size, sampling);
      Tape tape;
      GanModel bound = model;
      bound.generator.params = model.generator.params.bind(tape);
      Tensor loss;
      if (cfg.generator_loss == GeneratorLoss::feature_matching) {
        const Tensor real = take(data, real_batches.next(cfg.batch_size));
        loss = generator_loss_feature_matching(bound, real, z, train_opt);
      } else {
        loss = generator_loss_standard(bound, z, train_opt);
      }
      g_loss = checked(loss, step, "g_loss");
      const Gradients grads = tape.backward(loss);
      adam_step(model.generator.params, bound.generator.params.gradients(grads), g_adam);
    }

    if (log_now) result.log.push_back({step, d_loss, g_loss, fm_now});
  }
  result.log.push_back({cfg.total_steps, d_loss, g_loss, probe_distance()});
  return result;
}

std::string training_log_csv(std::span<const TrainLogRow> log) {
  std::ostringstream os;
  os.precision(17);
  os << "step,d_loss,g_loss,fm_distance\n";
  for (const auto& r : log) os << r.step << ',' << r.d_loss << ',' << r.g_loss << ',' << r.fm_distance << '\n';
  return os.str();
}

// --- classifier -------------------------------------------------------------------

void Classifier::validate() const {
  validate_specs(net.specs);
  if (net.specs.back().out_dim != num_classes) throw Error(ErrorCode::shape, "Classifier", "output width differs from K");
  if (feature_layer + 1 >= net.specs.size()) throw Error(ErrorCode::invalid_argument, "Classifier", "feature layer is not a hidden layer");
}

Classifier make_classifier(const GanArchitecture& a, Rng& init) {
  if (a.discriminator_hidden.empty()) throw Error(ErrorCode::invalid_argument, "make_classifier", "needs a hidden layer");
  Classifier c;
  c.num_classes = a.num_classes;
  c.net.specs = discriminator_specs(a, a.num_classes);
  c.net.params = init_mlp(c.net.specs, init);
  c.feature_layer = a.discriminator_hidden.size() - 1;
  c.validate();
  return c;
}

Tensor classifier_probs(const Classifier& c, const Tensor& x) {
  check_input("classifier", x, c.data_dim());
  return softmax(mlp_forward(c.net.params, c.net.specs, x, Mode::eval).output);
}

Tensor classifier_features(const Classifier& c, const Tensor& x) {
  check_input("classifier", x, c.data_dim());
  return mlp_forward(c.net.params, c.net.specs, x, Mode::eval).hidden.at(c.feature_layer);
}

ClassifierTrainResult train_classifier(const Classifier& initial, const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  initial.validate();
  data.validate();
  if (!data.labeled()) throw Error(ErrorCode::invalid_argument, "train_classifier", "dataset has no labels");
  if (data.dim() != initial.data_dim()) throw Error(ErrorCode::shape, "train_classifier", "data dimension differs from model");
  if (data.num_classes != initial.num_classes)
    throw Error(ErrorCode::invalid_argument, "train_classifier", "dataset K differs from model K");

  const RngStreams streams(cfg.seed);
  Rng shuffling = streams.stream("shuffling");
  Rng noise = streams.stream("noise");
  TrainConfig labeled_cfg = cfg;
  labeled_cfg.use_labels = true;
  const Dataset labeled = choose_labeled(data, labeled_cfg, shuffling);
  BatchSampler batches(labeled.size(), shuffling);
  const std::size_t n = std::min(cfg.batch_size, labeled.size());

  ClassifierTrainResult result{initial, {}};
  Classifier& model = result.model;
  AdamState adam = make_adam_state(model.net.params, cfg.discriminator_adam);
  double loss_value = 0.0;
  for (std::size_t step = 0; step < cfg.total_steps; ++step) {
    const Dataset b = labeled.subset(batches.next(n));
    Tape tape;
    const MlpParams bound = model.net.params.bind(tape);
    const Tensor logits = mlp_forward(bound, model.net.specs, b.features, Mode::train, &noise).output;
    const Tensor loss = scale(reduce_mean(gather(log_softmax(logits), *b.labels)), -1.0);
    loss_value = checked(loss, step, "classifier_loss");
    adam_step(model.net.params, bound.gradients(tape.backward(loss)), adam);
    if (step % cfg.log_every == 0) result.log.push_back({step, loss_value, 0.0, 0.0});
  }
  result.log.push_back({cfg.total_steps, loss_value, 0.0, 0.0});
  return result;
}

std::vector<std::size_t> predict_classes(const Tensor& probs, std::size_t num_classes) {
  if (num_classes == 0 || probs.rank() != 2 || (probs.cols() != num_classes && probs.cols() != num_classes + 1)) {
    throw Error(ErrorCode::shape, "predict_classes",
                "probabilities " + shape_to_string(probs.shape()) + " for K = " + std::to_string(num_classes));
  }
  std::vector<std::size_t> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto row = probs.row(i).first(num_classes);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// --- model files ------------------------------------------------------------------

namespace {

constexpr char kMagic[] = "NDGAN1";
constexpr std::uint32_t kVersion = 1;

void write_header(std::ostream& os, std::uint8_t kind, std::size_t k, std::size_t feature_layer) {
  os.write(kMagic, 6);
  binio::write_u32(os, kVersion);
  binio::write_u8(os, kind);
  binio::write_u32(os, static_cast<std::uint32_t>(k));
  binio::write_u32(os, static_cast<std::uint32_t>(feature_layer));
}

}  // namespace

std::string serialize_model(const GanModel& model) {
  model.validate();
  std::ostringstream os(std::ios::binary);
  write_header(os, 0, model.num_classes, model.feature_layer);
  binio::write_u32(os, static_cast<std::uint32_t>(model.z_dim));
  binio::write_u8(os, static_cast<std::uint8_t>(model.z_prior));
  write_mlp(os, model.generator);
  write_mlp(os, model.discriminator);
  return os.str();
}

std::string serialize_model(const Classifier& model) {
  model.validate();
  std::ostringstream os(std::ios::binary);
  write_header(os, 1, model.num_classes, model.feature_layer);
  write_mlp(os, model.net);
  return os.str();
}

LoadedModel deserialize_model(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  char magic[6] = {};
  is.read(magic, 6);
  if (is.gcount() != 6 || std::string(magic, 6) != kMagic) throw Error(ErrorCode::format, "model file", "bad magic (expected NDGAN1)");
  const std::uint32_t version = binio::read_u32(is);
  if (version != kVersion) throw Error(ErrorCode::format, "model file", "unsupported version " + std::to_string(version));
  const std::uint8_t kind = binio::read_u8(is);
  const std::size_t k = binio::read_u32(is);
  const std::size_t feature_layer = binio::read_u32(is);
  LoadedModel out;
  try {
    if (kind == 0) {
      GanModel m;
      m.num_classes = k;
      m.feature_layer = feature_layer;
      m.z_dim = binio::read_u32(is);
      const std::uint8_t prior = binio::read_u8(is);
      if (prior > 1) throw Error(ErrorCode::format, "model file", "bad z-prior tag");
      m.z_prior = static_cast<ZPrior>(prior);
      m.generator = read_mlp(is);
      m.discriminator = read_mlp(is);
      m.validate();
      out.gan = std::move(m);
    } else if (kind == 1) {
      Classifier c;
      c.num_classes = k;
      c.feature_layer = feature_layer;
      c.net = read_mlp(is);
      c.validate();
      out.classifier = std::move(c);
    } else {
      throw Error(ErrorCode::format, "model file", "unknown model kind " + std::to_string(kind));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::format) throw;
    throw Error(ErrorCode::format, "model file", e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::format, "model file", "trailing bytes after model");
  return out;
}

LoadedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, path, "cannot open model file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace ndgan
