#include "ndgan/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unistd.h>

#include "CLI11.hpp"
#include "ndgan/benchmark.hpp"
#include "ndgan/data.hpp"
#include "ndgan/density.hpp"
#include "ndgan/gan.hpp"
#include "ndgan/hash.hpp"
#include "ndgan/metrics.hpp"
#include "ndgan/scores.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ndgan::cli {

namespace {

void log(const std::string& msg) { std::cerr << "[ndgan] " << msg << '\n'; }

[[noreturn]] void invalid(const std::string& msg) { throw ValidationError(msg); }

// --- config access ----------------------------------------------------------------

const std::set<std::string> kCommonKeys = {"command", "seed", "output_dir"};
const std::set<std::string> kArchKeys = {"architecture", "z_dim", "z_prior", "generator_hidden",
                                         "discriminator_hidden", "noise_std", "weight_norm"};
const std::set<std::string> kTrainKeys = {"batch_size", "steps", "discriminator_steps", "labeled_fraction",
                                          "labeled_per_class", "generator_loss", "lr", "beta1", "beta2",
                                          "log_every", "probe_size"};

void check_keys(const json& cfg, std::initializer_list<const std::set<std::string>*> allowed, const std::string& where) {
  if (!cfg.is_object()) invalid(where + ": config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const auto* s) { return s->count(key) > 0; });
    if (!ok) invalid(where + ": unknown config key '" + key + "'");
  }
}

template <class T>
T get(const json& cfg, const std::string& key, T fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    invalid("config key '" + key + "' has the wrong type");
  }
}

template <class T>
T require(const json& cfg, const std::string& key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) invalid("config key '" + key + "' is required");
  return get<T>(cfg, key, T{});
}

std::size_t get_count(const json& cfg, const std::string& key, std::size_t fallback) {
  const auto v = get<long long>(cfg, key, static_cast<long long>(fallback));
  if (v < 0) invalid("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::uint64_t seed_of(const json& cfg) {
  if (!cfg.contains("seed")) invalid("a seed is required (no wall-clock default)");
  return get<std::uint64_t>(cfg, "seed", 0);
}

fs::path output_dir_of(const json& cfg) {
  if (cfg.contains("output_dir")) return get<std::string>(cfg, "output_dir", "");
  if (const char* env = std::getenv("NDGAN_OUTPUT_DIR"); env && *env) return env;
  return "ndgan-out";
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) invalid(what + " '" + path + "' does not exist");
}

// --- output -----------------------------------------------------------------------

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_, ec);
      if (ec) throw Error(ErrorCode::io, dir_.string(), "cannot create output directory: " + ec.message());
      log("created output directory " + dir_.string());
    }
    if (!fs::is_directory(dir_)) throw Error(ErrorCode::io, dir_.string(), "output path is not a directory");
  }

  std::string write(const std::string& name, const std::string& bytes) {
    const fs::path p = dir_ / name;
    write_file_atomic(p.string(), bytes);
    checksums_[name] = hex64(fnv1a64(bytes));
    log("wrote " + p.string());
    return p.string();
  }

  void manifest(const std::string& command, const json& config, std::uint64_t seed, json extra = json::object()) {
    json m{{"manifest_version", 1},
           {"command", command},
           {"code_version", kCodeVersion},
           {"seed", seed},
           {"config", config},
           {"outputs", checksums_}};
    for (auto& [k, v] : extra.items()) m[k] = v;
    write("manifest.json", m.dump(2) + "\n");
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> checksums_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// --- data sources -----------------------------------------------------------------

std::optional<std::size_t> auto_label_column(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::stringstream ss(line);
  std::string cell;
  for (std::size_t i = 0; std::getline(ss, cell, ','); ++i) {
    cell.erase(std::remove_if(cell.begin(), cell.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               cell.end());
    if (cell == "label") return i;
  }
  return std::nullopt;
}

/// Validates a data source entry and checks referenced files exist.
void validate_source(const json& src, const std::string& key) {
  if (src.is_string()) {
    require_file(src.get<std::string>(), key);
    return;
  }
  if (!src.is_object()) invalid("'" + key + "' must be a path or an object");
  static const std::set<std::string> keys = {"csv", "label_column", "idx_images", "idx_labels", "downscale_to"};
  check_keys(src, {&keys}, key);
  if (src.contains("csv") == src.contains("idx_images")) invalid("'" + key + "' needs exactly one of csv or idx_images");
  if (src.contains("csv")) require_file(get<std::string>(src, "csv", ""), key + ".csv");
  if (src.contains("idx_images")) require_file(get<std::string>(src, "idx_images", ""), key + ".idx_images");
  if (src.contains("idx_labels")) require_file(get<std::string>(src, "idx_labels", ""), key + ".idx_labels");
}

Dataset load_source(const json& src) {
  Dataset d;
  std::string path;
  if (src.is_string() || src.contains("csv")) {
    path = src.is_string() ? src.get<std::string>() : get<std::string>(src, "csv", "");
    std::optional<std::size_t> label_col = auto_label_column(path);
    if (src.is_object() && src.contains("label_column")) {
      const json& lc = src.at("label_column");
      if (lc.is_string() && lc.get<std::string>() == "none") {
        label_col.reset();
      } else if (lc.is_number_integer()) {
        const long long v = lc.get<long long>();
        if (v < 0) {
          std::ifstream in(path);
          std::string line;
          std::getline(in, line);
          label_col = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + v + 1);
        } else {
          label_col = static_cast<std::size_t>(v);
        }
      } else if (!(lc.is_string() && lc.get<std::string>() == "auto")) {
        invalid("label_column must be an integer, \"auto\" or \"none\"");
      }
    }
    d = read_csv_dataset(path, label_col).data;
  } else {
    path = get<std::string>(src, "idx_images", "");
    d = src.contains("idx_labels") ? read_idx_dataset(path, get<std::string>(src, "idx_labels", "")) : read_idx(path);
  }
  if (src.is_object() && src.contains("downscale_to")) {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d.dim()))));
    d = downscale_images(d, side, get_count(src, "downscale_to", side));
  }
  if (d.provenance.empty()) d.provenance = path;
  return d;
}

// --- architecture / training config -----------------------------------------------

GanArchitecture arch_of(const json& cfg, std::size_t data_dim, std::size_t k) {
  const std::string which = get<std::string>(cfg, "architecture", "toy");
  GanArchitecture a;
  if (which == "toy") {
    a = GanArchitecture::toy(data_dim, k);
  } else if (which == "image") {
    a = GanArchitecture::image(data_dim, k);
  } else {
    invalid("architecture must be 'toy' or 'image'");
  }
  a.z_dim = get_count(cfg, "z_dim", a.z_dim);
  a.generator_hidden = get(cfg, "generator_hidden", a.generator_hidden);
  a.discriminator_hidden = get(cfg, "discriminator_hidden", a.discriminator_hidden);
  a.discriminator_noise_std = get(cfg, "noise_std", a.discriminator_noise_std);
  a.discriminator_weight_norm = get(cfg, "weight_norm", a.discriminator_weight_norm);
  if (cfg.contains("z_prior")) a.z_prior = parse_z_prior(get<std::string>(cfg, "z_prior", ""));
  if (a.z_dim == 0 || a.discriminator_hidden.empty()) invalid("z_dim and discriminator_hidden must be non-empty");
  return a;
}

TrainConfig train_config_of(const json& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.seed = seed;
  t.batch_size = get_count(cfg, "batch_size", t.batch_size);
  t.total_steps = get_count(cfg, "steps", t.total_steps);
  t.discriminator_steps = get_count(cfg, "discriminator_steps", t.discriminator_steps);
  t.labeled_per_class = get_count(cfg, "labeled_per_class", t.labeled_per_class);
  const double fraction = get(cfg, "labeled_fraction", 1.0);
  if (fraction == 0.0 && t.labeled_per_class == 0) {
    t.use_labels = false;
  } else {
    t.labeled_fraction = fraction;
  }
  if (cfg.contains("generator_loss")) t.generator_loss = parse_generator_loss(get<std::string>(cfg, "generator_loss", ""));
  const double lr = get(cfg, "lr", t.discriminator_adam.lr);
  for (AdamConfig* a : {&t.discriminator_adam, &t.generator_adam}) {
    a->lr = lr;
    a->beta1 = get(cfg, "beta1", a->beta1);
    a->beta2 = get(cfg, "beta2", a->beta2);
  }
  t.log_every = get_count(cfg, "log_every", t.log_every);
  t.probe_size = get_count(cfg, "probe_size", t.probe_size);
  t.validate();
  return t;
}

}  // namespace

std::string file_checksum(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, path, "cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::io, path, "write failed");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::io, path, "rename failed: " + ec.message());
  }
}

// --- synth ------------------------------------------------------------------------

int cmd_synth(const json& cfg) {
  static const std::set<std::string> keys = {"n", "test_n", "components", "radius", "sigma",
                                             "novel_n", "novel_mean", "novel_sigma", "pi"};
  check_keys(cfg, {&kCommonKeys, &keys}, "synth");
  const std::uint64_t seed = seed_of(cfg);
  const std::size_t n = get_count(cfg, "n", 4000);
  const std::size_t test_n = get_count(cfg, "test_n", 1000);
  const std::size_t comps = get_count(cfg, "components", 8);
  const double radius = get(cfg, "radius", 2.0);
  const double sigma = get(cfg, "sigma", 0.2);
  const std::size_t novel_n = get_count(cfg, "novel_n", test_n);
  const auto novel_mean = get(cfg, "novel_mean", std::vector<double>{0.0, 0.0});
  const double novel_sigma = get(cfg, "novel_sigma", sigma);
  const double pi = get(cfg, "pi", 0.5);
  if (novel_mean.size() != 2) invalid("novel_mean must have 2 entries");
  if (!(novel_sigma > 0.0) || !(pi >= 0.0 && pi <= 1.0)) invalid("novel_sigma must be > 0 and pi in [0, 1]");

  Outputs out(output_dir_of(cfg));
  const RngStreams streams(seed);
  const RingMixture train = gen_ring_mixture(n, comps, radius, sigma, streams.derive_seed(seed, "synth-train"));
  const RingMixture test = gen_ring_mixture(test_n, comps, radius, sigma, streams.derive_seed(seed, "synth-test"));
  const auto novel_density = GaussianMixtureDensity::isotropic({1.0}, {novel_mean}, novel_sigma * novel_sigma);
  Rng rng = streams.stream("sampling");
  Dataset novel{novel_density.sample(novel_n, rng), std::nullopt, 0, SplitTag::test, "synth novel cluster"};

  out.write("nominal_train.csv", csv_dataset_text(train.data));
  out.write("nominal_test.csv", csv_dataset_text(test.data));
  out.write("novel_test.csv", csv_dataset_text(novel));
  const double half = radius + 5.0 * sigma;
  DensityDocument doc{1, train.density, novel_density, pi, std::vector<double>{-half, -half}, std::vector<double>{half, half}};
  out.write("density.json", density_json(doc));
  out.manifest("synth", cfg, seed);
  return static_cast<int>(Exit::ok);
}

// --- train ------------------------------------------------------------------------

int cmd_train(const json& cfg) {
  static const std::set<std::string> keys = {"data", "model", "num_classes", "holdout_class"};
  check_keys(cfg, {&kCommonKeys, &keys, &kArchKeys, &kTrainKeys}, "train");
  const std::uint64_t seed = seed_of(cfg);
  if (!cfg.contains("data")) invalid("train: 'data' is required");
  validate_source(cfg.at("data"), "data");
  const std::string kind = get<std::string>(cfg, "model", "gan");
  if (kind != "gan" && kind != "classifier") invalid("model must be 'gan' or 'classifier'");
  const TrainConfig tc = train_config_of(cfg, seed);

  Dataset data = load_source(cfg.at("data"));
  if (tc.use_labels && !data.labeled()) invalid("training data has no labels but labeled_fraction > 0");
  if (kind == "classifier" && !data.labeled()) invalid("a classifier needs labelled data");
  if (cfg.contains("holdout_class")) {
    if (!data.labeled()) invalid("holdout_class needs labelled data");
    const std::size_t h = get_count(cfg, "holdout_class", 0);
    if (h >= data.num_classes) invalid("holdout_class is not a class of the data");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if ((*data.labels)[i] != h) rows.push_back(i);
    data = data.subset(rows);
    for (auto& l : *data.labels) l -= l > h ? 1 : 0;
    data.num_classes -= 1;
  }
  const std::size_t k = data.labeled() ? data.num_classes : get_count(cfg, "num_classes", 1);
  const GanArchitecture arch = arch_of(cfg, data.dim(), k);
  Outputs out(output_dir_of(cfg));
  Rng init = RngStreams(seed).stream("init");

  log("training " + kind + " on " + std::to_string(data.size()) + " rows, K = " + std::to_string(k) + ", " +
      std::to_string(tc.total_steps) + " steps, generator loss " + to_string(tc.generator_loss));
  std::string model_bytes, log_csv;
  if (kind == "gan") {
    const TrainResult r = train_gan(make_gan(arch, init), data, tc);
    model_bytes = serialize_model(r.model);
    log_csv = training_log_csv(r.log);
  } else {
    const ClassifierTrainResult r = train_classifier(make_classifier(arch, init), data, tc);
    model_bytes = serialize_model(r.model);
    log_csv = training_log_csv(r.log);
  }
  out.write("model.ndgan", model_bytes);
  out.write("train_log.csv", log_csv);
  out.manifest("train", cfg, seed, {{"generator_loss", to_string(tc.generator_loss)}, {"data_provenance", data.provenance}});
  return static_cast<int>(Exit::ok);
}

// --- score ------------------------------------------------------------------------

int cmd_score(const json& cfg) {
  static const std::set<std::string> keys = {"model", "data", "novel_data", "reference", "scorers", "knn_k"};
  check_keys(cfg, {&kCommonKeys, &keys}, "score");
  const std::uint64_t seed = cfg.contains("seed") ? seed_of(cfg) : 0;
  const std::string model_path = require<std::string>(cfg, "model");
  require_file(model_path, "model");
  if (!cfg.contains("data")) invalid("score: 'data' is required");
  validate_source(cfg.at("data"), "data");
  if (cfg.contains("novel_data")) validate_source(cfg.at("novel_data"), "novel_data");
  const auto names = get(cfg, "scorers", std::vector<std::string>{"nd-gan-ratio"});
  std::vector<ScoreKind> kinds;
  for (const auto& s : names) {
    try {
      kinds.push_back(parse_score_kind(s));
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
  const std::size_t knn_k = get_count(cfg, "knn_k", 5);
  const bool wants_knn = std::find(kinds.begin(), kinds.end(), ScoreKind::knn) != kinds.end();
  if (wants_knn && !cfg.contains("reference")) invalid("the knn scorer needs a reference set (--reference)");
  if (cfg.contains("reference")) validate_source(cfg.at("reference"), "reference");

  LoadedModel m = load_model(model_path);
  std::shared_ptr<const GanModel> gan = m.gan ? std::make_shared<const GanModel>(std::move(*m.gan)) : nullptr;
  std::shared_ptr<const Classifier> clf =
      m.classifier ? std::make_shared<const Classifier>(std::move(*m.classifier)) : nullptr;
  const std::size_t model_dim = gan ? gan->data_dim() : clf->data_dim();
  const std::size_t k = gan ? gan->num_classes : clf->num_classes;

  Dataset data = load_source(cfg.at("data"));
  std::optional<Dataset> novel;
  if (cfg.contains("novel_data")) novel = load_source(cfg.at("novel_data"));
  for (const Dataset* d : {&data, novel ? &*novel : nullptr}) {
    if (d && d->dim() != model_dim) {
      invalid("feature dimension mismatch: data has " + std::to_string(d->dim()) + " columns, model expects " +
              std::to_string(model_dim));
    }
  }

  std::vector<NoveltyScorer> scorers;
  for (ScoreKind kind : kinds) {
    if (kind == ScoreKind::knn) {
      const Dataset ref = load_source(cfg.at("reference"));
      if (ref.dim() != model_dim) invalid("reference dimension differs from the model");
      scorers.push_back(make_knn_scorer(knn_k, ref.features, gan, gan ? nullptr : clf));
    } else if (gan) {
      scorers.push_back(make_gan_scorer(kind, gan));
    } else if (kind == ScoreKind::entropy || kind == ScoreKind::max_prob) {
      scorers.push_back(make_classifier_scorer(kind, clf));
    } else {
      invalid(std::string("scorer ") + to_string(kind) + " needs a GAN model");
    }
  }

  Outputs out(output_dir_of(cfg));
  std::ostringstream os;
  os.precision(17);
  os << "example_id,predicted_class,fake_prob";
  for (const auto& s : scorers) os << ',' << s.name();
  os << ",is_novel\n";
  std::size_t id = 0;
  const auto emit = [&](const Dataset& d, std::optional<bool> truth) {
    const Tensor probs = gan ? discriminator_probs(*gan, d.features) : classifier_probs(*clf, d.features);
    const auto cls = predict_classes(probs, k);
    std::vector<std::vector<double>> cols;
    for (const auto& s : scorers) cols.push_back(s.score(d.features));
    for (std::size_t i = 0; i < d.size(); ++i) {
      os << id++ << ',' << cls[i] << ',';
      if (gan) os << probs.at(i, k);
      for (const auto& c : cols) os << ',' << c[i];
      os << ',';
      if (truth) os << (*truth ? 1 : 0);
      os << '\n';
    }
  };
  emit(data, novel ? std::optional<bool>(false) : std::nullopt);
  if (novel) emit(*novel, true);
  out.write("scores.csv", os.str());
  out.manifest("score", cfg, seed);
  return static_cast<int>(Exit::ok);
}

// --- eval -------------------------------------------------------------------------

namespace {

struct ScoresFile {
  std::vector<std::string> columns;  // score column names
  std::vector<std::vector<double>> values;
  std::vector<bool> novel;
};

ScoresFile read_scores_file(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::format, path, "empty scores file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  const auto truth_it = std::find(header.begin(), header.end(), "is_novel");
  if (truth_it == header.end()) invalid(path + ": no is_novel ground-truth column");
  const std::size_t truth_col = static_cast<std::size_t>(truth_it - header.begin());
  ScoresFile f;
  std::vector<std::size_t> idx;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == "example_id" || header[j] == "predicted_class" || j == truth_col) continue;
    f.columns.push_back(header[j]);
    idx.push_back(j);
  }
  f.values.resize(idx.size());
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == header.size() - 1 && line.back() == ',') cells.emplace_back();
    if (cells.size() != header.size())
      throw Error(ErrorCode::format, path, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells");
    const std::string& t = cells[truth_col];
    if (t != "0" && t != "1") invalid(path + ": row " + std::to_string(row) + " has no ground truth");
    f.novel.push_back(t == "1");
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const std::string& s = cells[idx[c]];
      try {
        std::size_t used = 0;
        const double v = s.empty() ? std::nan("") : std::stod(s, &used);
        f.values[c].push_back(v);
      } catch (const std::exception&) {
        throw Error(ErrorCode::format, path, "row " + std::to_string(row) + ", column " + header[idx[c]] + ": not a number");
      }
    }
  }
  // Blank columns (e.g. fake_prob for classifiers) are dropped.
  for (std::size_t c = f.columns.size(); c-- > 0;) {
    if (std::all_of(f.values[c].begin(), f.values[c].end(), [](double v) { return std::isnan(v); })) {
      f.columns.erase(f.columns.begin() + static_cast<std::ptrdiff_t>(c));
      f.values.erase(f.values.begin() + static_cast<std::ptrdiff_t>(c));
    }
  }
  return f;
}

std::string roc_csv(const RocCurve& roc) {
  std::ostringstream os;
  write_roc_csv(os, roc);
  return os.str();
}

void log_reference_header() {
  std::ostringstream os;
  os << "reference (full-scale MNIST holdout means):";
  for (const auto& r : kReferenceMeans) os << ' ' << r.scorer << '=' << r.mean_auroc;
  os << ", nd-gan-ratio holdout-0 = " << kReferenceHoldout0NdGan;
  log(os.str());
}

int eval_scores(const json& cfg, Outputs& out, std::uint64_t seed) {
  const auto files = get(cfg, "scores", std::vector<std::string>{});
  if (files.empty()) invalid("eval: 'scores' lists no files");
  for (const auto& f : files) require_file(f, "scores file");
  const auto alphas = get(cfg, "alphas", std::vector<double>{0.05, 0.10});
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) invalid("alphas must lie in (0, 1)");

  BenchmarkTable table;
  json thresholds = json::array();
  for (const auto& file : files) {
    const ScoresFile sf = read_scores_file(file);
    const std::string split = fs::path(file).stem().string();
    for (std::size_t c = 0; c < sf.columns.size(); ++c) {
      std::vector<double> nominal, novel;
      for (std::size_t i = 0; i < sf.novel.size(); ++i) (sf.novel[i] ? novel : nominal).push_back(sf.values[c][i]);
      BenchmarkRow row{sf.columns[c], split, 0.0, 0.0, 0.0, roc_auroc(nominal, novel)};
      row.auroc = row.roc.auroc;
      row.tpr_at_005 = row.roc.tpr_at_fpr(0.05);
      row.tpr_at_010 = row.roc.tpr_at_fpr(0.10);
      for (double a : alphas) {
        const double t = threshold_at_fpr(nominal, a);
        thresholds.push_back({{"scorer", row.scorer},
                              {"split", split},
                              {"alpha", a},
                              {"threshold", t},
                              {"fpr", exceedance_rate(nominal, t)},
                              {"tpr", exceedance_rate(novel, t)}});
      }
      out.write("roc_" + row.scorer + "_" + split + ".csv", roc_csv(row.roc));
      log(row.scorer + " on " + split + ": auroc " + fmt(row.auroc));
      table.rows.push_back(std::move(row));
    }
  }
  json metrics = metrics_json(table);
  metrics["thresholds"] = thresholds;
  out.write("metrics.csv", metrics_csv(table));
  out.write("metrics.json", metrics.dump(2) + "\n");
  out.manifest("eval", cfg, seed);
  return static_cast<int>(Exit::ok);
}

int eval_holdout(const json& cfg, Outputs& out, std::uint64_t seed) {
  if (!cfg.contains("train") || !cfg.contains("test")) invalid("holdout eval needs 'train' and 'test' data");
  validate_source(cfg.at("train"), "train");
  validate_source(cfg.at("test"), "test");
  std::vector<ScoreKind> kinds;
  for (const auto& s : get(cfg, "scorers", std::vector<std::string>{"nd-gan-ratio", "entropy", "max-prob", "knn"})) {
    try {
      kinds.push_back(parse_score_kind(s));
    } catch (const Error& e) {
      invalid(e.what());
    }
  }
  const TrainConfig tc = train_config_of(cfg, seed);
  const std::size_t knn_k = get_count(cfg, "knn_k", 5);
  const std::size_t knn_ref = get_count(cfg, "knn_reference", 5000);
  const bool baseline = get(cfg, "classifier_baseline", true);

  const Dataset train = load_source(cfg.at("train"));
  const Dataset test = load_source(cfg.at("test"));
  if (!train.labeled() || !test.labeled()) invalid("holdout eval needs labelled train and test data");
  const std::size_t k = std::max(train.num_classes, test.num_classes);
  std::vector<std::size_t> classes;
  if (cfg.contains("classes")) {
    classes = get(cfg, "classes", classes);
  } else {
    for (std::size_t c = 0; c < k; ++c) classes.push_back(c);
  }
  for (std::size_t c : classes)
    if (c >= k) invalid("holdout class " + std::to_string(c) + " is not a class of the data");
  const GanArchitecture arch = arch_of(cfg, train.dim(), k - 1);

  log_reference_header();
  std::vector<BenchmarkCase> cases;
  for (std::size_t c : classes) {
    const HoldoutSplit split = make_holdout_split(train, test, c, seed);
    log("split " + split.name() + ": train " + std::to_string(split.train.size()) + ", nominal " +
        std::to_string(split.eval_nominal.rows()) + ", novel " + std::to_string(split.eval_novel.rows()));
    const SplitModels models = train_split_models(split, arch, tc, baseline);
    cases.push_back({split.name(), split.fingerprint, split.eval_nominal, split.eval_novel,
                     make_split_scorers(split, models, kinds, knn_k, knn_ref)});
  }
  const BenchmarkTable table = run_benchmark(cases);
  for (const auto& r : table.rows) {
    log(r.scorer + " " + r.split + ": auroc " + fmt(r.auroc));
    if (r.split != "mean") out.write("roc_" + r.scorer + "_" + r.split + ".csv", roc_csv(r.roc));
  }
  out.write("metrics.csv", metrics_csv(table));
  out.write("metrics.json", metrics_json(table).dump(2) + "\n");
  out.manifest("eval", cfg, seed);
  return static_cast<int>(Exit::ok);
}

}  // namespace

int cmd_eval(const json& cfg) {
  static const std::set<std::string> keys = {"mode", "scores", "alphas", "train", "test", "classes", "scorers",
                                             "knn_k", "knn_reference", "classifier_baseline"};
  check_keys(cfg, {&kCommonKeys, &keys, &kArchKeys, &kTrainKeys}, "eval");
  const std::string mode = get<std::string>(cfg, "mode", "scores");
  if (mode == "scores") {
    const std::uint64_t seed = cfg.contains("seed") ? seed_of(cfg) : 0;
    for (const auto* k : {&kArchKeys, &kTrainKeys})
      for (const auto& key : *k)
        if (cfg.contains(key)) invalid("eval: '" + key + "' only applies to holdout mode");
    Outputs out(output_dir_of(cfg));
    return eval_scores(cfg, out, seed);
  }
  if (mode == "holdout") {
    const std::uint64_t seed = seed_of(cfg);
    Outputs out(output_dir_of(cfg));
    return eval_holdout(cfg, out, seed);
  }
  invalid("eval mode must be 'scores' or 'holdout'");
}

// --- oracle -----------------------------------------------------------------------

int cmd_oracle(const json& cfg) {
  static const std::set<std::string> keys = {"density", "checks", "points", "mc_samples", "tolerance", "auroc_tolerance"};
  check_keys(cfg, {&kCommonKeys, &keys}, "oracle");
  const std::string path = require<std::string>(cfg, "density");
  require_file(path, "density");
  const std::uint64_t seed = cfg.contains("seed") ? seed_of(cfg) : 0;
  const auto checks = get(cfg, "checks", std::vector<std::string>{"identity", "grid", "lr-auroc"});
  for (const auto& c : checks)
    if (c != "identity" && c != "grid" && c != "lr-auroc") invalid("unknown oracle check '" + c + "'");
  const std::size_t points = get_count(cfg, "points", 10000);
  const std::size_t mc = get_count(cfg, "mc_samples", 20000);
  const double tol = get(cfg, "tolerance", 1e-12);
  const double auroc_tol = get(cfg, "auroc_tolerance", 0.01);

  const DensityDocument doc = parse_density_json(read_file(path));
  const GaussianMixtureDensity novel = doc.novel ? *doc.novel : doc.data;
  const MixtureSpec spec{doc.novel ? doc.pi : 0.0, novel, doc.data};
  spec.validate();

  const std::size_t d = doc.data.dim();
  std::vector<double> lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = std::numeric_limits<double>::infinity();
    hi[j] = -lo[j];
    for (const auto* m : {&doc.data, &novel}) {
      for (std::size_t c = 0; c < m->components(); ++c) {
        const double s = 4.0 * std::sqrt(m->variances[c][j]);
        lo[j] = std::min(lo[j], m->means[c][j] - s);
        hi[j] = std::max(hi[j], m->means[c][j] + s);
      }
    }
  }
  if (doc.lower) lo = *doc.lower;
  if (doc.upper) hi = *doc.upper;
  const auto per_dim = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(std::max<std::size_t>(points, 1)), 1.0 / static_cast<double>(d)) - 1e-9));
  const GridDensity grid = discretize(as_density(doc.data), lo, hi, std::vector<std::size_t>(d, per_dim), false);
  const Tensor x = grid.centers();

  Outputs out(output_dir_of(cfg));
  json report{{"density", path}, {"pi", spec.pi}, {"grid_points", x.rows()}};
  bool pass = true;
  if (std::find(checks.begin(), checks.end(), "identity") != checks.end()) {
    const IdentityReport r = verify_mixture_identity(spec, x);
    const bool ok = r.max_residual < tol && r.max_ratio_residual < tol;
    pass = pass && ok;
    report["identity"] = {{"max_residual", r.max_residual},
                          {"max_abs_residual", r.max_abs_residual},
                          {"max_ratio_residual", r.max_ratio_residual},
                          {"evaluated", r.evaluated},
                          {"excluded", r.excluded.size()},
                          {"tolerance", tol},
                          {"pass", ok}};
    log("identity residual " + fmt(r.max_residual) + (ok ? " (ok)" : " (exceeds tolerance)"));
  }
  if (std::find(checks.begin(), checks.end(), "grid") != checks.end()) {
    const DensityFn p_data = as_density(doc.data);
    const DensityFn p_g = as_density(spec);
    const auto dstar = optimal_discriminator(p_data, p_g, x);
    std::ostringstream os;
    os.precision(17);
    for (std::size_t j = 0; j < d; ++j) os << 'x' << j << ',';
    os << "p_data,p_g,d_star\n";
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (double v : x.row(i)) os << v << ',';
      os << p_data(x.row(i)) << ',' << p_g(x.row(i)) << ',' << dstar[i] << '\n';
    }
    out.write("d_star_grid.csv", os.str());
  }
  if (std::find(checks.begin(), checks.end(), "lr-auroc") != checks.end() && doc.novel) {
    Rng rng = RngStreams(seed).stream("sampling");
    const Tensor nom = doc.data.sample(mc, rng);
    const Tensor nov = novel.sample(mc, rng);
    const DensityFn pd = as_density(doc.data), pn = as_density(novel);
    const double auroc = roc_auroc(likelihood_ratio_score(pd, pn, nom), likelihood_ratio_score(pd, pn, nov)).auroc;
    json lr{{"mc_samples", mc}, {"auroc", auroc}};
    // Closed form exists for two single Gaussians with one shared isotropic variance.
    bool closed = doc.data.components() == 1 && novel.components() == 1;
    double var = closed ? doc.data.variances[0][0] : 0.0;
    for (std::size_t j = 0; closed && j < d; ++j) closed = doc.data.variances[0][j] == var && novel.variances[0][j] == var;
    if (closed) {
      double gap = 0.0;
      for (std::size_t j = 0; j < d; ++j) gap += std::pow(doc.data.means[0][j] - novel.means[0][j], 2);
      const double expected = gaussian_lr_auroc(std::sqrt(gap / var));
      const bool ok = std::abs(auroc - expected) <= auroc_tol;
      pass = pass && ok;
      lr["closed_form"] = expected;
      lr["tolerance"] = auroc_tol;
      lr["pass"] = ok;
      log("LR detector auroc " + fmt(auroc) + " vs closed form " + fmt(expected) + (ok ? " (ok)" : " (outside tolerance)"));
    } else {
      log("LR detector auroc " + fmt(auroc) + " (no closed form for this spec)");
    }
    report["lr_auroc"] = lr;
  }
  report["pass"] = pass;
  out.write("oracle_report.json", report.dump(2) + "\n");
  out.manifest("oracle", cfg, seed);
  return static_cast<int>(pass ? Exit::ok : Exit::tolerance);
}

// --- argv -------------------------------------------------------------------------

namespace {

enum class FlagType { integer, number, text, list, numbers };

struct Flag {
  std::string name;
  std::string key;
  FlagType type;
  std::string help;
};

json convert(const std::string& raw, FlagType type, const std::string& name) {
  try {
    switch (type) {
      case FlagType::integer: {
        std::size_t used = 0;
        const long long v = std::stoll(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case FlagType::number: {
        std::size_t used = 0;
        const double v = std::stod(raw, &used);
        if (used != raw.size()) break;
        return v;
      }
      case FlagType::text:
        return raw;
      case FlagType::list:
      case FlagType::numbers: {
        json arr = json::array();
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ','))
          arr.push_back(type == FlagType::list ? json(item) : convert(item, FlagType::number, name));
        return arr;
      }
    }
  } catch (const std::exception&) {
  }
  invalid("flag " + name + ": cannot parse '" + raw + "'");
}

json load_config_file(const std::string& path) {
  require_file(path, "config");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    invalid("config " + path + ": " + e.what());
  }
  // A manifest replays its recorded config.
  if (j.is_object() && j.contains("manifest_version")) {
    if (!j.contains("config")) invalid("manifest " + path + " has no config");
    return j.at("config");
  }
  return j;
}

using Command = int (*)(const json&);

struct Sub {
  const char* name;
  const char* help;
  Command run;
  std::vector<Flag> flags;
};

std::vector<Sub> subcommands() {
  return {
      {"synth", "Write a ring-mixture benchmark dataset and its density", cmd_synth,
       {{"--n", "n", FlagType::integer, "training rows"},
        {"--test-n", "test_n", FlagType::integer, "test rows"},
        {"--components", "components", FlagType::integer, "ring components"},
        {"--radius", "radius", FlagType::number, "ring radius"},
        {"--sigma", "sigma", FlagType::number, "component standard deviation"}}},
      {"train", "Train a GAN or baseline classifier", cmd_train,
       {{"--data", "data", FlagType::text, "training CSV"},
        {"--model-type", "model", FlagType::text, "gan or classifier"},
        {"--architecture", "architecture", FlagType::text, "toy or image"},
        {"--steps", "steps", FlagType::integer, "training steps"},
        {"--batch-size", "batch_size", FlagType::integer, "batch size"},
        {"--generator-loss", "generator_loss", FlagType::text, "standard or feature_matching"},
        {"--labeled-fraction", "labeled_fraction", FlagType::number, "fraction of labelled rows per class"},
        {"--labeled-per-class", "labeled_per_class", FlagType::integer, "labelled rows per class"},
        {"--lr", "lr", FlagType::number, "Adam learning rate"}}},
      {"score", "Score a dataset with a trained model", cmd_score,
       {{"--model", "model", FlagType::text, "model file"},
        {"--data", "data", FlagType::text, "data CSV"},
        {"--novel-data", "novel_data", FlagType::text, "rows known to be novel"},
        {"--reference", "reference", FlagType::text, "nominal reference set for knn"},
        {"--scorers", "scorers", FlagType::list, "comma list of scorers"},
        {"--knn-k", "knn_k", FlagType::integer, "k for knn"}}},
      {"eval", "ROC/AUROC metrics from scores or a holdout run", cmd_eval,
       {{"--mode", "mode", FlagType::text, "scores or holdout"},
        {"--scores", "scores", FlagType::list, "comma list of scores CSVs"},
        {"--alphas", "alphas", FlagType::numbers, "comma list of false positive rates"},
        {"--steps", "steps", FlagType::integer, "training steps per split"}}},
      {"oracle", "Verify density identities and the likelihood-ratio detector", cmd_oracle,
       {{"--density", "density", FlagType::text, "density JSON"},
        {"--points", "points", FlagType::integer, "grid points"},
        {"--mc-samples", "mc_samples", FlagType::integer, "Monte Carlo samples per class"},
        {"--tolerance", "tolerance", FlagType::number, "identity residual tolerance"}}},
  };
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"GAN-based classification and novelty detection", "ndgan"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kCodeVersion);
  const auto subs = subcommands();
  struct Bound {
    std::string config, output_dir, seed;
    std::vector<std::string> values;
  };
  std::vector<Bound> bound(subs.size());
  std::vector<CLI::App*> apps;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].name, subs[i].help);
    sub->add_option("--config", bound[i].config, "JSON config or manifest");
    sub->add_option("--output-dir", bound[i].output_dir, "output directory (default $NDGAN_OUTPUT_DIR)");
    sub->add_option("--seed", bound[i].seed, "master seed");
    bound[i].values.resize(subs[i].flags.size());
    for (std::size_t f = 0; f < subs[i].flags.size(); ++f)
      sub->add_option(subs[i].flags[f].name, bound[i].values[f], subs[i].flags[f].help);
    apps.push_back(sub);
  }

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(Exit::validation);
  }

  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (!apps[i]->parsed()) continue;
      json cfg = bound[i].config.empty() ? json::object() : load_config_file(bound[i].config);
      if (!cfg.is_object()) invalid("config must be a JSON object");
      if (cfg.contains("command") && cfg.at("command") != subs[i].name)
        invalid(std::string("config is for '") + cfg.at("command").dump() + "', not '" + subs[i].name + "'");
      if (!bound[i].output_dir.empty()) cfg["output_dir"] = bound[i].output_dir;
      if (!bound[i].seed.empty()) cfg["seed"] = convert(bound[i].seed, FlagType::integer, "--seed");
      for (std::size_t f = 0; f < subs[i].flags.size(); ++f) {
        if (apps[i]->count(subs[i].flags[f].name) == 0) continue;
        cfg[subs[i].flags[f].key] = convert(bound[i].values[f], subs[i].flags[f].type, subs[i].flags[f].name);
      }
      cfg["command"] = subs[i].name;
      return subs[i].run(cfg);
    }
  } catch (const ValidationError& e) {
    log(std::string("validation error: ") + e.what());
    return static_cast<int>(Exit::validation);
  } catch (const Error& e) {
    const bool runtime = e.code() == ErrorCode::non_finite || e.code() == ErrorCode::io;
    log(std::string(runtime ? "runtime error" : "validation error") + " [" + to_string(e.code()) + "]: " + e.what());
    return static_cast<int>(runtime ? Exit::runtime : Exit::validation);
  } catch (const std::exception& e) {
    log(std::string("runtime error: ") + e.what());
    return static_cast<int>(Exit::runtime);
  }
  return static_cast<int>(Exit::validation);
}

int main(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace ndgan::cli
