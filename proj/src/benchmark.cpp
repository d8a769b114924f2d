#include "ndgan/benchmark.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "ndgan/hash.hpp"

namespace ndgan {

std::uint64_t dataset_fingerprint(const Dataset& d) {
  std::uint64_t h = fnv1a64(shape_to_string(d.features.shape()));
  h = fnv1a64(d.features.values(), h);
  if (d.labels) {
    for (std::size_t l : *d.labels) h = fnv1a64(std::to_string(l) + ",", h);
  }
  return h;
}

namespace {

std::vector<std::size_t> rows_where(const Dataset& d, const std::function<bool(std::size_t)>& keep) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (keep((*d.labels)[i])) out.push_back(i);
  return out;
}

}  // namespace

HoldoutSplit make_holdout_split(const Dataset& train, const Dataset& test, std::size_t holdout, std::uint64_t seed) {
  const char* where = "make_holdout_split";
  if (!train.labeled() || !test.labeled()) throw Error(ErrorCode::invalid_argument, where, "train and test sets need labels");
  if (train.dim() != test.dim()) throw Error(ErrorCode::shape, where, "train and test dimensions differ");
  const std::size_t k = std::max(train.num_classes, test.num_classes);
  if (k < 2) throw Error(ErrorCode::invalid_argument, where, "need at least two classes");
  if (holdout >= k) throw Error(ErrorCode::invalid_argument, where, "holdout class " + std::to_string(holdout) + " >= K");
  const auto train_hist = train.class_histogram();
  const auto test_hist = test.class_histogram();
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t a = c < train_hist.size() ? train_hist[c] : 0;
    const std::size_t b = c < test_hist.size() ? test_hist[c] : 0;
    if (a == 0 || b == 0) {
      throw Error(ErrorCode::invalid_argument, where,
                  "class " + std::to_string(c) + " is absent from the " + (a == 0 ? "train" : "test") + " set");
    }
  }

  HoldoutSplit s;
  s.holdout_class = holdout;
  std::vector<std::size_t> remap(k, 0);
  for (std::size_t c = 0; c < k; ++c) {
    if (c == holdout) continue;
    remap[c] = s.original_label.size();
    s.original_label.push_back(c);
  }
  s.train = train.subset(rows_where(train, [&](std::size_t l) { return l != holdout; }));
  for (auto& l : *s.train.labels) l = remap[l];
  s.train.num_classes = k - 1;
  s.train.provenance = train.provenance + " without class " + std::to_string(holdout);

  Rng rng = RngStreams(seed).stream("shuffling", holdout);
  auto nominal = rows_where(test, [&](std::size_t l) { return l != holdout; });
  auto novel_test = rows_where(test, [&](std::size_t l) { return l == holdout; });
  auto novel_train = rows_where(train, [&](std::size_t l) { return l == holdout; });
  std::shuffle(novel_test.begin(), novel_test.end(), rng);
  std::shuffle(novel_train.begin(), novel_train.end(), rng);
  const std::size_t n = std::min(nominal.size(), novel_test.size() + novel_train.size());
  if (nominal.size() > n) {
    std::shuffle(nominal.begin(), nominal.end(), rng);
    nominal.resize(n);
    std::sort(nominal.begin(), nominal.end());
  }
  s.eval_nominal = test.subset(nominal).features;
  const std::size_t from_test = std::min(n, novel_test.size());
  novel_test.resize(from_test);
  novel_train.resize(n - from_test);
  const Dataset pools[] = {test.subset(novel_test), train.subset(novel_train)};
  s.eval_novel = concat_datasets(pools).features;
  s.fingerprint = dataset_fingerprint(s.train);
  return s;
}

std::vector<HoldoutSplit> make_holdout_splits(const Dataset& train, const Dataset& test, std::size_t num_classes,
                                              std::uint64_t seed) {
  std::vector<HoldoutSplit> out;
  out.reserve(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) out.push_back(make_holdout_split(train, test, c, seed));
  return out;
}

BenchmarkTable run_benchmark(const std::vector<BenchmarkCase>& cases) {
  BenchmarkTable table;
  std::vector<std::string> order;
  for (const auto& c : cases) {
    for (const auto& scorer : c.scorers) {
      if (c.fingerprint != 0 && scorer.trained_on != c.fingerprint) {
        throw Error(ErrorCode::invalid_argument, "run_benchmark",
                    "scorer " + scorer.name() + " was not trained on split " + c.split);
      }
      const auto nominal = scorer.score(c.nominal);
      const auto novel = scorer.score(c.novel);
      BenchmarkRow row{scorer.name(), c.split, 0.0, 0.0, 0.0, roc_auroc(nominal, novel)};
      row.auroc = row.roc.auroc;
      row.tpr_at_005 = row.roc.tpr_at_fpr(0.05);
      row.tpr_at_010 = row.roc.tpr_at_fpr(0.10);
      table.rows.push_back(std::move(row));
      if (std::find(order.begin(), order.end(), scorer.name()) == order.end()) order.push_back(scorer.name());
    }
  }
  std::map<std::string, std::array<double, 4>> sums;  // auroc, tpr05, tpr10, count
  for (const auto& r : table.rows) {
    auto& s = sums[r.scorer];
    s[0] += r.auroc;
    s[1] += r.tpr_at_005;
    s[2] += r.tpr_at_010;
    s[3] += 1.0;
  }
  for (const auto& name : order) {
    const auto& s = sums[name];
    table.rows.push_back({name, "mean", s[0] / s[3], s[1] / s[3], s[2] / s[3], {}});
  }
  return table;
}

std::string metrics_csv(const BenchmarkTable& table) {
  std::ostringstream os;
  os.precision(17);
  os << "scorer,split,auroc,tpr@fpr0.05,tpr@fpr0.10\n";
  for (const auto& r : table.rows)
    os << r.scorer << ',' << r.split << ',' << r.auroc << ',' << r.tpr_at_005 << ',' << r.tpr_at_010 << '\n';
  return os.str();
}

nlohmann::json metrics_json(const BenchmarkTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"scorer", r.scorer},
                    {"split", r.split},
                    {"auroc", r.auroc},
                    {"tpr@fpr0.05", r.tpr_at_005},
                    {"tpr@fpr0.10", r.tpr_at_010}});
  }
  nlohmann::json ref = nlohmann::json::array();
  for (const auto& r : kReferenceMeans) ref.push_back({{"scorer", r.scorer}, {"split", "mean"}, {"auroc", r.mean_auroc}});
  ref.push_back({{"scorer", "nd-gan-ratio"}, {"split", "holdout-0"}, {"auroc", kReferenceHoldout0NdGan}});
  return {{"rows", rows}, {"reference_full_scale_mnist", ref}};
}

SplitModels train_split_models(const HoldoutSplit& split, const GanArchitecture& arch, const TrainConfig& config,
                               bool with_classifier) {
  GanArchitecture a = arch;
  a.num_classes = split.train.num_classes;
  a.data_dim = split.train.dim();
  TrainConfig cfg = config;
  cfg.seed = RngStreams::derive_seed(config.seed, "split", split.holdout_class);
  Rng init = RngStreams(cfg.seed).stream("init");
  SplitModels m;
  m.gan = std::make_shared<const GanModel>(train_gan(make_gan(a, init), split.train, cfg).model);
  if (with_classifier) {
    Rng cinit = RngStreams(cfg.seed).stream("init", 1);
    m.classifier = std::make_shared<const Classifier>(train_classifier(make_classifier(a, cinit), split.train, cfg).model);
  }
  return m;
}

std::vector<NoveltyScorer> make_split_scorers(const HoldoutSplit& split, const SplitModels& models,
                                              const std::vector<ScoreKind>& kinds, std::size_t knn_k,
                                              std::size_t knn_reference) {
  std::vector<NoveltyScorer> out;
  for (ScoreKind kind : kinds) {
    NoveltyScorer s;
    switch (kind) {
      case ScoreKind::nd_gan_ratio:
      case ScoreKind::fake_prob:
        s = make_gan_scorer(kind, models.gan);
        break;
      case ScoreKind::entropy:
      case ScoreKind::max_prob:
        s = models.classifier ? make_classifier_scorer(kind, models.classifier) : make_gan_scorer(kind, models.gan);
        break;
      case ScoreKind::knn: {
        std::vector<std::size_t> rows(split.train.size());
        std::iota(rows.begin(), rows.end(), 0);
        Rng rng(split.fingerprint);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(std::min(knn_reference, rows.size()));
        const Tensor ref = split.train.subset(rows).features;
        s = models.classifier ? make_knn_scorer(knn_k, ref, nullptr, models.classifier)
                              : make_knn_scorer(knn_k, ref, models.gan);
        break;
      }
    }
    s.trained_on = split.fingerprint;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ndgan
