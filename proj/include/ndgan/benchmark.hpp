#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ndgan/data.hpp"
#include "ndgan/gan.hpp"
#include "ndgan/metrics.hpp"
#include "ndgan/scores.hpp"

namespace ndgan {

/// Train on K-1 classes, treat the held-out class as novel.
struct HoldoutSplit {
  std::size_t holdout_class = 0;
  Dataset train;                            // labels remapped to 0..K-2
  std::vector<std::size_t> original_label;  // original_label[new] = old
  Tensor eval_nominal;
  Tensor eval_novel;
  std::uint64_t fingerprint = 0;

  std::string name() const { return "holdout-" + std::to_string(holdout_class); }
};

std::uint64_t dataset_fingerprint(const Dataset& d);

/// One split per class. Nominal evaluation rows are the test rows of the other
/// classes; novel rows come from the held-out class's test pool first, then its
/// train pool, each shuffled with the seed. Both sides are cut to the same count.
std::vector<HoldoutSplit> make_holdout_splits(const Dataset& train, const Dataset& test, std::size_t num_classes,
                                              std::uint64_t seed);
HoldoutSplit make_holdout_split(const Dataset& train, const Dataset& test, std::size_t holdout_class,
                                std::uint64_t seed);

struct BenchmarkCase {
  std::string split;
  std::uint64_t fingerprint = 0;  // 0 skips the scorer check
  Tensor nominal;
  Tensor novel;
  std::vector<NoveltyScorer> scorers;
};

struct BenchmarkRow {
  std::string scorer;
  std::string split;
  double auroc = 0.0;
  double tpr_at_005 = 0.0;
  double tpr_at_010 = 0.0;
  RocCurve roc;  // empty for mean rows
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;  // per split, then one "mean" row per scorer
};

BenchmarkTable run_benchmark(const std::vector<BenchmarkCase>& cases);

/// scorer,split,auroc,tpr@fpr0.05,tpr@fpr0.10
std::string metrics_csv(const BenchmarkTable& table);
nlohmann::json metrics_json(const BenchmarkTable& table);

struct ReferenceRow {
  const char* scorer;
  double mean_auroc;
};

/// Full-scale MNIST holdout means, for side-by-side reporting only.
inline constexpr ReferenceRow kReferenceMeans[] = {{"nd-gan-ratio", 0.971}, {"entropy", 0.964}, {"5-nn", 0.924}};
inline constexpr double kReferenceHoldout0NdGan = 0.992;

struct SplitModels {
  std::shared_ptr<const GanModel> gan;
  std::shared_ptr<const Classifier> classifier;
};

/// Trains a GAN (and optionally a baseline classifier) on the split's train set.
SplitModels train_split_models(const HoldoutSplit& split, const GanArchitecture& arch, const TrainConfig& config,
                               bool with_classifier);

/// Scorers over the split's models, stamped with the split fingerprint. knn
/// uses the GAN features of the split's training rows (at most knn_reference of them).
std::vector<NoveltyScorer> make_split_scorers(const HoldoutSplit& split, const SplitModels& models,
                                              const std::vector<ScoreKind>& kinds, std::size_t knn_k,
                                              std::size_t knn_reference = 5000);

}  // namespace ndgan
