#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ndgan/density.hpp"
#include "ndgan/gan.hpp"
#include "ndgan/metrics.hpp"

namespace ndgan {

// Every score reads "higher = more novel".

/// p_fake / (1 - p_fake) with p_fake clamped to [kProbClamp, 1 - kProbClamp].
double nd_gan_ratio(double p_fake);
/// From K+1-wide probability rows (last column is fake).
std::vector<double> score_nd_gan_from_probs(const Tensor& probs);
std::vector<double> score_nd_gan(const GanModel& model, const Tensor& x);

/// Drops the fake column of K+1-wide rows and renormalizes the remaining K.
Tensor real_class_probs(const Tensor& probs);

/// -sum p ln p per row (0 ln 0 = 0). Rows must sum to 1 within 1e-9.
std::vector<double> score_entropy(const Tensor& probs);
/// 1 - max_k p_k per row.
std::vector<double> score_max_prob(const Tensor& probs);

/// d(x, NN_k(x)) / d(NN_k(x), NN_k(NN_k(x))). For k > 1 both distances are
/// averages over the k nearest. The anchor's own row is excluded from its
/// neighbour search. A 0/0 ratio scores 0; a positive numerator over a zero
/// denominator takes the largest finite score in the batch.
std::vector<double> score_knn(const Tensor& query, const Tensor& reference, std::size_t k);

/// Uniform draws over a box, usable as the fake batch of train_gan.
class UniformBaselineGenerator {
 public:
  UniformBaselineGenerator(std::vector<double> lower, std::vector<double> upper);

  std::size_t dim() const { return lower_.size(); }
  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  Tensor sample(std::size_t n, Rng& rng) const;
  FakeSampler sampler() const;

 private:
  std::vector<double> lower_, upper_;
};

UniformBaselineGenerator make_uniform_baseline_generator(std::vector<double> lower, std::vector<double> upper);
/// Per-dimension min/max of the data.
UniformBaselineGenerator make_uniform_baseline_generator(const Tensor& data);

struct MixtureCell {
  std::size_t cell = 0;
  std::vector<double> center;
  double p_data = 0.0;
  double p_generator = 0.0;  // histogram estimate
  double standard_error = 0.0;
};

struct MixtureCheckReport {
  bool holds = false;
  std::vector<MixtureCell> cells;  // qualifying cells
  // Aggregate test over all cells with p_data <= epsilon.
  bool region_holds = false;
  double region_data_mass = 0.0;
  double region_sample_fraction = 0.0;
  double region_standard_error = 0.0;
  double epsilon = 0.0;
  std::size_t samples = 0;
  std::size_t outside_grid = 0;
};

/// Histograms the samples on the grid and lists cells where p_data <= epsilon
/// and the estimate exceeds p_data by more than `tolerance_se` binomial
/// standard errors. The same test is also applied to the union of all cells
/// with p_data <= epsilon; either one qualifying is enough.
MixtureCheckReport check_mixture_generator(const Tensor& samples, const GridDensity& grid, double epsilon,
                                           double tolerance_se = 3.0);

enum class ScoreKind { nd_gan_ratio, fake_prob, entropy, max_prob, knn };

const char* to_string(ScoreKind kind);
ScoreKind parse_score_kind(const std::string& s);

/// A frozen model plus what a score kind needs. Entropy, max-prob and knn may
/// use either the GAN discriminator or a plain classifier; knn with neither
/// works in input space.
struct NoveltyScorer {
  ScoreKind kind = ScoreKind::nd_gan_ratio;
  std::size_t k = 1;
  std::shared_ptr<const GanModel> gan;
  std::shared_ptr<const Classifier> classifier;
  std::optional<Tensor> reference;  // nominal features (already projected)
  std::uint64_t trained_on = 0;     // fingerprint of the training split, 0 if unknown
  std::string label;                // display name, defaults to name()

  std::string name() const;
  void validate() const;
  /// Features used by knn for raw inputs.
  Tensor features(const Tensor& x) const;
  std::vector<double> score(const Tensor& x) const;
};

NoveltyScorer make_gan_scorer(ScoreKind kind, std::shared_ptr<const GanModel> gan);
NoveltyScorer make_classifier_scorer(ScoreKind kind, std::shared_ptr<const Classifier> c);
/// Projects the nominal inputs through the model's feature layer (if any).
NoveltyScorer make_knn_scorer(std::size_t k, const Tensor& nominal, std::shared_ptr<const GanModel> gan = nullptr,
                              std::shared_ptr<const Classifier> classifier = nullptr);

/// example-id,score,is-novel (blank when unknown).
void write_scores_csv(std::ostream& os, std::span<const ScoredExample> scored);

}  // namespace ndgan
