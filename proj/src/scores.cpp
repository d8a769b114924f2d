#include "ndgan/scores.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>

namespace ndgan {

double nd_gan_ratio(double p_fake) {
  if (std::isnan(p_fake)) throw Error(ErrorCode::non_finite, "score_nd_gan", "fake probability is NaN");
  const double p = std::clamp(p_fake, kProbClamp, 1.0 - kProbClamp);
  return p / (1.0 - p);
}

std::vector<double> score_nd_gan_from_probs(const Tensor& probs) {
  if (probs.rank() != 2 || probs.cols() < 2)
    throw Error(ErrorCode::shape, "score_nd_gan", "expected K+1 probability columns, got " + shape_to_string(probs.shape()));
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = nd_gan_ratio(probs.at(i, probs.cols() - 1));
  return out;
}

std::vector<double> score_nd_gan(const GanModel& model, const Tensor& x) {
  return score_nd_gan_from_probs(discriminator_probs(model, x));
}

Tensor real_class_probs(const Tensor& probs) {
  if (probs.rank() != 2 || probs.cols() < 2)
    throw Error(ErrorCode::shape, "real_class_probs", "expected K+1 probability columns, got " + shape_to_string(probs.shape()));
  const std::size_t k = probs.cols() - 1;
  std::vector<double> out;
  out.reserve(probs.rows() * k);
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i).first(k);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (double p : row) out.push_back(s > 0.0 ? p / s : 1.0 / static_cast<double>(k));
  }
  return Tensor::matrix(probs.rows(), k, std::move(out));
}

namespace {

void check_distribution(const char* op, std::span<const double> row, std::size_t i) {
  double s = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw Error(ErrorCode::domain, op, "row " + std::to_string(i) + " has a negative or NaN probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::domain, op, "row " + std::to_string(i) + " sums to " + std::to_string(s));
}

void check_probs(const char* op, const Tensor& probs) {
  if (probs.rank() != 2 || probs.cols() == 0) throw Error(ErrorCode::shape, op, "expected a batch of distributions");
}

}  // namespace

std::vector<double> score_entropy(const Tensor& probs) {
  check_probs("score_entropy", probs);
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = probs.row(i);
    check_distribution("score_entropy", row, i);
    // Neumaier summation keeps wide uniform rows within a few ulps of ln K.
    double h = 0.0, carry = 0.0;
    for (double p : row) {
      if (p <= 0.0) continue;
      const double t = -p * std::log(p), s = h + t;
      carry += std::abs(h) >= std::abs(t) ? (h - s) + t : (t - s) + h;
      h = s;
    }
    out[i] = std::max(h + carry, 0.0);
  }
  return out;
}

std::vector<double> score_max_prob(const Tensor& probs) {
  check_probs("score_max_prob", probs);
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = probs.row(i);
    check_distribution("score_max_prob", row, i);
    out[i] = 1.0 - *std::max_element(row.begin(), row.end());
  }
  return out;
}

namespace {

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(s);
}

struct Neighbours {
  std::size_t anchor = 0;  // index of the k-th nearest
  double mean_distance = 0.0;
};

/// k nearest rows of `reference` to `x`, skipping row `skip`. Ties break by index.
Neighbours nearest(std::span<const double> x, const Tensor& reference, std::size_t k, std::size_t skip) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(reference.rows());
  for (std::size_t r = 0; r < reference.rows(); ++r)
    if (r != skip) d.emplace_back(distance(x, reference.row(r)), r);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += d[i].first;
  return {d[k - 1].second, s / static_cast<double>(k)};
}

}  // namespace

std::vector<double> score_knn(const Tensor& query, const Tensor& reference, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "score_knn", "k must be >= 1");
  if (reference.rank() != 2 || query.rank() != 2 || query.cols() != reference.cols()) {
    throw Error(ErrorCode::shape, "score_knn",
                "query " + shape_to_string(query.shape()) + " vs reference " + shape_to_string(reference.shape()));
  }
  if (reference.rows() <= k) {
    throw Error(ErrorCode::invalid_argument, "score_knn",
                "reference has " + std::to_string(reference.rows()) + " points; needs more than k = " + std::to_string(k));
  }
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::unordered_map<std::size_t, double> anchor_cache;
  std::vector<double> out(query.rows());
  std::vector<std::size_t> pending;  // positive over zero
  for (std::size_t i = 0; i < out.size(); ++i) {
    const Neighbours q = nearest(query.row(i), reference, k, kNone);
    auto it = anchor_cache.find(q.anchor);
    if (it == anchor_cache.end())
      it = anchor_cache.emplace(q.anchor, nearest(reference.row(q.anchor), reference, k, q.anchor).mean_distance).first;
    const double den = it->second;
    if (den > 0.0) {
      out[i] = q.mean_distance / den;
    } else if (q.mean_distance == 0.0) {
      out[i] = 0.0;
    } else {
      out[i] = q.mean_distance;
      pending.push_back(i);
    }
  }
  if (!pending.empty()) {
    double best = -1.0;
    for (std::size_t i = 0, p = 0; i < out.size(); ++i) {
      if (p < pending.size() && pending[p] == i) {
        ++p;
        continue;
      }
      best = std::max(best, out[i]);
    }
    for (std::size_t i : pending)
      if (best >= 0.0) out[i] = best;
  }
  return out;
}

UniformBaselineGenerator::UniformBaselineGenerator(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.empty() || lower_.size() != upper_.size())
    throw Error(ErrorCode::invalid_argument, "uniform_baseline", "bounds must be non-empty and of equal length");
  for (std::size_t j = 0; j < lower_.size(); ++j) {
    if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]))
      throw Error(ErrorCode::non_finite, "uniform_baseline", "bound " + std::to_string(j) + " is not finite");
    if (!(lower_[j] < upper_[j]))
      throw Error(ErrorCode::invalid_argument, "uniform_baseline", "lower >= upper in dimension " + std::to_string(j));
  }
}

Tensor UniformBaselineGenerator::sample(std::size_t n, Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n * dim());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim(); ++j) v[i * dim() + j] = lower_[j] + (upper_[j] - lower_[j]) * u(rng);
  return Tensor::matrix(n, dim(), std::move(v));
}

FakeSampler UniformBaselineGenerator::sampler() const {
  return [g = *this](std::size_t n, Rng& rng) { return g.sample(n, rng); };
}

UniformBaselineGenerator make_uniform_baseline_generator(std::vector<double> lower, std::vector<double> upper) {
  return UniformBaselineGenerator(std::move(lower), std::move(upper));
}

UniformBaselineGenerator make_uniform_baseline_generator(const Tensor& data) {
  if (data.rank() != 2 || data.rows() == 0) throw Error(ErrorCode::invalid_argument, "uniform_baseline", "empty data");
  std::vector<double> lo(data.cols(), std::numeric_limits<double>::infinity());
  std::vector<double> hi(data.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      lo[j] = std::min(lo[j], data.at(i, j));
      hi[j] = std::max(hi[j], data.at(i, j));
    }
  }
  return UniformBaselineGenerator(std::move(lo), std::move(hi));
}

MixtureCheckReport check_mixture_generator(const Tensor& samples, const GridDensity& grid, double epsilon,
                                           double tolerance_se) {
  if (samples.rank() != 2 || samples.rows() == 0)
    throw Error(ErrorCode::invalid_argument, "check_mixture_generator", "empty sample set");
  if (samples.cols() != grid.dim())
    throw Error(ErrorCode::shape, "check_mixture_generator", "sample dimension differs from grid dimension");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::invalid_argument, "check_mixture_generator", "epsilon must be > 0");

  MixtureCheckReport report;
  report.epsilon = epsilon;
  report.samples = samples.rows();
  std::vector<std::size_t> counts(grid.num_cells(), 0);
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    if (auto c = grid.cell_of(samples.row(i))) {
      ++counts[*c];
    } else {
      ++report.outside_grid;
    }
  }
  const double n = static_cast<double>(samples.rows());
  const double vol = grid.cell_volume();
  std::size_t region_count = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double p_data = grid.cells[c];
    if (p_data > epsilon) continue;
    report.region_data_mass += p_data * vol;
    region_count += counts[c];
    if (counts[c] == 0) continue;
    const double q = static_cast<double>(counts[c]) / n;
    const double p_g = q / vol;
    const double se = std::sqrt(q * (1.0 - q) / n) / vol;
    if (p_g - p_data > tolerance_se * se) report.cells.push_back({c, grid.cell_center(c), p_data, p_g, se});
  }
  const double q = static_cast<double>(region_count) / n;
  report.region_sample_fraction = q;
  report.region_standard_error = std::sqrt(q * (1.0 - q) / n);
  report.region_holds = q - report.region_data_mass > tolerance_se * report.region_standard_error;
  report.holds = report.region_holds || !report.cells.empty();
  return report;
}

const char* to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::nd_gan_ratio: return "nd-gan-ratio";
    case ScoreKind::fake_prob: return "fake-prob";
    case ScoreKind::entropy: return "entropy";
    case ScoreKind::max_prob: return "max-prob";
    case ScoreKind::knn: return "knn";
  }
  return "?";
}

ScoreKind parse_score_kind(const std::string& s) {
  for (ScoreKind k : {ScoreKind::nd_gan_ratio, ScoreKind::fake_prob, ScoreKind::entropy, ScoreKind::max_prob, ScoreKind::knn})
    if (s == to_string(k)) return k;
  throw Error(ErrorCode::invalid_argument, "scorer", "unknown score kind '" + s + "'");
}

std::string NoveltyScorer::name() const {
  if (!label.empty()) return label;
  if (kind == ScoreKind::knn) return std::to_string(k) + "-nn";
  return to_string(kind);
}

void NoveltyScorer::validate() const {
  const std::string where = "scorer " + name();
  switch (kind) {
    case ScoreKind::nd_gan_ratio:
    case ScoreKind::fake_prob:
      if (!gan) throw Error(ErrorCode::invalid_argument, where, "needs a GAN model");
      break;
    case ScoreKind::entropy:
    case ScoreKind::max_prob:
      if (!gan && !classifier) throw Error(ErrorCode::invalid_argument, where, "needs a GAN or classifier model");
      break;
    case ScoreKind::knn:
      if (k == 0) throw Error(ErrorCode::invalid_argument, where, "k must be >= 1");
      if (!reference) throw Error(ErrorCode::invalid_argument, where, "needs a reference set");
      if (reference->rows() <= k)
        throw Error(ErrorCode::invalid_argument, where, "reference set needs more than k = " + std::to_string(k) + " points");
      break;
  }
}

Tensor NoveltyScorer::features(const Tensor& x) const {
  if (gan) return discriminator_features(*gan, x);
  if (classifier) return classifier_features(*classifier, x);
  return x;
}

std::vector<double> NoveltyScorer::score(const Tensor& x) const {
  validate();
  switch (kind) {
    case ScoreKind::nd_gan_ratio:
      return score_nd_gan(*gan, x);
    case ScoreKind::fake_prob: {
      const Tensor p = discriminator_probs(*gan, x);
      std::vector<double> out(p.rows());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.at(i, p.cols() - 1);
      return out;
    }
    case ScoreKind::entropy:
    case ScoreKind::max_prob: {
      const Tensor p = gan ? real_class_probs(discriminator_probs(*gan, x)) : classifier_probs(*classifier, x);
      return kind == ScoreKind::entropy ? score_entropy(p) : score_max_prob(p);
    }
    case ScoreKind::knn:
      return score_knn(features(x), *reference, k);
  }
  return {};
}

NoveltyScorer make_gan_scorer(ScoreKind kind, std::shared_ptr<const GanModel> gan) {
  NoveltyScorer s;
  s.kind = kind;
  s.gan = std::move(gan);
  s.validate();
  return s;
}

NoveltyScorer make_classifier_scorer(ScoreKind kind, std::shared_ptr<const Classifier> c) {
  NoveltyScorer s;
  s.kind = kind;
  s.classifier = std::move(c);
  s.validate();
  return s;
}

NoveltyScorer make_knn_scorer(std::size_t k, const Tensor& nominal, std::shared_ptr<const GanModel> gan,
                              std::shared_ptr<const Classifier> classifier) {
  NoveltyScorer s;
  s.kind = ScoreKind::knn;
  s.k = k;
  s.gan = std::move(gan);
  s.classifier = std::move(classifier);
  s.reference = s.features(nominal);
  s.validate();
  return s;
}

void write_scores_csv(std::ostream& os, std::span<const ScoredExample> scored) {
  os.precision(17);
  os << "example_id,score,is_novel\n";
  for (const auto& s : scored) {
    os << s.id << ',' << s.score << ',';
    if (s.is_novel) os << (*s.is_novel ? 1 : 0);
    os << '\n';
  }
}

}  // namespace ndgan
