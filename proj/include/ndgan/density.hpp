#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ndgan/rng.hpp"
#include "ndgan/tensor.hpp"

namespace ndgan {

/// Densities below this are treated as zero when forming ratios.
inline constexpr double kDensityFloor = 1e-300;

/// Mixture of axis-aligned Gaussians.
struct GaussianMixtureDensity {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t components() const { return weights.size(); }
  /// Simplex weights (1e-12), positive variances, consistent dimensions.
  void validate() const;

  double eval(std::span<const double> x) const;
  /// Draws n points; `component` receives the mixture component of each draw.
  Tensor sample(std::size_t n, Rng& rng, std::vector<std::size_t>* component = nullptr) const;

  static GaussianMixtureDensity isotropic(std::vector<double> weights, std::vector<std::vector<double>> means,
                                          double variance);
};

/// pi * p_novel + (1 - pi) * p_data.
struct MixtureSpec {
  double pi = 0.0;
  GaussianMixtureDensity novel;
  GaussianMixtureDensity data;

  void validate() const;
  double eval(std::span<const double> x) const;
  Tensor sample(std::size_t n, Rng& rng) const;
};

using DensityFn = std::function<double(std::span<const double>)>;

DensityFn as_density(const GaussianMixtureDensity& d);
DensityFn as_density(const MixtureSpec& m);

/// Row-wise density values of a batch.
std::vector<double> density_eval(const GaussianMixtureDensity& d, const Tensor& x);
std::vector<double> density_eval(const DensityFn& d, const Tensor& x);

/// Cell-centred density on a box, normalized so cells * volume sums to 1.
struct GridDensity {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> resolution;
  std::vector<double> cells;  // row-major, last dimension fastest

  std::size_t dim() const { return lower.size(); }
  std::size_t num_cells() const { return cells.size(); }
  double cell_volume() const;
  std::vector<double> cell_center(std::size_t cell) const;
  std::optional<std::size_t> cell_of(std::span<const double> x) const;
  /// Sum of cells * volume.
  double total_mass() const;
  double max_value() const;
  /// All cell centres as an (num_cells x dim) batch.
  Tensor centers() const;
};

/// Midpoint-rule discretization. `normalize` rescales to unit mass.
GridDensity discretize(const DensityFn& d, std::vector<double> lower, std::vector<double> upper,
                       std::vector<std::size_t> resolution, bool normalize = true);
/// Averages blocks of factor^dim cells, turning midpoint values into cell means.
/// Every resolution must be divisible by factor.
GridDensity coarsen_grid(const GridDensity& fine, std::size_t factor);
/// Unnormalized midpoint quadrature of a density over a box.
double integrate_midpoint(const DensityFn& d, std::span<const double> lower, std::span<const double> upper,
                          std::span<const std::size_t> resolution);

/// p_novel / p_data with the denominator floored at kDensityFloor.
double likelihood_ratio(double p_data, double p_novel);
std::vector<double> likelihood_ratio_score(const DensityFn& p_data, const DensityFn& p_novel, const Tensor& x);

/// p_data / (p_data + p_g).
double optimal_discriminator(double p_data, double p_g);
std::vector<double> optimal_discriminator(const DensityFn& p_data, const DensityFn& p_g, const Tensor& x);

struct IdentityReport {
  /// max |(1-D*)/D* - (pi p_novel/p_data + 1 - pi)| / max(1, |rhs|)
  double max_residual = 0.0;
  /// The same residual without the scale normalization.
  double max_abs_residual = 0.0;
  /// Residual of the mixture-ratio algebra, same normalization.
  double max_ratio_residual = 0.0;
  std::size_t evaluated = 0;
  std::vector<std::size_t> excluded;  // rows where p_data underflows
};

IdentityReport verify_mixture_identity(const MixtureSpec& spec, const Tensor& x);

/// Empirical (1 - alpha) quantile of nominal likelihood-ratio scores.
double np_threshold_for_fpr(const DensityFn& p_data, const DensityFn& p_novel, double alpha, const Tensor& nominal);

double normal_cdf(double x);
/// AUROC of the likelihood-ratio test between two unit-variance normals a gap apart.
double gaussian_lr_auroc(double mean_gap);

struct DensityDocument {
  int version = 1;
  GaussianMixtureDensity data;
  std::optional<GaussianMixtureDensity> novel;
  double pi = 0.0;
  std::optional<std::vector<double>> lower;
  std::optional<std::vector<double>> upper;
};

/// Parses the versioned density JSON; errors carry the offending JSON path.
DensityDocument parse_density_json(const std::string& text);
std::string density_json(const DensityDocument& doc);

}  // namespace ndgan
