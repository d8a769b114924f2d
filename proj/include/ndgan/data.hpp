#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ndgan/density.hpp"
#include "ndgan/tensor.hpp"

namespace ndgan {

enum class SplitTag { train, test };

const char* to_string(SplitTag tag);

struct Dataset {
  Tensor features;  // n x d
  std::optional<std::vector<std::size_t>> labels;
  std::size_t num_classes = 0;
  SplitTag split = SplitTag::train;
  std::string provenance;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return labels.has_value(); }

  /// Labels below num_classes, one per row, finite features.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Row indices of every class, in row order.
  std::vector<std::vector<std::size_t>> indices_by_class() const;
  std::vector<std::size_t> class_histogram() const;
};

/// Stacks rows of datasets with equal dimension; labels kept only if all have them.
Dataset concat_datasets(std::span<const Dataset> parts);

struct RingMixture {
  Dataset data;
  GaussianMixtureDensity density;
};

/// Equal-weight isotropic Gaussians at angles 2*pi*i/components on a circle,
/// labelled by component.
RingMixture gen_ring_mixture(std::size_t n, std::size_t components, double radius, double sigma, std::uint64_t seed);
/// The ring density without sampling.
GaussianMixtureDensity ring_density(std::size_t components, double radius, double sigma);

/// IDX unsigned-byte image tensor (magic 0x00000803) as flattened rows scaled to [0, 1].
Dataset read_idx(const std::string& path);
/// IDX unsigned-byte label vector (magic 0x00000801).
std::vector<std::size_t> read_idx_labels(const std::string& path);
/// Images plus labels; num_classes = max label + 1.
Dataset read_idx_dataset(const std::string& images, const std::string& labels);

/// Writes features as bytes round(255 * x) with image extents rows x cols.
void write_idx_images(const std::string& path, const Dataset& data, std::size_t rows, std::size_t cols);
void write_idx_labels(const std::string& path, std::span<const std::size_t> labels);

struct CsvDataset {
  Dataset data;
  /// label_values[k] is the original label value remapped to class k.
  std::vector<double> label_values;
  std::vector<std::string> header;  // empty if the file had none
};

/// Numeric CSV, optional header row detected by a non-numeric first row.
/// Label values are remapped to 0..K-1 in ascending order.
CsvDataset read_csv_dataset(const std::string& path, std::optional<std::size_t> label_column = std::nullopt);
CsvDataset parse_csv_dataset(const std::string& text, std::optional<std::size_t> label_column,
                             const std::string& source = "<memory>");
/// Features then (if present) a final "label" column.
std::string csv_dataset_text(const Dataset& data);

/// Seeded per-class choice without replacement. The remainder drops labels.
std::pair<Dataset, Dataset> subsample_labeled(const Dataset& data, std::size_t per_class, std::uint64_t seed);

/// Area-average resampling of square side x side images to target x target.
Dataset downscale_images(const Dataset& data, std::size_t side, std::size_t target);

}  // namespace ndgan
