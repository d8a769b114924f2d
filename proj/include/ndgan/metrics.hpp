#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ndgan {

struct ScoredExample {
  std::size_t id = 0;
  double score = 0.0;           // higher means more novel
  std::optional<bool> is_novel;  // ground truth when known
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // decision rule: score >= threshold flags novel
};

struct RocCurve {
  /// Thresholds descending; starts at (0, 0) with threshold +inf, ends at (1, 1).
  std::vector<RocPoint> points;
  double auroc = 0.0;

  /// Largest TPR among points with FPR <= alpha.
  double tpr_at_fpr(double alpha) const;
};

/// ROC and area with tied scores counting one half, so the area equals the
/// probability that a random novel example outranks a random nominal one.
RocCurve roc_auroc(std::span<const ScoredExample> scored);
RocCurve roc_auroc(std::span<const double> nominal, std::span<const double> novel);

/// Largest-index threshold t taken from the nominal scores such that at most
/// floor(n * alpha) of them satisfy score > t. Requires n * alpha >= 1.
double threshold_at_fpr(std::span<const double> nominal, double alpha);
/// Fraction of scores strictly above the threshold.
double exceedance_rate(std::span<const double> scores, double threshold);

/// Spearman rank correlation with midranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

void write_roc_csv(std::ostream& os, const RocCurve& roc);

}  // namespace ndgan
