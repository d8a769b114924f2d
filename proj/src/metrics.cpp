#include "ndgan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "ndgan/error.hpp"

namespace ndgan {

double RocCurve::tpr_at_fpr(double alpha) const {
  double best = 0.0;
  for (const auto& p : points)
    if (p.fpr <= alpha) best = std::max(best, p.tpr);
  return best;
}

RocCurve roc_auroc(std::span<const ScoredExample> scored) {
  struct Item {
    double score;
    bool novel;
  };
  std::vector<Item> items;
  items.reserve(scored.size());
  std::size_t positives = 0, negatives = 0;
  for (const auto& s : scored) {
    if (!s.is_novel) throw Error(ErrorCode::invalid_argument, "roc_auroc", "example " + std::to_string(s.id) + " has no ground truth");
    if (!std::isfinite(s.score)) throw Error(ErrorCode::non_finite, "roc_auroc", "example " + std::to_string(s.id) + " has a non-finite score");
    items.push_back({s.score, *s.is_novel});
    (*s.is_novel ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::invalid_argument, "roc_auroc", "need at least one novel and one nominal example");
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score > b.score; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Integer counts keep the trapezoid sum exact until the final division.
  std::uint64_t tp = 0, fp = 0, twice_area = 0;
  const double P = static_cast<double>(positives), N = static_cast<double>(negatives);
  for (std::size_t i = 0; i < items.size();) {
    const double t = items[i].score;
    const std::uint64_t tp0 = tp, fp0 = fp;
    for (; i < items.size() && items[i].score == t; ++i) (items[i].novel ? tp : fp) += 1;
    twice_area += (fp - fp0) * (tp + tp0);
    roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, t});
  }
  roc.auroc = static_cast<double>(twice_area) / (2.0 * P * N);
  return roc;
}

RocCurve roc_auroc(std::span<const double> nominal, std::span<const double> novel) {
  std::vector<ScoredExample> scored;
  scored.reserve(nominal.size() + novel.size());
  std::size_t id = 0;
  for (double s : nominal) scored.push_back({id++, s, false});
  for (double s : novel) scored.push_back({id++, s, true});
  return roc_auroc(scored);
}

double threshold_at_fpr(std::span<const double> nominal, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "threshold_at_fpr", "alpha must lie in (0, 1)");
  if (nominal.empty()) throw Error(ErrorCode::invalid_argument, "threshold_at_fpr", "no nominal scores");
  const double budget = static_cast<double>(nominal.size()) * alpha;
  if (budget < 1.0) {
    throw Error(ErrorCode::invalid_argument, "threshold_at_fpr",
                "n * alpha = " + std::to_string(budget) + " < 1; too few samples for this false positive rate");
  }
  std::vector<double> sorted(nominal.begin(), nominal.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto allowed = static_cast<std::size_t>(std::floor(budget));
  return sorted[std::min(allowed, sorted.size() - 1)];
}

double exceedance_rate(std::span<const double> scores, double threshold) {
  if (scores.empty()) return 0.0;
  const auto n = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(n) / static_cast<double>(scores.size());
}

namespace {

std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = r;
    i = j;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::invalid_argument, "spearman", "need two equal-length samples of size >= 2");
  const auto ra = midranks(a);
  const auto rb = midranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

void write_roc_csv(std::ostream& os, const RocCurve& roc) {
  os << "fpr,tpr,threshold\n";
  os.precision(17);
  for (const auto& p : roc.points) os << p.fpr << ',' << p.tpr << ',' << p.threshold << '\n';
}

}  // namespace ndgan
