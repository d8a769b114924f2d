#include "ndgan/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "json.hpp"

#include "ndgan/metrics.hpp"

namespace ndgan {

void GaussianMixtureDensity::validate() const {
  const char* where = "GaussianMixtureDensity";
  if (weights.empty()) throw Error(ErrorCode::invalid_argument, where, "no components");
  if (means.size() != weights.size() || variances.size() != weights.size())
    throw Error(ErrorCode::invalid_argument, where, "weights, means and variances differ in length");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::invalid_argument, where, "weights must be finite and >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorCode::invalid_argument, where, "weights do not sum to 1");
  const std::size_t d = dim();
  if (d == 0) throw Error(ErrorCode::invalid_argument, where, "zero-dimensional means");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (means[k].size() != d || variances[k].size() != d)
      throw Error(ErrorCode::invalid_argument, where, "component " + std::to_string(k) + " has inconsistent dimension");
    for (double m : means[k])
      if (!std::isfinite(m)) throw Error(ErrorCode::invalid_argument, where, "non-finite mean");
    for (double v : variances[k])
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorCode::invalid_argument, where, "variances must be positive");
  }
}

double GaussianMixtureDensity::eval(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw Error(ErrorCode::shape, "density_eval",
                "point of dimension " + std::to_string(x.size()) + " for density of dimension " + std::to_string(dim()));
  }
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  double p = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] == 0.0) continue;
    double lp = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double var = variances[k][j];
      const double d = x[j] - means[k][j];
      lp += -0.5 * (log_2pi + std::log(var) + d * d / var);
    }
    p += weights[k] * std::exp(lp);
  }
  return p;
}

Tensor GaussianMixtureDensity::sample(std::size_t n, Rng& rng, std::vector<std::size_t>* component) const {
  validate();
  const std::size_t d = dim();
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n * d);
  if (component) component->resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = pick(rng);
    if (component) (*component)[i] = k;
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = means[k][j] + std::sqrt(variances[k][j]) * normal(rng);
  }
  return Tensor::matrix(n, d, std::move(out));
}

GaussianMixtureDensity GaussianMixtureDensity::isotropic(std::vector<double> weights,
                                                         std::vector<std::vector<double>> means, double variance) {
  GaussianMixtureDensity g;
  g.weights = std::move(weights);
  g.means = std::move(means);
  for (const auto& m : g.means) g.variances.emplace_back(m.size(), variance);
  return g;
}

void MixtureSpec::validate() const {
  if (!(pi >= 0.0 && pi <= 1.0)) throw Error(ErrorCode::invalid_argument, "MixtureSpec", "pi must lie in [0, 1]");
  novel.validate();
  data.validate();
  if (novel.dim() != data.dim()) throw Error(ErrorCode::invalid_argument, "MixtureSpec", "novel and data dimensions differ");
}

double MixtureSpec::eval(std::span<const double> x) const { return pi * novel.eval(x) + (1.0 - pi) * data.eval(x); }

Tensor MixtureSpec::sample(std::size_t n, Rng& rng) const {
  validate();
  const std::size_t d = data.dim();
  std::bernoulli_distribution from_novel(pi);
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor one = from_novel(rng) ? novel.sample(1, rng) : data.sample(1, rng);
    std::copy(one.values().begin(), one.values().end(), out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return Tensor::matrix(n, d, std::move(out));
}

DensityFn as_density(const GaussianMixtureDensity& d) {
  return [d](std::span<const double> x) { return d.eval(x); };
}

DensityFn as_density(const MixtureSpec& m) {
  return [m](std::span<const double> x) { return m.eval(x); };
}

std::vector<double> density_eval(const GaussianMixtureDensity& d, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != d.dim()) {
    throw Error(ErrorCode::shape, "density_eval",
                "batch " + shape_to_string(x.shape()) + " for density of dimension " + std::to_string(d.dim()));
  }
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = d.eval(x.row(i));
  return out;
}

std::vector<double> density_eval(const DensityFn& d, const Tensor& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = d(x.row(i));
  return out;
}

double GridDensity::cell_volume() const {
  double v = 1.0;
  for (std::size_t j = 0; j < dim(); ++j) v *= (upper[j] - lower[j]) / static_cast<double>(resolution[j]);
  return v;
}

std::vector<double> GridDensity::cell_center(std::size_t cell) const {
  std::vector<double> c(dim());
  for (std::size_t j = dim(); j-- > 0;) {
    const std::size_t idx = cell % resolution[j];
    cell /= resolution[j];
    const double h = (upper[j] - lower[j]) / static_cast<double>(resolution[j]);
    c[j] = lower[j] + (static_cast<double>(idx) + 0.5) * h;
  }
  return c;
}

std::optional<std::size_t> GridDensity::cell_of(std::span<const double> x) const {
  if (x.size() != dim()) return std::nullopt;
  std::size_t cell = 0;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (!(x[j] >= lower[j] && x[j] <= upper[j])) return std::nullopt;
    const double h = (upper[j] - lower[j]) / static_cast<double>(resolution[j]);
    auto idx = static_cast<std::size_t>((x[j] - lower[j]) / h);
    idx = std::min(idx, resolution[j] - 1);
    cell = cell * resolution[j] + idx;
  }
  return cell;
}

double GridDensity::total_mass() const {
  double s = 0.0;
  for (double c : cells) s += c;
  return s * cell_volume();
}

double GridDensity::max_value() const { return cells.empty() ? 0.0 : *std::max_element(cells.begin(), cells.end()); }

Tensor GridDensity::centers() const {
  std::vector<double> out;
  out.reserve(num_cells() * dim());
  for (std::size_t i = 0; i < num_cells(); ++i) {
    auto c = cell_center(i);
    out.insert(out.end(), c.begin(), c.end());
  }
  return Tensor::matrix(num_cells(), dim(), std::move(out));
}

GridDensity discretize(const DensityFn& d, std::vector<double> lower, std::vector<double> upper,
                       std::vector<std::size_t> resolution, bool normalize) {
  if (lower.empty() || lower.size() != upper.size() || lower.size() != resolution.size())
    throw Error(ErrorCode::invalid_argument, "discretize", "bounds and resolution must share a dimension");
  for (std::size_t j = 0; j < lower.size(); ++j) {
    if (!(lower[j] < upper[j])) throw Error(ErrorCode::invalid_argument, "discretize", "lower bound must be below upper bound");
    if (resolution[j] == 0) throw Error(ErrorCode::invalid_argument, "discretize", "resolution must be >= 1");
  }
  GridDensity g{std::move(lower), std::move(upper), std::move(resolution), {}};
  std::size_t n = 1;
  for (std::size_t r : g.resolution) n *= r;
  g.cells.resize(n);
  for (std::size_t i = 0; i < n; ++i) g.cells[i] = d(g.cell_center(i));
  if (normalize) {
    const double mass = g.total_mass();
    if (!(mass > 0.0)) throw Error(ErrorCode::domain, "discretize", "density has no mass on the grid");
    for (double& c : g.cells) c /= mass;
  }
  return g;
}

GridDensity coarsen_grid(const GridDensity& fine, std::size_t factor) {
  if (factor == 0) throw Error(ErrorCode::invalid_argument, "coarsen_grid", "factor must be >= 1");
  GridDensity g{fine.lower, fine.upper, fine.resolution, {}};
  std::size_t n = 1;
  for (std::size_t& r : g.resolution) {
    if (r % factor != 0) throw Error(ErrorCode::invalid_argument, "coarsen_grid", "resolution not divisible by factor");
    r /= factor;
    n *= r;
  }
  g.cells.assign(n, 0.0);
  const std::size_t dim = fine.dim();
  double block = 1.0;
  for (std::size_t j = 0; j < dim; ++j) block *= static_cast<double>(factor);
  for (std::size_t i = 0; i < fine.cells.size(); ++i) {
    // Row-major, last dimension fastest.
    std::size_t rest = i, coarse = 0, stride = 1;
    for (std::size_t j = dim; j-- > 0;) {
      const std::size_t idx = rest % fine.resolution[j];
      rest /= fine.resolution[j];
      coarse += (idx / factor) * stride;
      stride *= g.resolution[j];
    }
    g.cells[coarse] += fine.cells[i] / block;
  }
  return g;
}

double integrate_midpoint(const DensityFn& d, std::span<const double> lower, std::span<const double> upper,
                          std::span<const std::size_t> resolution) {
  const GridDensity g = discretize(d, {lower.begin(), lower.end()}, {upper.begin(), upper.end()},
                                   {resolution.begin(), resolution.end()}, false);
  return g.total_mass();
}

double likelihood_ratio(double p_data, double p_novel) {
  if (!(p_data >= 0.0) || !(p_novel >= 0.0)) throw Error(ErrorCode::domain, "likelihood_ratio", "densities must be >= 0");
  if (p_data < kDensityFloor && p_novel < kDensityFloor)
    throw Error(ErrorCode::domain, "likelihood_ratio", "both densities vanish; ratio undefined");
  return p_novel / std::max(p_data, kDensityFloor);
}

std::vector<double> likelihood_ratio_score(const DensityFn& p_data, const DensityFn& p_novel, const Tensor& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    try {
      out[i] = likelihood_ratio(p_data(x.row(i)), p_novel(x.row(i)));
    } catch (const Error& e) {
      throw Error(e.code(), "likelihood_ratio_score", "row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

double optimal_discriminator(double p_data, double p_g) {
  if (!(p_data >= 0.0) || !(p_g >= 0.0)) throw Error(ErrorCode::domain, "optimal_discriminator", "densities must be >= 0");
  if (p_data + p_g <= 0.0) throw Error(ErrorCode::domain, "optimal_discriminator", "both densities vanish");
  return p_data / (p_data + p_g);
}

std::vector<double> optimal_discriminator(const DensityFn& p_data, const DensityFn& p_g, const Tensor& x) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    try {
      out[i] = optimal_discriminator(p_data(x.row(i)), p_g(x.row(i)));
    } catch (const Error& e) {
      throw Error(e.code(), "optimal_discriminator", "row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

IdentityReport verify_mixture_identity(const MixtureSpec& spec, const Tensor& x) {
  spec.validate();
  IdentityReport r;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    const double pd = spec.data.eval(row);
    const double pn = spec.novel.eval(row);
    if (pd < kDensityFloor) {
      r.excluded.push_back(i);
      continue;
    }
    const double pg = spec.pi * pn + (1.0 - spec.pi) * pd;
    const double dstar = optimal_discriminator(pd, pg);
    const double lhs = (1.0 - dstar) / dstar;
    const double rhs = spec.pi * pn / pd + (1.0 - spec.pi);
    const double mixture_ratio = (spec.pi * pn + (1.0 - spec.pi) * pd) / pd;
    const double scale = std::max(1.0, std::abs(rhs));
    r.max_abs_residual = std::max(r.max_abs_residual, std::abs(lhs - rhs));
    r.max_residual = std::max(r.max_residual, std::abs(lhs - rhs) / scale);
    r.max_ratio_residual = std::max(r.max_ratio_residual, std::abs(mixture_ratio - rhs) / scale);
    ++r.evaluated;
  }
  return r;
}

double np_threshold_for_fpr(const DensityFn& p_data, const DensityFn& p_novel, double alpha, const Tensor& nominal) {
  const auto scores = likelihood_ratio_score(p_data, p_novel, nominal);
  return threshold_at_fpr(scores, alpha);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double gaussian_lr_auroc(double mean_gap) { return normal_cdf(std::abs(mean_gap) / std::numbers::sqrt2); }

// --- JSON ---------------------------------------------------------------------

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::format, "density JSON " + (path.empty() ? std::string("/") : path), msg);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(path + "/" + key, "missing field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) schema_error(path, "expected a number");
  return j.get<double>();
}

std::vector<double> number_array(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "/" + std::to_string(i)));
  return out;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      schema_error(path + "/" + it.key(), "unknown field");
  }
}

GaussianMixtureDensity parse_mixture(const json& j, const std::string& path) {
  if (!j.is_object()) schema_error(path, "expected an object");
  reject_unknown(j, {"weights", "means", "variances"}, path);
  GaussianMixtureDensity g;
  g.weights = number_array(field(j, "weights", path), path + "/weights");
  const json& means = field(j, "means", path);
  const json& vars = field(j, "variances", path);
  if (!means.is_array()) schema_error(path + "/means", "expected an array of vectors");
  if (!vars.is_array()) schema_error(path + "/variances", "expected an array of vectors");
  for (std::size_t k = 0; k < means.size(); ++k)
    g.means.push_back(number_array(means[k], path + "/means/" + std::to_string(k)));
  for (std::size_t k = 0; k < vars.size(); ++k)
    g.variances.push_back(number_array(vars[k], path + "/variances/" + std::to_string(k)));
  try {
    g.validate();
  } catch (const Error& e) {
    schema_error(path, e.what());
  }
  return g;
}

json mixture_json(const GaussianMixtureDensity& g) {
  return json{{"weights", g.weights}, {"means", g.means}, {"variances", g.variances}};
}

}  // namespace

DensityDocument parse_density_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::format, "density JSON", e.what());
  }
  if (!j.is_object()) schema_error("", "expected an object");
  reject_unknown(j, {"version", "data", "novel", "pi", "lower", "upper"}, "");
  DensityDocument doc;
  const json& version = field(j, "version", "");
  if (!version.is_number_integer() || version.get<int>() != 1) schema_error("/version", "unsupported version (expected 1)");
  doc.data = parse_mixture(field(j, "data", ""), "/data");
  if (j.contains("novel")) {
    doc.novel = parse_mixture(j["novel"], "/novel");
    if (doc.novel->dim() != doc.data.dim()) schema_error("/novel", "dimension differs from /data");
  }
  if (j.contains("pi")) {
    doc.pi = number(j["pi"], "/pi");
    if (!(doc.pi >= 0.0 && doc.pi <= 1.0)) schema_error("/pi", "must lie in [0, 1]");
  }
  if (j.contains("lower")) doc.lower = number_array(j["lower"], "/lower");
  if (j.contains("upper")) doc.upper = number_array(j["upper"], "/upper");
  if (doc.lower.has_value() != doc.upper.has_value()) schema_error("/lower", "lower and upper must be given together");
  if (doc.lower) {
    if (doc.lower->size() != doc.data.dim() || doc.upper->size() != doc.data.dim())
      schema_error("/lower", "bounds dimension differs from /data");
    for (std::size_t i = 0; i < doc.lower->size(); ++i)
      if (!((*doc.lower)[i] < (*doc.upper)[i])) schema_error("/lower/" + std::to_string(i), "must be below upper bound");
  }
  return doc;
}

std::string density_json(const DensityDocument& doc) {
  json j{{"version", doc.version}, {"data", mixture_json(doc.data)}, {"pi", doc.pi}};
  if (doc.novel) j["novel"] = mixture_json(*doc.novel);
  if (doc.lower) j["lower"] = *doc.lower;
  if (doc.upper) j["upper"] = *doc.upper;
  return j.dump(2);
}

}  // namespace ndgan
