#include "ndgan/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "ndgan/rng.hpp"

namespace ndgan {

const char* to_string(SplitTag tag) { return tag == SplitTag::train ? "train" : "test"; }

void Dataset::validate() const {
  if (features.rank() != 2) throw Error(ErrorCode::shape, "Dataset", "features must be a 2D batch");
  for (double v : features.values())
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "Dataset", "non-finite feature value");
  if (labels) {
    if (labels->size() != size()) throw Error(ErrorCode::shape, "Dataset", "label count differs from row count");
    for (std::size_t i = 0; i < labels->size(); ++i) {
      if ((*labels)[i] >= num_classes) {
        throw Error(ErrorCode::invalid_argument, "Dataset",
                    "label " + std::to_string((*labels)[i]) + " at row " + std::to_string(i) + " is not below K = " +
                        std::to_string(num_classes));
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t d = dim();
  std::vector<double> f;
  f.reserve(rows.size() * d);
  std::optional<std::vector<std::size_t>> l;
  if (labels) l.emplace();
  for (std::size_t r : rows) {
    if (r >= size()) throw Error(ErrorCode::invalid_argument, "Dataset::subset", "row " + std::to_string(r) + " out of range");
    auto row = features.row(r);
    f.insert(f.end(), row.begin(), row.end());
    if (l) l->push_back((*labels)[r]);
  }
  Dataset out;
  out.features = Tensor::matrix(rows.size(), d, std::move(f));
  out.labels = std::move(l);
  out.num_classes = num_classes;
  out.split = split;
  out.provenance = provenance;
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  if (!labels) throw Error(ErrorCode::invalid_argument, "Dataset", "dataset has no labels");
  std::vector<std::vector<std::size_t>> out(num_classes);
  for (std::size_t i = 0; i < labels->size(); ++i) out[(*labels)[i]].push_back(i);
  return out;
}

std::vector<std::size_t> Dataset::class_histogram() const {
  std::vector<std::size_t> h(num_classes, 0);
  if (labels)
    for (std::size_t l : *labels) ++h[l];
  return h;
}

Dataset concat_datasets(std::span<const Dataset> parts) {
  if (parts.empty()) throw Error(ErrorCode::invalid_argument, "concat_datasets", "nothing to concatenate");
  const std::size_t d = parts.front().dim();
  bool all_labeled = true;
  std::size_t n = 0, k = 0;
  for (const auto& p : parts) {
    if (p.dim() != d) throw Error(ErrorCode::shape, "concat_datasets", "feature dimensions differ");
    all_labeled = all_labeled && p.labeled();
    n += p.size();
    k = std::max(k, p.num_classes);
  }
  std::vector<double> f;
  f.reserve(n * d);
  std::vector<std::size_t> l;
  for (const auto& p : parts) {
    f.insert(f.end(), p.features.values().begin(), p.features.values().end());
    if (all_labeled) l.insert(l.end(), p.labels->begin(), p.labels->end());
  }
  Dataset out;
  out.features = Tensor::matrix(n, d, std::move(f));
  if (all_labeled) out.labels = std::move(l);
  out.num_classes = k;
  out.split = parts.front().split;
  out.provenance = parts.front().provenance;
  return out;
}

GaussianMixtureDensity ring_density(std::size_t components, double radius, double sigma) {
  if (components < 2) throw Error(ErrorCode::invalid_argument, "gen_ring_mixture", "component count must be >= 2");
  if (!(radius > 0.0)) throw Error(ErrorCode::invalid_argument, "gen_ring_mixture", "radius must be > 0");
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "gen_ring_mixture", "sigma must be > 0");
  std::vector<double> weights(components, 1.0 / static_cast<double>(components));
  std::vector<std::vector<double>> means;
  for (std::size_t i = 0; i < components; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(components);
    means.push_back({radius * std::cos(angle), radius * std::sin(angle)});
  }
  auto g = GaussianMixtureDensity::isotropic(std::move(weights), std::move(means), sigma * sigma);
  // 1/K rounding can leave the weight sum a few ulps off.
  double total = 0.0;
  for (double w : g.weights) total += w;
  g.weights.back() += 1.0 - total;
  return g;
}

RingMixture gen_ring_mixture(std::size_t n, std::size_t components, double radius, double sigma, std::uint64_t seed) {
  auto density = ring_density(components, radius, sigma);
  if (n < components) {
    throw Error(ErrorCode::invalid_argument, "gen_ring_mixture",
                "n = " + std::to_string(n) + " is below the component count " + std::to_string(components));
  }
  Rng rng = RngStreams(seed).stream("sampling");
  std::vector<std::size_t> comp;
  Tensor x = density.sample(n, rng, &comp);
  Dataset d;
  d.features = std::move(x);
  d.labels = std::move(comp);
  d.num_classes = components;
  std::ostringstream prov;
  prov << "ring(n=" << n << ",components=" << components << ",radius=" << radius << ",sigma=" << sigma
       << ",seed=" << seed << ")";
  d.provenance = prov.str();
  return {std::move(d), std::move(density)};
}

// --- IDX ------------------------------------------------------------------------

namespace {

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, path, "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& path) {
  if (off + 4 > b.size()) {
    throw Error(ErrorCode::format, path,
                "truncated header at offset " + std::to_string(off) + ": expected " + std::to_string(off + 4) +
                    " bytes, file has " + std::to_string(b.size()));
  }
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

struct IdxHeader {
  std::vector<std::size_t> dims;
  std::size_t payload_offset = 0;
  std::size_t payload_size = 0;
};

IdxHeader parse_idx_header(const std::vector<unsigned char>& b, std::uint32_t expected_magic, const std::string& path) {
  const std::uint32_t magic = be32(b, 0, path);
  if (magic != expected_magic) {
    std::ostringstream os;
    os << "bad IDX magic 0x" << std::hex << magic << " at offset 0 (expected 0x" << expected_magic << ")";
    throw Error(ErrorCode::format, path, os.str());
  }
  IdxHeader h;
  const std::size_t ndims = magic & 0xff;
  h.payload_size = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    h.dims.push_back(be32(b, 4 + 4 * i, path));
    h.payload_size *= h.dims.back();
  }
  h.payload_offset = 4 + 4 * ndims;
  const std::size_t expected = h.payload_offset + h.payload_size;
  if (b.size() < expected) {
    throw Error(ErrorCode::format, path,
                "truncated payload at offset " + std::to_string(b.size()) + ": expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(b.size()));
  }
  return h;
}

void write_be32(std::ostream& os, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) os.put(static_cast<char>((v >> s) & 0xff));
}

}  // namespace

Dataset read_idx(const std::string& path) {
  const auto bytes = slurp(path);
  const IdxHeader h = parse_idx_header(bytes, 0x00000803, path);
  const std::size_t n = h.dims[0];
  const std::size_t d = h.dims[1] * h.dims[2];
  std::vector<double> f(n * d);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<double>(bytes[h.payload_offset + i]) / 255.0;
  Dataset out;
  out.features = Tensor::matrix(n, d, std::move(f));
  out.provenance = "idx:" + path;
  return out;
}

std::vector<std::size_t> read_idx_labels(const std::string& path) {
  const auto bytes = slurp(path);
  const IdxHeader h = parse_idx_header(bytes, 0x00000801, path);
  std::vector<std::size_t> labels(h.dims[0]);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = bytes[h.payload_offset + i];
  return labels;
}

Dataset read_idx_dataset(const std::string& images, const std::string& labels) {
  Dataset d = read_idx(images);
  auto l = read_idx_labels(labels);
  if (l.size() != d.size()) {
    throw Error(ErrorCode::format, labels,
                std::to_string(l.size()) + " labels for " + std::to_string(d.size()) + " images");
  }
  d.num_classes = l.empty() ? 0 : *std::max_element(l.begin(), l.end()) + 1;
  d.labels = std::move(l);
  d.provenance += "+" + labels;
  return d;
}

void write_idx_images(const std::string& path, const Dataset& data, std::size_t rows, std::size_t cols) {
  if (rows * cols != data.dim()) throw Error(ErrorCode::shape, "write_idx_images", "image extents do not match feature width");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, path, "cannot open for writing");
  write_be32(os, 0x00000803);
  write_be32(os, static_cast<std::uint32_t>(data.size()));
  write_be32(os, static_cast<std::uint32_t>(rows));
  write_be32(os, static_cast<std::uint32_t>(cols));
  for (double v : data.features.values()) os.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  if (!os) throw Error(ErrorCode::io, path, "write failed");
}

void write_idx_labels(const std::string& path, std::span<const std::size_t> labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::io, path, "cannot open for writing");
  write_be32(os, 0x00000801);
  write_be32(os, static_cast<std::uint32_t>(labels.size()));
  for (std::size_t l : labels) {
    if (l > 255) throw Error(ErrorCode::invalid_argument, "write_idx_labels", "label does not fit in a byte");
    os.put(static_cast<char>(l));
  }
  if (!os) throw Error(ErrorCode::io, path, "write failed");
}

// --- CSV ------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(cur);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

CsvDataset parse_csv_dataset(const std::string& text, std::optional<std::size_t> label_column,
                             const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw Error(ErrorCode::format, source, "empty CSV file");

  CsvDataset out;
  std::size_t first = 0;
  if (std::any_of(rows[0].begin(), rows[0].end(), [](const std::string& c) { return !parse_number(c); })) {
    out.header = rows[0];
    first = 1;
  }
  if (first >= rows.size()) throw Error(ErrorCode::format, source, "CSV has a header but no data rows");
  const std::size_t width = rows[first].size();
  if (label_column && *label_column >= width) {
    throw Error(ErrorCode::invalid_argument, source,
                "label column " + std::to_string(*label_column) + " outside " + std::to_string(width) + " columns");
  }
  const std::size_t d = label_column ? width - 1 : width;
  if (d == 0) throw Error(ErrorCode::format, source, "no feature columns");
  std::vector<double> features;
  std::vector<double> raw_labels;
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      throw Error(ErrorCode::format, source,
                  "row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) + " columns, expected " +
                      std::to_string(width));
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = parse_number(rows[r][c]);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::format, source,
                    "row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) + ": '" + rows[r][c] +
                        "' is not a finite number");
      }
      if (label_column && c == *label_column)
        raw_labels.push_back(*v);
      else
        features.push_back(*v);
    }
  }
  const std::size_t n = rows.size() - first;
  out.data.features = Tensor::matrix(n, d, std::move(features));
  out.data.provenance = "csv:" + source;
  if (label_column) {
    std::map<double, std::size_t> remap;
    for (double v : raw_labels) remap.emplace(v, 0);
    std::size_t k = 0;
    for (auto& [value, index] : remap) {
      index = k++;
      out.label_values.push_back(value);
    }
    std::vector<std::size_t> labels;
    for (double v : raw_labels) labels.push_back(remap[v]);
    out.data.labels = std::move(labels);
    out.data.num_classes = k;
  }
  return out;
}

CsvDataset read_csv_dataset(const std::string& path, std::optional<std::size_t> label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, path, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv_dataset(ss.str(), label_column, path);
}

std::string csv_dataset_text(const Dataset& data) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t j = 0; j < data.dim(); ++j) os << (j ? "," : "") << 'x' << j;
  if (data.labels) os << ",label";
  os << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto row = data.features.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
    if (data.labels) os << ',' << (*data.labels)[i];
    os << '\n';
  }
  return os.str();
}

std::pair<Dataset, Dataset> subsample_labeled(const Dataset& data, std::size_t per_class, std::uint64_t seed) {
  const auto by_class = data.indices_by_class();
  for (std::size_t k = 0; k < by_class.size(); ++k) {
    if (by_class[k].size() < per_class) {
      throw Error(ErrorCode::invalid_argument, "subsample_labeled",
                  "class " + std::to_string(k) + " has " + std::to_string(by_class[k].size()) + " examples, " +
                      std::to_string(per_class) + " requested");
    }
  }
  Rng rng = RngStreams(seed).stream("shuffling");
  std::vector<bool> chosen(data.size(), false);
  std::vector<std::size_t> labeled;
  for (auto idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(per_class);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) chosen[i] = true;
    labeled.insert(labeled.end(), idx.begin(), idx.end());
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!chosen[i]) rest.push_back(i);
  Dataset unl = data.subset(rest);
  unl.labels.reset();
  return {data.subset(labeled), std::move(unl)};
}

Dataset downscale_images(const Dataset& data, std::size_t side, std::size_t target) {
  if (side == 0 || side * side != data.dim()) {
    throw Error(ErrorCode::shape, "downscale_images",
                "feature width " + std::to_string(data.dim()) + " is not " + std::to_string(side) + " squared");
  }
  if (target == 0 || target > side) throw Error(ErrorCode::invalid_argument, "downscale_images", "target side must lie in [1, side]");
  // Overlap of source pixel s with target pixel t along one axis, in source units.
  const double ratio = static_cast<double>(side) / static_cast<double>(target);
  std::vector<std::vector<std::pair<std::size_t, double>>> cover(target);
  for (std::size_t t = 0; t < target; ++t) {
    const double lo = static_cast<double>(t) * ratio, hi = lo + ratio;
    for (std::size_t s = static_cast<std::size_t>(std::floor(lo)); s < side && static_cast<double>(s) < hi; ++s) {
      const double w = std::min(hi, static_cast<double>(s + 1)) - std::max(lo, static_cast<double>(s));
      if (w > 0.0) cover[t].push_back({s, w / ratio});
    }
  }
  const std::size_t n = data.size();
  std::vector<double> out(n * target * target, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto img = data.features.row(i);
    for (std::size_t ty = 0; ty < target; ++ty)
      for (std::size_t tx = 0; tx < target; ++tx) {
        double v = 0.0;
        for (auto [sy, wy] : cover[ty])
          for (auto [sx, wx] : cover[tx]) v += wy * wx * img[sy * side + sx];
        out[(i * target + ty) * target + tx] = v;
      }
  }
  Dataset d = data;
  d.features = Tensor::matrix(n, target * target, std::move(out));
  d.provenance += "|downscale " + std::to_string(side) + "->" + std::to_string(target);
  return d;
}

}  // namespace ndgan
