#pragma once

// Dataset loading and generation.
//
// IDX (MNIST) files: big-endian header {0, 0, type, ndims}, ndims u32 extents,
// then the payload. Only unsigned-byte payloads (type 0x08) are supported.
//
// TCLS container, all fields little-endian:
//   "TCLS" | u16 version (=1) | u16 order | u64 shape[order]
//   | f64 data[prod(shape)] (row-major)
//   | optional: "LBLS" | u64 count | i64 labels[count]

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/QR>

#include "tclust/errors.hpp"
#include "tclust/metrics.hpp"
#include "tclust/tensor.hpp"

namespace tclust {

struct Dataset {
  DenseTensor tensor; // samples stacked on the last mode
  std::optional<std::vector<Label>> labels;
  std::string name;

  std::size_t samples() const { return tensor.dim(tensor.order() - 1); }

  void validate() const {
    if (labels && labels->size() != samples())
      throw ValidationError("dataset '" + name + "' has " +
                            std::to_string(labels->size()) + " labels for " +
                            std::to_string(samples()) + " samples");
  }
};

namespace detail {

inline std::vector<unsigned char> read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class ByteReader {
public:
  ByteReader(const std::vector<unsigned char> &bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw FormatError(what_ + ": truncated file");
  }
  std::uint64_t le(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += n;
    return v;
  }
  std::uint64_t be(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v = (v << 8) | bytes_[pos_ + i];
    pos_ += n;
    return v;
  }
  std::string_view tag(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char *>(bytes_.data()) + pos_, n);
    pos_ += n;
    return s;
  }
  unsigned char byte() {
    need(1);
    return bytes_[pos_++];
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  const std::vector<unsigned char> &bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline void put_le(std::vector<unsigned char> &out, std::uint64_t v,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

struct IdxArray {
  std::vector<std::size_t> dims;
  std::vector<unsigned char> payload;
};

inline IdxArray read_idx(const std::filesystem::path &path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, "IDX file '" + path.string() + "'");
  const unsigned char z0 = r.byte(), z1 = r.byte();
  const unsigned char type = r.byte(), ndims = r.byte();
  if (z0 != 0 || z1 != 0)
    throw FormatError("IDX file '" + path.string() + "': bad magic");
  if (type != 0x08)
    throw FormatError("IDX file '" + path.string() +
                      "': only unsigned byte payloads are supported");
  if (ndims == 0)
    throw FormatError("IDX file '" + path.string() + "': zero dimensions");
  IdxArray a;
  std::size_t total = 1;
  for (unsigned d = 0; d < ndims; ++d) {
    a.dims.push_back(static_cast<std::size_t>(r.be(4)));
    total *= a.dims.back();
  }
  if (r.remaining() != total)
    throw FormatError("IDX file '" + path.string() + "': expected " +
                      std::to_string(total) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  a.payload.assign(bytes.end() - static_cast<std::ptrdiff_t>(total),
                   bytes.end());
  return a;
}

} // namespace detail

/// Loads IDX images (count x rows x cols) as a rows x cols x count tensor with
/// pixels scaled to [0, 1]. `labels_path` may be empty.
inline Dataset load_idx(const std::filesystem::path &images_path,
                        const std::filesystem::path &labels_path = {}) {
  const auto img = detail::read_idx(images_path);
  if (img.dims.size() < 2)
    throw FormatError("IDX images need at least two dimensions");
  const std::size_t count = img.dims.front();
  if (count == 0)
    throw FormatError("IDX images: no samples");
  Shape shape(img.dims.begin() + 1, img.dims.end());
  const std::size_t per = shape_size(shape);
  shape.push_back(count);
  DenseTensor x(shape);
  for (std::size_t m = 0; m < count; ++m)
    for (std::size_t e = 0; e < per; ++e)
      x[e * count + m] = img.payload[m * per + e] / 255.0;

  Dataset ds{std::move(x), std::nullopt, images_path.stem().string()};
  if (!labels_path.empty()) {
    const auto lab = detail::read_idx(labels_path);
    if (lab.dims.size() != 1)
      throw FormatError("IDX labels must be one-dimensional");
    if (lab.dims[0] != count)
      throw FormatError("IDX label count " + std::to_string(lab.dims[0]) +
                        " does not match image count " + std::to_string(count));
    ds.labels.emplace(lab.payload.begin(), lab.payload.end());
  }
  return ds;
}

inline std::vector<unsigned char> encode_dense(const Dataset &ds) {
  ds.validate();
  std::vector<unsigned char> out{'T', 'C', 'L', 'S'};
  detail::put_le(out, 1, 2);
  detail::put_le(out, ds.tensor.order(), 2);
  for (auto d : ds.tensor.shape())
    detail::put_le(out, d, 8);
  for (double v : ds.tensor.data())
    detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  if (ds.labels) {
    out.insert(out.end(), {'L', 'B', 'L', 'S'});
    detail::put_le(out, ds.labels->size(), 8);
    for (Label l : *ds.labels)
      detail::put_le(out, static_cast<std::uint64_t>(l), 8);
  }
  return out;
}

inline Dataset decode_dense(const std::vector<unsigned char> &bytes,
                            std::string name) {
  detail::ByteReader r(bytes, "TCLS '" + name + "'");
  if (r.tag(4) != "TCLS")
    throw FormatError("TCLS '" + name + "': bad magic");
  const auto version = r.le(2);
  if (version != 1)
    throw FormatError("TCLS '" + name + "': unsupported version " +
                      std::to_string(version));
  const auto order = r.le(2);
  if (order == 0)
    throw FormatError("TCLS '" + name + "': empty shape");
  Shape shape;
  std::size_t total = 1;
  for (std::uint64_t i = 0; i < order; ++i) {
    const auto d = r.le(8);
    if (d == 0)
      throw FormatError("TCLS '" + name + "': zero extent");
    shape.push_back(static_cast<std::size_t>(d));
    if (total > (std::size_t{1} << 40) / std::max<std::size_t>(d, 1))
      throw FormatError("TCLS '" + name + "': shape too large");
    total *= static_cast<std::size_t>(d);
  }
  r.need(total * 8);
  std::vector<double> data(total);
  for (auto &v : data)
    v = std::bit_cast<double>(r.le(8));
  Dataset ds{DenseTensor(std::move(shape), std::move(data)), std::nullopt,
             std::move(name)};
  if (r.remaining() > 0) {
    if (r.tag(4) != "LBLS")
      throw FormatError("TCLS '" + ds.name + "': unexpected trailing data");
    const auto count = r.le(8);
    if (count != ds.samples())
      throw FormatError("TCLS '" + ds.name + "': label count " +
                        std::to_string(count) + " does not match " +
                        std::to_string(ds.samples()) + " samples");
    r.need(count * 8);
    std::vector<Label> labels(count);
    for (auto &l : labels)
      l = static_cast<Label>(r.le(8));
    ds.labels = std::move(labels);
    if (r.remaining() > 0)
      throw FormatError("TCLS '" + ds.name + "': unexpected trailing data");
  }
  return ds;
}

inline void save_dense(const std::filesystem::path &path, const Dataset &ds) {
  const auto bytes = encode_dense(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FormatError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FormatError("short write to '" + path.string() + "'");
}

inline Dataset load_dense(const std::filesystem::path &path) {
  return decode_dense(detail::read_file(path), path.stem().string());
}

/// Keeps `per_class` seeded-random samples of each listed class (all classes
/// when `classes` is empty), grouped by class in the listed order.
inline Dataset subsample_per_class(const Dataset &ds,
                                   std::vector<Label> classes,
                                   std::size_t per_class, std::uint64_t seed) {
  if (!ds.labels)
    throw ValidationError("subsampling by class needs labels");
  std::map<Label, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < ds.labels->size(); ++i)
    members[(*ds.labels)[i]].push_back(i);
  if (classes.empty())
    for (const auto &[c, _] : members)
      classes.push_back(c);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  std::vector<Label> labels;
  for (Label c : classes) {
    auto it = members.find(c);
    if (it == members.end() || it->second.size() < per_class)
      throw ValidationError("class " + std::to_string(c) + " has fewer than " +
                            std::to_string(per_class) + " samples");
    std::vector<std::size_t> idx = it->second;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(per_class);
    std::sort(idx.begin(), idx.end());
    keep.insert(keep.end(), idx.begin(), idx.end());
    labels.insert(labels.end(), per_class, c);
  }
  if (keep.empty())
    throw ValidationError("subsampling selected no samples");

  const std::size_t m_old = ds.samples();
  const std::size_t m_new = keep.size();
  Shape shape = ds.tensor.shape();
  shape.back() = m_new;
  DenseTensor x(shape);
  const std::size_t per = ds.tensor.size() / m_old;
  for (std::size_t e = 0; e < per; ++e)
    for (std::size_t j = 0; j < m_new; ++j)
      x[e * m_new + j] = ds.tensor[e * m_old + keep[j]];
  return Dataset{std::move(x), std::move(labels), ds.name};
}

/// Draws `count` distinct class ids present in the labels.
inline std::vector<Label> choose_classes(const Dataset &ds, std::size_t count,
                                         std::uint64_t seed) {
  if (!ds.labels)
    throw ValidationError("choosing classes needs labels");
  std::vector<Label> all = *ds.labels;
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  if (count > all.size())
    throw ValidationError("requested " + std::to_string(count) +
                          " classes, dataset has " + std::to_string(all.size()));
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  std::sort(all.begin(), all.end());
  return all;
}

struct SynthConfig {
  int clusters = 3;
  std::size_t per_cluster = 30;
  Shape slice_shape{8, 8};
  double sigma = 0.05;
  double separation = 1.0;
  /// Multilinear rank of the centroids in every slice mode (capped by extent).
  std::size_t rank = 2;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  Dataset data;
  std::vector<DenseTensor> centroids;
};

/// K low-multilinear-rank centroids sharing orthonormal factors, pairwise at
/// least `separation` apart (rejection sampled), plus i.i.d. Gaussian noise.
inline SynthDataset synth_clusters(const SynthConfig &cfg) {
  if (cfg.clusters < 1 || cfg.per_cluster < 1)
    throw ValidationError("synth: clusters and per-cluster counts must be >= 1");
  if (!(cfg.sigma >= 0.0) || !(cfg.separation >= 0.0))
    throw ValidationError("synth: sigma and separation must be non-negative");
  if (cfg.slice_shape.empty() || cfg.rank < 1)
    throw ValidationError("synth: need a slice shape and rank >= 1");
  for (auto d : cfg.slice_shape)
    if (d == 0)
      throw ValidationError("synth: slice extents must be positive");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Matrix> factors;
  Shape core_shape;
  for (auto d : cfg.slice_shape) {
    const auto r = static_cast<Eigen::Index>(std::min(d, cfg.rank));
    Matrix a(static_cast<Eigen::Index>(d), r);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a.data()[i] = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(a);
    factors.push_back(qr.householderQ() *
                      Matrix::Identity(static_cast<Eigen::Index>(d), r));
    core_shape.push_back(static_cast<std::size_t>(r));
  }
  const double core_size = static_cast<double>(shape_size(core_shape));
  // Expected pairwise distance of two cores is about twice the separation.
  const double scale = std::sqrt(2.0 / core_size) * std::max(cfg.separation, 1e-300);

  std::vector<DenseTensor> cores;
  bool ok = false;
  for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
    cores.clear();
    for (int k = 0; k < cfg.clusters; ++k) {
      DenseTensor g(core_shape);
      for (auto &v : g.data())
        v = scale * normal(rng);
      cores.push_back(std::move(g));
    }
    ok = true;
    for (int i = 0; i < cfg.clusters && ok; ++i)
      for (int j = i + 1; j < cfg.clusters && ok; ++j)
        ok = frob_norm(cores[i] - cores[j]) >= cfg.separation;
  }
  if (!ok)
    throw ValidationError("synth: could not meet separation " +
                          std::to_string(cfg.separation) +
                          " after 1000 attempts");

  std::vector<DenseTensor> centroids;
  for (const auto &g : cores) {
    DenseTensor c = g;
    for (std::size_t n = 0; n < factors.size(); ++n)
      c = mode_n_product(c, factors[n], n);
    centroids.push_back(std::move(c));
  }

  std::vector<DenseTensor> slices;
  std::vector<Label> labels;
  for (int k = 0; k < cfg.clusters; ++k)
    for (std::size_t i = 0; i < cfg.per_cluster; ++i) {
      DenseTensor s = centroids[static_cast<std::size_t>(k)];
      if (cfg.sigma > 0.0)
        for (auto &v : s.data())
          v += cfg.sigma * normal(rng);
      slices.push_back(std::move(s));
      labels.push_back(k);
    }
  Dataset ds{stack_last_mode(slices), std::move(labels), "synthetic"};
  return {std::move(ds), std::move(centroids)};
}

} // namespace tclust
