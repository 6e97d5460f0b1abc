#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tclust/io.hpp"
#include "tclust/metrics.hpp"

using namespace tclust;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string &name) {
  const fs::path dir = fs::path(testing::TempDir()) / "tclust_io";
  fs::create_directories(dir);
  return dir / name;
}

void write_bytes(const fs::path &p, const std::vector<unsigned char> &b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char *>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

void put_be32(std::vector<unsigned char> &b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8)
    b.push_back(static_cast<unsigned char>(v >> s));
}

std::vector<unsigned char> idx_images(std::uint32_t n, std::uint32_t r,
                                      std::uint32_t c,
                                      const std::vector<unsigned char> &pixels) {
  std::vector<unsigned char> b{0, 0, 0x08, 3};
  put_be32(b, n);
  put_be32(b, r);
  put_be32(b, c);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<unsigned char> idx_labels(const std::vector<unsigned char> &labels) {
  std::vector<unsigned char> b{0, 0, 0x08, 1};
  put_be32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

bool bit_equal(const DenseTensor &a, const DenseTensor &b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST(Idx, LoadsMnistLayout) {
  std::vector<unsigned char> px(3 * 28 * 28, 0);
  for (std::size_t i = 0; i < 28 * 28; ++i) {
    px[28 * 28 + i] = 255;                         // image 1 all white
    px[2 * 28 * 28 + i] = static_cast<unsigned char>(i % 256);
  }
  const auto img = temp_path("img.idx"), lab = temp_path("lab.idx");
  write_bytes(img, idx_images(3, 28, 28, px));
  write_bytes(lab, idx_labels({4, 1, 9}));
  const Dataset ds = load_idx(img, lab);
  EXPECT_EQ(ds.tensor.shape(), (Shape{28, 28, 3}));
  EXPECT_EQ(frob_norm(slice_last_mode(ds.tensor, 0)), 0.0);
  EXPECT_EQ(ds.tensor(5, 7, 1), 1.0);
  EXPECT_EQ(ds.tensor(0, 3, 2), 3.0 / 255.0);
  EXPECT_EQ(ds.tensor(1, 0, 2), 28.0 / 255.0); // row-major pixels within an image
  EXPECT_EQ(*ds.labels, (std::vector<Label>{4, 1, 9}));
  EXPECT_FALSE(load_idx(img).labels.has_value());
}

TEST(Idx, RejectsMalformedFiles) {
  const std::vector<unsigned char> px(2 * 2 * 2, 7);
  const auto p = temp_path("bad.idx"), l = temp_path("bad_lab.idx");
  auto bytes = idx_images(2, 2, 2, px);
  bytes[0] = 1;
  write_bytes(p, bytes);
  EXPECT_THROW(load_idx(p), FormatError);

  bytes = idx_images(2, 2, 2, px);
  bytes[2] = 0x0D; // float payload
  write_bytes(p, bytes);
  EXPECT_THROW(load_idx(p), FormatError);

  bytes = idx_images(2, 2, 2, px);
  bytes.pop_back();
  write_bytes(p, bytes);
  EXPECT_THROW(load_idx(p), FormatError);

  bytes = idx_images(2, 2, 2, px);
  bytes.push_back(0);
  write_bytes(p, bytes);
  EXPECT_THROW(load_idx(p), FormatError);

  write_bytes(p, idx_images(2, 2, 2, px));
  write_bytes(l, idx_labels({1, 2, 3}));
  EXPECT_THROW(load_idx(p, l), FormatError);
  EXPECT_THROW(load_idx(temp_path("missing.idx")), FormatError);
}

TEST(Tcls, RoundTripIsBitExact) {
  DenseTensor x = oracle::random_tensor({3, 2, 5}, 1);
  x[0] = -0.0;
  x[1] = std::numeric_limits<double>::denorm_min();
  x[2] = std::numeric_limits<double>::infinity();
  const auto p = temp_path("a.tcls");
  save_dense(p, Dataset{x, std::nullopt, "a"});
  const Dataset back = load_dense(p);
  EXPECT_TRUE(bit_equal(back.tensor, x));
  EXPECT_FALSE(back.labels);
  EXPECT_EQ(back.name, "a");

  save_dense(p, Dataset{x, std::vector<Label>{0, 3, -1, 2, 9}, "a"});
  const Dataset lab = load_dense(p);
  EXPECT_TRUE(bit_equal(lab.tensor, x));
  EXPECT_EQ(*lab.labels, (std::vector<Label>{0, 3, -1, 2, 9}));
}

TEST(Tcls, HeaderLayout) {
  const auto bytes = encode_dense(Dataset{DenseTensor({2, 1}, {1.0, 2.0}), std::nullopt, "h"});
  ASSERT_EQ(bytes.size(), 4u + 2 + 2 + 2 * 8 + 2 * 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TCLS");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], 0);
  EXPECT_EQ(bytes[6], 2);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[16], 1);
  double first;
  std::memcpy(&first, bytes.data() + 24, 8);
  EXPECT_EQ(first, 1.0);
}

TEST(Tcls, RejectsMalformedContainers) {
  const Dataset ds{oracle::random_tensor({2, 3}, 2), std::vector<Label>{0, 1, 0}, "m"};
  const auto good = encode_dense(ds);

  auto b = good;
  b[0] = 'X';
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  b = good;
  b[4] = 999 & 0xff;
  b[5] = 999 >> 8;
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  b = good;
  b[6] = 0;
  b[7] = 0;
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  b = encode_dense(Dataset{ds.tensor, std::nullopt, "m"});
  b.pop_back();
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  b = good;
  b.push_back(0);
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  b = encode_dense(Dataset{ds.tensor, std::nullopt, "m"});
  b.insert(b.end(), {'J', 'U', 'N', 'K'});
  EXPECT_THROW(decode_dense(b, "m"), FormatError);

  EXPECT_THROW(encode_dense(Dataset{ds.tensor, std::vector<Label>{1}, "m"}),
               ValidationError);
  EXPECT_THROW(load_dense(temp_path("nope.tcls")), FormatError);
}

TEST(Synth, NoiseFreeSamplesEqualCentroids) {
  SynthConfig c;
  c.clusters = 3;
  c.per_cluster = 4;
  c.slice_shape = {5, 4};
  c.sigma = 0.0;
  const auto s = synth_clusters(c);
  for (std::size_t m = 0; m < 12; ++m)
    EXPECT_EQ(slice_last_mode(s.data.tensor, m), s.centroids[m / 4]);
  EXPECT_EQ(s.data.labels->at(5), 1);
}

TEST(Synth, DeterministicSeparatedLowRank) {
  SynthConfig c;
  c.clusters = 4;
  c.slice_shape = {6, 5};
  c.separation = 2.0;
  c.rank = 2;
  c.seed = 11;
  const auto a = synth_clusters(c), b = synth_clusters(c);
  EXPECT_TRUE(bit_equal(a.data.tensor, b.data.tensor));
  EXPECT_EQ(a.data.labels, b.data.labels);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j)
      EXPECT_GE(frob_norm(a.centroids[i] - a.centroids[j]), 2.0);
    Eigen::JacobiSVD<Matrix> svd(matricize(a.centroids[i], 0));
    EXPECT_LE(svd.singularValues()(2), 1e-12 * svd.singularValues()(0));
  }
  c.seed = 12;
  EXPECT_FALSE(bit_equal(synth_clusters(c).data.tensor, a.data.tensor));
}

TEST(Synth, HighSeparationRatioIsNearestCentroidSeparable) {
  SynthConfig c;
  c.clusters = 3;
  c.per_cluster = 30;
  c.slice_shape = {8, 8};
  c.separation = 1.0;
  c.sigma = 0.05;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    c.seed = seed;
    const auto s = synth_clusters(c);
    std::vector<DenseTensor> slices;
    for (std::size_t m = 0; m < s.data.samples(); ++m)
      slices.push_back(slice_last_mode(s.data.tensor, m));
    EXPECT_EQ(accuracy(*s.data.labels, oracle::nearest_center(slices, s.centroids)), 1.0);
  }
}

TEST(Synth, Errors) {
  SynthConfig c;
  c.clusters = 0;
  EXPECT_THROW(synth_clusters(c), ValidationError);
  c.clusters = 2;
  c.sigma = -1.0;
  EXPECT_THROW(synth_clusters(c), ValidationError);
  c.sigma = 0.1;
  c.clusters = 50;
  c.slice_shape = {1, 1};
  EXPECT_THROW(synth_clusters(c), ValidationError);
}

TEST(Subsample, PerClassSeeded) {
  std::vector<Label> labels;
  for (int i = 0; i < 40; ++i)
    labels.push_back(i % 4);
  DenseTensor x({2, 40});
  for (std::size_t m = 0; m < 40; ++m) {
    x[m] = static_cast<double>(m);
    x[40 + m] = -static_cast<double>(m);
  }
  const Dataset ds{x, labels, "d"};
  const Dataset a = subsample_per_class(ds, {3, 1}, 4, 5);
  EXPECT_EQ(a.tensor.shape(), (Shape{2, 8}));
  EXPECT_EQ(*a.labels, (std::vector<Label>{3, 3, 3, 3, 1, 1, 1, 1}));
  for (std::size_t j = 0; j < 8; ++j) {
    const auto orig = static_cast<std::size_t>(a.tensor[j]);
    EXPECT_EQ(labels[orig], (*a.labels)[j]);
    EXPECT_EQ(a.tensor[8 + j], -a.tensor[j]);
  }
  EXPECT_TRUE(bit_equal(subsample_per_class(ds, {3, 1}, 4, 5).tensor, a.tensor));
  EXPECT_EQ(subsample_per_class(ds, {}, 2, 0).samples(), 8u);
  EXPECT_THROW(subsample_per_class(ds, {7}, 1, 0), ValidationError);
  EXPECT_THROW(subsample_per_class(ds, {0}, 11, 0), ValidationError);

  const auto chosen = choose_classes(ds, 3, 9);
  EXPECT_EQ(chosen.size(), 3u);
  EXPECT_EQ(chosen, choose_classes(ds, 3, 9));
  EXPECT_THROW(choose_classes(ds, 5, 9), ValidationError);
}

TEST(Dataset, LabelLengthChecked) {
  const Dataset ds{DenseTensor({2, 3}), std::vector<Label>{0, 1}, "x"};
  EXPECT_THROW(ds.validate(), ValidationError);
}
