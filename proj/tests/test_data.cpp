#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "adapto/data.hpp"
#include "adapto/errors.hpp"
#include "test_util.hpp"

using namespace adapto;

namespace {

std::vector<std::size_t> brute_offsets(std::size_t extent, std::size_t tile, std::size_t step) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r + tile <= extent; ++r) {
    if (r % step == 0 || r + tile == extent) out.push_back(r);
  }
  return out;
}

Dataset random_images(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(0, 9);
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.push_back({oracle::uniform_tensor({1, 3, 32, 32}, rng, 0.0, 1.0), label(rng)});
  }
  return d;
}

}  // namespace

TEST(Cifar, ParsesConstructedRecord) {
  std::vector<std::uint8_t> bytes(3073, 0);
  bytes[0] = 7;
  const Dataset d = parse_cifar10_binary(bytes);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].label, 7);
  EXPECT_EQ(d[0].pixels.shape(), (Shape{1, 3, 32, 32}));
  for (double v : d[0].pixels.data()) EXPECT_EQ(v, 0.0);

  bytes[1 + 1024 + 5] = 255;
  EXPECT_EQ(parse_cifar10_binary(bytes)[0].pixels.at(0, 1, 0, 5), 1.0);
}

TEST(Cifar, RejectsMalformedInput) {
  EXPECT_THROW(parse_cifar10_binary(std::vector<std::uint8_t>(3074, 0)), FormatError);
  std::vector<std::uint8_t> bad(3073, 0);
  bad[0] = 10;
  EXPECT_THROW(parse_cifar10_binary(bad), DataError);
  EXPECT_THROW(load_cifar10_binary("/nonexistent/data_batch_1.bin"), Error);
}

TEST(Cifar, RoundTripWithinQuantization) {
  const Dataset d = random_images(5, 1);
  const Dataset back = parse_cifar10_binary(encode_cifar10_binary(d));
  ASSERT_EQ(back.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back[i].label, d[i].label);
    EXPECT_LE(oracle::max_abs_diff(back[i].pixels.data(), d[i].pixels.data()), 0.5 / 255.0 + 1e-12);
  }
  EXPECT_EQ(encode_cifar10_binary(back), encode_cifar10_binary(d));

  const auto path = std::filesystem::temp_directory_path() / "adapto_roundtrip.bin";
  save_cifar10_binary(d, path.string());
  EXPECT_EQ(std::filesystem::file_size(path), 5u * 3073u);
  EXPECT_EQ(load_cifar10_binary(path.string())[3].label, d[3].label);
  std::filesystem::remove(path);
}

TEST(Synthetic, BalancedAndDeterministic) {
  const Dataset d = synthetic_dataset(4, 2, 16, 3);
  int ones = 0;
  for (const auto& s : d) ones += s.label;
  EXPECT_EQ(ones, 2);
  const Dataset again = synthetic_dataset(4, 2, 16, 3);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(d[i].pixels.values(), again[i].pixels.values());
  for (const auto& s : d) {
    for (double v : s.pixels.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_NE(synthetic_dataset(4, 2, 16, 4)[0].pixels.values(), d[0].pixels.values());
}

TEST(Synthetic, NearestCentroidSeparates) {
  for (std::size_t classes : {2u, 4u, 10u}) {
    const Dataset fit = synthetic_dataset(200, classes, 16, 5);
    const Dataset test = synthetic_dataset(200, classes, 16, 6);
    const std::size_t dim = fit[0].pixels.numel();
    std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
    std::vector<double> count(classes, 0.0);
    for (const auto& s : fit) {
      for (std::size_t i = 0; i < dim; ++i) centroid[s.label][i] += s.pixels[i];
      count[s.label] += 1.0;
    }
    for (std::size_t k = 0; k < classes; ++k)
      for (double& v : centroid[k]) v /= count[k];
    std::size_t correct = 0;
    for (const auto& s : test) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t k = 0; k < classes; ++k) {
        double dist = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dist += std::pow(s.pixels[i] - centroid[k][i], 2);
        if (dist < best_d) {
          best_d = dist;
          best = k;
        }
      }
      correct += static_cast<int>(best) == s.label;
    }
    EXPECT_GE(static_cast<double>(correct) / 200.0, 0.99) << classes << " classes";
  }
}

TEST(Augment, IdentityPolicies) {
  const Dataset d = random_images(1, 2);
  const LabeledImage out = augment(d[0], AugmentPolicy::none(), 5);
  EXPECT_EQ(out.pixels.values(), d[0].pixels.values());
  EXPECT_EQ(out.label, d[0].label);
  EXPECT_LE(oracle::max_abs_diff(rotate(d[0].pixels, 0.0).data(), d[0].pixels.data()), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(shear_horizontal(d[0].pixels, 0.0).data(), d[0].pixels.data()), 1e-12);
  EXPECT_LE(oracle::max_abs_diff(crop_resize(d[0].pixels, 0, 0, 32, 32).data(), d[0].pixels.data()), 1e-12);
}

TEST(Augment, FlipReflectsColumns) {
  const Dataset d = random_images(1, 3);
  const Tensor f = flip_horizontal(d[0].pixels);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t h = 0; h < 32; ++h)
      for (std::size_t j = 0; j < 32; ++j) EXPECT_EQ(f.at(0, c, h, j), d[0].pixels.at(0, c, h, 31 - j));
}

TEST(Augment, RotationByQuarterTurnPermutesPixels) {
  std::mt19937_64 rng(4);
  const Tensor x = oracle::uniform_tensor({1, 1, 5, 5}, rng, 0.0, 1.0);
  const Tensor r = rotate(x, 90.0);
  std::multiset<double> a(x.data().begin(), x.data().end()), b;
  for (double v : r.data()) b.insert(std::round(v * 1e9) / 1e9);
  std::multiset<double> a_rounded;
  for (double v : a) a_rounded.insert(std::round(v * 1e9) / 1e9);
  EXPECT_EQ(a_rounded, b);
}

TEST(Augment, LabelInvariantAndDeterministic) {
  const Dataset d = random_images(4, 5);
  const AugmentPolicy p = AugmentPolicy::cifar();
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (const auto& img : d) {
      const LabeledImage a = augment(img, p, seed);
      EXPECT_EQ(a.label, img.label);
      EXPECT_EQ(a.pixels.shape(), img.pixels.shape());
      EXPECT_EQ(augment(img, p, seed).pixels.values(), a.pixels.values());
    }
  }
  EXPECT_THROW(augment_policy("cutmix"), ArgumentError);
  EXPECT_EQ(augment_policy("none").flip_horizontal, false);
}

TEST(Tiling, Examples) {
  EXPECT_EQ(tile_image(Tensor::zeros({1, 1, 8, 8}), 4, 4, 4).size(), 4u);
  EXPECT_EQ(tile_offsets(10, 4, 4), (std::vector<std::size_t>{0, 4, 6}));
  EXPECT_EQ(tile_offsets(8, 4, 4), (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(tile_image(Tensor::zeros({1, 1, 10, 8}), 4, 4, 4).size(), 6u);
  std::mt19937_64 rng(6);
  const Tensor x = oracle::random_tensor({1, 3, 6, 5}, rng);
  const auto whole = tile_image(x, 6, 5, 4);
  ASSERT_EQ(whole.size(), 1u);
  EXPECT_EQ(whole[0].values(), x.values());
  EXPECT_THROW(tile_image(x, 7, 5, 1), ArgumentError);
  EXPECT_THROW(tile_image(x, 2, 2, 0), ArgumentError);
}

TEST(Tiling, MatchesBruteForceAndCovers) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> ext(1, 20);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t h = ext(rng), w = ext(rng);
    const std::size_t th = 1 + ext(rng) % h, tw = 1 + ext(rng) % w;
    const std::size_t step = 1 + ext(rng) % 6;
    const Tensor x = oracle::random_tensor({1, 2, h, w}, rng);
    const auto rows = brute_offsets(h, th, step), cols = brute_offsets(w, tw, step);
    EXPECT_EQ(tile_offsets(h, th, step), rows);
    const auto tiles = tile_image(x, th, tw, step);
    ASSERT_EQ(tiles.size(), rows.size() * cols.size());
    std::vector<int> covered(h * w, 0);
    std::size_t t = 0;
    for (std::size_t r : rows)
      for (std::size_t c : cols) {
        const Tensor& tile = tiles[t++];
        ASSERT_EQ(tile.shape(), (Shape{1, 2, th, tw}));
        for (std::size_t ch = 0; ch < 2; ++ch)
          for (std::size_t i = 0; i < th; ++i)
            for (std::size_t j = 0; j < tw; ++j) {
              EXPECT_EQ(tile.at(0, ch, i, j), x.at(0, ch, r + i, c + j));
              covered[(r + i) * w + c + j] = 1;
            }
      }
    if (step <= th && step <= tw) {
      for (int v : covered) EXPECT_EQ(v, 1);
    }
  }
}

TEST(Stack, BuildsBatch) {
  const Dataset d = synthetic_dataset(3, 3, 4, 1);
  const Tensor b = stack(d, {2, 0});
  EXPECT_EQ(b.shape(), (Shape{2, 3, 4, 4}));
  for (std::size_t i = 0; i < 48; ++i) {
    EXPECT_EQ(b[i], d[2].pixels[i]);
    EXPECT_EQ(b[48 + i], d[0].pixels[i]);
  }
}
