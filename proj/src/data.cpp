#include "adapto/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

#include "adapto/errors.hpp"

namespace adapto {

namespace {

constexpr std::size_t kCifarSide = 32;
constexpr std::size_t kCifarPixels = 3 * kCifarSide * kCifarSide;
constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
}

// Bilinear lookup with zero outside the plane.
double bilinear_zero(const double* plane, std::size_t h, std::size_t w, double y, double x) {
  const double fy = std::floor(y), fx = std::floor(x);
  const double wy = y - fy, wx = x - fx;
  const auto y0 = static_cast<long>(fy), x0 = static_cast<long>(fx);
  auto at = [&](long yy, long xx) -> double {
    if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) return 0.0;
    return plane[yy * w + xx];
  };
  return (1.0 - wy) * ((1.0 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
         wy * ((1.0 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
}

template <typename SourceOf>
Tensor resample(const Tensor& pixels, SourceOf source_of) {
  const Shape& s = pixels.shape();
  std::vector<double> out(pixels.numel());
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double* plane = pixels.data().data() + nc * s.plane();
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        const auto [sy, sx] = source_of(static_cast<double>(y), static_cast<double>(x));
        out[nc * s.plane() + y * s.w + x] = bilinear_zero(plane, s.h, s.w, sy, sx);
      }
    }
  }
  return Tensor(s, std::move(out));
}

void check_range(const std::pair<double, double>& r, const char* what) {
  if (!(r.first <= r.second)) throw ArgumentError(std::string("augment: ") + what + " range has lo > hi");
}

}  // namespace

Dataset parse_cifar10_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() % kCifarRecord != 0) {
    throw FormatError("CIFAR-10 binary: size " + std::to_string(bytes.size()) + " is not a multiple of " +
                      std::to_string(kCifarRecord));
  }
  Dataset out;
  out.reserve(bytes.size() / kCifarRecord);
  for (std::size_t off = 0; off < bytes.size(); off += kCifarRecord) {
    const int label = bytes[off];
    if (label > 9) {
      throw DataError("CIFAR-10 binary: record " + std::to_string(off / kCifarRecord) + " has label " +
                      std::to_string(label));
    }
    std::vector<double> px(kCifarPixels);
    for (std::size_t i = 0; i < kCifarPixels; ++i) px[i] = bytes[off + 1 + i] / 255.0;
    out.push_back({Tensor({1, 3, kCifarSide, kCifarSide}, std::move(px)), label});
  }
  return out;
}

Dataset load_cifar10_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open CIFAR-10 file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar10_binary(bytes);
}

std::vector<std::uint8_t> encode_cifar10_binary(const Dataset& images) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(images.size() * kCifarRecord);
  for (const auto& img : images) {
    if (img.pixels.shape() != Shape{1, 3, kCifarSide, kCifarSide}) {
      throw ShapeError("CIFAR-10 binary: image must be (1,3,32,32), got " + to_string(img.pixels.shape()));
    }
    if (img.label < 0 || img.label > 9) throw DataError("CIFAR-10 binary: label out of range");
    bytes.push_back(static_cast<std::uint8_t>(img.label));
    for (double v : img.pixels.data()) {
      bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    }
  }
  return bytes;
}

void save_cifar10_binary(const Dataset& images, const std::string& path) {
  const auto bytes = encode_cifar10_binary(images);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write CIFAR-10 file " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Dataset synthetic_dataset(std::size_t n, std::size_t num_classes, std::size_t size, std::uint64_t seed,
                          std::size_t channels) {
  if (num_classes < 1 || n < num_classes) throw ArgumentError("synthetic_dataset: need n >= num_classes >= 1");
  if (num_classes > 4 * channels) {
    throw ArgumentError("synthetic_dataset: at most 4 classes per channel");
  }
  if (size < 2) throw ArgumentError("synthetic_dataset: size must be at least 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  const std::size_t half = size / 2;

  Dataset out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % num_classes;
    const std::size_t quadrant = label % 4;
    const std::size_t lit_channel = (label / 4) % channels;
    const std::size_t row0 = quadrant / 2 == 0 ? 0 : half;
    const std::size_t col0 = quadrant % 2 == 0 ? 0 : half;
    std::vector<double> px(channels * size * size);
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
          const bool lit = c == lit_channel && y >= row0 && y < row0 + half && x >= col0 && x < col0 + half;
          const double v = (lit ? 0.8 : 0.2) + noise(rng);
          px[(c * size + y) * size + x] = std::clamp(v, 0.0, 1.0);
        }
      }
    }
    out.push_back({Tensor({1, channels, size, size}, std::move(px)), static_cast<int>(label)});
  }
  return out;
}

AugmentPolicy AugmentPolicy::cifar() {
  AugmentPolicy p;
  p.flip_horizontal = true;
  p.rotation_degrees = {-60.0, 60.0};
  p.shear = {-0.05, 0.25};
  p.crop = std::make_pair(std::size_t{26}, std::size_t{32});
  return p;
}

AugmentPolicy augment_policy(const std::string& id) {
  if (id == "none") return AugmentPolicy::none();
  if (id == "cifar") return AugmentPolicy::cifar();
  throw ArgumentError("unknown augmentation policy '" + id + "' (expected none or cifar)");
}

Tensor flip_horizontal(const Tensor& pixels) {
  const Shape& s = pixels.shape();
  std::vector<double> out(pixels.numel());
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    for (std::size_t y = 0; y < s.h; ++y) {
      for (std::size_t x = 0; x < s.w; ++x) {
        out[nc * s.plane() + y * s.w + x] = pixels[nc * s.plane() + y * s.w + (s.w - 1 - x)];
      }
    }
  }
  return Tensor(s, std::move(out));
}

Tensor rotate(const Tensor& pixels, double degrees) {
  const Shape& s = pixels.shape();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(s.h) - 1.0) / 2.0, cx = (static_cast<double>(s.w) - 1.0) / 2.0;
  return resample(pixels, [=](double y, double x) {
    const double dy = y - cy, dx = x - cx;
    return std::make_pair(-sn * dx + cs * dy + cy, cs * dx + sn * dy + cx);
  });
}

Tensor shear_horizontal(const Tensor& pixels, double factor) {
  const double cy = (static_cast<double>(pixels.shape().h) - 1.0) / 2.0;
  return resample(pixels, [=](double y, double x) { return std::make_pair(y, x - factor * (y - cy)); });
}

Tensor crop_resize(const Tensor& pixels, std::size_t top, std::size_t left, std::size_t crop_size,
                   std::size_t out_size) {
  const Shape& s = pixels.shape();
  if (crop_size == 0 || out_size == 0) throw ArgumentError("crop_resize: sizes must be positive");
  if (top + crop_size > s.h || left + crop_size > s.w) {
    throw ArgumentError("crop_resize: crop of " + std::to_string(crop_size) + " at (" + std::to_string(top) + "," +
                        std::to_string(left) + ") exceeds image " + to_string(s));
  }
  const double scale = static_cast<double>(crop_size) / static_cast<double>(out_size);
  const double last = static_cast<double>(crop_size - 1);
  std::vector<double> out(s.n * s.c * out_size * out_size);
  for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
    const double* plane = pixels.data().data() + nc * s.plane();
    for (std::size_t oy = 0; oy < out_size; ++oy) {
      const double sy = std::clamp((static_cast<double>(oy) + 0.5) * scale - 0.5, 0.0, last);
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t y1 = std::min(y0 + 1, crop_size - 1);
      const double wy = sy - static_cast<double>(y0);
      for (std::size_t ox = 0; ox < out_size; ++ox) {
        const double sx = std::clamp((static_cast<double>(ox) + 0.5) * scale - 0.5, 0.0, last);
        const auto x0 = static_cast<std::size_t>(sx);
        const std::size_t x1 = std::min(x0 + 1, crop_size - 1);
        const double wx = sx - static_cast<double>(x0);
        auto at = [&](std::size_t yy, std::size_t xx) { return plane[(top + yy) * s.w + left + xx]; };
        out[(nc * out_size + oy) * out_size + ox] =
            (1.0 - wy) * ((1.0 - wx) * at(y0, x0) + wx * at(y0, x1)) + wy * ((1.0 - wx) * at(y1, x0) + wx * at(y1, x1));
      }
    }
  }
  return Tensor({s.n, s.c, out_size, out_size}, std::move(out));
}

LabeledImage augment(const LabeledImage& img, const AugmentPolicy& policy, std::uint64_t seed) {
  check_range(policy.rotation_degrees, "rotation");
  check_range(policy.shear, "shear");
  const Shape& s = img.pixels.shape();
  if (policy.crop && (policy.crop->first > s.h || policy.crop->first > s.w)) {
    throw ArgumentError("augment: crop " + std::to_string(policy.crop->first) + " larger than image " +
                        to_string(s));
  }

  std::mt19937_64 rng(seed);
  Tensor px = img.pixels;
  if (policy.flip_horizontal && std::generate_canonical<double, 53>(rng) < 0.5) px = flip_horizontal(px);
  const double angle = uniform(rng, policy.rotation_degrees.first, policy.rotation_degrees.second);
  if (angle != 0.0) px = rotate(px, angle);
  const double factor = uniform(rng, policy.shear.first, policy.shear.second);
  if (factor != 0.0) px = shear_horizontal(px, factor);
  if (policy.crop) {
    const auto [crop, out] = *policy.crop;
    std::uniform_int_distribution<std::size_t> top(0, s.h - crop), left(0, s.w - crop);
    const std::size_t t = top(rng);
    const std::size_t l = left(rng);
    px = crop_resize(px, t, l, crop, out);
  }
  if (px.same_storage(img.pixels)) px = img.pixels.clone();
  return {px, img.label};
}

std::vector<std::size_t> tile_offsets(std::size_t extent, std::size_t tile, std::size_t step) {
  if (step == 0) throw ArgumentError("tile: step must be positive");
  if (tile == 0 || tile > extent) {
    throw ArgumentError("tile: tile extent " + std::to_string(tile) + " exceeds image extent " +
                        std::to_string(extent));
  }
  std::vector<std::size_t> offsets;
  for (std::size_t r = 0; r + tile <= extent; r += step) offsets.push_back(r);
  if (offsets.back() != extent - tile) offsets.push_back(extent - tile);
  return offsets;
}

std::vector<Tensor> tile_image(const Tensor& pixels, std::size_t tile_h, std::size_t tile_w, std::size_t step) {
  const Shape& s = pixels.shape();
  const auto rows = tile_offsets(s.h, tile_h, step);
  const auto cols = tile_offsets(s.w, tile_w, step);
  std::vector<Tensor> tiles;
  tiles.reserve(rows.size() * cols.size());
  for (std::size_t r : rows) {
    for (std::size_t c : cols) {
      std::vector<double> out(s.n * s.c * tile_h * tile_w);
      for (std::size_t nc = 0; nc < s.n * s.c; ++nc) {
        for (std::size_t y = 0; y < tile_h; ++y) {
          for (std::size_t x = 0; x < tile_w; ++x) {
            out[(nc * tile_h + y) * tile_w + x] = pixels[nc * s.plane() + (r + y) * s.w + c + x];
          }
        }
      }
      tiles.emplace_back(Shape{s.n, s.c, tile_h, tile_w}, std::move(out));
    }
  }
  return tiles;
}

Tensor stack(const Dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ArgumentError("stack: no images selected");
  const Shape s0 = data.at(indices.front()).pixels.shape();
  std::vector<double> out;
  out.reserve(indices.size() * s0.c * s0.plane());
  for (std::size_t i : indices) {
    const Tensor& px = data.at(i).pixels;
    if (px.shape() != s0) throw ShapeError("stack: mixed image shapes " + to_string(s0) + " and " + to_string(px.shape()));
    out.insert(out.end(), px.data().begin(), px.data().end());
  }
  return Tensor({indices.size(), s0.c, s0.h, s0.w}, std::move(out));
}

}  // namespace adapto
