#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adapto/tensor.hpp"

namespace adapto {

struct LabeledImage {
  Tensor pixels;  // (1, C, H, W), values in [0, 1]
  int label = 0;
};

using Dataset = std::vector<LabeledImage>;

/// Parses the CIFAR-10 binary layout: per record one label byte then 3072
/// pixel bytes (1024 R, 1024 G, 1024 B, each row-major 32x32).
Dataset load_cifar10_binary(const std::string& path);
Dataset parse_cifar10_binary(const std::vector<std::uint8_t>& bytes);

/// Inverse of the loader; pixels are rounded to the nearest 1/255 step.
/// Images must be (1,3,32,32) with labels in [0, 9].
std::vector<std::uint8_t> encode_cifar10_binary(const Dataset& images);
void save_cifar10_binary(const Dataset& images, const std::string& path);

/// Balanced, linearly separable images: each class lights up its own
/// quadrant (and channel, past four classes) over a dim background with
/// N(0, 0.1) noise, clipped to [0, 1]. Label i is i % num_classes.
Dataset synthetic_dataset(std::size_t n, std::size_t num_classes, std::size_t size, std::uint64_t seed,
                          std::size_t channels = 3);

struct AugmentPolicy {
  bool flip_horizontal = false;
  std::pair<double, double> rotation_degrees{0.0, 0.0};
  std::pair<double, double> shear{0.0, 0.0};
  /// (crop_size, out_size): a random crop_size square, resized to out_size.
  std::optional<std::pair<std::size_t, std::size_t>> crop;

  /// Flip, rotation in [-60, 60] degrees, shear in [-0.05, 0.25], 26x26 crops resized to 32x32.
  static AugmentPolicy cifar();
  static AugmentPolicy none() { return {}; }
};

/// Looks up "none" or "cifar".
AugmentPolicy augment_policy(const std::string& id);

/// Applies, in order: horizontal flip (p = 0.5), rotation about the centre,
/// horizontal shear, random crop + resize. Resampling is bilinear with zero
/// fill. Deterministic in (img, policy, seed); the label is never changed.
LabeledImage augment(const LabeledImage& img, const AugmentPolicy& policy, std::uint64_t seed);

Tensor flip_horizontal(const Tensor& pixels);
Tensor rotate(const Tensor& pixels, double degrees);
Tensor shear_horizontal(const Tensor& pixels, double factor);
Tensor crop_resize(const Tensor& pixels, std::size_t top, std::size_t left, std::size_t crop_size,
                   std::size_t out_size);

/// Top-left offsets along one axis: 0, step, 2*step, ... plus the last
/// valid offset when the extent is not covered exactly.
std::vector<std::size_t> tile_offsets(std::size_t extent, std::size_t tile, std::size_t step);

/// Sliding-window tiles of a (1,C,H,W) tensor in row-major offset order.
std::vector<Tensor> tile_image(const Tensor& pixels, std::size_t tile_h, std::size_t tile_w, std::size_t step);

/// Stacks images into one (N,C,H,W) batch.
Tensor stack(const Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace adapto
