// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "madm/tensor.hpp"

namespace madm {

/// Sentinel class id for unlabeled pixels. Matches the usual convention of
/// 8-bit segmentation label PNGs.
inline constexpr int kIgnoreValue = 255;

enum class Modality { image, depth, infrared, event, synthetic };

std::string modality_name(Modality m);
Modality modality_from_name(const std::string& name);

/// An RGB sample in [0,1], stored channels-first as (3, H, W).
/// H and W must be multiples of 8 (the encoder stride).
struct ImageSample {
  Tensor pixels;  // (3, H, W)
  Modality modality = Modality::image;
  std::string id;

  static ImageSample create(Tensor pixels, Modality modality, std::string id);

  int height() const { return pixels.dim(1); }
  int width() const { return pixels.dim(2); }
};

/// Per-pixel semantic class ids with an ignore sentinel.
struct LabelMap {
  std::vector<std::int32_t> classes;  // row-major H*W
  int h = 0;
  int w = 0;
  int num_classes = 0;
  int ignore_value = kIgnoreValue;

  static LabelMap create(std::vector<std::int32_t> classes, int h, int w, int num_classes,
                         int ignore_value = kIgnoreValue);
  static LabelMap filled(int h, int w, int num_classes, int value,
                         int ignore_value = kIgnoreValue);

  std::int32_t& at(int y, int x) { return classes[static_cast<std::size_t>(y) * w + x]; }
  std::int32_t at(int y, int x) const { return classes[static_cast<std::size_t>(y) * w + x]; }

  /// Distinct non-ignored classes, ascending.
  std::vector<int> present_classes() const;
  bool operator==(const LabelMap&) const = default;
};

/// Spatially x8-downsampled multi-channel representation, (C, h, w).
struct LatentTensor {
  Tensor values;  // (C_lat, h, w)

  static LatentTensor create(Tensor values);
  /// Validates the x8 relation against the source sample dimensions.
  static LatentTensor from_image_of(Tensor values, int image_h, int image_w);

  int channels() const { return values.dim(0); }
  int height() const { return values.dim(1); }
  int width() const { return values.dim(2); }
};

/// Three feature maps at 1/8, 1/16 and 1/32 of the input resolution.
struct MultiScaleFeatures {
  Tensor f8;   // (C1, H/8,  W/8)
  Tensor f16;  // (C2, H/16, W/16)
  Tensor f32;  // (C3, H/32, W/32)

  static MultiScaleFeatures create(Tensor f8, Tensor f16, Tensor f32, int image_h, int image_w);
};

using Rgb = std::array<int, 3>;

/// Injective class id -> RGB mapping used by the label codec.
///
/// Construction enforces pairwise-distinct colors with a minimum pairwise
/// L-inf distance of 16 between all colors (classes and the ignore color),
/// so noisy renderings still decode unambiguously.
class Palette {
 public:
  Palette(std::vector<Rgb> colors, Rgb ignore_color);

  int num_colors() const { return static_cast<int>(colors_.size()); }
  const Rgb& color(int id) const { return colors_[static_cast<std::size_t>(id)]; }
  const std::vector<Rgb>& colors() const { return colors_; }
  const Rgb& ignore_color() const { return ignore_color_; }

  /// Largest per-channel perturbation amplitude (in 0..255 units) that is
  /// guaranteed not to change a nearest-color decode is margin()/2,
  /// minimized over all color pairs: min over pairs of |a-b|^2 / |a-b|_1.
  double decode_margin() const { return decode_margin_; }

  /// First k entries of the standard Cityscapes color table, black ignore.
  static Palette cityscapes(int k);

  /// JSON list of [r, g, b] triples, index = class id.
  std::string to_json() const;
  static Palette from_json(const std::string& text, Rgb ignore_color = {0, 0, 0});

  bool operator==(const Palette& other) const {
    return colors_ == other.colors_ && ignore_color_ == other.ignore_color_;
  }

 private:
  std::vector<Rgb> colors_;
  Rgb ignore_color_;
  double decode_margin_ = 0.0;
};

/// Forward-process noise table plus the annealing parameters of the
/// pseudo-label noise schedule.
struct NoiseSchedule {
  std::vector<double> alpha_bar;  // [0..k_max], alpha_bar[0] == 1, non-increasing, (0,1]
  int beta_dplg = 0;              // initial diffusion step
  int gamma_dplg = 1;             // noise addition period (iterations)

  static NoiseSchedule ddpm_linear(int k_max, int beta_dplg, int gamma_dplg);

  int k_max() const { return static_cast<int>(alpha_bar.size()) - 1; }
  void validate() const;
};

/// K x K counts, rows = ground truth, cols = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int num_classes);

  std::int64_t& at(int gt, int pred) {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::int64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::int64_t total() const;
  /// Elementwise addition (for sharded evaluation).
  void merge(const ConfusionMatrix& other);
  std::string to_csv() const;
};

}  // namespace madm
