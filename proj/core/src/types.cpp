// Copyright (c) 2026 MADM Toolkit Authors
// SPDX-License-Identifier: Apache-2.0
#include "madm/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace madm {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::depth: return "depth";
    case Modality::infrared: return "infrared";
    case Modality::event: return "event";
    case Modality::synthetic: return "synthetic";
  }
  return "image";
}

Modality modality_from_name(const std::string& name) {
  if (name == "image") return Modality::image;
  if (name == "depth") return Modality::depth;
  if (name == "infrared") return Modality::infrared;
  if (name == "event") return Modality::event;
  if (name == "synthetic") return Modality::synthetic;
  throw ValueError("unknown modality: " + name);
}

ImageSample ImageSample::create(Tensor pixels, Modality modality, std::string id) {
  if (pixels.rank() != 3 || pixels.dim(0) != 3)
    throw ShapeError("image sample must be (3, H, W), got " + pixels.shape_str());
  const int h = pixels.dim(1), w = pixels.dim(2);
  if (h % 8 != 0 || w % 8 != 0)
    throw ShapeError("image dims must be multiples of 8, got " + pixels.shape_str());
  const double* p = pixels.data();
  for (std::int64_t i = 0; i < pixels.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0 || p[i] > 1.0)
      throw ValueError("image values must be finite and in [0,1]");
  }
  return ImageSample{std::move(pixels), modality, std::move(id)};
}

LabelMap LabelMap::create(std::vector<std::int32_t> classes, int h, int w, int num_classes,
                          int ignore_value) {
  if (h <= 0 || w <= 0 || static_cast<std::size_t>(h) * w != classes.size())
    throw ShapeError("label map size mismatch");
  if (num_classes <= 0 || num_classes > ignore_value)
    throw ValueError("num_classes must be in [1, ignore_value]");
  for (std::int32_t c : classes) {
    if ((c < 0 || c >= num_classes) && c != ignore_value)
      throw ValueError("label entry " + std::to_string(c) + " outside [0, " +
                       std::to_string(num_classes) + ") and not ignore");
  }
  return LabelMap{std::move(classes), h, w, num_classes, ignore_value};
}

LabelMap LabelMap::filled(int h, int w, int num_classes, int value, int ignore_value) {
  return create(std::vector<std::int32_t>(static_cast<std::size_t>(h) * w, value), h, w,
                num_classes, ignore_value);
}

std::vector<int> LabelMap::present_classes() const {
  std::set<int> s;
  for (std::int32_t c : classes)
    if (c != ignore_value) s.insert(c);
  return {s.begin(), s.end()};
}

LatentTensor LatentTensor::create(Tensor values) {
  if (values.rank() != 3) throw ShapeError("latent must be (C, h, w)");
  if (!values.all_finite()) throw ValueError("latent values must be finite");
  return LatentTensor{std::move(values)};
}

LatentTensor LatentTensor::from_image_of(Tensor values, int image_h, int image_w) {
  LatentTensor z = create(std::move(values));
  if (z.height() * 8 != image_h || z.width() * 8 != image_w)
    throw ShapeError("latent dims " + z.values.shape_str() + " are not x8 smaller than image " +
                     std::to_string(image_h) + "x" + std::to_string(image_w));
  return z;
}

MultiScaleFeatures MultiScaleFeatures::create(Tensor f8, Tensor f16, Tensor f32, int image_h,
                                              int image_w) {
  auto check = [&](const Tensor& f, int div, const char* name) {
    if (f.rank() != 3 || f.dim(1) * div != image_h || f.dim(2) * div != image_w)
      throw ShapeError(std::string("feature ") + name + " must be 1/" + std::to_string(div) +
                       " of input, got " + f.shape_str());
  };
  check(f8, 8, "f8");
  check(f16, 16, "f16");
  check(f32, 32, "f32");
  return MultiScaleFeatures{std::move(f8), std::move(f16), std::move(f32)};
}

namespace {

int linf(const Rgb& a, const Rgb& b) {
  int m = 0;
  for (int i = 0; i < 3; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Largest uniform (per-channel) perturbation that can never push a point
// rendered at color `a` across the L2 decision boundary toward `b` is
// |a-b|^2 / (2 |a-b|_1); the palette margin is twice that, minimized over
// pairs.
double directional_margin(const Rgb& a, const Rgb& b) {
  double sq = 0.0, l1 = 0.0;
  for (int i = 0; i < 3; ++i) {
    double d = a[i] - b[i];
    sq += d * d;
    l1 += std::abs(d);
  }
  return sq / l1;
}

}  // namespace

Palette::Palette(std::vector<Rgb> colors, Rgb ignore_color)
    : colors_(std::move(colors)), ignore_color_(ignore_color) {
  if (colors_.empty()) throw ValueError("palette needs at least one color");
  auto check_component = [](const Rgb& c) {
    for (int v : c)
      if (v < 0 || v > 255) throw ValueError("palette components must be in [0, 255]");
  };
  for (const Rgb& c : colors_) check_component(c);
  check_component(ignore_color_);

  std::vector<Rgb> all = colors_;
  all.push_back(ignore_color_);
  double margin = 1e300;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[i] == all[j]) throw ValueError("palette colors must be pairwise distinct");
      if (linf(all[i], all[j]) < 16)
        throw ValueError("palette colors closer than the decodability margin (L-inf 16)");
      margin = std::min(margin, directional_margin(all[i], all[j]));
    }
  }
  decode_margin_ = margin;
}

Palette Palette::cityscapes(int k) {
  static const std::vector<Rgb> table = {
      {128, 64, 128},   // road
      {244, 35, 232},   // sidewalk
      {70, 70, 70},     // building
      {102, 102, 156},  // wall
      {190, 153, 153},  // fence
      {153, 153, 153},  // pole
      {250, 170, 30},   // traffic light
      {220, 220, 0},    // traffic sign
      {107, 142, 35},   // vegetation
      {152, 251, 152},  // terrain
      {70, 130, 180},   // sky
      {220, 20, 60},    // person
      {255, 0, 0},      // rider
      {0, 0, 142},      // car
      {0, 0, 70},       // truck
      {0, 60, 100},     // bus
      {0, 80, 100},     // train
      {0, 0, 230},      // motorcycle
      {119, 11, 32},    // bicycle
  };
  if (k <= 0 || k > static_cast<int>(table.size()))
    throw ValueError("cityscapes palette supports 1..19 classes");
  return Palette(std::vector<Rgb>(table.begin(), table.begin() + k), {0, 0, 0});
}

std::string Palette::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const Rgb& c : colors_) j.push_back({c[0], c[1], c[2]});
  return j.dump();
}

Palette Palette::from_json(const std::string& text, Rgb ignore_color) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array()) throw CodecError("palette JSON must be a list of [r,g,b] triples");
  std::vector<Rgb> colors;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw CodecError("palette entry must be [r,g,b]");
    colors.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
  }
  return Palette(std::move(colors), ignore_color);
}

NoiseSchedule NoiseSchedule::ddpm_linear(int k_max, int beta_dplg, int gamma_dplg) {
  if (k_max < 1) throw ValueError("k_max must be >= 1");
  NoiseSchedule s;
  s.alpha_bar.resize(static_cast<std::size_t>(k_max) + 1);
  s.alpha_bar[0] = 1.0;
  const double beta_lo = 1e-4, beta_hi = 0.02;
  double prod = 1.0;
  for (int t = 1; t <= k_max; ++t) {
    double beta_t =
        k_max == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * (t - 1) / double(k_max - 1);
    prod *= 1.0 - beta_t;
    s.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
  s.beta_dplg = beta_dplg;
  s.gamma_dplg = gamma_dplg;
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (alpha_bar.empty() || alpha_bar[0] != 1.0)
    throw ValueError("alpha_bar[0] must equal 1 exactly");
  for (std::size_t i = 0; i < alpha_bar.size(); ++i) {
    if (!(alpha_bar[i] > 0.0 && alpha_bar[i] <= 1.0))
      throw ValueError("alpha_bar values must lie in (0, 1]");
    if (i > 0 && alpha_bar[i] > alpha_bar[i - 1])
      throw ValueError("alpha_bar must be monotone non-increasing");
  }
  if (beta_dplg < 0 || beta_dplg > k_max())
    throw ValueError("beta_dplg must lie in [0, k_max]");
  if (gamma_dplg <= 0) throw ValueError("gamma_dplg must be positive");
}

ConfusionMatrix::ConfusionMatrix(int num_classes_) : num_classes(num_classes_) {
  if (num_classes <= 0) throw ValueError("confusion matrix needs num_classes > 0");
  counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts) t += c;
  return t;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) throw ShapeError("confusion matrix class count mismatch");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  os << "gt\\pred";
  for (int c = 0; c < num_classes; ++c) os << ',' << c;
  os << '\n';
  for (int g = 0; g < num_classes; ++g) {
    os << g;
    for (int p = 0; p < num_classes; ++p) os << ',' << at(g, p);
    os << '\n';
  }
  return os.str();
}

}  // namespace madm
