// Copyright 2026 The AGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agn/tensor.hpp"

namespace agn {

enum class Difficulty { tube_only, with_bronchi };

Difficulty parse_difficulty(const std::string& text);
std::string to_string(Difficulty d);

struct Ellipse {
  Real cy = 0, cx = 0;  // center (row, col)
  Real ry = 0, rx = 0;  // semi-axes
  /// Pixel centers (r, c) with ((r-cy)/ry)^2 + ((c-cx)/rx)^2 <= 1.
  bool contains(Real r, Real c) const;
};

struct HuPalette {
  Real tissue = 40;
  Real lung = -800;
  Real wall = 0;
  Real lumen = -1000;
  Real blur_sigma = 0.8;  // Gaussian point spread, px; 0 disables
  Real noise_sigma = 60;
};

/// Shapes painted into one slice, in painting order.
struct SliceGeometry {
  std::vector<Ellipse> lungs;
  std::vector<Ellipse> walls;   // tracheal ring and bronchus walls
  std::vector<Ellipse> lumens;  // labeled airway interiors
};

struct PhantomOptions {
  HuPalette palette;
  bool include_airway = true;  // false yields slices without any airway
};

/// hu and mask are [n,h,w]; hu values are float32-representable.
struct PhantomVolume {
  Tensor hu;
  Tensor mask;
  std::uint64_t seed = 0;

  std::size_t slices() const { return hu.empty() ? 0 : hu.dim(0); }
  std::size_t height() const { return hu.dim(1); }
  std::size_t width() const { return hu.dim(2); }
  /// [1,1,h,w] copies of slice i.
  Tensor hu_slice(std::size_t i) const;
  Tensor mask_slice(std::size_t i) const;
};

inline constexpr Real kHuMin = -1024;
inline constexpr Real kHuMax = 400;

PhantomVolume generate_phantom(std::size_t n_slices, std::size_t h, std::size_t w, std::uint64_t seed,
                               Difficulty difficulty, const PhantomOptions& options = {},
                               std::vector<SliceGeometry>* geometry = nullptr);

/// Mask implied by a slice's geometry: union of the lumen interiors.
Tensor paint_mask(const SliceGeometry& geometry, std::size_t h, std::size_t w);

/// Clamp to [hu_low, hu_high] and map piecewise-linearly so that hu_low -> 0,
/// level -> 0.5 and hu_high -> 1.
struct PreprocessConfig {
  Real level = -600;
  Real hu_low = -1100;
  Real hu_high = 100;
  void validate() const;
};

Real window_hu(Real hu, const PreprocessConfig& cfg = {});
Tensor window_hu(const Tensor& hu, const PreprocessConfig& cfg = {});

/// Drops slices whose mask is all zero, keeping order.
PhantomVolume filter_empty_slices(const PhantomVolume& vol);

/// 4-connected components of the nonzero pixels of an [h,w] or [1,1,h,w] mask.
std::size_t count_components(const Tensor& mask);

/// Header: "AGNV", version byte, 3 zero bytes, u32 n, h, w (20 bytes), then
/// float32 LE hu and u8 mask, both row-major.
inline constexpr std::size_t kVolumeHeaderBytes = 20;
void save_volume(const PhantomVolume& vol, const std::string& path);
PhantomVolume load_volume(const std::string& path);

}  // namespace agn
