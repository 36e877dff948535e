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

#include "agn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "agn/error.hpp"
#include "agn/graph.hpp"
#include "agn/rng.hpp"
#include "binary_io.hpp"

namespace agn {

Difficulty parse_difficulty(const std::string& text) {
  if (text == "tube_only") return Difficulty::tube_only;
  if (text == "with_bronchi") return Difficulty::with_bronchi;
  fail(ErrorCode::invalid_argument, "unknown difficulty '" + text + "' (expected tube_only or with_bronchi)");
}

std::string to_string(Difficulty d) { return d == Difficulty::tube_only ? "tube_only" : "with_bronchi"; }

bool Ellipse::contains(Real r, Real c) const {
  const Real u = (r - cy) / ry, v = (c - cx) / rx;
  return u * u + v * v <= 1;
}

Tensor PhantomVolume::hu_slice(std::size_t i) const {
  require(i < slices(), "hu_slice: index out of range");
  const std::size_t hw = height() * width();
  return Tensor({1, 1, height(), width()}, std::vector<Real>(hu.data() + i * hw, hu.data() + (i + 1) * hw));
}

Tensor PhantomVolume::mask_slice(std::size_t i) const {
  require(i < slices(), "mask_slice: index out of range");
  const std::size_t hw = height() * width();
  return Tensor({1, 1, height(), width()}, std::vector<Real>(mask.data() + i * hw, mask.data() + (i + 1) * hw));
}

namespace {

constexpr Real kTwoPi = 2 * std::numbers::pi;
constexpr Real kWall = 2;        // tracheal wall thickness, px
constexpr Real kDotWall = 1;     // bronchus wall thickness, px
constexpr Real kRadiusSwing = 0.01;

struct Wave {
  Real amplitude = 0, omega = 0, phase = 0;
  Real at(Real t) const { return amplitude * std::sin(omega * t + phase); }
};

Wave random_wave(Rng& rng, Real amplitude, Real min_period, Real max_period) {
  return {amplitude, kTwoPi / uniform(rng, min_period, max_period), uniform(rng, 0, kTwoPi)};
}

struct Bronchus {
  Real dy = 0, dx = 0;  // offset from the trachea center
  Real radius = 1;
  Wave visibility;      // visible while visibility.at(t) > -0.2; bronchus 0 always
};

struct VolumePlan {
  Real cy = 0, cx = 0, radius = 0;
  Wave drift_y, drift_x, swing, aspect, lung_drift;
  std::vector<Bronchus> bronchi;
};

VolumePlan plan_volume(std::size_t h, std::size_t w, Difficulty difficulty, Rng& rng) {
  const Real m = static_cast<Real>(std::min(h, w));
  const Real H = static_cast<Real>(h), W = static_cast<Real>(w);
  VolumePlan plan;
  plan.cy = H * uniform(rng, 0.42, 0.5);
  plan.cx = W * uniform(rng, 0.46, 0.54);
  plan.radius = m * uniform(rng, 0.075, 0.09);
  plan.drift_y = random_wave(rng, 0.04 * H, 40, 120);
  plan.drift_x = random_wave(rng, 0.05 * W, 40, 120);
  plan.swing = random_wave(rng, kRadiusSwing * m, 30, 90);
  plan.aspect = random_wave(rng, 0.1, 30, 90);
  plan.lung_drift = random_wave(rng, 0.02 * H, 50, 150);
  if (difficulty == Difficulty::tube_only) return plan;

  // Largest extent the ring can reach, including the aspect modulation.
  const Real ring_max = (plan.radius + kRadiusSwing * m) * 1.1 + kWall;
  const Real max_dy = std::abs(plan.drift_y.amplitude), max_dx = std::abs(plan.drift_x.amplitude);
  const std::size_t wanted = 1 + uniform_index(rng, 4);
  for (std::size_t b = 0; b < wanted; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      Bronchus br;
      br.radius = uniform(rng, 1, 3);
      const Real angle = uniform(rng, 0, kTwoPi);
      const Real rho = ring_max + br.radius + kDotWall + uniform(rng, 1, 8);
      br.dy = rho * std::sin(angle);
      br.dx = rho * std::cos(angle);
      br.visibility = random_wave(rng, 1, 20, 60);
      const Real reach = br.radius + kDotWall + 1;
      const bool inside = plan.cy + br.dy - max_dy - reach >= 0 && plan.cy + br.dy + max_dy + reach <= H - 1 &&
                          plan.cx + br.dx - max_dx - reach >= 0 && plan.cx + br.dx + max_dx + reach <= W - 1;
      if (!inside) continue;
      const bool clear = std::all_of(plan.bronchi.begin(), plan.bronchi.end(), [&](const Bronchus& o) {
        return std::hypot(o.dy - br.dy, o.dx - br.dx) > o.radius + br.radius + 2 * kDotWall + 1;
      });
      if (!clear) continue;
      plan.bronchi.push_back(br);
      placed = true;
    }
    if (!placed && plan.bronchi.empty())
      fail(ErrorCode::invalid_argument, "generate_phantom: slice too small to place a bronchus");
    if (!placed) break;
  }
  return plan;
}

SliceGeometry slice_geometry(const VolumePlan& plan, std::size_t h, std::size_t w, Real t, bool airway) {
  const Real H = static_cast<Real>(h), W = static_cast<Real>(w);
  SliceGeometry g;
  const Real ly = 0.5 * H + plan.lung_drift.at(t);
  g.lungs.push_back({ly, 0.25 * W, 0.34 * H, 0.17 * W});
  g.lungs.push_back({ly, 0.75 * W, 0.34 * H, 0.17 * W});
  if (!airway) return g;
  const Real cy = plan.cy + plan.drift_y.at(t), cx = plan.cx + plan.drift_x.at(t);
  const Real r = plan.radius + plan.swing.at(t);
  const Real a = 1 + plan.aspect.at(t);
  const Ellipse lumen{cy, cx, r * a, r / a};
  g.walls.push_back({cy, cx, lumen.ry + kWall, lumen.rx + kWall});
  g.lumens.push_back(lumen);
  for (std::size_t b = 0; b < plan.bronchi.size(); ++b) {
    const Bronchus& br = plan.bronchi[b];
    if (b > 0 && br.visibility.at(t) <= -0.2) continue;
    const Real by = cy + br.dy, bx = cx + br.dx;
    g.walls.push_back({by, bx, br.radius + kDotWall, br.radius + kDotWall});
    g.lumens.push_back({by, bx, br.radius, br.radius});
  }
  return g;
}

bool inside_any(const std::vector<Ellipse>& shapes, Real r, Real c) {
  return std::any_of(shapes.begin(), shapes.end(), [&](const Ellipse& e) { return e.contains(r, c); });
}

// Separable Gaussian blur with clamped borders.
void blur(std::vector<Real>& img, std::size_t h, std::size_t w, Real sigma) {
  if (sigma <= 0) return;
  const auto radius = static_cast<long>(std::ceil(3 * sigma));
  std::vector<Real> k(2 * radius + 1);
  Real sum = 0;
  for (long i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  for (Real& v : k) v /= sum;
  std::vector<Real> tmp(img.size());
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      Real acc = 0;
      for (long i = -radius; i <= radius; ++i) acc += k[i + radius] * img[r * W + std::clamp(c + i, 0L, W - 1)];
      tmp[r * W + c] = acc;
    }
  for (long r = 0; r < H; ++r)
    for (long c = 0; c < W; ++c) {
      Real acc = 0;
      for (long i = -radius; i <= radius; ++i) acc += k[i + radius] * tmp[std::clamp(r + i, 0L, H - 1) * W + c];
      img[r * W + c] = acc;
    }
}

}  // namespace

Tensor paint_mask(const SliceGeometry& geometry, std::size_t h, std::size_t w) {
  Tensor mask({h, w});
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c)
      mask[r * w + c] = inside_any(geometry.lumens, static_cast<Real>(r), static_cast<Real>(c)) ? 1 : 0;
  return mask;
}

PhantomVolume generate_phantom(std::size_t n_slices, std::size_t h, std::size_t w, std::uint64_t seed,
                               Difficulty difficulty, const PhantomOptions& options,
                               std::vector<SliceGeometry>* geometry) {
  require(n_slices >= 1, "generate_phantom: need at least one slice");
  if (std::min(h, w) < 16)
    fail(ErrorCode::invalid_argument, "generate_phantom: slice " + std::to_string(h) + "x" + std::to_string(w) +
                                          " too small to fit the tracheal ring (minimum 16x16)");
  Rng plan_rng(derive_seed(seed, 0));
  Rng noise_rng(derive_seed(seed, 1));
  const VolumePlan plan = plan_volume(h, w, difficulty, plan_rng);
  const HuPalette& pal = options.palette;

  PhantomVolume vol;
  vol.seed = seed;
  vol.hu = Tensor({n_slices, h, w});
  vol.mask = Tensor({n_slices, h, w});
  if (geometry) geometry->clear();
  for (std::size_t s = 0; s < n_slices; ++s) {
    const SliceGeometry g = slice_geometry(plan, h, w, static_cast<Real>(s), options.include_airway);
    std::vector<Real> clean(h * w);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const Real pr = static_cast<Real>(r), pc = static_cast<Real>(c);
        Real v = pal.tissue;
        bool label = false;
        if (inside_any(g.lungs, pr, pc)) v = pal.lung;
        if (inside_any(g.walls, pr, pc)) v = pal.wall;
        if (inside_any(g.lumens, pr, pc)) v = pal.lumen, label = true;
        clean[r * w + c] = v;
        vol.mask[(s * h + r) * w + c] = label ? 1 : 0;
      }
    }
    blur(clean, h, w, pal.blur_sigma);
    for (std::size_t i = 0; i < h * w; ++i) {
      const Real v = std::clamp(clean[i] + pal.noise_sigma * normal(noise_rng), kHuMin, kHuMax);
      vol.hu[s * h * w + i] = static_cast<float>(v);
    }
    if (geometry) geometry->push_back(g);
  }
  return vol;
}

void PreprocessConfig::validate() const {
  require(hu_low < level && level < hu_high, "preprocessing requires hu_low < level < hu_high");
}

Real window_hu(Real hu, const PreprocessConfig& cfg) {
  const Real v = std::clamp(hu, cfg.hu_low, cfg.hu_high);
  if (v <= cfg.level) return 0.5 * (v - cfg.hu_low) / (cfg.level - cfg.hu_low);
  return 0.5 + 0.5 * (v - cfg.level) / (cfg.hu_high - cfg.level);
}

Tensor window_hu(const Tensor& hu, const PreprocessConfig& cfg) {
  cfg.validate();
  Tensor out(hu.shape());
  for (std::size_t i = 0; i < hu.size(); ++i) out[i] = window_hu(hu[i], cfg);
  return out;
}

PhantomVolume filter_empty_slices(const PhantomVolume& vol) {
  const std::size_t n = vol.slices(), hw = vol.height() * vol.width();
  std::vector<std::size_t> keep;
  for (std::size_t s = 0; s < n; ++s) {
    const auto m = vol.mask.values().subspan(s * hw, hw);
    if (std::any_of(m.begin(), m.end(), [](Real v) { return v != 0; })) keep.push_back(s);
  }
  if (keep.empty()) fail(ErrorCode::invalid_argument, "filter_empty_slices: all " + std::to_string(n) + " slices are empty");
  PhantomVolume out;
  out.seed = vol.seed;
  out.hu = Tensor({keep.size(), vol.height(), vol.width()});
  out.mask = Tensor({keep.size(), vol.height(), vol.width()});
  for (std::size_t k = 0; k < keep.size(); ++k) {
    std::copy_n(vol.hu.data() + keep[k] * hw, hw, out.hu.data() + k * hw);
    std::copy_n(vol.mask.data() + keep[k] * hw, hw, out.mask.data() + k * hw);
  }
  return out;
}

std::size_t count_components(const Tensor& mask) {
  const auto [h, w] = map_dims(mask);
  std::vector<std::uint8_t> seen(h * w, 0);
  std::vector<std::size_t> stack;
  std::size_t count = 0;
  for (std::size_t start = 0; start < h * w; ++start) {
    if (mask[start] == 0 || seen[start]) continue;
    ++count;
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      const std::size_t r = u / w, c = u % w;
      const std::size_t nb[4] = {r > 0 ? u - w : u, r + 1 < h ? u + w : u, c > 0 ? u - 1 : u, c + 1 < w ? u + 1 : u};
      for (std::size_t v : nb) {
        if (v == u || seen[v] || mask[v] == 0) continue;
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }
  return count;
}

void save_volume(const PhantomVolume& vol, const std::string& path) {
  require(vol.hu.rank() == 3, "save_volume: hu must be [n,h,w]");
  require_same_shape(vol.hu.shape(), vol.mask.shape(), "save_volume");
  const std::size_t count = vol.hu.size();
  std::vector<char> out;
  out.reserve(kVolumeHeaderBytes + 5 * count);
  out.insert(out.end(), {'A', 'G', 'N', 'V', 1, 0, 0, 0});
  for (std::size_t a = 0; a < 3; ++a) {
    if (vol.hu.dim(a) > UINT32_MAX) fail(ErrorCode::invalid_argument, "save_volume: extent exceeds 32 bits");
    detail::put_u32(out, static_cast<std::uint32_t>(vol.hu.dim(a)));
  }
  for (Real v : vol.hu.values()) detail::put_f32(out, static_cast<float>(v));
  for (Real m : vol.mask.values()) {
    if (m != 0 && m != 1) fail(ErrorCode::invalid_argument, "save_volume: mask must be binary");
    out.push_back(static_cast<char>(m != 0));
  }
  detail::write_file(path, out);
}

PhantomVolume load_volume(const std::string& path) {
  const std::vector<char> bytes = detail::read_file(path);
  const std::string what = "load_volume '" + path + "'";
  detail::Reader in(bytes, what);
  if (bytes.size() < 4 || in.str(4) != "AGNV") fail(ErrorCode::format, what + ": bad magic (expected AGNV)");
  const std::uint8_t version = in.u8();
  if (version != 1) fail(ErrorCode::format, what + ": unsupported version " + std::to_string(version));
  for (int i = 0; i < 3; ++i)
    if (in.u8() != 0) fail(ErrorCode::format, what + ": nonzero header padding");
  const std::uint64_t n = in.u32(), h = in.u32(), w = in.u32();
  if (n == 0 || h == 0 || w == 0) fail(ErrorCode::format, what + ": zero extent in header");
  const std::uint64_t count = n * h * w;  // each factor < 2^32, so n*h*w may still overflow
  if (count / n / h != w || count > (UINT64_MAX - kVolumeHeaderBytes) / 5)
    fail(ErrorCode::format, what + ": shape overflow");
  if (in.remaining() != 5 * count)
    fail(ErrorCode::format, what + ": " + (in.remaining() < 5 * count ? "truncated" : "oversized") +
                                " payload (expected " + std::to_string(5 * count) + " bytes, found " +
                                std::to_string(in.remaining()) + ")");
  PhantomVolume vol;
  vol.hu = Tensor({n, h, w});
  vol.mask = Tensor({n, h, w});
  for (std::size_t i = 0; i < count; ++i) vol.hu[i] = in.f32();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint8_t m = in.u8();
    if (m > 1) fail(ErrorCode::format, what + ": mask byte " + std::to_string(m) + " at index " + std::to_string(i));
    vol.mask[i] = m;
  }
  return vol;
}

}  // namespace agn
