// Copyright 2026 The fluxmem Authors.
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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "fluxmem/random.hpp"
#include "fluxmem/token_model.hpp"

namespace fluxmem {

// Synthetic token streams with known change structure.
//
//   static       one base grid, repeated
//   moving_blob  base grid with a size x size block replaced by a distinct
//                vector, translating with wraparound
//   scene_cuts   every `cut_period` frames, ceil(cut_fraction * H * W) cells
//                get fresh vectors
//   noise        independent random frames
//
// Content vectors are unit-norm projected Gaussians. noise_sigma adds
// independent Gaussian jitter on top of the content of every frame.
enum class SceneKind { static_scene, moving_blob, scene_cuts, noise };

inline std::string_view to_string(SceneKind k) {
  switch (k) {
    case SceneKind::static_scene: return "static";
    case SceneKind::moving_blob: return "moving_blob";
    case SceneKind::scene_cuts: return "scene_cuts";
    case SceneKind::noise: return "noise";
  }
  return "unknown";
}

inline SceneKind parse_scene_kind(std::string_view s) {
  for (auto k : {SceneKind::static_scene, SceneKind::moving_blob, SceneKind::scene_cuts, SceneKind::noise}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown scene kind '" + std::string(s) + "'");
}

struct SceneSpec {
  SceneKind kind = SceneKind::static_scene;
  std::uint32_t height = 16;
  std::uint32_t width = 16;
  std::uint32_t dim = 64;
  std::uint64_t num_frames = 100;
  double noise_sigma = 0.0;
  std::uint32_t blob_size = 4;
  std::int32_t blob_velocity_row = 0;
  std::int32_t blob_velocity_col = 1;
  std::uint64_t cut_period = 50;
  double cut_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (height == 0 || width == 0 || dim == 0) throw std::invalid_argument("scene: H, W, D must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
      throw std::invalid_argument("scene: noise_sigma must be finite and >= 0");
    }
    if (kind == SceneKind::moving_blob && (blob_size == 0 || blob_size > height || blob_size > width)) {
      throw std::invalid_argument("scene: blob must fit in the grid");
    }
    if (kind == SceneKind::scene_cuts && cut_period == 0) {
      throw std::invalid_argument("scene: cut_period must be positive");
    }
    if (!(cut_fraction >= 0.0 && cut_fraction <= 1.0)) {
      throw std::invalid_argument("scene: cut_fraction must be in [0, 1]");
    }
  }

  // Cells replaced at every cut.
  std::uint32_t cut_cell_count() const {
    const double cells = cut_fraction * height * width;
    // The tolerance absorbs products like 0.8 * 100 landing a hair above 80.
    return static_cast<std::uint32_t>(std::ceil(cells - 1e-9));
  }
};

// Parses "key = value" lines; '#' starts a comment. Unknown keys are errors.
inline SceneSpec parse_scene_spec(std::istream& in) {
  SceneSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) {
      throw std::invalid_argument("scene spec line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      if (key == "kind") spec.kind = parse_scene_kind(value);
      else if (key == "height") spec.height = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "width") spec.width = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "dim") spec.dim = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "frames") spec.num_frames = std::stoull(value);
      else if (key == "noise_sigma") spec.noise_sigma = std::stod(value);
      else if (key == "blob_size") spec.blob_size = static_cast<std::uint32_t>(std::stoul(value));
      else if (key == "blob_velocity_row") spec.blob_velocity_row = std::stoi(value);
      else if (key == "blob_velocity_col") spec.blob_velocity_col = std::stoi(value);
      else if (key == "cut_period") spec.cut_period = std::stoull(value);
      else if (key == "cut_fraction") spec.cut_fraction = std::stod(value);
      else if (key == "seed") spec.seed = std::stoull(value);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("scene spec line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  spec.validate();
  return spec;
}

inline SceneSpec parse_scene_spec(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_scene_spec(in);
}

inline std::string to_text(const SceneSpec& s) {
  std::ostringstream out;
  out.precision(17);
  out << "kind = " << to_string(s.kind) << "\nheight = " << s.height << "\nwidth = " << s.width
      << "\ndim = " << s.dim << "\nframes = " << s.num_frames << "\nnoise_sigma = " << s.noise_sigma
      << "\nblob_size = " << s.blob_size << "\nblob_velocity_row = " << s.blob_velocity_row
      << "\nblob_velocity_col = " << s.blob_velocity_col << "\ncut_period = " << s.cut_period
      << "\ncut_fraction = " << s.cut_fraction << "\nseed = " << s.seed << "\n";
  return out.str();
}

struct SyntheticFrame {
  TokenGrid grid;
  // Cells whose noiseless content differs from the previous frame (all cells
  // for frame 0).
  KeepMask changed;
};

// Produces frames one at a time so long streams never sit in memory.
class SceneGenerator {
 public:
  explicit SceneGenerator(SceneSpec spec) : spec_(spec), rng_(spec.seed) {
    spec_.validate();
    const std::size_t cells = std::size_t{spec_.height} * spec_.width;
    content_.resize(cells * spec_.dim);
    for (std::size_t c = 0; c < cells; ++c) fresh_vector(c);
    if (spec_.kind == SceneKind::moving_blob) {
      blob_.resize(spec_.dim);
      unit_gaussian(blob_.data());
      base_ = content_;
    }
  }

  const SceneSpec& spec() const noexcept { return spec_; }

  std::optional<SyntheticFrame> next() {
    if (t_ >= spec_.num_frames) return std::nullopt;
    const std::size_t cells = std::size_t{spec_.height} * spec_.width;
    KeepMask changed(cells, t_ == 0 ? 1 : 0);

    switch (spec_.kind) {
      case SceneKind::static_scene:
        break;
      case SceneKind::moving_blob: {
        const auto prev = content_;
        paint_blob();
        if (t_ > 0) mark_changes(prev, changed);
        break;
      }
      case SceneKind::scene_cuts:
        if (t_ > 0 && t_ % spec_.cut_period == 0) {
          for (auto c : sample_indices(rng_, static_cast<std::uint32_t>(cells), spec_.cut_cell_count())) {
            fresh_vector(c);
            changed[c] = 1;
          }
        }
        break;
      case SceneKind::noise:
        if (t_ > 0) {
          for (std::size_t c = 0; c < cells; ++c) fresh_vector(c);
          std::fill(changed.begin(), changed.end(), 1);
        }
        break;
    }

    std::vector<float> data = content_;
    if (spec_.noise_sigma > 0.0) {
      for (auto& v : data) v += static_cast<float>(spec_.noise_sigma * rng_.normal());
    }
    SyntheticFrame frame{TokenGrid(t_, spec_.height, spec_.width, spec_.dim, std::move(data)),
                         std::move(changed)};
    ++t_;
    return frame;
  }

 private:
  void unit_gaussian(float* out) {
    double norm_sq = 0.0;
    std::vector<double> v(spec_.dim);
    for (auto& x : v) {
      x = rng_.normal();
      norm_sq += x * x;
    }
    const double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 1.0;
    for (std::uint32_t d = 0; d < spec_.dim; ++d) out[d] = static_cast<float>(v[d] * inv);
  }

  void fresh_vector(std::size_t cell) { unit_gaussian(content_.data() + cell * spec_.dim); }

  void paint_blob() {
    content_ = base_;
    const auto wrap = [](std::int64_t x, std::int64_t n) { return ((x % n) + n) % n; };
    const std::int64_t H = spec_.height;
    const std::int64_t W = spec_.width;
    const std::int64_t t = static_cast<std::int64_t>(t_);
    const std::int64_t r0 = (H - spec_.blob_size) / 2 + spec_.blob_velocity_row * t;
    const std::int64_t c0 = (W - spec_.blob_size) / 2 + spec_.blob_velocity_col * t;
    for (std::uint32_t i = 0; i < spec_.blob_size; ++i) {
      for (std::uint32_t j = 0; j < spec_.blob_size; ++j) {
        const auto cell = static_cast<std::size_t>(wrap(r0 + i, H) * W + wrap(c0 + j, W));
        std::copy(blob_.begin(), blob_.end(), content_.begin() + static_cast<std::ptrdiff_t>(cell * spec_.dim));
      }
    }
  }

  void mark_changes(const std::vector<float>& prev, KeepMask& changed) const {
    for (std::size_t c = 0; c < changed.size(); ++c) {
      for (std::uint32_t d = 0; d < spec_.dim; ++d) {
        if (prev[c * spec_.dim + d] != content_[c * spec_.dim + d]) {
          changed[c] = 1;
          break;
        }
      }
    }
  }

  SceneSpec spec_;
  Xoshiro256 rng_;
  std::uint64_t t_ = 0;
  std::vector<float> content_;
  std::vector<float> base_;
  std::vector<float> blob_;
};

inline std::vector<SyntheticFrame> generate(const SceneSpec& spec) {
  SceneGenerator gen(spec);
  std::vector<SyntheticFrame> out;
  while (auto f = gen.next()) out.push_back(std::move(*f));
  return out;
}

inline std::vector<TokenGrid> generate_grids(const SceneSpec& spec) {
  SceneGenerator gen(spec);
  std::vector<TokenGrid> out;
  while (auto f = gen.next()) out.push_back(std::move(f->grid));
  return out;
}

}  // namespace fluxmem
