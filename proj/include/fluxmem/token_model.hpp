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

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fluxmem {

// Spatiotemporal provenance of a token: frame, row, column.
struct Origin {
  std::uint64_t frame_index = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend auto operator<=>(const Origin&, const Origin&) = default;
};

// One frame of dense feature tokens, H x W positions of D floats each,
// stored row-major with the feature dimension innermost.
class TokenGrid {
 public:
  TokenGrid() = default;

  TokenGrid(std::uint64_t frame_index, std::uint32_t height, std::uint32_t width,
            std::uint32_t dim, std::vector<float> data)
      : frame_index_(frame_index), height_(height), width_(width), dim_(dim),
        data_(std::move(data)) {
    if (height_ == 0 || width_ == 0 || dim_ == 0) {
      throw std::invalid_argument("TokenGrid: height, width and dim must be positive");
    }
    const std::size_t expected = std::size_t{height_} * width_ * dim_;
    if (data_.size() != expected) {
      throw std::invalid_argument("TokenGrid: data holds " + std::to_string(data_.size()) +
                                  " values, expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      if (!std::isfinite(data_[i])) {
        throw std::invalid_argument("TokenGrid: non-finite value at offset " +
                                    std::to_string(i) + " of frame " +
                                    std::to_string(frame_index_));
      }
    }
  }

  std::uint64_t frame_index() const noexcept { return frame_index_; }
  std::uint32_t height() const noexcept { return height_; }
  std::uint32_t width() const noexcept { return width_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::size_t token_count() const noexcept { return std::size_t{height_} * width_; }

  std::span<const float> data() const noexcept { return data_; }

  std::span<const float> token(std::uint32_t row, std::uint32_t col) const noexcept {
    return {data_.data() + (std::size_t{row} * width_ + col) * dim_, dim_};
  }
  std::span<const float> token(std::size_t flat_index) const noexcept {
    return {data_.data() + flat_index * dim_, dim_};
  }

  bool same_shape(const TokenGrid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && dim_ == other.dim_;
  }

  friend bool operator==(const TokenGrid&, const TokenGrid&) = default;

 private:
  std::uint64_t frame_index_ = 0;
  std::uint32_t height_ = 0;
  std::uint32_t width_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> data_;
};

// A token that survived reduction, or a merged anchor. `weight` counts the
// raw tokens it stands for.
struct RetainedToken {
  std::vector<float> feature;
  Origin origin;
  std::uint32_t weight = 1;

  friend bool operator==(const RetainedToken&, const RetainedToken&) = default;
};

// The retained tokens of one frame, sorted row-major by origin.
struct FrameEntry {
  std::uint64_t frame_index = 0;
  std::vector<RetainedToken> tokens;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }

  std::uint64_t total_weight() const noexcept {
    std::uint64_t sum = 0;
    for (const auto& t : tokens) sum += t.weight;
    return sum;
  }

  friend bool operator==(const FrameEntry&, const FrameEntry&) = default;
};

inline RetainedToken retain(const TokenGrid& grid, std::uint32_t row, std::uint32_t col) {
  const auto f = grid.token(row, col);
  return RetainedToken{std::vector<float>(f.begin(), f.end()),
                       Origin{grid.frame_index(), row, col}, 1};
}

// Row-major survivor mask over a frame's H*W positions; nonzero = keep.
using KeepMask = std::vector<std::uint8_t>;

inline FrameEntry entry_from_mask(const TokenGrid& grid, std::span<const std::uint8_t> keep) {
  if (keep.size() != grid.token_count()) {
    throw std::invalid_argument("entry_from_mask: mask size does not match grid");
  }
  FrameEntry entry{grid.frame_index(), {}};
  for (std::uint32_t h = 0; h < grid.height(); ++h) {
    for (std::uint32_t w = 0; w < grid.width(); ++w) {
      if (keep[std::size_t{h} * grid.width() + w]) entry.tokens.push_back(retain(grid, h, w));
    }
  }
  return entry;
}

inline FrameEntry entry_from_grid(const TokenGrid& grid) {
  FrameEntry entry{grid.frame_index(), {}};
  entry.tokens.reserve(grid.token_count());
  for (std::uint32_t h = 0; h < grid.height(); ++h) {
    for (std::uint32_t w = 0; w < grid.width(); ++w) entry.tokens.push_back(retain(grid, h, w));
  }
  return entry;
}

}  // namespace fluxmem
