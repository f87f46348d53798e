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

// FMTS: a flat little-endian container for a sequence of dense token grids.
//
//   offset  size  field
//        0     4  magic "FMTS"
//        4     1  version (1)
//        5     4  H (u32)
//        9     4  W (u32)
//       13     4  D (u32)
//       17     1  dtype (1 = f32 little-endian)
//       18     8  num_frames (u64)
//       26     -  num_frames * H * W * D * 4 payload bytes, frame after frame,
//                 row-major, feature dimension innermost.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "fluxmem/token_model.hpp"

namespace fluxmem {

inline constexpr std::array<char, 4> kStreamMagic = {'F', 'M', 'T', 'S'};
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::size_t kStreamHeaderBytes = 26;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StreamHeader {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t dim = 0;
  std::uint64_t num_frames = 0;

  std::uint64_t frame_bytes() const noexcept {
    return std::uint64_t{height} * width * dim * sizeof(float);
  }
  std::uint64_t total_bytes() const noexcept {
    return kStreamHeaderBytes + num_frames * frame_bytes();
  }
};

namespace detail {

template <typename T>
void put_le(std::uint8_t* out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
}

template <typename T>
T get_le(const std::uint8_t* in) {
  static_assert(std::is_unsigned_v<T>);
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(in[i]) << (8 * i);
  return value;
}

inline std::array<std::uint8_t, kStreamHeaderBytes> encode_header(const StreamHeader& h) {
  std::array<std::uint8_t, kStreamHeaderBytes> buf{};
  std::memcpy(buf.data(), kStreamMagic.data(), 4);
  buf[4] = kStreamVersion;
  put_le<std::uint32_t>(buf.data() + 5, h.height);
  put_le<std::uint32_t>(buf.data() + 9, h.width);
  put_le<std::uint32_t>(buf.data() + 13, h.dim);
  buf[17] = kDtypeF32;
  put_le<std::uint64_t>(buf.data() + 18, h.num_frames);
  return buf;
}

}  // namespace detail

// Incremental writer. The frame count is fixed up front because it lives in
// the header; finish() verifies that exactly that many frames were written.
class StreamWriter {
 public:
  StreamWriter(std::ostream& sink, const StreamHeader& header) : sink_(sink), header_(header) {
    if (header_.num_frames > 0 && (header_.height == 0 || header_.width == 0 || header_.dim == 0)) {
      throw std::invalid_argument("StreamWriter: zero dimension with non-empty stream");
    }
    const auto buf = detail::encode_header(header_);
    put(buf.data(), buf.size());
    scratch_.resize(header_.frame_bytes());
  }

  void write(const TokenGrid& grid) {
    if (written_ >= header_.num_frames) {
      throw std::invalid_argument("StreamWriter: more frames than declared in header");
    }
    if (grid.height() != header_.height || grid.width() != header_.width ||
        grid.dim() != header_.dim) {
      throw std::invalid_argument("StreamWriter: frame " + std::to_string(grid.frame_index()) +
                                  " has a different shape than the stream");
    }
    if (grid.frame_index() != written_) {
      throw std::invalid_argument("StreamWriter: expected frame_index " +
                                  std::to_string(written_) + ", got " +
                                  std::to_string(grid.frame_index()));
    }
    const auto values = grid.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        throw std::invalid_argument("StreamWriter: non-finite value in frame " +
                                    std::to_string(grid.frame_index()));
      }
      detail::put_le<std::uint32_t>(scratch_.data() + 4 * i, std::bit_cast<std::uint32_t>(values[i]));
    }
    put(scratch_.data(), scratch_.size());
    ++written_;
  }

  // Returns total bytes written.
  std::uint64_t finish() {
    if (written_ != header_.num_frames) {
      throw std::logic_error("StreamWriter: wrote " + std::to_string(written_) + " of " +
                             std::to_string(header_.num_frames) + " declared frames");
    }
    sink_.flush();
    return bytes_;
  }

  std::uint64_t bytes_written() const noexcept { return bytes_; }

 private:
  void put(const std::uint8_t* data, std::size_t n) {
    sink_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!sink_) throw std::runtime_error("StreamWriter: write failed");
    bytes_ += n;
  }

  std::ostream& sink_;
  StreamHeader header_;
  std::vector<std::uint8_t> scratch_;
  std::uint64_t written_ = 0;
  std::uint64_t bytes_ = 0;
};

inline std::uint64_t write_stream(std::span<const TokenGrid> grids, std::ostream& sink) {
  StreamHeader header;
  header.num_frames = grids.size();
  if (!grids.empty()) {
    header.height = grids.front().height();
    header.width = grids.front().width();
    header.dim = grids.front().dim();
  }
  // Validate everything before emitting a single byte.
  for (std::size_t i = 0; i < grids.size(); ++i) {
    if (!grids[i].same_shape(grids.front())) {
      throw std::invalid_argument("write_stream: dimension mismatch at frame " + std::to_string(i));
    }
    if (grids[i].frame_index() != i) {
      throw std::invalid_argument("write_stream: frame indices must be consecutive from 0");
    }
  }
  StreamWriter writer(sink, header);
  for (const auto& g : grids) writer.write(g);
  return writer.finish();
}

inline std::uint64_t write_stream_file(std::span<const TokenGrid> grids, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  return write_stream(grids, out);
}

// Pull-based reader. Holds at most one frame's payload at a time.
class StreamReader {
 public:
  explicit StreamReader(std::istream& source) : source_(source) {
    std::array<std::uint8_t, kStreamHeaderBytes> buf{};
    source_.read(reinterpret_cast<char*>(buf.data()), buf.size());
    const auto got = static_cast<std::size_t>(source_.gcount());
    if (got < 4 || std::memcmp(buf.data(), kStreamMagic.data(), 4) != 0) {
      throw FormatError("FMTS: bad magic");
    }
    if (got < buf.size()) {
      throw FormatError("FMTS: truncated header: expected " + std::to_string(buf.size()) +
                        " bytes, got " + std::to_string(got));
    }
    if (buf[4] != kStreamVersion) {
      throw FormatError("FMTS: unsupported version " + std::to_string(buf[4]));
    }
    if (buf[17] != kDtypeF32) {
      throw FormatError("FMTS: unsupported dtype code " + std::to_string(buf[17]));
    }
    header_.height = detail::get_le<std::uint32_t>(buf.data() + 5);
    header_.width = detail::get_le<std::uint32_t>(buf.data() + 9);
    header_.dim = detail::get_le<std::uint32_t>(buf.data() + 13);
    header_.num_frames = detail::get_le<std::uint64_t>(buf.data() + 18);
    if (header_.num_frames > 0 && (header_.height == 0 || header_.width == 0 || header_.dim == 0)) {
      throw FormatError("FMTS: zero dimension in non-empty stream");
    }
  }

  const StreamHeader& header() const noexcept { return header_; }
  std::uint64_t frames_read() const noexcept { return next_index_; }

  std::optional<TokenGrid> next() {
    if (next_index_ >= header_.num_frames) return std::nullopt;
    const auto frame_bytes = header_.frame_bytes();
    buffer_.resize(frame_bytes);
    source_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(frame_bytes));
    const auto got = static_cast<std::uint64_t>(source_.gcount());
    if (got != frame_bytes) {
      throw FormatError("FMTS: truncated payload in frame " + std::to_string(next_index_) +
                        ": expected " + std::to_string(frame_bytes) + " bytes, got " +
                        std::to_string(got));
    }
    std::vector<float> values(frame_bytes / sizeof(float));
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(buffer_.data() + 4 * i));
      if (!std::isfinite(values[i])) {
        throw FormatError("FMTS: non-finite value in frame " + std::to_string(next_index_));
      }
    }
    return TokenGrid(next_index_++, header_.height, header_.width, header_.dim, std::move(values));
  }

  // Bytes of payload buffered internally; bounded by one frame.
  std::size_t resident_bytes() const noexcept { return buffer_.capacity(); }

 private:
  std::istream& source_;
  StreamHeader header_;
  std::vector<std::uint8_t> buffer_;
  std::uint64_t next_index_ = 0;
};

inline std::vector<TokenGrid> read_stream(std::istream& source) {
  StreamReader reader(source);
  std::vector<TokenGrid> out;
  while (auto g = reader.next()) out.push_back(std::move(*g));
  return out;
}

inline std::vector<TokenGrid> read_stream_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_stream(in);
}

}  // namespace fluxmem
