#pragma once

// Binary activation container.
//
// Layout (all integers little-endian):
//   bytes 0..3   magic "HNT1"
//   u32          rank (2 or 4)
//   u64 x rank   dimensions, outermost first
//   f32 x prod   payload, row-major
//
// The container is the only thing a framework-side exporter has to produce;
// keep it free of anything that needs more than a page to describe.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hintscout/errors.hpp"

namespace hintscout {

inline constexpr std::array<char, 4> kBlobMagic = {'H', 'N', 'T', '1'};

struct TensorBlob {
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::size_t rank() const noexcept { return shape.size(); }

  std::uint64_t element_count() const noexcept {
    return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::uint64_t b) { return a * b; });
  }

  friend bool operator==(const TensorBlob&, const TensorBlob&) = default;
};

namespace detail {

static_assert(std::numeric_limits<float>::is_iec559, "f32 payload requires IEEE-754 floats");

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const unsigned char* bytes) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return value;
}

// Reads exactly `count` bytes or reports how many were available.
inline std::size_t read_some(std::istream& in, unsigned char* dst, std::size_t count) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace detail

/// Checks the structural invariants shared by reader and writer: rank 2 or 4,
/// positive dimensions, payload length equal to the shape product.
inline void check_blob_shape(const TensorBlob& t) {
  if (t.rank() != 2 && t.rank() != 4) {
    throw ShapeError("tensor rank must be 2 or 4, got " + std::to_string(t.rank()));
  }
  for (std::size_t i = 0; i < t.rank(); ++i) {
    if (t.shape[i] == 0) {
      throw ShapeError("tensor dimension " + std::to_string(i) + " is zero");
    }
  }
  if (t.element_count() != t.data.size()) {
    throw ShapeError("tensor payload holds " + std::to_string(t.data.size()) +
                     " values but shape requires " + std::to_string(t.element_count()));
  }
}

/// Index of the first NaN/Inf in `data`, or data.size() if all finite.
inline std::size_t first_non_finite(std::span<const float> data) noexcept {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) return i;
  }
  return data.size();
}

inline void write_blob(const TensorBlob& t, std::ostream& out) {
  check_blob_shape(t);
  if (const auto bad = first_non_finite(t.data); bad != t.data.size()) {
    throw SerializationError("non-finite value at flat index " + std::to_string(bad));
  }
  out.write(kBlobMagic.data(), kBlobMagic.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (const auto d : t.shape) detail::put_le<std::uint64_t>(out, d);
  for (const float v : t.data) detail::put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("failed writing tensor payload");
}

inline TensorBlob read_blob(std::istream& in) {
  std::array<unsigned char, 8> buf{};
  if (detail::read_some(in, buf.data(), 4) != 4) {
    throw LengthError("stream too short for magic");
  }
  if (std::memcmp(buf.data(), kBlobMagic.data(), 4) != 0) {
    throw FormatError("bad magic: expected \"HNT1\"");
  }
  if (detail::read_some(in, buf.data(), 4) != 4) {
    throw LengthError("stream truncated in rank field");
  }
  const auto rank = detail::get_le<std::uint32_t>(buf.data());
  if (rank != 2 && rank != 4) {
    throw FormatError("unsupported rank " + std::to_string(rank) + " (expected 2 or 4)");
  }

  TensorBlob t;
  t.shape.reserve(rank);
  std::uint64_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    if (detail::read_some(in, buf.data(), 8) != 8) {
      throw LengthError("stream truncated in dimension " + std::to_string(i));
    }
    const auto d = detail::get_le<std::uint64_t>(buf.data());
    if (d == 0) throw FormatError("dimension " + std::to_string(i) + " is zero");
    if (count > std::numeric_limits<std::uint64_t>::max() / 4 / d) {
      throw FormatError("declared shape overflows");
    }
    count *= d;
    t.shape.push_back(d);
  }

  const std::uint64_t need = count * 4;
  std::vector<unsigned char> payload;
  // Grow in chunks so a corrupt header cannot force a huge allocation up front.
  constexpr std::uint64_t kChunk = std::uint64_t{1} << 24;
  std::uint64_t have = 0;
  while (have < need) {
    const auto step = std::min(kChunk, need - have);
    payload.resize(static_cast<std::size_t>(have + step));
    const auto got = detail::read_some(in, payload.data() + have, static_cast<std::size_t>(step));
    have += got;
    if (got != step) {
      throw LengthError("payload truncated: needs " + std::to_string(need) + " payload bytes, has " +
                        std::to_string(have));
    }
  }

  t.data.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = std::bit_cast<float>(detail::get_le<std::uint32_t>(payload.data() + 4 * i));
  }
  if (const auto bad = first_non_finite(t.data); bad != t.data.size()) {
    throw ValidationError("non-finite value at flat index " + std::to_string(bad));
  }
  return t;
}

inline std::string blob_to_bytes(const TensorBlob& t) {
  std::ostringstream out(std::ios::binary);
  write_blob(t, out);
  return std::move(out).str();
}

inline TensorBlob blob_from_bytes(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_blob(in);
}

inline void write_blob_file(const TensorBlob& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_blob(t, out);
}

inline TensorBlob read_blob_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_blob(in);
}

}  // namespace hintscout
