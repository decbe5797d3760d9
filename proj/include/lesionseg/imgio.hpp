#pragma once

// Binary netpbm (P5/P6, maxval 255) and SMF score-map codecs, plus whole-file
// helpers. SMF layout:
//   "SMF1" | u32 width | u32 height | u32 planes | planes*w*h f32
// All integers and floats little-endian, planes stored plane-major.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"

namespace lesionseg {

using Bytes = std::vector<std::uint8_t>;

namespace detail {

inline bool is_pnm_space(std::uint8_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

struct PnmHeader {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t payload_offset = 0;
};

// Parses "<magic> w h maxval<ws>" with '#' comments between tokens.
inline PnmHeader parse_pnm_header(std::span<const std::uint8_t> bytes,
                                  std::string_view magic) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw FormatError(FormatErrorKind::bad_magic,
                      "expected binary netpbm magic " + std::string(magic));
  }
  std::size_t pos = 2;
  auto next_number = [&](const char* field) -> std::uint64_t {
    for (;;) {
      if (pos >= bytes.size()) {
        throw FormatError(FormatErrorKind::bad_header,
                          std::string("missing ") + field);
      }
      if (is_pnm_space(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (bytes[pos] < '0' || bytes[pos] > '9') {
      throw FormatError(FormatErrorKind::bad_header,
                        std::string("non-numeric ") + field);
    }
    std::uint64_t value = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      value = value * 10 + static_cast<std::uint64_t>(bytes[pos] - '0');
      if (value > (std::uint64_t{1} << 32)) {
        throw FormatError(FormatErrorKind::bad_header,
                          std::string(field) + " out of range");
      }
      ++pos;
    }
    return value;
  };

  // The magic must be followed by whitespace.
  if (pos >= bytes.size() || !(is_pnm_space(bytes[pos]) || bytes[pos] == '#')) {
    throw FormatError(FormatErrorKind::bad_magic,
                      "expected binary netpbm magic " + std::string(magic));
  }
  PnmHeader h;
  h.width = next_number("width");
  h.height = next_number("height");
  const std::uint64_t maxval = next_number("maxval");
  if (h.width == 0 || h.height == 0) {
    throw FormatError(FormatErrorKind::zero_dimension, "width and height must be >= 1");
  }
  if (maxval != 255) {
    throw FormatError(FormatErrorKind::bad_maxval,
                      "maxval " + std::to_string(maxval) + " (only 255 is supported)");
  }
  if (pos >= bytes.size() || !is_pnm_space(bytes[pos])) {
    throw FormatError(FormatErrorKind::truncated, "missing separator before payload");
  }
  h.payload_offset = pos + 1;
  return h;
}

inline void require_payload(std::span<const std::uint8_t> bytes, std::size_t offset,
                            std::size_t needed) {
  if (bytes.size() < offset || bytes.size() - offset < needed) {
    throw FormatError(FormatErrorKind::truncated,
                      "payload needs " + std::to_string(needed) + " bytes, have " +
                          std::to_string(bytes.size() - std::min(bytes.size(), offset)));
  }
}

inline std::uint8_t quantize(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  if (!(scaled > 0.0)) return 0;
  if (scaled >= 255.0) return 255;
  return static_cast<std::uint8_t>(scaled);
}

inline void append_header(Bytes& out, std::string_view magic, std::size_t w, std::size_t h) {
  const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n255\n";
  out.insert(out.end(), header.begin(), header.end());
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  return v;
}

inline void put_f32(Bytes& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

inline float get_f32(std::span<const std::uint8_t> bytes, std::size_t pos) {
  return std::bit_cast<float>(get_u32(bytes, pos));
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw InvalidArgument(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

inline RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P6");
  const std::size_t n = h.width * h.height;
  detail::require_payload(bytes, h.payload_offset, 3 * n);
  RgbImage img(h.width, h.height);
  const std::uint8_t* src = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      img.data[c * n + i] = static_cast<float>(src[3 * i + c]) / 255.0f;
    }
  }
  return img;
}

inline Bytes encode_ppm(const RgbImage& img) {
  check_dimensions(img);
  const std::size_t n = img.pixels();
  Bytes out;
  detail::append_header(out, "P6", img.width, img.height);
  out.reserve(out.size() + 3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.push_back(detail::quantize(img.data[c * n + i]));
  }
  return out;
}

inline GrayImage decode_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_pnm_header(bytes, "P5");
  const std::size_t n = h.width * h.height;
  detail::require_payload(bytes, h.payload_offset, n);
  GrayImage img(h.width, h.height);
  const std::uint8_t* src = bytes.data() + h.payload_offset;
  for (std::size_t i = 0; i < n; ++i) img.data[i] = static_cast<float>(src[i]) / 255.0f;
  return img;
}

inline Bytes encode_pgm(const GrayImage& img) {
  check_dimensions(img);
  Bytes out;
  detail::append_header(out, "P5", img.width, img.height);
  for (const float v : img.data) out.push_back(detail::quantize(v));
  return out;
}

// Masks are written with the challenge convention: 0 -> 0, 1 -> 255.
inline Bytes encode_pgm(const Mask& mask) {
  check_dimensions(mask);
  Bytes out;
  detail::append_header(out, "P5", mask.width, mask.height);
  for (const std::uint8_t v : mask.data) out.push_back(v ? 255 : 0);
  return out;
}

inline Mask mask_from_gray(const GrayImage& g, double threshold = 0.5) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw InvalidArgument("mask threshold must lie in [0, 1]");
  }
  Mask m(g.width, g.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    m.data[i] = static_cast<double>(g.data[i]) >= threshold ? 1 : 0;
  }
  return m;
}

// Decoded SMF payload of either plane count.
struct SmfData {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t planes = 0;
  std::vector<float> data;
};

inline constexpr std::size_t kSmfHeaderSize = 16;

inline Bytes encode_smf(std::size_t width, std::size_t height, std::size_t planes,
                        std::span<const float> data) {
  if (planes != 1 && planes != 2) {
    throw FormatError(FormatErrorKind::bad_planes, "SMF supports 1 or 2 planes");
  }
  if (data.size() != planes * width * height) {
    throw InvalidArgument("SMF data length does not match dimensions");
  }
  Bytes out{'S', 'M', 'F', '1'};
  out.reserve(kSmfHeaderSize + 4 * data.size());
  detail::put_u32(out, detail::checked_u32(width, "width"));
  detail::put_u32(out, detail::checked_u32(height, "height"));
  detail::put_u32(out, static_cast<std::uint32_t>(planes));
  for (const float v : data) {
    if (!std::isfinite(v)) throw FormatError(FormatErrorKind::non_finite, "SMF values must be finite");
    detail::put_f32(out, v);
  }
  return out;
}

inline Bytes encode_smf(const ScoreMap& s) {
  check_dimensions(s);
  return encode_smf(s.width, s.height, 2, s.data);
}

inline Bytes encode_smf(const Plane& p) {
  check_dimensions(p);
  return encode_smf(p.width, p.height, 1, p.data);
}

inline SmfData decode_smf(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "SMF1", 4) != 0) {
    throw FormatError(FormatErrorKind::bad_magic, "expected SMF1");
  }
  if (bytes.size() < kSmfHeaderSize) {
    throw FormatError(FormatErrorKind::truncated, "SMF header is 16 bytes");
  }
  SmfData d;
  d.width = detail::get_u32(bytes, 4);
  d.height = detail::get_u32(bytes, 8);
  d.planes = detail::get_u32(bytes, 12);
  if (d.planes != 1 && d.planes != 2) {
    throw FormatError(FormatErrorKind::bad_planes, "plane count " + std::to_string(d.planes));
  }
  if (d.width == 0 || d.height == 0) {
    throw FormatError(FormatErrorKind::zero_dimension, "SMF width and height must be >= 1");
  }
  const std::size_t count = d.planes * d.width * d.height;
  detail::require_payload(bytes, kSmfHeaderSize, 4 * count);
  d.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    d.data[i] = detail::get_f32(bytes, kSmfHeaderSize + 4 * i);
  }
  return d;
}

inline ScoreMap decode_score_map(std::span<const std::uint8_t> bytes) {
  SmfData d = decode_smf(bytes);
  if (d.planes != 2) {
    throw FormatError(FormatErrorKind::bad_planes, "score map needs 2 planes");
  }
  return ScoreMap(d.width, d.height, std::move(d.data));
}

inline Plane decode_smf_plane(std::span<const std::uint8_t> bytes) {
  SmfData d = decode_smf(bytes);
  if (d.planes != 1) {
    throw FormatError(FormatErrorKind::bad_planes, "expected a single plane");
  }
  return Plane(d.width, d.height, std::move(d.data));
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

inline RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }

inline Mask read_mask(const std::filesystem::path& path) {
  return mask_from_gray(decode_pgm(read_file(path)));
}

}  // namespace lesionseg
