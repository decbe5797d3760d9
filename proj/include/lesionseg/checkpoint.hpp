#pragma once

// Model checkpoint layout, all fields little-endian:
//   "UNET" | u32 version (1)
//   | u32 depth | u32 base_channels | u32 in_channels | u32 out_channels
//   | f32 mean[3] | f32 std[3]
//   | u32 parameter count | f32 parameters (canonical U-Net order)

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/imgio.hpp"
#include "lesionseg/nn/unet.hpp"
#include "lesionseg/stats.hpp"

namespace lesionseg {

struct Checkpoint {
  nn::UNetConfig config;
  std::vector<float> params;
  ChannelStats normalization;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 4 + 4 + 16 + 24 + 4;

inline Bytes encode_checkpoint(const Checkpoint& c) {
  const std::size_t expected = nn::unet_param_count(c.config);
  if (c.params.size() != expected) {
    throw FormatError(FormatErrorKind::length_mismatch,
                      "checkpoint has " + std::to_string(c.params.size()) +
                          " parameters, config implies " + std::to_string(expected));
  }
  Bytes out{'U', 'N', 'E', 'T'};
  out.reserve(kCheckpointHeaderSize + 4 * c.params.size());
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, detail::checked_u32(c.config.depth, "depth"));
  detail::put_u32(out, detail::checked_u32(c.config.base_channels, "base channels"));
  detail::put_u32(out, detail::checked_u32(c.config.in_channels, "input channels"));
  detail::put_u32(out, detail::checked_u32(c.config.out_channels, "output channels"));
  for (const float v : c.normalization.mean) detail::put_f32(out, v);
  for (const float v : c.normalization.std) detail::put_f32(out, v);
  detail::put_u32(out, detail::checked_u32(c.params.size(), "parameter count"));
  for (const float v : c.params) detail::put_f32(out, v);
  return out;
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "UNET", 4) != 0) {
    throw FormatError(FormatErrorKind::bad_magic, "expected UNET checkpoint");
  }
  if (bytes.size() < kCheckpointHeaderSize) {
    throw FormatError(FormatErrorKind::truncated, "checkpoint header is incomplete");
  }
  const std::uint32_t version = detail::get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::bad_version, "checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config.depth = detail::get_u32(bytes, 8);
  c.config.base_channels = detail::get_u32(bytes, 12);
  c.config.in_channels = detail::get_u32(bytes, 16);
  c.config.out_channels = detail::get_u32(bytes, 20);
  for (std::size_t i = 0; i < 3; ++i) c.normalization.mean[i] = detail::get_f32(bytes, 24 + 4 * i);
  for (std::size_t i = 0; i < 3; ++i) c.normalization.std[i] = detail::get_f32(bytes, 36 + 4 * i);
  const std::size_t count = detail::get_u32(bytes, 48);

  std::size_t expected = 0;
  try {
    expected = nn::unet_param_count(c.config);
  } catch (const InvalidArgument& e) {
    throw FormatError(FormatErrorKind::bad_header, std::string("invalid U-Net config: ") + e.what());
  }
  if (count != expected) {
    throw FormatError(FormatErrorKind::length_mismatch,
                      "parameter count " + std::to_string(count) + " but config implies " +
                          std::to_string(expected));
  }
  detail::require_payload(bytes, kCheckpointHeaderSize, 4 * count);
  c.params.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    c.params[i] = detail::get_f32(bytes, kCheckpointHeaderSize + 4 * i);
  }
  return c;
}

}  // namespace lesionseg
