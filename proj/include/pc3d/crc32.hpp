// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace pc3d {

namespace detail {

constexpr std::array<std::uint32_t, 256> make_crc32_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t n = 0; n < 256; ++n) {
    std::uint32_t c = n;
    for (int k = 0; k < 8; ++k) c = (c & 1U) ? 0xEDB88320U ^ (c >> 1) : c >> 1;
    table[n] = c;
  }
  return table;
}

inline constexpr auto kCrc32Table = make_crc32_table();

}  // namespace detail

/// CRC-32 (IEEE 802.3, reflected polynomial 0xEDB88320). Pass a previous
/// result as `crc` to continue over split buffers.
inline std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t crc = 0) {
  crc = ~crc;
  for (std::uint8_t b : data) crc = detail::kCrc32Table[(crc ^ b) & 0xFFU] ^ (crc >> 8);
  return ~crc;
}

}  // namespace pc3d
