// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pc3d/error.hpp"

namespace pc3d::detail {

/// Raw RFC 1951 stream (no zlib/gzip wrapper).
inline std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> in, int level = 9) {
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, -15, 9, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(ErrorCode::IoFailure, "deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(ErrorCode::IoFailure, "deflate did not finish");
  out.resize(produced);
  return out;
}

/// Inflates a raw stream that must decode to exactly `expected` bytes and
/// end precisely at the end of `in`.
inline std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -15) != Z_OK) throw Error(ErrorCode::IoFailure, "inflateInit2 failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  // A stream that fills the buffer exactly may still need one call to see its
  // end-of-block marker.
  if (rc == Z_BUF_ERROR && zs.avail_out == 0 && zs.avail_in > 0) {
    std::uint8_t probe = 0;
    zs.next_out = &probe;
    zs.avail_out = 1;
    rc = inflate(&zs, Z_FINISH);
    if (zs.avail_out == 0) rc = Z_DATA_ERROR;
  }
  const bool ok = rc == Z_STREAM_END && zs.total_out == expected && zs.avail_in == 0;
  inflateEnd(&zs);
  if (!ok) throw Error(ErrorCode::CorruptPayload, "deflate stream does not decode to plane size");
  return out;
}

}  // namespace pc3d::detail
