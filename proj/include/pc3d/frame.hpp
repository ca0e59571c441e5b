// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pc3d/crc32.hpp"
#include "pc3d/detail/bytes.hpp"
#include "pc3d/error.hpp"

namespace pc3d {

enum class CodecId : std::uint8_t { octree = 1, range = 2, voxel = 3 };

inline bool valid_codec_id(std::uint8_t v) { return v >= 1 && v <= 3; }

inline std::string codec_name(CodecId id) {
  switch (id) {
    case CodecId::octree: return "octree";
    case CodecId::range: return "range";
    case CodecId::voxel: return "voxel";
  }
  return "unknown";
}

/// Codec-tagged compressed payload plus the metadata needed to account for it.
/// The CRC is computed over the payload at construction.
class CompressedFrame {
 public:
  CompressedFrame(CodecId codec, std::uint64_t frame_id, std::uint64_t timestamp_ns,
                  std::uint32_t n_points_original, std::vector<std::uint8_t> payload)
      : codec_(codec),
        frame_id_(frame_id),
        timestamp_ns_(timestamp_ns),
        n_points_original_(n_points_original),
        payload_(std::move(payload)) {
    if (!valid_codec_id(static_cast<std::uint8_t>(codec_))) {
      throw Error(ErrorCode::InvalidFrame, "unknown codec id");
    }
    if (payload_.empty()) throw Error(ErrorCode::InvalidFrame, "empty payload");
    if (payload_.size() > 0xFFFFFFFFULL) throw Error(ErrorCode::InvalidFrame, "payload > 4 GiB");
    crc32_ = pc3d::crc32(payload_);
  }

  CodecId codec() const { return codec_; }
  std::uint64_t frame_id() const { return frame_id_; }
  std::uint64_t timestamp_ns() const { return timestamp_ns_; }
  std::uint32_t n_points_original() const { return n_points_original_; }
  const std::vector<std::uint8_t>& payload() const { return payload_; }
  std::uint32_t crc() const { return crc32_; }

  friend bool operator==(const CompressedFrame&, const CompressedFrame&) = default;

 private:
  CodecId codec_;
  std::uint64_t frame_id_;
  std::uint64_t timestamp_ns_;
  std::uint32_t n_points_original_;
  std::vector<std::uint8_t> payload_;
  std::uint32_t crc32_ = 0;
};

// PC3D container, all integers little-endian:
//   0  magic "PC3D"          4
//   4  version = 1           u8
//   5  codec_id              u8
//   6  reserved = 0          u16
//   8  frame_id              u64
//  16  timestamp_ns          u64
//  24  n_points_original     u32
//  28  payload_len           u32
//  32  payload               payload_len
//  ..  crc32(payload)        u32
inline constexpr std::array<std::uint8_t, 4> kFrameMagic{'P', 'C', '3', 'D'};
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 32;
inline constexpr std::size_t kFrameTrailerSize = 4;

struct FrameHeader {
  std::uint8_t codec_id = 0;
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_ns = 0;
  std::uint32_t n_points_original = 0;
  std::uint32_t payload_len = 0;
};

inline void write_frame_header(detail::Bytes& out, const FrameHeader& h) {
  detail::ByteWriter w(out);
  w.bytes(kFrameMagic);
  w.u8(kFrameVersion);
  w.u8(h.codec_id);
  w.u16(0);
  w.u64(h.frame_id);
  w.u64(h.timestamp_ns);
  w.u32(h.n_points_original);
  w.u32(h.payload_len);
}

/// Parses the fixed 32-byte header. Does not validate the codec id so that a
/// stream terminator (payload_len 0) can be recognised by the caller.
inline FrameHeader parse_frame_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::TruncatedFrame, "shorter than magic");
  for (std::size_t i = 0; i < kFrameMagic.size(); ++i) {
    if (bytes[i] != kFrameMagic[i]) throw Error(ErrorCode::BadMagic, "not a PC3D frame");
  }
  detail::ByteReader r(bytes, ErrorCode::TruncatedFrame);
  r.bytes(4);
  const std::uint8_t version = r.u8();
  if (version != kFrameVersion) {
    throw Error(ErrorCode::BadMagic, "unsupported PC3D version " + std::to_string(version));
  }
  FrameHeader h;
  h.codec_id = r.u8();
  r.u16();
  h.frame_id = r.u64();
  h.timestamp_ns = r.u64();
  h.n_points_original = r.u32();
  h.payload_len = r.u32();
  return h;
}

inline detail::Bytes pack_frame(const CompressedFrame& frame) {
  detail::Bytes out;
  out.reserve(kFrameHeaderSize + frame.payload().size() + kFrameTrailerSize);
  write_frame_header(out, {static_cast<std::uint8_t>(frame.codec()), frame.frame_id(),
                           frame.timestamp_ns(), frame.n_points_original(),
                           static_cast<std::uint32_t>(frame.payload().size())});
  detail::ByteWriter w(out);
  w.bytes(frame.payload());
  w.u32(frame.crc());
  return out;
}

/// Inverse of pack_frame. `consumed`, when given, receives the number of bytes
/// the frame occupied so callers can walk concatenated frames.
inline CompressedFrame unpack_frame(std::span<const std::uint8_t> bytes,
                                    std::size_t* consumed = nullptr) {
  const FrameHeader h = parse_frame_header(bytes);
  if (!valid_codec_id(h.codec_id)) {
    throw Error(ErrorCode::InvalidFrame, "unknown codec id " + std::to_string(h.codec_id));
  }
  if (h.payload_len == 0) throw Error(ErrorCode::InvalidFrame, "empty payload");
  detail::ByteReader r(bytes.subspan(kFrameHeaderSize), ErrorCode::TruncatedFrame);
  auto payload = r.bytes(h.payload_len);
  const std::uint32_t stored_crc = r.u32();
  const std::uint32_t actual = crc32(payload);
  if (stored_crc != actual) throw Error(ErrorCode::CrcMismatch, "payload CRC does not match");
  if (consumed) *consumed = kFrameHeaderSize + h.payload_len + kFrameTrailerSize;
  return CompressedFrame(static_cast<CodecId>(h.codec_id), h.frame_id, h.timestamp_ns,
                         h.n_points_original, {payload.begin(), payload.end()});
}

}  // namespace pc3d
