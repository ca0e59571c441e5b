// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Occupancy-octree geometry codec.
//
// Payload layout (little-endian):
//   aabb          6 x f64   cubified box: min.x min.y min.z max.x max.y max.z
//   bits          u8        quantization bits == octree depth, 1..30
//   n_leaves      u32       distinct occupied lattice cells
//   context_mode  u8        0 = order0, 1 = parent_context
//   body                    range-coded occupancy bytes
//
// The body codes one byte per internal node in breadth-first order, nodes of
// a level in Morton order. Bit k of a node's byte is set iff child k is
// occupied, k = (z_bit << 2) | (y_bit << 1) | x_bit. A byte is never 0, so the
// coder alphabet is the 255 values 1..255 (symbol = byte - 1). In
// parent_context mode each byte is coded with the model selected by its
// parent's occupancy byte (the root uses model 0).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/detail/bytes.hpp"
#include "pc3d/entropy.hpp"
#include "pc3d/frame.hpp"

namespace pc3d::octree {

using entropy::ContextMode;

struct OctreeConfig {
  int quantization_bits = 16;
  ContextMode context_mode = ContextMode::order0;

  void validate() const {
    if (quantization_bits < 1 || quantization_bits > 30) {
      throw Error(ErrorCode::InvalidConfig,
                  "quantization_bits " + std::to_string(quantization_bits) + " outside [1, 30]");
    }
  }
};

using Cell = std::array<std::uint32_t, 3>;

/// Integer lattice over a cubified bounding box: 2^bits cells per axis.
struct Lattice {
  Aabb cube;
  int bits = 0;
  std::vector<Cell> cells;  // distinct, Morton order

  double cell_size(int axis) const { return (cube.max[axis] - cube.min[axis]) / std::ldexp(1.0, bits); }

  Point3 cell_center(const Cell& c) const {
    return {cube.min.x + (c[0] + 0.5) * cell_size(0), cube.min.y + (c[1] + 0.5) * cell_size(1),
            cube.min.z + (c[2] + 0.5) * cell_size(2)};
  }

  /// Half of a cell's diagonal: the worst-case distance from a point to the
  /// centre of its cell.
  double half_cell_diagonal() const {
    const double a = cell_size(0), b = cell_size(1), c = cell_size(2);
    return 0.5 * std::sqrt(a * a + b * b + c * c);
  }
};

namespace detail {

using MortonKey = unsigned __int128;

inline MortonKey morton(const Cell& c, int bits) {
  MortonKey key = 0;
  for (int b = bits - 1; b >= 0; --b) {
    const unsigned child = ((c[2] >> b) & 1U) << 2 | ((c[1] >> b) & 1U) << 1 | ((c[0] >> b) & 1U);
    key = (key << 3) | child;
  }
  return key;
}

inline Cell unmorton(MortonKey key, int bits) {
  Cell c{0, 0, 0};
  for (int b = 0; b < bits; ++b) {
    const auto child = static_cast<unsigned>(key & 7U);
    c[0] |= (child & 1U) << b;
    c[1] |= ((child >> 1) & 1U) << b;
    c[2] |= ((child >> 2) & 1U) << b;
    key >>= 3;
  }
  return c;
}

inline Aabb cubify(const Aabb& box) {
  const Point3 e = box.extent();
  double edge = std::max({e.x, e.y, e.z});
  if (!std::isfinite(edge)) throw Error(ErrorCode::DegenerateBox, "bounding box extent overflows");
  if (edge == 0.0) edge = 1.0;
  return {box.min, {box.min.x + edge, box.min.y + edge, box.min.z + edge}};
}

inline std::vector<MortonKey> sorted_keys(const Lattice& lattice) {
  std::vector<MortonKey> keys;
  keys.reserve(lattice.cells.size());
  for (const auto& c : lattice.cells) keys.push_back(morton(c, lattice.bits));
  return keys;
}

constexpr std::size_t kHeaderSize = 6 * 8 + 1 + 4 + 1;

}  // namespace detail

/// Maps every point to floor((p - min) / cell) on each axis of the cubified
/// box and merges duplicates. A zero-extent box is widened to a 1 m cube.
inline Lattice quantize(const PointCloud& cloud, int bits) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot quantize an empty cloud");
  OctreeConfig{bits, ContextMode::order0}.validate();
  Lattice lattice;
  lattice.bits = bits;
  lattice.cube = detail::cubify(bounding_box(cloud));
  const std::uint32_t max_index = (1U << bits) - 1U;
  const double cs[3] = {lattice.cell_size(0), lattice.cell_size(1), lattice.cell_size(2)};

  std::vector<detail::MortonKey> keys;
  keys.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    Cell c;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - lattice.cube.min[a]) / cs[a]);
      c[static_cast<std::size_t>(a)] =
          f <= 0.0 ? 0U : (f >= max_index ? max_index : static_cast<std::uint32_t>(f));
    }
    keys.push_back(detail::morton(c, bits));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  lattice.cells.reserve(keys.size());
  for (auto k : keys) lattice.cells.push_back(detail::unmorton(k, bits));
  return lattice;
}

struct OccupancyStream {
  std::vector<std::uint8_t> bytes;            // breadth-first occupancy bytes
  std::vector<std::uint8_t> parent_contexts;  // parent byte of each node, 0 for the root
};

inline OccupancyStream occupancy_stream(const Lattice& lattice) {
  const auto keys = detail::sorted_keys(lattice);
  const int bits = lattice.bits;
  OccupancyStream out;
  std::vector<std::uint8_t> previous_level{0};
  for (int d = 0; d < bits; ++d) {
    const int node_shift = 3 * (bits - d);
    const int child_shift = node_shift - 3;
    const int parent_shift = node_shift + 3;
    std::vector<std::uint8_t> level;
    std::size_t parent_index = 0;
    std::size_t i = 0;
    while (i < keys.size()) {
      const detail::MortonKey node = keys[i] >> node_shift;
      if (i > 0 && d > 0 && (keys[i] >> parent_shift) != (keys[i - 1] >> parent_shift)) {
        ++parent_index;
      }
      std::uint8_t byte = 0;
      while (i < keys.size() && (keys[i] >> node_shift) == node) {
        byte |= static_cast<std::uint8_t>(1U << static_cast<unsigned>((keys[i] >> child_shift) & 7U));
        ++i;
      }
      level.push_back(byte);
      out.parent_contexts.push_back(previous_level[parent_index]);
    }
    out.bytes.insert(out.bytes.end(), level.begin(), level.end());
    previous_level = std::move(level);
  }
  return out;
}

inline CompressedFrame encode(const PointCloud& cloud, const OctreeConfig& cfg) {
  cfg.validate();
  const Lattice lattice = quantize(cloud, cfg.quantization_bits);
  const OccupancyStream occ = occupancy_stream(lattice);

  std::vector<std::uint32_t> symbols(occ.bytes.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) symbols[i] = occ.bytes[i] - 1U;
  const auto body =
      cfg.context_mode == ContextMode::parent_context
          ? entropy::encode_symbols(symbols, 255, occ.parent_contexts)
          : entropy::encode_symbols(symbols, 255);

  pc3d::detail::Bytes payload;
  payload.reserve(detail::kHeaderSize + body.size());
  pc3d::detail::ByteWriter w(payload);
  for (int a = 0; a < 3; ++a) w.f64(lattice.cube.min[a]);
  for (int a = 0; a < 3; ++a) w.f64(lattice.cube.max[a]);
  w.u8(static_cast<std::uint8_t>(cfg.quantization_bits));
  w.u32(static_cast<std::uint32_t>(lattice.cells.size()));
  w.u8(static_cast<std::uint8_t>(cfg.context_mode));
  w.bytes(body);
  return CompressedFrame(CodecId::octree, cloud.frame_id(), cloud.timestamp_ns(),
                         static_cast<std::uint32_t>(cloud.size()), std::move(payload));
}

struct PayloadInfo {
  Aabb cube;
  int bits = 0;
  std::uint32_t n_leaves = 0;
  ContextMode context_mode = ContextMode::order0;
  std::size_t body_bytes = 0;
};

inline PayloadInfo inspect(const CompressedFrame& frame) {
  if (frame.codec() != CodecId::octree) {
    throw Error(ErrorCode::WrongCodec, "frame holds " + codec_name(frame.codec()) + " data");
  }
  pc3d::detail::ByteReader r(frame.payload(), ErrorCode::CorruptPayload);
  PayloadInfo info;
  double v[6];
  for (double& x : v) x = r.f64();
  info.cube = {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
  info.bits = r.u8();
  info.n_leaves = r.u32();
  const std::uint8_t mode = r.u8();
  if (!info.cube.min.finite() || !info.cube.max.finite() ||
      !(info.cube.max.x > info.cube.min.x && info.cube.max.y > info.cube.min.y &&
        info.cube.max.z > info.cube.min.z)) {
    throw Error(ErrorCode::CorruptPayload, "invalid bounding cube");
  }
  if (info.bits < 1 || info.bits > 30) throw Error(ErrorCode::CorruptPayload, "bad depth");
  if (mode > 1) throw Error(ErrorCode::CorruptPayload, "bad context mode");
  if (info.n_leaves == 0 || info.n_leaves > frame.n_points_original()) {
    throw Error(ErrorCode::CorruptPayload, "leaf count inconsistent with point count");
  }
  info.context_mode = static_cast<ContextMode>(mode);
  info.body_bytes = r.remaining();
  return info;
}

/// Reconstructs one point per occupied cell at the cell centre, in Morton
/// order.
inline PointCloud decode(const CompressedFrame& frame) {
  const PayloadInfo info = inspect(frame);
  const std::span<const std::uint8_t> body(frame.payload().data() + detail::kHeaderSize,
                                           info.body_bytes);
  const bool use_ctx = info.context_mode == ContextMode::parent_context;
  std::vector<entropy::AdaptiveModel> models(use_ctx ? 256 : 1, entropy::AdaptiveModel(255));
  entropy::RangeDecoder dec(body);

  struct Node {
    Cell cell;
    std::uint8_t parent_byte;
  };
  std::vector<Node> level{{{0, 0, 0}, 0}};
  std::vector<Node> next;
  for (int d = 0; d < info.bits; ++d) {
    next.clear();
    for (const Node& node : level) {
      const auto byte =
          static_cast<std::uint8_t>(dec.decode(models[use_ctx ? node.parent_byte : 0]) + 1U);
      for (unsigned k = 0; k < 8; ++k) {
        if (!(byte & (1U << k))) continue;
        if (next.size() >= info.n_leaves) {
          throw Error(ErrorCode::CorruptPayload, "octree expands beyond declared leaf count");
        }
        next.push_back({{2 * node.cell[0] + (k & 1U), 2 * node.cell[1] + ((k >> 1) & 1U),
                         2 * node.cell[2] + ((k >> 2) & 1U)},
                        byte});
      }
    }
    std::swap(level, next);
  }
  if (level.size() != info.n_leaves) {
    throw Error(ErrorCode::CorruptPayload, "decoded " + std::to_string(level.size()) +
                                               " leaves, header declares " +
                                               std::to_string(info.n_leaves));
  }
  if (!dec.fully_consumed()) throw Error(ErrorCode::CorruptPayload, "trailing entropy bytes");

  Lattice lattice;
  lattice.cube = info.cube;
  lattice.bits = info.bits;
  std::vector<Point3> pts;
  pts.reserve(level.size());
  for (const Node& n : level) pts.push_back(lattice.cell_center(n.cell));
  return PointCloud(std::move(pts), std::nullopt, frame.frame_id(), frame.timestamp_ns());
}

}  // namespace pc3d::octree
