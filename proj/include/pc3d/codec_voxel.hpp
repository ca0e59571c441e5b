// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Regular voxel grid with binary, averaged or density assignment, and a codec
// that run-length codes the linearised occupancy mask.
//
// Payload layout (little-endian):
//   origin        3 x f64
//   voxel_size    f64
//   dims          3 x u32
//   assignment    u8    0 = binary, 1 = averaged, 2 = density
//   has_intensity u8    averaged mode only
//   n_occupied    u32
//   runs          { n_bytes u32, coded_len u32, range-coded bytes }
//   attributes    { n_bytes u32, coded_len u32, range-coded bytes }
//
// Cells are linearised x-fastest: key = x + nx * (y + ny * z). The run stream
// is varint pairs (empty cells skipped, occupied cells) until all occupied
// cells are covered; trailing empty cells are implicit. Attributes per
// occupied cell in key order: density = varint count; averaged = centroid
// offset within the voxel as 3 x u16 (value (q + 0.5) / 65536 of the edge)
// followed by u16 mean intensity when present. Both streams go through the
// order-0 adaptive range coder.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/detail/bytes.hpp"
#include "pc3d/entropy.hpp"
#include "pc3d/frame.hpp"

namespace pc3d::voxel {

enum class Assignment : std::uint8_t { binary = 0, averaged = 1, density = 2 };

inline const char* assignment_name(Assignment a) {
  switch (a) {
    case Assignment::binary: return "binary";
    case Assignment::averaged: return "averaged";
    case Assignment::density: return "density";
  }
  return "unknown";
}

/// One occupied cell. `count` is the point count in density mode and 1
/// otherwise; `centroid` and `intensity` are meaningful in averaged mode.
struct Voxel {
  std::uint64_t key = 0;
  std::uint32_t count = 1;
  Point3 centroid;
  double intensity = 0.0;

  friend bool operator==(const Voxel&, const Voxel&) = default;
};

struct VoxelGrid {
  Point3 origin;
  double voxel_size = 1.0;
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  Assignment assignment = Assignment::binary;
  bool has_intensity = false;
  std::vector<Voxel> voxels;  // sorted by key, unique

  std::uint64_t cell_count() const {
    return static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  }

  std::array<std::uint64_t, 3> index_of(std::uint64_t key) const {
    const std::uint64_t x = key % dims[0];
    key /= dims[0];
    return {x, key % dims[1], key / dims[1]};
  }

  Point3 cell_min(std::uint64_t key) const {
    const auto i = index_of(key);
    return {origin.x + static_cast<double>(i[0]) * voxel_size,
            origin.y + static_cast<double>(i[1]) * voxel_size,
            origin.z + static_cast<double>(i[2]) * voxel_size};
  }

  Point3 cell_center(std::uint64_t key) const {
    const Point3 m = cell_min(key);
    const double h = 0.5 * voxel_size;
    return {m.x + h, m.y + h, m.z + h};
  }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;
};

namespace detail {

inline constexpr double kCentroidScale = 65536.0;

inline std::uint16_t quantize_offset(double offset, double v) {
  const double q = std::floor(offset / v * kCentroidScale);
  return static_cast<std::uint16_t>(std::clamp(q, 0.0, kCentroidScale - 1.0));
}

inline double dequantize_offset(std::uint16_t q, double v) {
  return (static_cast<double>(q) + 0.5) / kCentroidScale * v;
}

inline std::array<std::uint32_t, 3> grid_dims(const Aabb& box, double v) {
  std::array<std::uint32_t, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    const double cells = std::floor((box.max[a] - box.min[a]) / v) + 1.0;
    if (!(cells < 4294967295.0)) {
      throw Error(ErrorCode::GridTooLarge, "more than 2^32 voxels along one axis");
    }
    dims[static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(cells);
  }
  const unsigned __int128 total =
      static_cast<unsigned __int128>(dims[0]) * dims[1] * static_cast<unsigned __int128>(dims[2]);
  if (total >= (static_cast<unsigned __int128>(1) << 63)) {
    throw Error(ErrorCode::GridTooLarge, "grid has 2^63 or more cells");
  }
  return dims;
}

}  // namespace detail

/// Bins the cloud into cubes of edge `voxel_size` anchored at the cloud's
/// minimum corner; the grid spans the bounding box.
inline VoxelGrid voxelize(const PointCloud& cloud, double voxel_size, Assignment assignment) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot voxelize an empty cloud");
  if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
    throw Error(ErrorCode::NonPositiveVoxelSize, "voxel size must be positive and finite");
  }
  const Aabb box = bounding_box(cloud);
  VoxelGrid g;
  g.origin = box.min;
  g.voxel_size = voxel_size;
  g.dims = detail::grid_dims(box, voxel_size);
  g.assignment = assignment;
  g.has_intensity = assignment == Assignment::averaged && cloud.has_intensity();

  const std::size_t n = cloud.size();
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t idx[3];
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((cloud[i][a] - g.origin[a]) / voxel_size);
      const double hi = static_cast<double>(g.dims[static_cast<std::size_t>(a)] - 1);
      idx[a] = static_cast<std::uint64_t>(std::clamp(f, 0.0, hi));
    }
    keys[i] = idx[0] + g.dims[0] * (idx[1] + static_cast<std::uint64_t>(g.dims[1]) * idx[2]);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&keys](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  for (std::size_t i = 0; i < n;) {
    const std::uint64_t key = keys[order[i]];
    std::size_t j = i;
    Point3 sum;
    double isum = 0.0;
    while (j < n && keys[order[j]] == key) {
      sum = sum + cloud[order[j]];
      if (g.has_intensity) isum += (*cloud.intensity())[order[j]];
      ++j;
    }
    const auto count = static_cast<std::uint32_t>(j - i);
    Voxel vx;
    vx.key = key;
    switch (assignment) {
      case Assignment::binary:
        vx.centroid = g.cell_center(key);
        break;
      case Assignment::density:
        vx.count = count;
        vx.centroid = g.cell_center(key);
        break;
      case Assignment::averaged:
        vx.centroid = sum * (1.0 / count);
        vx.intensity = g.has_intensity ? isum / count : 0.0;
        break;
    }
    g.voxels.push_back(vx);
    i = j;
  }
  return g;
}

/// Binary and density grids yield voxel centres; averaged grids yield the
/// stored centroids with mean intensity when the source had intensity.
inline PointCloud devoxelize(const VoxelGrid& g) {
  std::vector<Point3> pts;
  pts.reserve(g.voxels.size());
  std::optional<std::vector<double>> inten;
  if (g.has_intensity) inten.emplace();
  for (const auto& vx : g.voxels) {
    pts.push_back(g.assignment == Assignment::averaged ? vx.centroid : g.cell_center(vx.key));
    if (inten) inten->push_back(vx.intensity);
  }
  return PointCloud(std::move(pts), std::move(inten));
}

inline CompressedFrame encode(const VoxelGrid& g, std::uint32_t n_points_original = 0,
                              std::uint64_t frame_id = 0, std::uint64_t timestamp_ns = 0) {
  if (g.voxels.empty()) throw Error(ErrorCode::EmptyCloud, "grid has no occupied voxels");
  pc3d::detail::Bytes runs, attrs;
  pc3d::detail::ByteWriter rw(runs), aw(attrs);
  const std::uint64_t cells = g.cell_count();
  std::uint64_t cursor = 0;
  for (std::size_t i = 0; i < g.voxels.size();) {
    const std::uint64_t start = g.voxels[i].key;
    if (start < cursor || start >= cells) {
      throw Error(ErrorCode::InvalidConfig, "voxels must be sorted, unique and inside dims");
    }
    std::size_t j = i + 1;
    while (j < g.voxels.size() && g.voxels[j].key == g.voxels[j - 1].key + 1) ++j;
    rw.varint(start - cursor);
    rw.varint(j - i);
    cursor = start + (j - i);
    i = j;
  }
  for (const auto& vx : g.voxels) {
    if (g.assignment == Assignment::density) {
      if (vx.count == 0) throw Error(ErrorCode::InvalidConfig, "density voxel with zero count");
      aw.varint(vx.count);
    } else if (g.assignment == Assignment::averaged) {
      const Point3 m = g.cell_min(vx.key);
      aw.u16(detail::quantize_offset(vx.centroid.x - m.x, g.voxel_size));
      aw.u16(detail::quantize_offset(vx.centroid.y - m.y, g.voxel_size));
      aw.u16(detail::quantize_offset(vx.centroid.z - m.z, g.voxel_size));
      if (g.has_intensity) {
        aw.u16(static_cast<std::uint16_t>(std::lround(std::clamp(vx.intensity, 0.0, 1.0) * 65535.0)));
      }
    }
  }

  pc3d::detail::Bytes payload;
  pc3d::detail::ByteWriter w(payload);
  for (int a = 0; a < 3; ++a) w.f64(g.origin[a]);
  w.f64(g.voxel_size);
  for (auto d : g.dims) w.u32(d);
  w.u8(static_cast<std::uint8_t>(g.assignment));
  w.u8(g.has_intensity ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(g.voxels.size()));
  for (const auto* stream : {&runs, &attrs}) {
    const auto coded = entropy::encode_bytes(*stream);
    w.u32(static_cast<std::uint32_t>(stream->size()));
    w.u32(static_cast<std::uint32_t>(coded.size()));
    w.bytes(coded);
  }
  std::uint32_t n_orig = n_points_original;
  if (n_orig == 0) {
    for (const auto& vx : g.voxels) n_orig += vx.count;
  }
  return CompressedFrame(CodecId::voxel, frame_id, timestamp_ns, n_orig, std::move(payload));
}

inline VoxelGrid decode(const CompressedFrame& frame) {
  if (frame.codec() != CodecId::voxel) {
    throw Error(ErrorCode::WrongCodec, "frame holds " + codec_name(frame.codec()) + " data");
  }
  pc3d::detail::ByteReader r(frame.payload(), ErrorCode::CorruptPayload);
  VoxelGrid g;
  g.origin = {r.f64(), r.f64(), r.f64()};
  g.voxel_size = r.f64();
  for (auto& d : g.dims) d = r.u32();
  const std::uint8_t assignment = r.u8();
  const std::uint8_t has_i = r.u8();
  const std::uint32_t n_occupied = r.u32();
  if (!g.origin.finite() || !(g.voxel_size > 0.0) || !std::isfinite(g.voxel_size) ||
      assignment > 2 || has_i > 1 || n_occupied == 0 || g.dims[0] == 0 || g.dims[1] == 0 ||
      g.dims[2] == 0) {
    throw Error(ErrorCode::CorruptPayload, "invalid voxel header");
  }
  g.assignment = static_cast<Assignment>(assignment);
  g.has_intensity = has_i == 1;
  if (g.has_intensity && g.assignment != Assignment::averaged) {
    throw Error(ErrorCode::CorruptPayload, "intensity flag outside averaged mode");
  }
  const unsigned __int128 total =
      static_cast<unsigned __int128>(g.dims[0]) * g.dims[1] * static_cast<unsigned __int128>(g.dims[2]);
  if (total >= (static_cast<unsigned __int128>(1) << 63) || n_occupied > total) {
    throw Error(ErrorCode::CorruptPayload, "grid dimensions inconsistent");
  }
  auto next_stream = [&r] {
    const std::uint32_t n_bytes = r.u32();
    const std::uint32_t coded_len = r.u32();
    // Each coded byte carries at most a few hundred symbols at the model's
    // maximum skew; reject absurd counts before allocating.
    if (static_cast<std::uint64_t>(n_bytes) > (static_cast<std::uint64_t>(coded_len) + 8) * 4096) {
      throw Error(ErrorCode::CorruptPayload, "stream length implausible");
    }
    return entropy::decode_bytes(r.bytes(coded_len), n_bytes);
  };
  const auto runs = next_stream();
  const auto attrs = next_stream();
  if (!r.at_end()) throw Error(ErrorCode::CorruptPayload, "trailing payload bytes");

  pc3d::detail::ByteReader rr(runs, ErrorCode::CorruptPayload);
  const std::uint64_t cells = g.cell_count();
  std::uint64_t cursor = 0;
  g.voxels.reserve(n_occupied);
  while (g.voxels.size() < n_occupied) {
    const std::uint64_t skip = rr.varint();
    const std::uint64_t run = rr.varint();
    if (run == 0 || skip > cells - cursor || run > cells - cursor - skip ||
        run > n_occupied - g.voxels.size()) {
      throw Error(ErrorCode::CorruptPayload, "run exceeds grid");
    }
    cursor += skip;
    for (std::uint64_t k = 0; k < run; ++k) g.voxels.push_back({cursor++, 1, {}, 0.0});
  }
  if (!rr.at_end()) throw Error(ErrorCode::CorruptPayload, "trailing run bytes");

  pc3d::detail::ByteReader ar(attrs, ErrorCode::CorruptPayload);
  for (auto& vx : g.voxels) {
    switch (g.assignment) {
      case Assignment::binary:
        vx.centroid = g.cell_center(vx.key);
        break;
      case Assignment::density: {
        const std::uint64_t c = ar.varint();
        if (c == 0 || c > UINT32_MAX) throw Error(ErrorCode::CorruptPayload, "bad density");
        vx.count = static_cast<std::uint32_t>(c);
        vx.centroid = g.cell_center(vx.key);
        break;
      }
      case Assignment::averaged: {
        const Point3 m = g.cell_min(vx.key);
        const std::uint16_t qx = ar.u16(), qy = ar.u16(), qz = ar.u16();
        vx.centroid = {m.x + detail::dequantize_offset(qx, g.voxel_size),
                       m.y + detail::dequantize_offset(qy, g.voxel_size),
                       m.z + detail::dequantize_offset(qz, g.voxel_size)};
        if (g.has_intensity) vx.intensity = ar.u16() / 65535.0;
        break;
      }
    }
  }
  if (!ar.at_end()) throw Error(ErrorCode::CorruptPayload, "trailing attribute bytes");
  return g;
}

/// Convenience: voxelize and encode, counting every input point.
inline CompressedFrame encode_cloud(const PointCloud& cloud, double voxel_size, Assignment a) {
  return encode(voxelize(cloud, voxel_size, a), static_cast<std::uint32_t>(cloud.size()),
                cloud.frame_id(), cloud.timestamp_ns());
}

inline PointCloud decode_cloud(const CompressedFrame& frame) {
  const PointCloud p = devoxelize(decode(frame));
  return PointCloud(p.points(), p.intensity(), frame.frame_id(), frame.timestamp_ns());
}

}  // namespace pc3d::voxel
