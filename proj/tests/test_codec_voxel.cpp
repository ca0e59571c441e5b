// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <cmath>
#include <random>
#include <set>
#include <tuple>

#include "pc3d/codec_octree.hpp"
#include "pc3d/codec_voxel.hpp"

using namespace pc3d;
using namespace pc3d::voxel;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoFailure;
}

PointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed, bool with_intensity = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  std::vector<Point3> pts(n);
  std::vector<double> inten(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = {u(rng), u(rng), 0.3 * u(rng)};
    inten[i] = w(rng);
  }
  if (with_intensity) return PointCloud(std::move(pts), std::move(inten));
  return PointCloud(std::move(pts));
}

double nearest(const Point3& p, const PointCloud& c) {
  double best = INFINITY;
  for (const auto& q : c.points()) best = std::min(best, distance(p, q));
  return best;
}

}  // namespace

TEST(Voxelize, DensityCountsBothPoints) {
  const PointCloud c({{0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}});
  const VoxelGrid g = voxelize(c, 1.0, Assignment::density);
  ASSERT_EQ(g.voxels.size(), 1u);
  EXPECT_EQ(g.voxels[0].count, 2u);
  EXPECT_EQ(voxelize(c, 0.5, Assignment::binary).voxels.size(), 2u);
}

TEST(Voxelize, SingleVoxelCentre) {
  VoxelGrid g;
  g.voxels.push_back({0, 1, {}, 0.0});
  const PointCloud c = devoxelize(g);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0], (Point3{0.5, 0.5, 0.5}));
}

TEST(Voxelize, OccupancyMatchesHashSet) {
  const PointCloud c = random_cloud(10000, 20.0, 1);
  const double v = 0.7;
  const VoxelGrid g = voxelize(c, v, Assignment::binary);
  const Aabb box = bounding_box(c);
  std::set<std::tuple<long, long, long>> cells;
  for (const auto& p : c.points()) {
    cells.emplace(static_cast<long>(std::floor((p.x - box.min.x) / v)),
                  static_cast<long>(std::floor((p.y - box.min.y) / v)),
                  static_cast<long>(std::floor((p.z - box.min.z) / v)));
  }
  EXPECT_EQ(g.voxels.size(), cells.size());
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_GE(g.origin[static_cast<int>(a)] + g.dims[a] * v, box.max[static_cast<int>(a)]);
  }
  EXPECT_TRUE(std::is_sorted(g.voxels.begin(), g.voxels.end(),
                             [](const Voxel& x, const Voxel& y) { return x.key < y.key; }));
}

TEST(Voxelize, KeysAreXFastest) {
  const PointCloud c({{0, 0, 0}, {2.5, 0, 0}, {0, 1.5, 0}, {0, 0, 1.5}});
  const VoxelGrid g = voxelize(c, 1.0, Assignment::binary);
  EXPECT_EQ(g.dims, (std::array<std::uint32_t, 3>{3, 2, 2}));
  std::vector<std::uint64_t> keys;
  for (const auto& vx : g.voxels) keys.push_back(vx.key);
  EXPECT_EQ(keys, (std::vector<std::uint64_t>{0, 2, 3, 6}));
}

TEST(Voxelize, BinaryErrorBoundHoldsForEveryPoint) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PointCloud c = random_cloud(400, 5.0, seed + 20);
    for (double v : {0.1, 0.37, 1.0, 2.5}) {
      const PointCloud d = devoxelize(voxelize(c, v, Assignment::binary));
      for (const auto& p : c.points()) EXPECT_LE(nearest(p, d), v * std::sqrt(3.0) / 2.0 * (1 + 1e-12));
    }
  }
}

TEST(Voxelize, AveragedStoresMeans) {
  const PointCloud c({{0.1, 0.2, 0.3}, {0.3, 0.4, 0.5}, {5.0, 5.0, 5.0}}, std::vector<double>{0.2, 0.4, 1.0});
  const VoxelGrid g = voxelize(c, 1.0, Assignment::averaged);
  ASSERT_EQ(g.voxels.size(), 2u);
  EXPECT_NEAR(g.voxels[0].centroid.x, 0.2, 1e-15);
  EXPECT_NEAR(g.voxels[0].centroid.y, 0.3, 1e-15);
  EXPECT_NEAR(g.voxels[0].centroid.z, 0.4, 1e-15);
  EXPECT_NEAR(g.voxels[0].intensity, 0.3, 1e-15);
  const PointCloud d = devoxelize(g);
  EXPECT_EQ(d[0], g.voxels[0].centroid);
  ASSERT_TRUE(d.has_intensity());
  EXPECT_EQ((*d.intensity())[1], 1.0);
}

TEST(Voxelize, Errors) {
  EXPECT_EQ(code_of([] { voxelize(PointCloud{}, 1.0, Assignment::binary); }), ErrorCode::EmptyCloud);
  const PointCloud c({{0, 0, 0}});
  EXPECT_EQ(code_of([&] { voxelize(c, 0.0, Assignment::binary); }), ErrorCode::NonPositiveVoxelSize);
  EXPECT_EQ(code_of([&] { voxelize(c, -1.0, Assignment::binary); }), ErrorCode::NonPositiveVoxelSize);
  const PointCloud wide({{0, 0, 0}, {1e6, 1e6, 1e6}});
  EXPECT_EQ(code_of([&] { voxelize(wide, 1e-4, Assignment::binary); }), ErrorCode::GridTooLarge);
  EXPECT_EQ(code_of([&] { voxelize(wide, 1e-3, Assignment::binary); }), ErrorCode::GridTooLarge);
}

TEST(VoxelCodec, RoundTripBinaryAndDensity) {
  const PointCloud c = random_cloud(3000, 10.0, 3);
  for (auto a : {Assignment::binary, Assignment::density}) {
    const VoxelGrid g = voxelize(c, 0.4, a);
    const CompressedFrame f = encode(g, static_cast<std::uint32_t>(c.size()));
    EXPECT_EQ(decode(unpack_frame(pack_frame(f))), g);
    EXPECT_EQ(f.n_points_original(), 3000u);
  }
}

TEST(VoxelCodec, RoundTripAveraged) {
  const PointCloud c = random_cloud(3000, 10.0, 4, true);
  const double v = 0.4;
  const VoxelGrid g = voxelize(c, v, Assignment::averaged);
  const VoxelGrid back = decode(encode(g));
  ASSERT_EQ(back.voxels.size(), g.voxels.size());
  EXPECT_TRUE(back.has_intensity);
  for (std::size_t i = 0; i < g.voxels.size(); ++i) {
    EXPECT_EQ(back.voxels[i].key, g.voxels[i].key);
    for (int a = 0; a < 3; ++a) {
      EXPECT_LE(std::abs(back.voxels[i].centroid[a] - g.voxels[i].centroid[a]), v / 131072.0 * (1 + 1e-9));
    }
    EXPECT_LE(std::abs(back.voxels[i].intensity - g.voxels[i].intensity), 0.5 / 65535.0 + 1e-15);
  }
  // Decoded grids are fixed points of the codec.
  EXPECT_EQ(decode(encode(back)), back);
}

TEST(VoxelCodec, FullGridIsOneRun) {
  std::vector<Point3> pts;
  for (int z = 0; z < 4; ++z)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) pts.push_back({x + 0.5, y + 0.5, z + 0.5});
  const VoxelGrid g = voxelize(PointCloud(pts), 1.0, Assignment::binary);
  EXPECT_EQ(g.voxels.size(), 64u);
  const CompressedFrame f = encode(g);
  const std::size_t header = 3 * 8 + 8 + 3 * 4 + 1 + 1 + 4 + 2 * 8;
  EXPECT_LT(f.payload().size(), header + 8);
  EXPECT_EQ(decode(f), g);
}

TEST(VoxelCodec, WrongCodec) {
  const PointCloud c = random_cloud(50, 1.0, 5);
  const CompressedFrame f = octree::encode(c, {8, octree::ContextMode::order0});
  EXPECT_EQ(code_of([&] { decode(f); }), ErrorCode::WrongCodec);
}

TEST(VoxelCodec, TruncationAndTampering) {
  const PointCloud c = random_cloud(500, 4.0, 6);
  const CompressedFrame f = encode(voxelize(c, 0.3, Assignment::density));
  for (std::size_t cut = 1; cut < f.payload().size(); cut += 7) {
    std::vector<std::uint8_t> p(f.payload().begin(), f.payload().begin() + static_cast<long>(cut));
    EXPECT_EQ(code_of([&] { decode(CompressedFrame(CodecId::voxel, 0, 0, 1, p)); }), ErrorCode::CorruptPayload);
  }
  for (std::size_t i = 0; i < f.payload().size(); ++i) {
    auto p = f.payload();
    p[i] ^= 0x5A;
    try {
      (void)decode(CompressedFrame(CodecId::voxel, 0, 0, 1, p));
    } catch (const Error&) {
    }
  }
}

TEST(VoxelCodec, HalvingNeverReducesOccupancy) {
  const PointCloud c = random_cloud(5000, 15.0, 7);
  std::size_t prev = 0;
  for (double v = 8.0; v >= 0.125; v /= 2) {
    const std::size_t n = voxelize(c, v, Assignment::binary).voxels.size();
    EXPECT_GE(n, prev) << v;
    prev = n;
  }
}

TEST(VoxelCodec, PermutationInvariance) {
  const PointCloud c = random_cloud(2000, 6.0, 8, true);
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(9));
  std::vector<Point3> pts;
  std::vector<double> inten;
  for (auto i : perm) {
    pts.push_back(c[i]);
    inten.push_back((*c.intensity())[i]);
  }
  const PointCloud shuffled(pts, inten);
  const VoxelGrid a = voxelize(c, 0.5, Assignment::binary);
  EXPECT_EQ(voxelize(shuffled, 0.5, Assignment::binary), a);
  EXPECT_EQ(encode(a).payload(), encode(voxelize(shuffled, 0.5, Assignment::binary)).payload());
  const VoxelGrid x = voxelize(c, 0.5, Assignment::averaged);
  const VoxelGrid y = voxelize(shuffled, 0.5, Assignment::averaged);
  ASSERT_EQ(x.voxels.size(), y.voxels.size());
  for (std::size_t i = 0; i < x.voxels.size(); ++i) {
    EXPECT_LE(distance(x.voxels[i].centroid, y.voxels[i].centroid), 1e-9);
    EXPECT_NEAR(x.voxels[i].intensity, y.voxels[i].intensity, 1e-9);
  }
}

TEST(VoxelCodec, CloudHelpers) {
  const PointCloud c = random_cloud(1000, 3.0, 10);
  const CompressedFrame f = encode_cloud(c, 0.25, Assignment::binary);
  EXPECT_EQ(f.n_points_original(), 1000u);
  EXPECT_EQ(decode_cloud(f), devoxelize(voxelize(c, 0.25, Assignment::binary)));
}
