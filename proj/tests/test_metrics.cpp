// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "pc3d/kdtree.hpp"
#include "pc3d/metrics.hpp"

using namespace pc3d;
using namespace pc3d::metrics;

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

PointCloud random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return PointCloud(std::move(pts));
}

std::size_t brute_nearest(const Point3& p, const PointCloud& c) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < c.size(); ++j) {
    if (squared_distance(p, c[j]) < squared_distance(p, c[best])) best = j;
  }
  return best;
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  auto directed = [](const PointCloud& x, const PointCloud& y) {
    double s = 0.0;
    for (const auto& p : x.points()) s += distance(p, y[brute_nearest(p, y)]);
    return s / static_cast<double>(x.size());
  };
  return 0.5 * directed(a, b) + 0.5 * directed(b, a);
}

// Smallest-eigenvalue eigenvector of the k-neighbour covariance.
Point3 eigen_normal(const PointCloud& c, std::size_t i, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < c.size(); ++j) d.emplace_back(squared_distance(c[i], c[j]), j);
  std::sort(d.begin(), d.end());
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t m = 0; m < k; ++m) mean += Eigen::Vector3d(c[d[m].second].x, c[d[m].second].y, c[d[m].second].z);
  mean /= static_cast<double>(k);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t m = 0; m < k; ++m) {
    const Eigen::Vector3d v = Eigen::Vector3d(c[d[m].second].x, c[d[m].second].y, c[d[m].second].z) - mean;
    cov += v * v.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  const Eigen::Vector3d n = es.eigenvectors().col(0);
  return {n.x(), n.y(), n.z()};
}

double abs_dot(const Point3& a, const Point3& b) { return std::abs(a.x * b.x + a.y * b.y + a.z * b.z); }

}  // namespace

TEST(SpatialIndex, MatchesLinearScan) {
  const PointCloud c = random_cloud(2000, 10.0, 1);
  const SpatialIndex idx(c);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-12.0, 12.0);
  for (int q = 0; q < 1000; ++q) {
    const Point3 p{u(rng), u(rng), u(rng)};
    const Neighbor n = idx.nearest(p);
    EXPECT_EQ(n.index, brute_nearest(p, c));
    EXPECT_EQ(n.squared_distance, squared_distance(p, c[n.index]));
  }
}

TEST(SpatialIndex, KnnSortedAndExact) {
  const PointCloud c = random_cloud(500, 5.0, 3);
  const SpatialIndex idx(c);
  for (std::size_t i = 0; i < 50; ++i) {
    const auto got = idx.knn(c[i], 12);
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < c.size(); ++j) d.emplace_back(squared_distance(c[i], c[j]), j);
    std::sort(d.begin(), d.end());
    ASSERT_EQ(got.size(), 12u);
    for (std::size_t m = 0; m < 12; ++m) {
      EXPECT_EQ(got[m].index, d[m].second);
      EXPECT_EQ(got[m].squared_distance, d[m].first);
    }
  }
  EXPECT_EQ(idx.knn(c[0], 10000).size(), c.size());
}

TEST(SpatialIndex, DuplicatesAndEmpty) {
  const PointCloud c({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {2, 2, 2}});
  const SpatialIndex idx(c);
  EXPECT_EQ(idx.nearest({1, 1, 1}).index, 0u);
  const auto k = idx.knn({1, 1, 1}, 3);
  EXPECT_EQ(k[0].index, 0u);
  EXPECT_EQ(k[1].index, 1u);
  EXPECT_EQ(k[2].index, 2u);
  EXPECT_EQ(code_of([] { SpatialIndex(PointCloud{}); }), ErrorCode::EmptyCloud);
}

TEST(Chamfer, Examples) {
  const PointCloud c = random_cloud(100, 1.0, 4);
  EXPECT_EQ(chamfer(c, c), 0.0);
  EXPECT_DOUBLE_EQ(chamfer(PointCloud({{0, 0, 0}}), PointCloud({{3, 0, 0}})), 3.0);
}

TEST(Chamfer, MatchesBruteForce) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const PointCloud a = random_cloud(300, 4.0, 10 + s);
    const PointCloud b = random_cloud(300, 4.0, 20 + s);
    EXPECT_NEAR(chamfer(a, b), brute_chamfer(a, b), 1e-12);
  }
  EXPECT_EQ(code_of([] { chamfer(PointCloud{}, PointCloud({{0, 0, 0}})); }), ErrorCode::EmptyCloud);
}

TEST(Psnr, TwoPointExample) {
  const PointCloud a({{0, 0, 0}, {0, 0, 2}});
  const PointCloud b({{0, 0, 0.1}, {0, 0, 2}});
  const DirectedMse m = directed_mse(a, b, PsnrKind::d1);
  EXPECT_NEAR(m.a_to_b, 0.005, 1e-15);
  EXPECT_NEAR(m.b_to_a, 0.005, 1e-15);
  EXPECT_DOUBLE_EQ(peak(a), 2.0);
  const Psnr p = psnr(a, b, PsnrKind::d1);
  EXPECT_FALSE(p.lossless);
  EXPECT_NEAR(p.db, 10.0 * std::log10(4.0 / 0.005), 1e-9);
  EXPECT_NEAR(p.db, 29.03, 0.005);
}

TEST(Psnr, IdenticalIsLossless) {
  const PointCloud c = random_cloud(200, 3.0, 5);
  EXPECT_TRUE(psnr(c, c, PsnrKind::d1).lossless);
  EXPECT_TRUE(psnr(c, c, PsnrKind::d2).lossless);
  EXPECT_EQ(psnr(c, c, PsnrKind::d1).to_string(), "LOSSLESS");
  EXPECT_LT(Psnr::finite(1e9), Psnr::lossless_value());
  EXPECT_FALSE(Psnr::lossless_value() < Psnr::finite(1e9));
}

TEST(Psnr, OneSidedZeroUsesFiniteDirection) {
  // b is a subset of a: b->a is exact, a->b is not.
  const PointCloud a({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const PointCloud b({{0, 0, 0}, {1, 0, 0}});
  const DirectedMse m = directed_mse(a, b, PsnrKind::d1);
  EXPECT_EQ(m.b_to_a, 0.0);
  EXPECT_GT(m.a_to_b, 0.0);
  const Psnr p = psnr(a, b, PsnrKind::d1);
  EXPECT_FALSE(p.lossless);
  EXPECT_NEAR(p.db, 10.0 * std::log10(peak(a) * peak(a) / m.a_to_b), 1e-12);
}

TEST(Psnr, D2AtLeastD1ForPlanarNoise) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> n(0.0, 0.01);
  std::vector<Point3> ref, noisy;
  for (int i = 0; i < 2000; ++i) {
    const Point3 p{u(rng), u(rng), 0.0};
    ref.push_back(p);
    noisy.push_back({p.x + n(rng), p.y + n(rng), p.z + n(rng)});
  }
  const PointCloud a(ref), b(noisy);
  EXPECT_GT(psnr(a, b, PsnrKind::d2).db, psnr(a, b, PsnrKind::d1).db);
}

TEST(Psnr, DegenerateReference) {
  const PointCloud one({{1, 1, 1}});
  EXPECT_EQ(code_of([&] { psnr(one, PointCloud({{0, 0, 0}}), PsnrKind::d1); }), ErrorCode::DegenerateReference);
}

TEST(Normals, PlaneGivesAxis) {
  std::vector<Point3> pts;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) pts.push_back({i * 0.3, j * 0.2 + 0.01 * i, 0.0});
  const auto normals = estimate_normals(PointCloud(pts), 16);
  for (const auto& n : normals) {
    EXPECT_NEAR(std::abs(n.z), 1.0, 1e-6);
    EXPECT_NEAR(n.x, 0.0, 1e-6);
    EXPECT_NEAR(n.y, 0.0, 1e-6);
  }
}

TEST(Normals, SphereIsRadial) {
  // Fibonacci lattice on a sphere of radius 5.
  std::vector<Point3> pts;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < 500; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / 500.0;
    const double r = std::sqrt(1.0 - z * z);
    pts.push_back(Point3{r * std::cos(golden * i), r * std::sin(golden * i), z} * 5.0);
  }
  const PointCloud c(pts);
  const auto normals = estimate_normals(c, 8);
  const double cos5 = std::cos(5.0 * std::numbers::pi / 180.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_GE(abs_dot(normals[i], c[i] * (1.0 / c[i].norm())), cos5);
    // Oriented toward the sensor at the origin.
    EXPECT_LE(normals[i].x * c[i].x + normals[i].y * c[i].y + normals[i].z * c[i].z, 0.0);
  }
}

TEST(Normals, MatchEigenSolver) {
  const PointCloud c = random_cloud(300, 2.0, 8);
  const auto normals = estimate_normals(c, 16);
  for (std::size_t i = 0; i < c.size(); i += 7) {
    EXPECT_NEAR(abs_dot(normals[i], eigen_normal(c, i, 16)), 1.0, 1e-6) << i;
  }
}

TEST(Normals, TooFewPoints) {
  const PointCloud c = random_cloud(5, 1.0, 9);
  EXPECT_EQ(code_of([&] { estimate_normals(c, 6); }), ErrorCode::TooFewPoints);
  EXPECT_EQ(code_of([&] { estimate_normals(c, 2); }), ErrorCode::TooFewPoints);
  EXPECT_NO_THROW(estimate_normals(c, 5));
}

TEST(RateMetrics, Bpp) {
  EXPECT_DOUBLE_EQ(bpp(6, 1), 48.0);
  EXPECT_NEAR(bpp(105 * 1024, 131072), 6.5625, 1e-15);
  EXPECT_NEAR(bpp(105 * 1024, 131072), 6.55, 0.02);
  EXPECT_DOUBLE_EQ(bpp(2000, 100), 2.0 * bpp(1000, 100));
  EXPECT_EQ(code_of([] { bpp(10, 0); }), ErrorCode::ZeroPoints);
  const CompressedFrame f(CodecId::octree, 0, 0, 4, std::vector<std::uint8_t>(3));
  EXPECT_DOUBLE_EQ(bpp(f), 6.0);
}

TEST(RateMetrics, CompressionRatio) {
  const CompressedFrame small(CodecId::octree, 0, 0, 10, std::vector<std::uint8_t>(100000));
  EXPECT_DOUBLE_EQ(compression_ratio(5000000, small), 50.0);
  EXPECT_DOUBLE_EQ(compression_ratio(100000, small), 1.0);
  EXPECT_NEAR(compression_ratio(5000000, small) * bpp(small), 8.0 * 5000000 / 10, 1e-6);
}

TEST(RateMetrics, Bitrate) {
  const std::vector<CompressedFrame> frames{
      CompressedFrame(CodecId::octree, 0, 0, 1, std::vector<std::uint8_t>(105 * 1024))};
  EXPECT_DOUBLE_EQ(bitrate(frames, 10.0), 105.0 * 1024 * 8 * 10);
  EXPECT_NEAR(bitrate(frames, 10.0) / 1e6, 8.6, 0.01);
  EXPECT_DOUBLE_EQ(bitrate(frames, 20.0), 2.0 * bitrate(frames, 10.0));
  EXPECT_EQ(code_of([] { bitrate({}, 10.0); }), ErrorCode::EmptyList);
}

TEST(MetricReport, TextRoundTrip) {
  MetricReport r;
  r.psnr_d1_db = Psnr::finite(71.25);
  r.psnr_d2_db = Psnr::lossless_value();
  r.chamfer_m = 0.0125;
  r.bpp = 6.5;
  r.encode_ms = 12.0;
  EXPECT_EQ(MetricReport::from_text(r.to_text()), r);
  EXPECT_NE(r.to_text().find("decode_ms: na"), std::string::npos);
  EXPECT_NE(r.to_text().find("psnr_d2_db: LOSSLESS"), std::string::npos);
  EXPECT_EQ(r.csv_row(), "71.25,LOSSLESS,0.0125,6.5,na,12,na");
  EXPECT_THROW(MetricReport::from_text("psnr_d1_db: 1\n"), Error);
}

TEST(MetricReport, EvaluateIdentical) {
  const PointCloud c = random_cloud(100, 2.0, 11);
  const MetricReport r = evaluate(c, c);
  EXPECT_TRUE(r.psnr_d1_db.lossless);
  EXPECT_TRUE(r.psnr_d2_db.lossless);
  EXPECT_EQ(r.chamfer_m, 0.0);
}
