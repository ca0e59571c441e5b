// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pc3d/error.hpp"

namespace pc3d {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;

  Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Point3 operator*(double s) const { return {x * s, y * s, z * s}; }

  double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(squared_norm()); }

  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

inline double squared_distance(const Point3& a, const Point3& b) { return (a - b).squared_norm(); }
inline double distance(const Point3& a, const Point3& b) { return std::sqrt(squared_distance(a, b)); }

/// Ordered point set with optional per-point intensity in [0, 1].
///
/// Validated on construction and immutable afterwards. Non-finite coordinates
/// are rejected rather than dropped so that point counts stay truthful.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(std::vector<Point3> points,
                      std::optional<std::vector<double>> intensity = std::nullopt,
                      std::uint64_t frame_id = 0, std::uint64_t timestamp_ns = 0)
      : points_(std::move(points)),
        intensity_(std::move(intensity)),
        frame_id_(frame_id),
        timestamp_ns_(timestamp_ns) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!points_[i].finite()) {
        throw Error(ErrorCode::NonFinitePoint, "point " + std::to_string(i) + " is not finite");
      }
    }
    if (intensity_) {
      if (intensity_->size() != points_.size()) {
        throw Error(ErrorCode::IntensityMismatch,
                    std::to_string(intensity_->size()) + " intensities for " +
                        std::to_string(points_.size()) + " points");
      }
      for (double v : *intensity_) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw Error(ErrorCode::IntensityMismatch, "intensity outside [0, 1]");
        }
      }
    }
  }

  const std::vector<Point3>& points() const { return points_; }
  const std::optional<std::vector<double>>& intensity() const { return intensity_; }
  bool has_intensity() const { return intensity_.has_value(); }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Point3& operator[](std::size_t i) const { return points_[i]; }
  std::uint64_t frame_id() const { return frame_id_; }
  std::uint64_t timestamp_ns() const { return timestamp_ns_; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point3> points_;
  std::optional<std::vector<double>> intensity_;
  std::uint64_t frame_id_ = 0;
  std::uint64_t timestamp_ns_ = 0;
};

struct Aabb {
  Point3 min;
  Point3 max;

  Point3 extent() const { return max - min; }

  double diagonal() const { return extent().norm(); }

  bool contains(const Point3& p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y &&
           p.z <= max.z;
  }

  bool contains(const Aabb& other) const { return contains(other.min) && contains(other.max); }

  friend bool operator==(const Aabb&, const Aabb&) = default;
};

inline Aabb bounding_box(std::span<const Point3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "bounding box of an empty point set");
  Aabb box{points.front(), points.front()};
  for (const auto& p : points) {
    box.min = {std::min(box.min.x, p.x), std::min(box.min.y, p.y), std::min(box.min.z, p.z)};
    box.max = {std::max(box.max.x, p.x), std::max(box.max.y, p.y), std::max(box.max.z, p.z)};
  }
  return box;
}

inline Aabb bounding_box(const PointCloud& cloud) { return bounding_box(cloud.points()); }

inline double diagonal(const Aabb& box) { return box.diagonal(); }

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Beam calibration of a spinning LiDAR: one row per beam, `n_cols` firings
/// per revolution. Column `c` is centred on azimuth (c + 0.5) * 360 / n_cols,
/// shifted by the per-beam offset.
struct SensorModel {
  int n_beams = 64;
  int n_cols = 2048;
  std::vector<double> elevation_deg;
  std::vector<double> azimuth_offset_deg;
  double range_min_m = 0.5;
  double range_max_m = 200.0;
  Point3 origin{};

  friend bool operator==(const SensorModel&, const SensorModel&) = default;

  void validate() const {
    auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidSensor, why); };
    if (n_beams <= 0 || n_cols <= 0) fail("beam and column counts must be positive");
    if (elevation_deg.size() != static_cast<std::size_t>(n_beams)) fail("elevation table size");
    if (azimuth_offset_deg.size() != static_cast<std::size_t>(n_beams)) fail("offset table size");
    for (std::size_t i = 0; i < elevation_deg.size(); ++i) {
      if (!std::isfinite(elevation_deg[i]) || !std::isfinite(azimuth_offset_deg[i])) {
        fail("non-finite angle");
      }
      if (elevation_deg[i] <= -90.0 || elevation_deg[i] >= 90.0) fail("elevation outside (-90, 90)");
      if (i > 0 && !(elevation_deg[i] > elevation_deg[i - 1])) {
        fail("elevation table must be strictly ascending");
      }
    }
    if (!(range_min_m > 0.0) || !(range_max_m > range_min_m) || !std::isfinite(range_max_m)) {
      fail("range limits must satisfy 0 < min < max");
    }
    if (!origin.finite()) fail("origin not finite");
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(n_beams) * static_cast<std::size_t>(n_cols);
  }

  double column_step_rad() const { return 2.0 * std::numbers::pi / n_cols; }

  double column_center_rad(int col) const { return (col + 0.5) * column_step_rad(); }

  double elevation_rad(int row) const { return deg_to_rad(elevation_deg[row]); }

  double azimuth_offset_rad(int row) const { return deg_to_rad(azimuth_offset_deg[row]); }

  /// Unit direction of a ray at the given elevation and azimuth (radians).
  static Point3 direction(double elevation, double azimuth) {
    const double ce = std::cos(elevation);
    return {ce * std::cos(azimuth), ce * std::sin(azimuth), std::sin(elevation)};
  }

  /// Position of a return at `range` along beam `row`, column `col`, with a
  /// residual azimuth correction on top of the nominal firing direction.
  Point3 point_at(int row, int col, double range, double azimuth_corr_rad = 0.0) const {
    const double az = column_center_rad(col) + azimuth_offset_rad(row) + azimuth_corr_rad;
    return origin + direction(elevation_rad(row), az) * range;
  }

  /// 64-bit FNV-1a over the calibration values; identifies the sensor a range
  /// payload was produced with.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_bytes = [&h](const void* data, std::size_t n) {
      const auto* bytes = static_cast<const unsigned char*>(data);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
      }
    };
    auto mix_i = [&](std::int64_t v) { mix_bytes(&v, sizeof v); };
    auto mix_d = [&](double v) { mix_bytes(&v, sizeof v); };
    mix_i(n_beams);
    mix_i(n_cols);
    for (double e : elevation_deg) mix_d(e);
    for (double a : azimuth_offset_deg) mix_d(a);
    mix_d(range_min_m);
    mix_d(range_max_m);
    mix_d(origin.x);
    mix_d(origin.y);
    mix_d(origin.z);
    return h;
  }
};

/// Roadside default: 64 below-horizon beams evenly spaced from -22.5 deg to
/// -0.35 deg, 2048 columns (131,072 rays per scan), no azimuth offsets,
/// 200 m maximum range.
inline SensorModel default_sensor(int n_beams = 64, int n_cols = 2048) {
  SensorModel s;
  s.n_beams = n_beams;
  s.n_cols = n_cols;
  s.elevation_deg.resize(static_cast<std::size_t>(n_beams));
  s.azimuth_offset_deg.assign(static_cast<std::size_t>(n_beams), 0.0);
  constexpr double lo = -22.5;
  constexpr double hi = -0.35;
  for (int i = 0; i < n_beams; ++i) {
    s.elevation_deg[static_cast<std::size_t>(i)] =
        n_beams == 1 ? lo : lo + (hi - lo) * i / static_cast<double>(n_beams - 1);
  }
  s.range_min_m = 0.5;
  s.range_max_m = 200.0;
  return s;
}

/// Text form of a sensor calibration:
///   pc3d-sensor 1
///   beams <H>
///   cols <W>
///   range <min> <max>
///   origin <x> <y> <z>
///   elevation_deg <H values, ascending>
///   azimuth_offset_deg <H values>
inline std::string to_text(const SensorModel& s) {
  std::ostringstream out;
  out.precision(17);
  out << "pc3d-sensor 1\nbeams " << s.n_beams << "\ncols " << s.n_cols << "\nrange "
      << s.range_min_m << ' ' << s.range_max_m << "\norigin " << s.origin.x << ' ' << s.origin.y
      << ' ' << s.origin.z << "\nelevation_deg";
  for (double e : s.elevation_deg) out << ' ' << e;
  out << "\nazimuth_offset_deg";
  for (double a : s.azimuth_offset_deg) out << ' ' << a;
  out << '\n';
  return out.str();
}

inline SensorModel sensor_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pc3d-sensor" || version != 1) {
    throw Error(ErrorCode::MalformedHeader, "not a pc3d-sensor v1 document");
  }
  SensorModel s;
  s.elevation_deg.clear();
  s.azimuth_offset_deg.clear();
  std::string key;
  auto read_list = [&in](std::vector<double>& dst, int n) {
    dst.resize(static_cast<std::size_t>(std::max(n, 0)));
    for (auto& v : dst) {
      if (!(in >> v)) throw Error(ErrorCode::MalformedHeader, "short angle table");
    }
  };
  while (in >> key) {
    bool ok = true;
    if (key == "beams") ok = static_cast<bool>(in >> s.n_beams);
    else if (key == "cols") ok = static_cast<bool>(in >> s.n_cols);
    else if (key == "range") ok = static_cast<bool>(in >> s.range_min_m >> s.range_max_m);
    else if (key == "origin") ok = static_cast<bool>(in >> s.origin.x >> s.origin.y >> s.origin.z);
    else if (key == "elevation_deg") read_list(s.elevation_deg, s.n_beams);
    else if (key == "azimuth_offset_deg") read_list(s.azimuth_offset_deg, s.n_beams);
    else throw Error(ErrorCode::MalformedHeader, "unknown sensor key " + key);
    if (!ok) throw Error(ErrorCode::MalformedHeader, "bad value for " + key);
  }
  s.validate();
  return s;
}

}  // namespace pc3d
