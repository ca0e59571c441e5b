// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Calibrated 3D <-> 2D transform between a LiDAR point cloud and its range,
// azimuth-correction and intensity images.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "pc3d/core.hpp"

namespace pc3d::range {

/// Three H x W images (row = beam, column = firing), row-major. A pixel with
/// range exactly 0 is invalid.
struct RangeImageSet {
  int width = 0;
  int height = 0;
  std::vector<double> range_m;
  std::vector<double> azimuth_corr_rad;
  std::vector<double> intensity;
  SensorModel sensor;

  RangeImageSet() = default;

  explicit RangeImageSet(SensorModel s)
      : width(s.n_cols),
        height(s.n_beams),
        range_m(s.pixel_count(), 0.0),
        azimuth_corr_rad(s.pixel_count(), 0.0),
        intensity(s.pixel_count(), 0.0),
        sensor(std::move(s)) {}

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(col);
  }

  bool valid(std::size_t i) const { return range_m[i] != 0.0; }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(range_m.begin(), range_m.end(), [](double r) { return r != 0.0; }));
  }

  friend bool operator==(const RangeImageSet&, const RangeImageSet&) = default;
};

struct Projection {
  RangeImageSet images;
  std::size_t collisions = 0;  // points that lost their pixel to a nearer point
};

namespace detail {

inline double wrap_two_pi(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  return a;
}

inline double wrap_pi(double a) {
  a = wrap_two_pi(a + std::numbers::pi) - std::numbers::pi;
  return a;
}

/// Nearest elevation row; ties go to the lower row.
inline int nearest_row(const std::vector<double>& elevation_deg, double e_deg) {
  const auto it = std::lower_bound(elevation_deg.begin(), elevation_deg.end(), e_deg);
  if (it == elevation_deg.begin()) return 0;
  if (it == elevation_deg.end()) return static_cast<int>(elevation_deg.size()) - 1;
  const auto hi = static_cast<int>(it - elevation_deg.begin());
  const int lo = hi - 1;
  return (e_deg - elevation_deg[static_cast<std::size_t>(lo)]) <=
                 (elevation_deg[static_cast<std::size_t>(hi)] - e_deg)
             ? lo
             : hi;
}

}  // namespace detail

/// Projects every point to (nearest beam row, azimuth column). Each pixel
/// keeps the nearest point; the residual azimuth beyond the column centre and
/// beam offset is stored so the transform inverts exactly.
inline Projection project(const PointCloud& cloud, const SensorModel& sensor) {
  sensor.validate();
  Projection out{RangeImageSet(sensor), 0};
  auto& img = out.images;
  const double step = sensor.column_step_rad();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3 d = cloud[i] - sensor.origin;
    const double r = d.norm();
    if (!(r >= sensor.range_min_m && r <= sensor.range_max_m)) {
      throw Error(ErrorCode::PointOutOfRange, "point " + std::to_string(i) + " at range " +
                                                  std::to_string(r) + " m");
    }
    const double elevation = rad_to_deg(std::atan2(d.z, std::hypot(d.x, d.y)));
    const int row = detail::nearest_row(sensor.elevation_deg, elevation);
    const double azimuth = std::atan2(d.y, d.x);
    const double rel = detail::wrap_two_pi(azimuth - sensor.azimuth_offset_rad(row));
    const int col = std::min(static_cast<int>(std::floor(rel / step)), sensor.n_cols - 1);
    const double corr = detail::wrap_pi(azimuth - sensor.column_center_rad(col) -
                                        sensor.azimuth_offset_rad(row));
    const std::size_t px = img.index(row, col);
    if (img.valid(px)) {
      ++out.collisions;
      if (r >= img.range_m[px]) continue;
    }
    img.range_m[px] = r;
    img.azimuth_corr_rad[px] = corr;
    img.intensity[px] = cloud.has_intensity() ? (*cloud.intensity())[i] : 0.0;
  }
  return out;
}

/// One point per valid pixel, column-major (all beams of column 0, then
/// column 1, ...), with intensity attached.
inline PointCloud unproject(const RangeImageSet& img, std::uint64_t frame_id = 0,
                            std::uint64_t timestamp_ns = 0) {
  std::vector<Point3> pts;
  std::vector<double> inten;
  pts.reserve(img.valid_count());
  inten.reserve(pts.capacity());
  for (int col = 0; col < img.width; ++col) {
    for (int row = 0; row < img.height; ++row) {
      const std::size_t px = img.index(row, col);
      if (!img.valid(px)) continue;
      pts.push_back(img.sensor.point_at(row, col, img.range_m[px], img.azimuth_corr_rad[px]));
      inten.push_back(img.intensity[px]);
    }
  }
  return PointCloud(std::move(pts), std::move(inten), frame_id, timestamp_ns);
}

}  // namespace pc3d::range
