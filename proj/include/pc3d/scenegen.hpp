// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Deterministic synthetic roadside scenes and an exact ray-casting LiDAR.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/range_image.hpp"

namespace pc3d::scene {

/// SplitMix64 used as a counter-based generator: value(seed, n) mixes
/// seed + (n + 1) * 0x9E3779B97F4A7C15 through the finaliser with
/// multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB (shifts 30, 27,
/// 31). Streams are reproducible from (seed, counter) alone.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t at(std::uint64_t seed, std::uint64_t counter) {
    return mix(seed + (counter + 1) * kGamma);
  }

  std::uint64_t next() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Standard normal deviate for draw `counter` of stream `seed` (Box-Muller on
/// two counter-based uniforms).
inline double gaussian_at(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = (static_cast<double>(SplitMix64::at(seed, 2 * counter) >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(SplitMix64::at(seed, 2 * counter + 1) >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

enum class ObjectKind { box_vehicle, cylinder_pedestrian };

inline const char* kind_name(ObjectKind k) {
  return k == ObjectKind::box_vehicle ? "box_vehicle" : "cylinder_pedestrian";
}

/// Box: dims = (length, width, height), yaw about +z. Cylinder: dims =
/// (radius, height, unused), vertical axis.
struct SceneObject {
  ObjectKind kind = ObjectKind::box_vehicle;
  Point3 center;
  Point3 dims;
  double yaw_rad = 0.0;

  double half_height() const {
    return 0.5 * (kind == ObjectKind::box_vehicle ? dims.z : dims.y);
  }

  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::optional<double> ground_z;
  std::vector<SceneObject> objects;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Intensities are multiples of 1/255 so they survive 8-bit storage exactly.
inline constexpr double kGroundIntensity = 51.0 / 255.0;
inline constexpr double kVehicleIntensity = 204.0 / 255.0;
inline constexpr double kPedestrianIntensity = 128.0 / 255.0;

inline constexpr double kDefaultGroundZ = -6.0;
inline constexpr double kKeepOutRadius = 4.0;

/// Ground plane at `ground_z` plus vehicles and pedestrians standing on it,
/// centres uniform in [-extent, extent]^2 outside a keep-out disc around the
/// sensor mast.
inline Scene generate_scene(std::uint64_t seed, int n_vehicles, int n_pedestrians, double extent_m,
                            double ground_z = kDefaultGroundZ) {
  if (!(extent_m > 0.0) || n_vehicles < 0 || n_pedestrians < 0) {
    throw Error(ErrorCode::InvalidConfig, "scene needs extent > 0 and non-negative counts");
  }
  SplitMix64 rng(seed);
  Scene s;
  s.ground_z = ground_z;
  auto place = [&](double clearance) {
    const double keep_out = std::min(kKeepOutRadius + clearance, 0.9 * extent_m);
    for (;;) {
      const double x = rng.uniform(-extent_m, extent_m);
      const double y = rng.uniform(-extent_m, extent_m);
      if (std::hypot(x, y) >= keep_out) return std::pair{x, y};
    }
  };
  for (int i = 0; i < n_vehicles; ++i) {
    SceneObject o;
    o.kind = ObjectKind::box_vehicle;
    o.dims = {rng.uniform(3.6, 12.0), rng.uniform(1.7, 2.6), rng.uniform(1.4, 3.8)};
    auto [x, y] = place(0.5 * std::hypot(o.dims.x, o.dims.y));
    o.center = {x, y, ground_z + 0.5 * o.dims.z};
    o.yaw_rad = rng.uniform(-std::numbers::pi, std::numbers::pi);
    s.objects.push_back(o);
  }
  for (int i = 0; i < n_pedestrians; ++i) {
    SceneObject o;
    o.kind = ObjectKind::cylinder_pedestrian;
    o.dims = {rng.uniform(0.22, 0.4), rng.uniform(1.5, 1.95), 0.0};
    auto [x, y] = place(o.dims.x);
    o.center = {x, y, ground_z + 0.5 * o.dims.y};
    s.objects.push_back(o);
  }
  return s;
}

/// Line-oriented text form:
///   pc3d-scene 1
///   ground_z <z>            (or "ground none")
///   object <kind> <cx> <cy> <cz> <d0> <d1> <d2> <yaw>
/// Reals use %.17g so parsing restores the exact doubles.
inline std::string to_text(const Scene& s) {
  std::string out = "pc3d-scene 1\n";
  char buf[320];
  if (s.ground_z) {
    std::snprintf(buf, sizeof buf, "ground_z %.17g\n", *s.ground_z);
    out += buf;
  } else {
    out += "ground none\n";
  }
  for (const auto& o : s.objects) {
    std::snprintf(buf, sizeof buf, "object %s %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  kind_name(o.kind), o.center.x, o.center.y, o.center.z, o.dims.x, o.dims.y,
                  o.dims.z, o.yaw_rad);
    out += buf;
  }
  return out;
}

inline Scene scene_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "pc3d-scene" || version != 1) {
    throw Error(ErrorCode::MalformedHeader, "not a pc3d-scene v1 document");
  }
  Scene s;
  std::string key;
  while (in >> key) {
    if (key == "ground_z") {
      double z;
      if (!(in >> z)) throw Error(ErrorCode::MalformedHeader, "ground_z value");
      s.ground_z = z;
    } else if (key == "ground") {
      std::string none;
      in >> none;
      s.ground_z.reset();
    } else if (key == "object") {
      std::string kind;
      SceneObject o;
      if (!(in >> kind >> o.center.x >> o.center.y >> o.center.z >> o.dims.x >> o.dims.y >>
            o.dims.z >> o.yaw_rad)) {
        throw Error(ErrorCode::MalformedHeader, "object line");
      }
      if (kind == "box_vehicle") o.kind = ObjectKind::box_vehicle;
      else if (kind == "cylinder_pedestrian") o.kind = ObjectKind::cylinder_pedestrian;
      else throw Error(ErrorCode::MalformedHeader, "object kind " + kind);
      s.objects.push_back(o);
    } else {
      throw Error(ErrorCode::MalformedHeader, "unknown key " + key);
    }
  }
  return s;
}

namespace detail {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

inline double hit_plane(const Point3& o, const Point3& d, double z) {
  if (d.z == 0.0) return kNoHit;
  const double t = (z - o.z) / d.z;
  return t > 0.0 ? t : kNoHit;
}

inline double hit_box(const Point3& o, const Point3& d, const SceneObject& b) {
  // Ray in box coordinates (rotate by -yaw about the centre).
  const double c = std::cos(b.yaw_rad), s = std::sin(b.yaw_rad);
  const Point3 rel = o - b.center;
  const double lo[3] = {c * rel.x + s * rel.y, -s * rel.x + c * rel.y, rel.z};
  const double ld[3] = {c * d.x + s * d.y, -s * d.x + c * d.y, d.z};
  const double half[3] = {0.5 * b.dims.x, 0.5 * b.dims.y, 0.5 * b.dims.z};
  double t0 = -kNoHit, t1 = kNoHit;
  for (int a = 0; a < 3; ++a) {
    if (ld[a] == 0.0) {
      if (lo[a] < -half[a] || lo[a] > half[a]) return kNoHit;
      continue;
    }
    double ta = (-half[a] - lo[a]) / ld[a];
    double tb = (half[a] - lo[a]) / ld[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kNoHit;
  }
  return t0 > 0.0 ? t0 : kNoHit;
}

inline double hit_cylinder(const Point3& o, const Point3& d, const SceneObject& cyl) {
  const double r = cyl.dims.x;
  const double zlo = cyl.center.z - cyl.half_height();
  const double zhi = cyl.center.z + cyl.half_height();
  const double ox = o.x - cyl.center.x, oy = o.y - cyl.center.y;
  double best = kNoHit;
  const double a = d.x * d.x + d.y * d.y;
  if (a > 0.0) {
    const double b = ox * d.x + oy * d.y;
    const double cc = ox * ox + oy * oy - r * r;
    const double disc = b * b - a * cc;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / a;
      const double z = o.z + t * d.z;
      if (t > 0.0 && z >= zlo && z <= zhi) best = t;
    }
  }
  for (double zc : {zlo, zhi}) {
    const double t = hit_plane(o, d, zc);
    if (t < best) {
      const double x = ox + t * d.x, y = oy + t * d.y;
      if (x * x + y * y <= r * r) best = t;
    }
  }
  return best;
}

}  // namespace detail

struct Hit {
  double range = detail::kNoHit;
  double intensity = 0.0;
};

/// Nearest intersection of a ray with the scene's analytic primitives.
inline Hit cast_ray(const Scene& s, const Point3& origin, const Point3& dir) {
  Hit h;
  if (s.ground_z) {
    const double t = detail::hit_plane(origin, dir, *s.ground_z);
    if (t < h.range) h = {t, kGroundIntensity};
  }
  for (const auto& o : s.objects) {
    if (o.kind == ObjectKind::box_vehicle) {
      const double t = detail::hit_box(origin, dir, o);
      if (t < h.range) h = {t, kVehicleIntensity};
    } else {
      const double t = detail::hit_cylinder(origin, dir, o);
      if (t < h.range) h = {t, kPedestrianIntensity};
    }
  }
  return h;
}

struct Scan {
  PointCloud cloud;
  range::RangeImageSet images;
};

/// Casts one ray per (beam, column) at the column centre plus the beam's
/// azimuth offset. Optional Gaussian range noise is keyed on (noise_seed,
/// pixel index). Misses and returns outside [range_min, range_max] leave the
/// pixel invalid. The cloud is the unprojection of the returned images, so
/// the two are consistent by construction.
inline Scan simulate_lidar(const Scene& scene, const SensorModel& sensor, double noise_sigma_m,
                           std::uint64_t noise_seed = 0, std::uint64_t frame_id = 0,
                           std::uint64_t timestamp_ns = 0) {
  sensor.validate();
  if (!(noise_sigma_m >= 0.0) || !std::isfinite(noise_sigma_m)) {
    throw Error(ErrorCode::InvalidConfig, "noise sigma must be finite and >= 0");
  }
  range::RangeImageSet img(sensor);
  for (int row = 0; row < sensor.n_beams; ++row) {
    const double elevation = sensor.elevation_rad(row);
    for (int col = 0; col < sensor.n_cols; ++col) {
      const double az = sensor.column_center_rad(col) + sensor.azimuth_offset_rad(row);
      const Hit hit = cast_ray(scene, sensor.origin, SensorModel::direction(elevation, az));
      if (!std::isfinite(hit.range)) continue;
      const std::size_t px = img.index(row, col);
      double r = hit.range;
      if (noise_sigma_m > 0.0) r += noise_sigma_m * gaussian_at(noise_seed, px);
      if (r < sensor.range_min_m || r > sensor.range_max_m) continue;
      img.range_m[px] = r;
      img.intensity[px] = hit.intensity;
    }
  }
  PointCloud cloud = range::unproject(img, frame_id, timestamp_ns);
  return {std::move(cloud), std::move(img)};
}

/// Moves vehicles along their heading and pedestrians along +x by
/// `dt_s` seconds at fixed speeds (10 m/s and 1.4 m/s).
inline Scene advance(const Scene& s, double dt_s) {
  Scene out = s;
  for (auto& o : out.objects) {
    if (o.kind == ObjectKind::box_vehicle) {
      o.center.x += 10.0 * dt_s * std::cos(o.yaw_rad);
      o.center.y += 10.0 * dt_s * std::sin(o.yaw_rad);
    } else {
      o.center.x += 1.4 * dt_s;
    }
  }
  return out;
}

/// Standard frame recipe used by the CLI, bench and stream defaults.
struct SequenceConfig {
  std::uint64_t seed = 1;
  int n_vehicles = 12;
  int n_pedestrians = 8;
  double extent_m = 60.0;
  double noise_sigma_m = 0.01;
  double fps = 10.0;
};

/// Frame `index` of a deterministic sequence: the seeded scene advanced by
/// index / fps seconds, noise stream seeded per frame.
inline Scan simulate_frame(const SequenceConfig& cfg, const SensorModel& sensor, std::uint64_t index,
                           std::uint64_t timestamp_ns = 0) {
  const Scene base = generate_scene(cfg.seed, cfg.n_vehicles, cfg.n_pedestrians, cfg.extent_m);
  const Scene s = advance(base, static_cast<double>(index) / cfg.fps);
  return simulate_lidar(s, sensor, cfg.noise_sigma_m, SplitMix64::at(cfg.seed, index), index,
                        timestamp_ns);
}

}  // namespace pc3d::scene
