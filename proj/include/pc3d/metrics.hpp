// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/frame.hpp"
#include "pc3d/kdtree.hpp"

namespace pc3d::metrics {

enum class PsnrKind { d1, d2 };

/// PSNR in dB, or the LOSSLESS sentinel. LOSSLESS compares above any finite
/// value.
struct Psnr {
  bool lossless = false;
  double db = 0.0;

  static Psnr lossless_value() { return {true, 0.0}; }
  static Psnr finite(double v) { return {false, v}; }

  friend bool operator==(const Psnr&, const Psnr&) = default;
  friend bool operator<(const Psnr& a, const Psnr& b) {
    if (a.lossless) return false;
    if (b.lossless) return true;
    return a.db < b.db;
  }

  std::string to_string(int decimals = 6) const {
    if (lossless) return "LOSSLESS";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, db);
    return buf;
  }
};

inline constexpr std::size_t kDefaultNormalNeighbors = 16;

namespace detail {

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and column eigenvectors (v[row][col]).
struct SymEigen3 {
  std::array<double, 3> values;
  std::array<std::array<double, 3>, 3> vectors;
};

inline SymEigen3 jacobi_eigen(std::array<std::array<double, 3>, 3> a) {
  std::array<std::array<double, 3>, 3> v{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    const double diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
    if (off <= 1e-32 * diag || off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  return {{a[0][0], a[1][1], a[2][2]}, v};
}

inline std::vector<Neighbor> nearest_all(std::span<const Point3> from, const SpatialIndex& to) {
  std::vector<Neighbor> out;
  out.reserve(from.size());
  for (const auto& p : from) out.push_back(to.nearest(p));
  return out;
}

inline void require_non_empty(const PointCloud& a, const PointCloud& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyCloud, "metric over an empty cloud");
}

}  // namespace detail

/// Unit normals from the covariance of each point's k nearest neighbours
/// (the point itself included), flipped to face the origin.
inline std::vector<Point3> estimate_normals(const PointCloud& cloud,
                                            std::size_t k = kDefaultNormalNeighbors) {
  if (k < 3 || cloud.size() < k) {
    throw Error(ErrorCode::TooFewPoints, "normal estimation needs at least k >= 3 points");
  }
  const SpatialIndex index(cloud);
  std::vector<Point3> normals;
  normals.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    const auto nb = index.knn(p, k);
    Point3 mean;
    for (const auto& n : nb) mean = mean + cloud[n.index];
    mean = mean * (1.0 / static_cast<double>(nb.size()));
    std::array<std::array<double, 3>, 3> cov{};
    for (const auto& n : nb) {
      const Point3 d = cloud[n.index] - mean;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) cov[r][c] += d[r] * d[c];
      }
    }
    const auto eig = detail::jacobi_eigen(cov);
    int smallest = 0;
    for (int i = 1; i < 3; ++i) {
      if (eig.values[i] < eig.values[smallest]) smallest = i;
    }
    Point3 n{eig.vectors[0][smallest], eig.vectors[1][smallest], eig.vectors[2][smallest]};
    n = n * (1.0 / n.norm());
    if (n.dot(Point3{} - p) < 0.0) n = n * -1.0;
    normals.push_back(n);
  }
  return normals;
}

/// Symmetric mean nearest-neighbour distance.
inline double chamfer(const PointCloud& a, const PointCloud& b) {
  detail::require_non_empty(a, b);
  const SpatialIndex ia(a), ib(b);
  double sa = 0.0, sb = 0.0;
  for (const auto& p : a.points()) sa += std::sqrt(ib.nearest(p).squared_distance);
  for (const auto& p : b.points()) sb += std::sqrt(ia.nearest(p).squared_distance);
  return sa / (2.0 * static_cast<double>(a.size())) + sb / (2.0 * static_cast<double>(b.size()));
}

/// Directed mean squared errors A->B and B->A; reference normals taken from
/// `a` when given.
struct DirectedMse {
  double a_to_b = 0.0;
  double b_to_a = 0.0;
};

inline DirectedMse directed_mse(const PointCloud& a, const PointCloud& b, PsnrKind kind,
                                std::size_t k = kDefaultNormalNeighbors) {
  detail::require_non_empty(a, b);
  const SpatialIndex ia(a), ib(b);
  std::vector<Point3> normals;
  if (kind == PsnrKind::d2) normals = estimate_normals(a, std::min(k, a.size()));
  DirectedMse out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Neighbor nb = ib.nearest(a[i]);
    if (kind == PsnrKind::d1) {
      out.a_to_b += nb.squared_distance;
    } else {
      const double e = (b[nb.index] - a[i]).dot(normals[i]);
      out.a_to_b += e * e;
    }
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Neighbor nb = ia.nearest(b[j]);
    if (kind == PsnrKind::d1) {
      out.b_to_a += nb.squared_distance;
    } else {
      const double e = (b[j] - a[nb.index]).dot(normals[nb.index]);
      out.b_to_a += e * e;
    }
  }
  out.a_to_b /= static_cast<double>(a.size());
  out.b_to_a /= static_cast<double>(b.size());
  return out;
}

inline double peak(const PointCloud& reference) {
  const double ps = diagonal(bounding_box(reference));
  if (!(ps > 0.0)) throw Error(ErrorCode::DegenerateReference, "reference bounding box has zero diagonal");
  return ps;
}

/// Symmetric PSNR: the larger of the two directed values, with peak equal to
/// the reference (`a`) bounding-box diagonal.
inline Psnr psnr(const PointCloud& a, const PointCloud& b, PsnrKind kind,
                 std::size_t k = kDefaultNormalNeighbors) {
  detail::require_non_empty(a, b);
  const double ps = peak(a);
  const DirectedMse m = directed_mse(a, b, kind, k);
  if (m.a_to_b == 0.0 && m.b_to_a == 0.0) return Psnr::lossless_value();
  auto db = [ps](double mse) { return 10.0 * std::log10(ps * ps / mse); };
  if (m.a_to_b == 0.0) return Psnr::finite(db(m.b_to_a));
  if (m.b_to_a == 0.0) return Psnr::finite(db(m.a_to_b));
  return Psnr::finite(std::max(db(m.a_to_b), db(m.b_to_a)));
}

inline double bpp(std::size_t payload_bytes, std::size_t n_points_original) {
  if (n_points_original == 0) throw Error(ErrorCode::ZeroPoints, "bits per point of zero points");
  return 8.0 * static_cast<double>(payload_bytes) / static_cast<double>(n_points_original);
}

/// Payload bits over the original point count; the container header is not
/// counted.
inline double bpp(const CompressedFrame& frame) {
  return bpp(frame.payload().size(), frame.n_points_original());
}

inline double compression_ratio(std::size_t raw_bytes, const CompressedFrame& frame) {
  if (raw_bytes == 0) throw Error(ErrorCode::InvalidConfig, "raw size must be positive");
  return static_cast<double>(raw_bytes) / static_cast<double>(frame.payload().size());
}

/// Mean payload bits per frame times the frame rate.
inline double bitrate(std::span<const CompressedFrame> frames, double fps) {
  if (frames.empty()) throw Error(ErrorCode::EmptyList, "bit rate of no frames");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw Error(ErrorCode::InvalidConfig, "fps must be positive");
  double total = 0.0;
  for (const auto& f : frames) total += static_cast<double>(f.payload().size());
  return 8.0 * total * fps / static_cast<double>(frames.size());
}

/// Serialized in this field order, both as CSV and as "key: value" lines.
/// Unmeasured rate and timing fields print as "na".
struct MetricReport {
  Psnr psnr_d1_db;
  Psnr psnr_d2_db;
  double chamfer_m = 0.0;
  std::optional<double> bpp;
  std::optional<double> compression_ratio;
  std::optional<double> encode_ms;
  std::optional<double> decode_ms;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;

  static std::string csv_header() {
    return "psnr_d1_db,psnr_d2_db,chamfer_m,bpp,compression_ratio,encode_ms,decode_ms";
  }

  std::string csv_row() const {
    const auto f = fields();
    std::string out;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += f[i].second;
    }
    return out;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : fields()) out += k + ": " + v + "\n";
    return out;
  }

  static MetricReport from_text(const std::string& text) {
    MetricReport r;
    std::istringstream in(text);
    std::string line;
    int seen = 0;
    auto parse_opt = [](const std::string& v) -> std::optional<double> {
      if (v == "na") return std::nullopt;
      return std::stod(v);
    };
    auto parse_psnr = [](const std::string& v) {
      return v == "LOSSLESS" ? Psnr::lossless_value() : Psnr::finite(std::stod(v));
    };
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto colon = line.find(": ");
      if (colon == std::string::npos) throw Error(ErrorCode::MalformedHeader, "bad report line: " + line);
      const std::string k = line.substr(0, colon), v = line.substr(colon + 2);
      try {
        if (k == "psnr_d1_db") r.psnr_d1_db = parse_psnr(v);
        else if (k == "psnr_d2_db") r.psnr_d2_db = parse_psnr(v);
        else if (k == "chamfer_m") r.chamfer_m = std::stod(v);
        else if (k == "bpp") r.bpp = parse_opt(v);
        else if (k == "compression_ratio") r.compression_ratio = parse_opt(v);
        else if (k == "encode_ms") r.encode_ms = parse_opt(v);
        else if (k == "decode_ms") r.decode_ms = parse_opt(v);
        else throw Error(ErrorCode::MalformedHeader, "unknown report key " + k);
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::MalformedHeader, "bad value for " + k);
      }
      ++seen;
    }
    if (seen != 7) throw Error(ErrorCode::MalformedHeader, "report needs 7 fields");
    return r;
  }

 private:
  static std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
  }
  static std::string opt(const std::optional<double>& v) { return v ? num(*v) : "na"; }
  static std::string psnr_str(const Psnr& p) { return p.lossless ? "LOSSLESS" : num(p.db); }

  std::vector<std::pair<std::string, std::string>> fields() const {
    return {{"psnr_d1_db", psnr_str(psnr_d1_db)},
            {"psnr_d2_db", psnr_str(psnr_d2_db)},
            {"chamfer_m", num(chamfer_m)},
            {"bpp", opt(bpp)},
            {"compression_ratio", opt(compression_ratio)},
            {"encode_ms", opt(encode_ms)},
            {"decode_ms", opt(decode_ms)}};
  }
};

/// Distortion half of a report: PSNR d1/d2 and Chamfer of `reconstructed`
/// against `original`.
inline MetricReport evaluate(const PointCloud& original, const PointCloud& reconstructed,
                             std::size_t k = kDefaultNormalNeighbors) {
  MetricReport r;
  r.psnr_d1_db = psnr(original, reconstructed, PsnrKind::d1);
  r.psnr_d2_db = psnr(original, reconstructed, PsnrKind::d2, k);
  r.chamfer_m = chamfer(original, reconstructed);
  return r;
}

}  // namespace pc3d::metrics
