// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Rate-distortion sweeps over codec settings, AUC, CSV and SVG export.
//
// Setting labels:
//   octree  "<bits>" or "<bits>:parent"
//   range   "lossless", "<range_bits>" or "<range_bits>:<azimuth_bits>"
//   voxel   "<size_m>" or "<size_m>:<binary|averaged|density>"

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pc3d/codec_octree.hpp"
#include "pc3d/codec_range.hpp"
#include "pc3d/codec_voxel.hpp"
#include "pc3d/metrics.hpp"

namespace pc3d::bench {

inline CodecId parse_codec(const std::string& name) {
  if (name == "octree") return CodecId::octree;
  if (name == "range") return CodecId::range;
  if (name == "voxel") return CodecId::voxel;
  throw Error(ErrorCode::InvalidConfig, "unknown codec " + name);
}

struct CodecSetting {
  CodecId codec = CodecId::octree;
  std::string label;
  octree::OctreeConfig octree;
  range::RangeCodecConfig range;
  double voxel_size = 0.5;
  voxel::Assignment assignment = voxel::Assignment::binary;

  CompressedFrame encode(const PointCloud& cloud, const SensorModel& sensor) const {
    switch (codec) {
      case CodecId::octree: return octree::encode(cloud, octree);
      case CodecId::range: return range::encode_cloud(cloud, sensor, range);
      case CodecId::voxel: return voxel::encode_cloud(cloud, voxel_size, assignment);
    }
    throw Error(ErrorCode::WrongCodec, "unknown codec");
  }

  PointCloud decode(const CompressedFrame& frame, const SensorModel& sensor) const {
    switch (codec) {
      case CodecId::octree: return octree::decode(frame);
      case CodecId::range: return range::decode_cloud(frame, sensor);
      case CodecId::voxel: return voxel::decode_cloud(frame);
    }
    throw Error(ErrorCode::WrongCodec, "unknown codec");
  }
};

namespace detail {

inline int parse_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidConfig, "not an integer: " + s);
  return v;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidConfig, "not a number: " + s);
  return v;
}

inline std::pair<std::string, std::string> split_colon(const std::string& s) {
  const auto c = s.find(':');
  if (c == std::string::npos) return {s, ""};
  return {s.substr(0, c), s.substr(c + 1)};
}

}  // namespace detail

inline CodecSetting parse_setting(CodecId codec, const std::string& label) {
  CodecSetting s;
  s.codec = codec;
  s.label = label;
  const auto [head, tail] = detail::split_colon(label);
  switch (codec) {
    case CodecId::octree:
      s.octree.quantization_bits = detail::parse_int(head);
      if (tail == "parent") s.octree.context_mode = entropy::ContextMode::parent_context;
      else if (!tail.empty() && tail != "order0") throw Error(ErrorCode::InvalidConfig, "bad octree setting " + label);
      s.octree.validate();
      break;
    case CodecId::range:
      if (head == "lossless" && tail.empty()) {
        s.range.mode = range::RangeMode::lossless;
      } else {
        s.range.mode = range::RangeMode::quantized;
        s.range.range_bits = detail::parse_int(head);
        s.range.azimuth_bits = tail.empty() ? 0 : detail::parse_int(tail);
      }
      s.range.validate();
      break;
    case CodecId::voxel:
      s.voxel_size = detail::parse_double(head);
      if (!(s.voxel_size > 0.0) || !std::isfinite(s.voxel_size)) {
        throw Error(ErrorCode::NonPositiveVoxelSize, "voxel size must be positive: " + label);
      }
      if (tail == "averaged") s.assignment = voxel::Assignment::averaged;
      else if (tail == "density") s.assignment = voxel::Assignment::density;
      else if (!tail.empty() && tail != "binary") throw Error(ErrorCode::InvalidConfig, "bad voxel setting " + label);
      break;
  }
  return s;
}

struct CurvePoint {
  std::string setting;
  double bpp = 0.0;
  metrics::Psnr psnr_d1;
  metrics::Psnr psnr_d2;
  double chamfer_m = 0.0;
  double encode_ms = 0.0;
  double decode_ms = 0.0;
};

struct RDCurve {
  CodecId codec = CodecId::octree;
  std::vector<CurvePoint> points;  // ascending bpp
};

struct SweepOptions {
  SensorModel sensor = default_sensor();
  int repetitions = 5;
  std::size_t normal_neighbors = metrics::kDefaultNormalNeighbors;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Sum in sorted order so the mean does not depend on frame order.
inline double order_free_mean(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// LOSSLESS if every frame was lossless, otherwise the mean of the finite
/// frames.
inline metrics::Psnr mean_psnr(const std::vector<metrics::Psnr>& v) {
  std::vector<double> finite;
  for (const auto& p : v) {
    if (!p.lossless) finite.push_back(p.db);
  }
  if (finite.empty()) return metrics::Psnr::lossless_value();
  return metrics::Psnr::finite(order_free_mean(std::move(finite)));
}

template <class F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace detail

/// Encodes and decodes every frame under every setting. Rate and distortion
/// are frame means; timings are the median over frames of the per-frame
/// median of `repetitions` runs after one discarded warm-up run.
inline RDCurve run_sweep(std::span<const PointCloud> frames, CodecId codec,
                         std::span<const std::string> settings, const SweepOptions& opt = {}) {
  if (frames.empty()) throw Error(ErrorCode::EmptyList, "sweep needs at least one frame");
  if (settings.size() < 2) throw Error(ErrorCode::TooFewSettings, "sweep needs at least two settings");
  if (opt.repetitions < 1) throw Error(ErrorCode::InvalidConfig, "repetitions must be >= 1");
  RDCurve curve;
  curve.codec = codec;
  for (const auto& label : settings) {
    try {
      const CodecSetting s = parse_setting(codec, label);
      std::vector<double> bpps, chamfers, enc_ms, dec_ms;
      std::vector<metrics::Psnr> d1s, d2s;
      for (const auto& cloud : frames) {
        CompressedFrame frame = s.encode(cloud, opt.sensor);
        PointCloud decoded = s.decode(frame, opt.sensor);
        std::vector<double> te, td;
        for (int r = 0; r < opt.repetitions; ++r) {
          te.push_back(detail::time_ms([&] { frame = s.encode(cloud, opt.sensor); }));
          td.push_back(detail::time_ms([&] { decoded = s.decode(frame, opt.sensor); }));
        }
        enc_ms.push_back(detail::median(te));
        dec_ms.push_back(detail::median(td));
        bpps.push_back(metrics::bpp(frame));
        d1s.push_back(metrics::psnr(cloud, decoded, metrics::PsnrKind::d1));
        d2s.push_back(metrics::psnr(cloud, decoded, metrics::PsnrKind::d2, opt.normal_neighbors));
        chamfers.push_back(metrics::chamfer(cloud, decoded));
      }
      curve.points.push_back({label, detail::order_free_mean(bpps), detail::mean_psnr(d1s),
                              detail::mean_psnr(d2s), detail::order_free_mean(chamfers),
                              detail::median(enc_ms), detail::median(dec_ms)});
    } catch (const Error& e) {
      throw Error(e.code(), "setting " + label + ": " + e.what());
    }
  }
  std::stable_sort(curve.points.begin(), curve.points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.bpp < b.bpp; });
  return curve;
}

/// Trapezoidal area under PSNR over BPP divided by the BPP span.
inline double auc(const RDCurve& curve, metrics::PsnrKind which) {
  const auto& p = curve.points;
  if (p.size() < 2) throw Error(ErrorCode::TooFewPoints, "AUC needs at least two curve points");
  auto value = [which](const CurvePoint& c) {
    const metrics::Psnr& v = which == metrics::PsnrKind::d1 ? c.psnr_d1 : c.psnr_d2;
    if (v.lossless) throw Error(ErrorCode::LosslessInCurve, "LOSSLESS point " + c.setting);
    if (!std::isfinite(v.db)) throw Error(ErrorCode::InvalidConfig, "non-finite PSNR at " + c.setting);
    return v.db;
  };
  double area = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].bpp < p[i - 1].bpp) throw Error(ErrorCode::InvalidConfig, "curve not sorted by bpp");
    area += 0.5 * (value(p[i]) + value(p[i - 1])) * (p[i].bpp - p[i - 1].bpp);
  }
  value(p.front());
  const double span = p.back().bpp - p.front().bpp;
  if (!(span > 0.0)) throw Error(ErrorCode::InvalidConfig, "curve has zero BPP span");
  return area / span;
}

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline constexpr const char* kCsvHeader =
    "codec,setting,bpp,psnr_d1_db,psnr_d2_db,chamfer_m,encode_ms,decode_ms";

namespace detail {

inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// '#'-prefixed "key=value" metadata lines, the header, then one row per
/// point: bpp and PSNR with 6 decimals, chamfer with 9, timings with 3.
inline std::string export_csv(const RDCurve& curve, const Metadata& meta = {}) {
  if (curve.points.empty()) throw Error(ErrorCode::EmptyCurve, "nothing to export");
  std::string out;
  for (const auto& [k, v] : meta) out += "# " + k + "=" + v + "\n";
  out += kCsvHeader;
  out += '\n';
  const std::string codec = codec_name(curve.codec);
  for (const auto& p : curve.points) {
    out += codec + ',' + p.setting + ',' + detail::fixed(p.bpp, 6) + ',' + p.psnr_d1.to_string(6) +
           ',' + p.psnr_d2.to_string(6) + ',' + detail::fixed(p.chamfer_m, 9) + ',' +
           detail::fixed(p.encode_ms, 3) + ',' + detail::fixed(p.decode_ms, 3) + '\n';
  }
  return out;
}

inline RDCurve parse_csv(const std::string& text) {
  RDCurve curve;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kCsvHeader) throw Error(ErrorCode::MalformedHeader, "unexpected CSV header");
      header = true;
      continue;
    }
    const auto f = detail::split(line, ',');
    if (f.size() != 8) throw Error(ErrorCode::MalformedHeader, "CSV row needs 8 fields");
    auto psnr = [](const std::string& v) {
      return v == "LOSSLESS" ? metrics::Psnr::lossless_value()
                             : metrics::Psnr::finite(detail::parse_double(v));
    };
    curve.codec = parse_codec(f[0]);
    curve.points.push_back({f[1], detail::parse_double(f[2]), psnr(f[3]), psnr(f[4]),
                            detail::parse_double(f[5]), detail::parse_double(f[6]),
                            detail::parse_double(f[7])});
  }
  if (!header) throw Error(ErrorCode::MalformedHeader, "CSV header missing");
  return curve;
}

/// Standalone SVG line plot, PSNR d1 and d2 against BPP. LOSSLESS points are
/// not drawn.
inline std::string export_svg(const RDCurve& curve, int width = 800, int height = 600) {
  if (curve.points.empty()) throw Error(ErrorCode::EmptyCurve, "nothing to plot");
  const double left = 80, right = 30, top = 50, bottom = 70;
  const double pw = width - left - right, ph = height - top - bottom;

  double x0 = curve.points.front().bpp, x1 = curve.points.back().bpp;
  double y0 = 0, y1 = 0;
  bool any = false;
  for (const auto& p : curve.points) {
    x0 = std::min(x0, p.bpp);
    x1 = std::max(x1, p.bpp);
    for (const auto* v : {&p.psnr_d1, &p.psnr_d2}) {
      if (v->lossless) continue;
      y0 = any ? std::min(y0, v->db) : v->db;
      y1 = any ? std::max(y1, v->db) : v->db;
      any = true;
    }
  }
  if (!any) y0 = 0, y1 = 1;
  if (x1 <= x0) x0 -= 0.5, x1 += 0.5;
  if (y1 <= y0) y0 -= 1.0, y1 += 1.0;
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };
  auto f2 = [](double v) { return detail::fixed(v, 2); };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " +
       std::to_string(height) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + f2(width / 2.0) + "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">" +
       detail::xml_escape(codec_name(curve.codec)) + " rate-distortion</text>\n";
  s += "<g stroke=\"black\" stroke-width=\"1\">\n";
  s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top + ph) + "\" x2=\"" + f2(left + pw) + "\" y2=\"" + f2(top + ph) + "\"/>\n";
  s += "<line x1=\"" + f2(left) + "\" y1=\"" + f2(top) + "\" x2=\"" + f2(left) + "\" y2=\"" + f2(top + ph) + "\"/>\n";
  s += "</g>\n<g font-family=\"sans-serif\" font-size=\"12\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
    s += "<text x=\"" + f2(sx(xv)) + "\" y=\"" + f2(top + ph + 20) + "\" text-anchor=\"middle\">" + f2(xv) + "</text>\n";
    s += "<text x=\"" + f2(left - 8) + "\" y=\"" + f2(sy(yv) + 4) + "\" text-anchor=\"end\">" + f2(yv) + "</text>\n";
  }
  s += "<text x=\"" + f2(left + pw / 2) + "\" y=\"" + f2(height - 20.0) + "\" text-anchor=\"middle\">bits per point</text>\n";
  s += "<text x=\"20\" y=\"" + f2(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
       f2(top + ph / 2) + ")\">PSNR (dB)</text>\n";
  s += "</g>\n";

  const std::pair<metrics::PsnrKind, const char*> series[] = {{metrics::PsnrKind::d1, "#1f77b4"},
                                                              {metrics::PsnrKind::d2, "#d62728"}};
  for (const auto& [kind, color] : series) {
    std::string pts;
    std::string marks;
    for (const auto& p : curve.points) {
      const metrics::Psnr& v = kind == metrics::PsnrKind::d1 ? p.psnr_d1 : p.psnr_d2;
      if (v.lossless) continue;
      if (!pts.empty()) pts += ' ';
      pts += f2(sx(p.bpp)) + "," + f2(sy(v.db));
      marks += "<circle cx=\"" + f2(sx(p.bpp)) + "\" cy=\"" + f2(sy(v.db)) + "\" r=\"3\" fill=\"" + color +
               "\"><title>" + detail::xml_escape(p.setting) + "</title></circle>\n";
    }
    if (!pts.empty()) {
      s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
      s += marks;
    }
  }
  s += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"" + f2(left + pw - 60) + "\" y=\"" + f2(top + 15) + "\" fill=\"#1f77b4\">PSNR d1</text>\n";
  s += "<text x=\"" + f2(left + pw - 60) + "\" y=\"" + f2(top + 32) + "\" fill=\"#d62728\">PSNR d2</text>\n";
  s += "</g>\n</svg>\n";
  return s;
}

}  // namespace pc3d::bench
