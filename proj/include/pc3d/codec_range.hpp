// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Range-image codec: range, azimuth-correction and intensity planes, each
// delta-filtered along the row and deflated.
//
// Payload layout (little-endian):
//   width         u32
//   height        u32
//   mode          u8    0 = lossless, 1 = quantized
//   range_bits    u8    quantized mode only (else 0)
//   azimuth_bits  u8    quantized mode only (else 0)
//   reserved      u8    0
//   sensor_hash   u64   SensorModel::hash() of the calibration
//   3 x { len u32, raw deflate stream }   range, azimuth, intensity
//
// Sample representation per mode:
//   lossless   range: u32 micrometre ticks (0 = invalid); azimuth: i32
//              micro-radian ticks; intensity: u8 (round(i * 255)).
//   quantized  range: 0 = invalid, else 1 + floor(r / step) with
//              step = range_max / 2^range_bits, decoded at the bin centre;
//              azimuth: azimuth_bits uniform bins over one column width
//              (absent when azimuth_bits == 0); intensity: u8.
// Range and azimuth residuals (value minus left neighbour, row start
// predicted from 0) are zigzag-mapped and split into byte planes, least
// significant plane first. Intensity residuals are taken modulo 256.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/detail/bytes.hpp"
#include "pc3d/detail/deflate.hpp"
#include "pc3d/frame.hpp"
#include "pc3d/range_image.hpp"

namespace pc3d::range {

enum class RangeMode : std::uint8_t { lossless = 0, quantized = 1 };

struct RangeCodecConfig {
  RangeMode mode = RangeMode::lossless;
  int range_bits = 16;
  int azimuth_bits = 0;

  void validate() const {
    if (mode == RangeMode::lossless) return;
    if (range_bits < 8 || range_bits > 16) {
      throw Error(ErrorCode::InvalidConfig, "range_bits outside [8, 16]");
    }
    if (azimuth_bits < 0 || azimuth_bits > 16) {
      throw Error(ErrorCode::InvalidConfig, "azimuth_bits outside [0, 16]");
    }
  }
};

/// Stored precision of lossless mode.
inline constexpr double kRangeTicksPerMeter = 1e6;
inline constexpr double kAzimuthTicksPerRadian = 1e6;

struct PlaneSizes {
  std::size_t range_bytes = 0;
  std::size_t azimuth_bytes = 0;
  std::size_t intensity_bytes = 0;

  std::size_t total() const { return range_bytes + azimuth_bytes + intensity_bytes; }
};

namespace detail {

constexpr std::size_t kHeaderSize = 4 + 4 + 4 + 8;

inline std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

inline std::int64_t unzigzag(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1U);
}

/// Row-wise delta + zigzag + byte-plane split of `width_bytes`-wide samples.
inline std::vector<std::uint8_t> delta_planes(const std::vector<std::int64_t>& values, int w, int h,
                                              int width_bytes) {
  const std::size_t n = values.size();
  std::vector<std::uint8_t> out(n * static_cast<std::size_t>(width_bytes));
  for (int row = 0; row < h; ++row) {
    std::int64_t prev = 0;
    for (int col = 0; col < w; ++col) {
      const std::size_t i = static_cast<std::size_t>(row) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(col);
      const std::uint64_t z = zigzag(values[i] - prev);
      prev = values[i];
      for (int b = 0; b < width_bytes; ++b) {
        out[static_cast<std::size_t>(b) * n + i] = static_cast<std::uint8_t>(z >> (8 * b));
      }
    }
  }
  return out;
}

inline std::vector<std::int64_t> undelta_planes(std::span<const std::uint8_t> planes, int w, int h,
                                                int width_bytes) {
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  std::vector<std::int64_t> values(n);
  for (int row = 0; row < h; ++row) {
    std::int64_t prev = 0;
    for (int col = 0; col < w; ++col) {
      const std::size_t i = static_cast<std::size_t>(row) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(col);
      std::uint64_t z = 0;
      for (int b = 0; b < width_bytes; ++b) {
        z |= static_cast<std::uint64_t>(planes[static_cast<std::size_t>(b) * n + i]) << (8 * b);
      }
      prev += unzigzag(z);
      values[i] = prev;
    }
  }
  return values;
}

inline std::vector<std::uint8_t> delta_bytes(const std::vector<std::uint8_t>& values, int w, int h) {
  std::vector<std::uint8_t> out(values.size());
  for (int row = 0; row < h; ++row) {
    std::uint8_t prev = 0;
    for (int col = 0; col < w; ++col) {
      const std::size_t i = static_cast<std::size_t>(row) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(col);
      out[i] = static_cast<std::uint8_t>(values[i] - prev);
      prev = values[i];
    }
  }
  return out;
}

inline std::vector<std::uint8_t> undelta_bytes(std::span<const std::uint8_t> res, int w, int h) {
  std::vector<std::uint8_t> out(res.size());
  for (int row = 0; row < h; ++row) {
    std::uint8_t prev = 0;
    for (int col = 0; col < w; ++col) {
      const std::size_t i = static_cast<std::size_t>(row) * static_cast<std::size_t>(w) +
                            static_cast<std::size_t>(col);
      prev = static_cast<std::uint8_t>(prev + res[i]);
      out[i] = prev;
    }
  }
  return out;
}

struct SampleWidths {
  int range = 4;
  int azimuth = 4;
};

inline SampleWidths sample_widths(const RangeCodecConfig& cfg) {
  if (cfg.mode == RangeMode::lossless) return {4, 4};
  // Zigzagged residuals of (bits + 1)-bit codes need bits + 2 bits.
  return {(cfg.range_bits + 2 + 7) / 8, cfg.azimuth_bits == 0 ? 0 : (cfg.azimuth_bits + 2 + 7) / 8};
}

inline double range_step(const SensorModel& s, int bits) { return s.range_max_m / std::ldexp(1.0, bits); }

inline double azimuth_step(const SensorModel& s, int bits) {
  return s.column_step_rad() / std::ldexp(1.0, bits);
}

inline std::uint8_t intensity_code(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline void validate_images(const RangeImageSet& img) {
  img.sensor.validate();
  const std::size_t n = img.sensor.pixel_count();
  if (img.width != img.sensor.n_cols || img.height != img.sensor.n_beams ||
      img.range_m.size() != n || img.azimuth_corr_rad.size() != n || img.intensity.size() != n) {
    throw Error(ErrorCode::InvalidConfig, "image dimensions disagree with the sensor");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.range_m[i];
    if (!(r >= 0.0 && r <= img.sensor.range_max_m)) {
      throw Error(ErrorCode::PointOutOfRange, "pixel range " + std::to_string(r));
    }
    if (!std::isfinite(img.azimuth_corr_rad[i]) || !(img.intensity[i] >= 0.0 && img.intensity[i] <= 1.0)) {
      throw Error(ErrorCode::InvalidConfig, "non-finite azimuth or intensity outside [0, 1]");
    }
  }
}

}  // namespace detail

inline CompressedFrame encode(const RangeImageSet& img, const RangeCodecConfig& cfg,
                              std::uint32_t n_points_original = 0, std::uint64_t frame_id = 0,
                              std::uint64_t timestamp_ns = 0) {
  cfg.validate();
  detail::validate_images(img);
  const SensorModel& s = img.sensor;
  const std::size_t n = s.pixel_count();
  const auto widths = detail::sample_widths(cfg);
  const bool lossless = cfg.mode == RangeMode::lossless;
  if (lossless && s.range_max_m * kRangeTicksPerMeter >= 2147483647.0) {
    throw Error(ErrorCode::InvalidConfig, "lossless mode supports range_max below 2147 m");
  }

  std::vector<std::int64_t> range_codes(n, 0), azimuth_codes(n, 0);
  std::vector<std::uint8_t> intensity_codes(n, 0);
  const double rstep = detail::range_step(s, cfg.range_bits);
  const double astep = detail::azimuth_step(s, cfg.azimuth_bits);
  const std::int64_t rmax_code = (std::int64_t{1} << cfg.range_bits) - 1;
  const std::int64_t amax_code = (std::int64_t{1} << cfg.azimuth_bits) - 1;
  const double half_col = 0.5 * s.column_step_rad();
  for (std::size_t i = 0; i < n; ++i) {
    if (!img.valid(i)) continue;
    const double r = img.range_m[i];
    const double corr = img.azimuth_corr_rad[i];
    if (lossless) {
      range_codes[i] = std::max<std::int64_t>(1, std::llround(r * kRangeTicksPerMeter));
      azimuth_codes[i] = std::llround(corr * kAzimuthTicksPerRadian);
      if (azimuth_codes[i] > INT32_MAX || azimuth_codes[i] < INT32_MIN) {
        throw Error(ErrorCode::InvalidConfig, "azimuth correction exceeds i32 ticks");
      }
    } else {
      range_codes[i] = 1 + std::min(static_cast<std::int64_t>(std::floor(r / rstep)), rmax_code);
      if (cfg.azimuth_bits > 0) {
        const double c = std::clamp(corr, -half_col, half_col);
        azimuth_codes[i] =
            std::clamp(static_cast<std::int64_t>(std::floor((c + half_col) / astep)),
                       std::int64_t{0}, amax_code);
      }
    }
    intensity_codes[i] = detail::intensity_code(img.intensity[i]);
  }

  pc3d::detail::Bytes payload;
  pc3d::detail::ByteWriter w(payload);
  w.u32(static_cast<std::uint32_t>(img.width));
  w.u32(static_cast<std::uint32_t>(img.height));
  w.u8(static_cast<std::uint8_t>(cfg.mode));
  w.u8(lossless ? 0 : static_cast<std::uint8_t>(cfg.range_bits));
  w.u8(lossless ? 0 : static_cast<std::uint8_t>(cfg.azimuth_bits));
  w.u8(0);
  w.u64(s.hash());

  auto put_stream = [&](const std::vector<std::uint8_t>& raw) {
    if (raw.empty()) {
      w.u32(0);
      return;
    }
    const auto z = pc3d::detail::deflate_raw(raw);
    w.u32(static_cast<std::uint32_t>(z.size()));
    w.bytes(z);
  };
  put_stream(detail::delta_planes(range_codes, img.width, img.height, widths.range));
  put_stream(widths.azimuth == 0
                 ? std::vector<std::uint8_t>{}
                 : detail::delta_planes(azimuth_codes, img.width, img.height, widths.azimuth));
  put_stream(detail::delta_bytes(intensity_codes, img.width, img.height));

  const auto n_orig = n_points_original ? n_points_original
                                        : static_cast<std::uint32_t>(img.valid_count());
  return CompressedFrame(CodecId::range, frame_id, timestamp_ns, n_orig, std::move(payload));
}

struct PayloadInfo {
  int width = 0;
  int height = 0;
  RangeCodecConfig config;
  std::uint64_t sensor_hash = 0;
  PlaneSizes planes;
};

inline PayloadInfo inspect(const CompressedFrame& frame) {
  if (frame.codec() != CodecId::range) {
    throw Error(ErrorCode::WrongCodec, "frame holds " + codec_name(frame.codec()) + " data");
  }
  pc3d::detail::ByteReader r(frame.payload(), ErrorCode::CorruptPayload);
  PayloadInfo info;
  info.width = static_cast<int>(r.u32());
  info.height = static_cast<int>(r.u32());
  const std::uint8_t mode = r.u8();
  info.config.range_bits = r.u8();
  info.config.azimuth_bits = r.u8();
  r.u8();
  info.sensor_hash = r.u64();
  if (mode > 1) throw Error(ErrorCode::CorruptPayload, "bad mode");
  info.config.mode = static_cast<RangeMode>(mode);
  if (info.config.mode == RangeMode::lossless) {
    info.config.range_bits = 16;
    info.config.azimuth_bits = 0;
  }
  try {
    info.config.validate();
  } catch (const Error&) {
    throw Error(ErrorCode::CorruptPayload, "bit depths out of range");
  }
  std::size_t* sizes[3] = {&info.planes.range_bytes, &info.planes.azimuth_bytes,
                           &info.planes.intensity_bytes};
  for (auto* sz : sizes) {
    *sz = r.u32();
    r.bytes(*sz);
  }
  if (!r.at_end()) throw Error(ErrorCode::CorruptPayload, "trailing bytes after planes");
  return info;
}

/// Inverse of encode. Lossless mode restores the stored-precision images
/// exactly; quantized mode is within half a quantization step per pixel.
inline RangeImageSet decode(const CompressedFrame& frame, const SensorModel& sensor) {
  const PayloadInfo info = inspect(frame);
  sensor.validate();
  if (info.sensor_hash != sensor.hash()) {
    throw Error(ErrorCode::SensorMismatch, "payload was encoded for a different calibration");
  }
  if (info.width != sensor.n_cols || info.height != sensor.n_beams) {
    throw Error(ErrorCode::CorruptPayload, "image size disagrees with sensor");
  }
  const RangeCodecConfig& cfg = info.config;
  const bool lossless = cfg.mode == RangeMode::lossless;
  const auto widths = detail::sample_widths(cfg);
  const std::size_t n = sensor.pixel_count();

  pc3d::detail::ByteReader r(frame.payload(), ErrorCode::CorruptPayload);
  r.bytes(detail::kHeaderSize);
  auto next_plane = [&](std::size_t raw_size) {
    const std::uint32_t len = r.u32();
    const auto z = r.bytes(len);
    if (raw_size == 0) {
      if (len != 0) throw Error(ErrorCode::CorruptPayload, "unexpected plane data");
      return std::vector<std::uint8_t>{};
    }
    return pc3d::detail::inflate_raw(z, raw_size);
  };
  const auto range_raw = next_plane(n * static_cast<std::size_t>(widths.range));
  const auto az_raw = next_plane(n * static_cast<std::size_t>(widths.azimuth));
  const auto int_raw = next_plane(n);

  const auto range_codes = detail::undelta_planes(range_raw, info.width, info.height, widths.range);
  const auto az_codes = widths.azimuth
                            ? detail::undelta_planes(az_raw, info.width, info.height, widths.azimuth)
                            : std::vector<std::int64_t>(n, 0);
  const auto int_codes = detail::undelta_bytes(int_raw, info.width, info.height);

  RangeImageSet img(sensor);
  const double rstep = detail::range_step(sensor, cfg.range_bits);
  const double astep = detail::azimuth_step(sensor, cfg.azimuth_bits);
  const double half_col = 0.5 * sensor.column_step_rad();
  const std::int64_t max_code = lossless ? static_cast<std::int64_t>(UINT32_MAX)
                                         : (std::int64_t{1} << cfg.range_bits);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t rc = range_codes[i];
    if (rc < 0 || rc > max_code) throw Error(ErrorCode::CorruptPayload, "range code out of bounds");
    if (rc == 0) continue;
    if (lossless) {
      img.range_m[i] = static_cast<double>(rc) / kRangeTicksPerMeter;
      img.azimuth_corr_rad[i] = static_cast<double>(az_codes[i]) / kAzimuthTicksPerRadian;
    } else {
      img.range_m[i] = std::min((static_cast<double>(rc - 1) + 0.5) * rstep, sensor.range_max_m);
      if (cfg.azimuth_bits > 0) {
        img.azimuth_corr_rad[i] = -half_col + (static_cast<double>(az_codes[i]) + 0.5) * astep;
      }
    }
    img.intensity[i] = int_codes[i] / 255.0;
  }
  return img;
}

/// Bytes of each compressed plane in a range frame.
inline PlaneSizes plane_sizes(const CompressedFrame& frame) { return inspect(frame).planes; }

/// Projects a cloud and encodes the images; n_points_original is the cloud
/// size, so occluded points count against the rate.
inline CompressedFrame encode_cloud(const PointCloud& cloud, const SensorModel& sensor,
                                    const RangeCodecConfig& cfg) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "cannot encode an empty cloud");
  const Projection p = project(cloud, sensor);
  return encode(p.images, cfg, static_cast<std::uint32_t>(cloud.size()), cloud.frame_id(),
                cloud.timestamp_ns());
}

inline PointCloud decode_cloud(const CompressedFrame& frame, const SensorModel& sensor) {
  return unproject(decode(frame, sensor), frame.frame_id(), frame.timestamp_ns());
}

}  // namespace pc3d::range
