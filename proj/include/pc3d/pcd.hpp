// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// PCD v0.7 subset: FIELDS x y z [intensity], SIZE 4, TYPE F, COUNT 1,
// DATA ascii or binary (float32 little-endian).

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pc3d/core.hpp"
#include "pc3d/detail/bytes.hpp"

namespace pc3d {

enum class PcdMode { ascii, binary };

namespace detail {

inline std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline long long parse_int(const std::string& s, ErrorCode code) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(code, "expected an integer, got '" + s + "'");
  }
  return v;
}

inline float parse_float(const std::string& s) {
  // from_chars for float is available in libstdc++ 11.
  float v = 0.0F;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    if (s == "nan" || s == "NaN" || s == "-nan") return std::numeric_limits<float>::quiet_NaN();
    throw Error(ErrorCode::MalformedHeader, "bad float '" + s + "' in data section");
  }
  return v;
}

}  // namespace detail

inline PointCloud read_pcd(std::span<const std::uint8_t> bytes) {
  using detail::split_ws;
  std::vector<std::string> fields;
  std::optional<long long> points;
  std::optional<long long> width;
  std::optional<long long> height;
  std::string data_mode;
  std::size_t pos = 0;
  std::vector<std::string> sizes, types, counts;

  while (data_mode.empty()) {
    if (pos >= bytes.size()) throw Error(ErrorCode::MalformedHeader, "missing DATA line");
    std::size_t end = pos;
    while (end < bytes.size() && bytes[end] != '\n') ++end;
    std::string line(reinterpret_cast<const char*>(bytes.data()) + pos, end - pos);
    pos = end < bytes.size() ? end + 1 : end;
    if (line.empty() || line[0] == '#') continue;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::string& key = tok[0];
    std::vector<std::string> rest(tok.begin() + 1, tok.end());
    if (key == "VERSION") {
      continue;
    } else if (key == "FIELDS") {
      fields = rest;
    } else if (key == "SIZE") {
      sizes = rest;
    } else if (key == "TYPE") {
      types = rest;
    } else if (key == "COUNT") {
      counts = rest;
    } else if (key == "WIDTH" && rest.size() == 1) {
      width = detail::parse_int(rest[0], ErrorCode::MalformedHeader);
    } else if (key == "HEIGHT" && rest.size() == 1) {
      height = detail::parse_int(rest[0], ErrorCode::MalformedHeader);
    } else if (key == "VIEWPOINT") {
      continue;
    } else if (key == "POINTS" && rest.size() == 1) {
      points = detail::parse_int(rest[0], ErrorCode::MalformedHeader);
    } else if (key == "DATA" && rest.size() == 1) {
      data_mode = rest[0];
    } else {
      throw Error(ErrorCode::MalformedHeader, "unexpected header line '" + line + "'");
    }
  }

  if (fields.empty()) throw Error(ErrorCode::MalformedHeader, "missing FIELDS");
  if (!points) {
    if (width && height) {
      points = *width * *height;
    } else {
      throw Error(ErrorCode::MalformedHeader, "missing POINTS");
    }
  }
  if (*points < 0) throw Error(ErrorCode::MalformedHeader, "negative POINTS");
  if (width && height && *width * *height != *points) {
    throw Error(ErrorCode::MalformedHeader, "WIDTH*HEIGHT disagrees with POINTS");
  }

  int ix = -1, iy = -1, iz = -1, ii = -1;
  for (std::size_t f = 0; f < fields.size(); ++f) {
    int* slot = nullptr;
    if (fields[f] == "x") slot = &ix;
    else if (fields[f] == "y") slot = &iy;
    else if (fields[f] == "z") slot = &iz;
    else if (fields[f] == "intensity") slot = &ii;
    else throw Error(ErrorCode::UnsupportedField, "field '" + fields[f] + "'");
    if (*slot >= 0) throw Error(ErrorCode::MalformedHeader, "duplicate field '" + fields[f] + "'");
    *slot = static_cast<int>(f);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw Error(ErrorCode::MalformedHeader, "x, y, z required");
  const std::size_t nf = fields.size();
  auto check_list = [nf](const std::vector<std::string>& list, const char* name,
                         const char* expected) {
    if (list.empty()) return;
    if (list.size() != nf) throw Error(ErrorCode::MalformedHeader, std::string(name) + " arity");
    for (const auto& v : list) {
      if (v != expected) {
        throw Error(ErrorCode::UnsupportedField,
                    std::string(name) + " " + v + " (only " + expected + " supported)");
      }
    }
  };
  check_list(sizes, "SIZE", "4");
  check_list(types, "TYPE", "F");
  check_list(counts, "COUNT", "1");

  const auto n = static_cast<std::size_t>(*points);
  if (n > bytes.size()) {
    throw Error(ErrorCode::CountMismatch, "POINTS " + std::to_string(n) + " exceeds file size");
  }
  std::vector<float> values;
  values.reserve(n * nf);

  if (data_mode == "ascii") {
    std::size_t rows = 0;
    while (pos < bytes.size()) {
      std::size_t end = pos;
      while (end < bytes.size() && bytes[end] != '\n') ++end;
      std::string_view line(reinterpret_cast<const char*>(bytes.data()) + pos, end - pos);
      pos = end < bytes.size() ? end + 1 : end;
      auto tok = split_ws(line);
      if (tok.empty()) continue;
      if (tok.size() != nf) {
        throw Error(ErrorCode::CountMismatch, "row " + std::to_string(rows) + " has " +
                                                  std::to_string(tok.size()) + " values");
      }
      ++rows;
      if (rows > n) break;
      for (const auto& t : tok) values.push_back(detail::parse_float(t));
    }
    if (rows != n) {
      throw Error(ErrorCode::CountMismatch, "POINTS " + std::to_string(n) + " but " +
                                                (rows > n ? "more" : std::to_string(rows)) +
                                                " rows");
    }
  } else if (data_mode == "binary") {
    const std::size_t need = n * nf * sizeof(float);
    if (bytes.size() - pos < need) {
      throw Error(ErrorCode::CountMismatch, "binary section holds " +
                                                std::to_string((bytes.size() - pos) / (nf * 4)) +
                                                " of " + std::to_string(n) + " points");
    }
    values.resize(n * nf);
    std::memcpy(values.data(), bytes.data() + pos, need);
  } else {
    throw Error(ErrorCode::MalformedHeader, "DATA " + data_mode + " not supported");
  }

  std::vector<Point3> pts(n);
  std::optional<std::vector<double>> intensity;
  if (ii >= 0) intensity.emplace(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* row = values.data() + i * nf;
    pts[i] = {row[ix], row[iy], row[iz]};
    if (intensity) (*intensity)[i] = row[ii];
  }
  return PointCloud(std::move(pts), std::move(intensity));
}

inline std::vector<std::uint8_t> write_pcd(const PointCloud& cloud, PcdMode mode) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyCloud, "refusing to write an empty PCD");
  const bool with_i = cloud.has_intensity();
  const std::size_t n = cloud.size();
  std::ostringstream h;
  h << "# .PCD v0.7 - Point Cloud Data file format\n"
    << "VERSION 0.7\n"
    << (with_i ? "FIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n"
               : "FIELDS x y z\nSIZE 4 4 4\nTYPE F F F\nCOUNT 1 1 1\n")
    << "WIDTH " << n << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " << n << "\nDATA "
    << (mode == PcdMode::ascii ? "ascii" : "binary") << "\n";
  const std::string header = h.str();
  std::vector<std::uint8_t> out(header.begin(), header.end());

  auto row = [&](std::size_t i, float* dst) {
    const Point3& p = cloud[i];
    dst[0] = static_cast<float>(p.x);
    dst[1] = static_cast<float>(p.y);
    dst[2] = static_cast<float>(p.z);
    if (with_i) dst[3] = static_cast<float>((*cloud.intensity())[i]);
  };
  const std::size_t nf = with_i ? 4 : 3;
  if (mode == PcdMode::binary) {
    const std::size_t base = out.size();
    out.resize(base + n * nf * sizeof(float));
    float buf[4];
    for (std::size_t i = 0; i < n; ++i) {
      row(i, buf);
      std::memcpy(out.data() + base + i * nf * sizeof(float), buf, nf * sizeof(float));
    }
  } else {
    char line[128];
    float buf[4];
    for (std::size_t i = 0; i < n; ++i) {
      row(i, buf);
      int len = with_i ? std::snprintf(line, sizeof line, "%.9g %.9g %.9g %.9g\n", buf[0], buf[1],
                                       buf[2], buf[3])
                       : std::snprintf(line, sizeof line, "%.9g %.9g %.9g\n", buf[0], buf[1],
                                       buf[2]);
      out.insert(out.end(), line, line + len);
    }
  }
  return out;
}

/// Size of the data section `write_pcd` emits in binary mode.
inline std::size_t raw_binary_size(const PointCloud& cloud) {
  return cloud.size() * (cloud.has_intensity() ? 16 : 12);
}

}  // namespace pc3d
