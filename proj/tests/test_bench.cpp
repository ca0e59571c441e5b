// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <sstream>

#include "pc3d/bench.hpp"
#include "pc3d/scenegen.hpp"

using namespace pc3d;
using namespace pc3d::bench;
using metrics::Psnr;
using metrics::PsnrKind;

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

RDCurve curve_of(std::vector<std::pair<double, double>> pts) {
  RDCurve c;
  for (const auto& [b, db] : pts) {
    CurvePoint p;
    p.setting = "s" + std::to_string(c.points.size());
    p.bpp = b;
    p.psnr_d1 = Psnr::finite(db);
    p.psnr_d2 = Psnr::finite(db + 10.0);
    c.points.push_back(p);
  }
  return c;
}

SensorModel small_sensor() { return default_sensor(16, 512); }

const std::vector<PointCloud>& small_frames() {
  static const std::vector<PointCloud> frames = [] {
    std::vector<PointCloud> out;
    for (std::uint64_t i = 0; i < 5; ++i) {
      out.push_back(scene::simulate_frame(scene::SequenceConfig{}, small_sensor(), i).cloud);
    }
    return out;
  }();
  return frames;
}

void expect_same_metrics(const RDCurve& a, const RDCurve& b) {
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].setting, b.points[i].setting);
    EXPECT_EQ(a.points[i].bpp, b.points[i].bpp);
    EXPECT_EQ(a.points[i].psnr_d1, b.points[i].psnr_d1);
    EXPECT_EQ(a.points[i].psnr_d2, b.points[i].psnr_d2);
    EXPECT_EQ(a.points[i].chamfer_m, b.points[i].chamfer_m);
  }
}

}  // namespace

TEST(Auc, SingleTrapezoid) {
  EXPECT_DOUBLE_EQ(auc(curve_of({{1, 60}, {2, 70}}), PsnrKind::d1), 65.0);
  EXPECT_DOUBLE_EQ(auc(curve_of({{1, 60}, {2, 70}}), PsnrKind::d2), 75.0);
}

TEST(Auc, ConstantCurve) {
  EXPECT_DOUBLE_EQ(auc(curve_of({{0.5, 42}, {1.5, 42}, {7, 42}}), PsnrKind::d1), 42.0);
}

TEST(Auc, ThreePointsHandComputed) {
  // Trapezoids: [1,3] mean 55 -> 110; [3,4] mean 72.5 -> 72.5; span 3.
  EXPECT_NEAR(auc(curve_of({{1, 50}, {3, 60}, {4, 85}}), PsnrKind::d1), (110.0 + 72.5) / 3.0, 1e-12);
}

TEST(Auc, CollinearMidpointInvariant) {
  const double a = auc(curve_of({{1, 50}, {5, 90}}), PsnrKind::d1);
  EXPECT_NEAR(auc(curve_of({{1, 50}, {2, 60}, {5, 90}}), PsnrKind::d1), a, 1e-12);
}

TEST(Auc, Errors) {
  EXPECT_EQ(code_of([] { auc(curve_of({{1, 50}}), PsnrKind::d1); }), ErrorCode::TooFewPoints);
  RDCurve c = curve_of({{1, 50}, {2, 60}});
  c.points[1].psnr_d1 = Psnr::lossless_value();
  EXPECT_EQ(code_of([&] { auc(c, PsnrKind::d1); }), ErrorCode::LosslessInCurve);
  EXPECT_NO_THROW(auc(c, PsnrKind::d2));
  EXPECT_EQ(code_of([] { auc(curve_of({{2, 50}, {1, 60}}), PsnrKind::d1); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { auc(curve_of({{2, 50}, {2, 60}}), PsnrKind::d1); }), ErrorCode::InvalidConfig);
}

TEST(Settings, Grammar) {
  const CodecSetting o = parse_setting(CodecId::octree, "12:parent");
  EXPECT_EQ(o.octree.quantization_bits, 12);
  EXPECT_EQ(o.octree.context_mode, entropy::ContextMode::parent_context);
  const CodecSetting r = parse_setting(CodecId::range, "14:6");
  EXPECT_EQ(r.range.mode, range::RangeMode::quantized);
  EXPECT_EQ(r.range.range_bits, 14);
  EXPECT_EQ(r.range.azimuth_bits, 6);
  EXPECT_EQ(parse_setting(CodecId::range, "lossless").range.mode, range::RangeMode::lossless);
  const CodecSetting v = parse_setting(CodecId::voxel, "0.25:density");
  EXPECT_EQ(v.voxel_size, 0.25);
  EXPECT_EQ(v.assignment, voxel::Assignment::density);
  EXPECT_EQ(code_of([] { parse_setting(CodecId::octree, "12x"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { parse_setting(CodecId::octree, "40"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { parse_setting(CodecId::range, "20"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { parse_setting(CodecId::voxel, "0"); }), ErrorCode::NonPositiveVoxelSize);
  EXPECT_EQ(code_of([] { parse_setting(CodecId::voxel, "1:huh"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { parse_codec("jpeg"); }), ErrorCode::InvalidConfig);
}

TEST(Helpers, MedianAndMeans) {
  EXPECT_EQ(bench::detail::median({3, 1, 2}), 2.0);
  EXPECT_EQ(bench::detail::median({4, 1, 2, 3}), 2.5);
  EXPECT_EQ(bench::detail::mean_psnr({Psnr::lossless_value(), Psnr::lossless_value()}), Psnr::lossless_value());
  EXPECT_EQ(bench::detail::mean_psnr({Psnr::finite(10), Psnr::finite(20)}), Psnr::finite(15));
  EXPECT_EQ(bench::detail::mean_psnr({Psnr::lossless_value(), Psnr::finite(20)}), Psnr::finite(20));
}

TEST(Sweep, TooFewSettingsAndEmpty) {
  const std::vector<std::string> one{"8"};
  EXPECT_EQ(code_of([&] { run_sweep(small_frames(), CodecId::octree, one); }), ErrorCode::TooFewSettings);
  const std::vector<std::string> two{"8", "10"};
  EXPECT_EQ(code_of([&] { run_sweep({}, CodecId::octree, two); }), ErrorCode::EmptyList);
  const std::vector<std::string> bad{"8", "nope"};
  try {
    run_sweep(small_frames(), CodecId::octree, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(Sweep, OctreeBitsIncreaseRate) {
  SweepOptions opt;
  opt.sensor = small_sensor();
  opt.repetitions = 1;
  const std::vector<std::string> s{"16", "8", "12"};
  const RDCurve c = run_sweep(small_frames(), CodecId::octree, s, opt);
  ASSERT_EQ(c.points.size(), 3u);
  EXPECT_EQ(c.points[0].setting, "8");
  EXPECT_EQ(c.points[1].setting, "12");
  EXPECT_EQ(c.points[2].setting, "16");
  EXPECT_LT(c.points[0].bpp, c.points[1].bpp);
  EXPECT_LT(c.points[1].bpp, c.points[2].bpp);
  EXPECT_LT(c.points[0].psnr_d1, c.points[2].psnr_d1);
  for (const auto& p : c.points) {
    EXPECT_GE(p.encode_ms, 0.0);
    EXPECT_GE(p.decode_ms, 0.0);
  }
  // Deterministic apart from timings.
  expect_same_metrics(c, run_sweep(small_frames(), CodecId::octree, s, opt));
}

TEST(Sweep, IndependentOfFrameOrder) {
  SweepOptions opt;
  opt.sensor = small_sensor();
  opt.repetitions = 1;
  const std::vector<std::string> s{"12", "lossless"};
  std::vector<PointCloud> reversed(small_frames().rbegin(), small_frames().rend());
  expect_same_metrics(run_sweep(small_frames(), CodecId::range, s, opt),
                      run_sweep(reversed, CodecId::range, s, opt));
  const std::vector<std::string> v{"0.5", "1:averaged"};
  expect_same_metrics(run_sweep(small_frames(), CodecId::voxel, v, opt),
                      run_sweep(reversed, CodecId::voxel, v, opt));
}

TEST(Export, CsvRoundTrip) {
  RDCurve c = curve_of({{1.25, 60.5}, {2.5, 70.125}});
  c.codec = CodecId::range;
  c.points[0].chamfer_m = 0.012345678;
  c.points[0].encode_ms = 3.25;
  c.points[1].psnr_d2 = Psnr::lossless_value();
  const std::string csv = export_csv(c, {{"codec", "range"}, {"frames", "2"}});
  EXPECT_EQ(csv.rfind("# codec=range\n# frames=2\n", 0), 0u);
  const RDCurve back = parse_csv(csv);
  EXPECT_EQ(back.codec, CodecId::range);
  ASSERT_EQ(back.points.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.points[i].setting, c.points[i].setting);
    EXPECT_EQ(back.points[i].bpp, c.points[i].bpp);
    EXPECT_EQ(back.points[i].psnr_d1, c.points[i].psnr_d1);
    EXPECT_EQ(back.points[i].psnr_d2, c.points[i].psnr_d2);
    EXPECT_EQ(back.points[i].chamfer_m, c.points[i].chamfer_m);
    EXPECT_EQ(back.points[i].encode_ms, c.points[i].encode_ms);
  }
  EXPECT_EQ(export_csv(back, {{"codec", "range"}, {"frames", "2"}}), csv);
  EXPECT_EQ(code_of([] { export_csv(RDCurve{}); }), ErrorCode::EmptyCurve);
  EXPECT_EQ(code_of([] { parse_csv("a,b\n"); }), ErrorCode::MalformedHeader);
}

TEST(Export, SvgIsWellFormed) {
  RDCurve c = curve_of({{1, 50}, {2, 65}, {4, 80}});
  c.points[0].setting = "a<b&\"c\"";
  c.points[2].psnr_d2 = Psnr::lossless_value();
  const std::string svg = export_svg(c);
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  ASSERT_NO_THROW(boost::property_tree::read_xml(in, tree));
  const auto& root = tree.get_child("svg");
  EXPECT_EQ(root.get<int>("<xmlattr>.width"), 800);
  EXPECT_EQ(root.get<int>("<xmlattr>.height"), 600);
  EXPECT_NE(svg.find("polyline"), std::string::npos);
}
