// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// pc3d: generate, encode, decode, eval, bench, serve, recv.
//
// Exit codes: 0 success, 1 usage error, 2 data error.
//
// Every subcommand accepts --config FILE: one "name=value" per line, names
// are long option names without the leading dashes, '#' starts a comment.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <csignal>
#include <deque>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pc3d/bench.hpp"
#include "pc3d/codec_octree.hpp"
#include "pc3d/codec_range.hpp"
#include "pc3d/codec_voxel.hpp"
#include "pc3d/fileio.hpp"
#include "pc3d/metrics.hpp"
#include "pc3d/pcd.hpp"
#include "pc3d/scenegen.hpp"
#include "pc3d/stream.hpp"

namespace fs = std::filesystem;
using namespace pc3d;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct CodecFlags {
  std::string codec = "octree";
  int bits = 16;
  std::string context = "order0";
  std::string range_mode = "quantized";
  int range_bits = 16;
  int azimuth_bits = 0;
  double voxel_size = 0.5;
  std::string assignment = "binary";
  CLI::Option* bits_opt = nullptr;
  CLI::Option* context_opt = nullptr;
  CLI::Option* range_mode_opt = nullptr;
  CLI::Option* range_bits_opt = nullptr;
  CLI::Option* azimuth_bits_opt = nullptr;
  CLI::Option* voxel_size_opt = nullptr;
  CLI::Option* assignment_opt = nullptr;
};

void add_codec_flags(CLI::App* sub, CodecFlags& f) {
  sub->add_option("--codec", f.codec, "octree | range | voxel")
      ->check(CLI::IsMember({"octree", "range", "voxel"}))
      ->capture_default_str();
  f.bits_opt = sub->add_option("--bits", f.bits, "octree quantization bits (1-30)")->capture_default_str();
  f.context_opt = sub->add_option("--context", f.context, "octree context model: order0 | parent")
                      ->check(CLI::IsMember({"order0", "parent"}))
                      ->capture_default_str();
  f.range_mode_opt = sub->add_option("--range-mode", f.range_mode, "range codec mode: lossless | quantized")
                         ->check(CLI::IsMember({"lossless", "quantized"}))
                         ->capture_default_str();
  f.range_bits_opt = sub->add_option("--range-bits", f.range_bits, "quantized range bits")->capture_default_str();
  f.azimuth_bits_opt =
      sub->add_option("--azimuth-bits", f.azimuth_bits, "quantized azimuth bits (0 drops corrections)")
          ->capture_default_str();
  f.voxel_size_opt = sub->add_option("--voxel-size", f.voxel_size, "voxel edge in metres")->capture_default_str();
  f.assignment_opt = sub->add_option("--assignment", f.assignment, "binary | averaged | density")
                         ->check(CLI::IsMember({"binary", "averaged", "density"}))
                         ->capture_default_str();
}

bench::CodecSetting codec_setting(const CodecFlags& f) {
  const CodecId id = bench::parse_codec(f.codec);
  auto reject = [&f](std::initializer_list<CLI::Option*> opts) {
    for (auto* o : opts) {
      if (o->count() > 0) throw UsageError(o->get_name() + " does not apply to --codec " + f.codec);
    }
  };
  std::string label;
  switch (id) {
    case CodecId::octree:
      reject({f.range_mode_opt, f.range_bits_opt, f.azimuth_bits_opt, f.voxel_size_opt, f.assignment_opt});
      label = std::to_string(f.bits) + (f.context == "parent" ? ":parent" : "");
      break;
    case CodecId::range:
      reject({f.bits_opt, f.context_opt, f.voxel_size_opt, f.assignment_opt});
      label = f.range_mode == "lossless"
                  ? "lossless"
                  : std::to_string(f.range_bits) + (f.azimuth_bits ? ":" + std::to_string(f.azimuth_bits) : "");
      if (f.range_mode == "lossless" && (f.range_bits_opt->count() || f.azimuth_bits_opt->count())) {
        throw UsageError("--range-bits/--azimuth-bits need --range-mode quantized");
      }
      break;
    case CodecId::voxel: {
      reject({f.bits_opt, f.context_opt, f.range_mode_opt, f.range_bits_opt, f.azimuth_bits_opt});
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", f.voxel_size);
      label = std::string(buf) + ":" + f.assignment;
      break;
    }
  }
  try {
    return bench::parse_setting(id, label);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

SensorModel load_sensor(const std::string& path) {
  if (path.empty()) return default_sensor();
  const auto bytes = read_file(path);
  return sensor_from_text(std::string(bytes.begin(), bytes.end()));
}

PointCloud load_pcd(const std::string& path) { return read_pcd(read_file(path)); }

std::vector<fs::path> pcd_files(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pcd") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyList, "no .pcd files in " + dir);
  return files;
}

std::string frame_name(std::uint64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06llu.pcd", static_cast<unsigned long long>(i));
  return buf;
}

std::deque<std::pair<CLI::App*, std::string>> g_configs;

void add_config(CLI::App* sub) {
  g_configs.emplace_back(sub, std::string());
  sub->add_option("--config", g_configs.back().second, "name=value file; its values override flags");
}

/// Applies a --config file to the selected subcommand. Values replace
/// whatever the command line gave.
void apply_config(CLI::App* sub, const std::string& path) {
  const auto bytes = read_file(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected name=value");
    auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t\r");
      const auto b = v.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(path + ":" + std::to_string(lineno) + ": unknown option " + key);
    opt->clear();
    opt->add_result(value);
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pc3d: roadside LiDAR point cloud compression toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // generate
  auto* gen = app.add_subcommand("generate", "simulate LiDAR frames and write PCD files");
  std::uint64_t gen_seed = 1;
  int gen_frames = 1;
  std::string gen_out;
  scene::SequenceConfig seq;
  int beams = 64, cols = 2048;
  bool gen_ascii = false;
  gen->add_option("--seed", gen_seed, "scene seed")->capture_default_str();
  gen->add_option("--frames", gen_frames, "number of frames")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--vehicles", seq.n_vehicles)->capture_default_str();
  gen->add_option("--pedestrians", seq.n_pedestrians)->capture_default_str();
  gen->add_option("--extent", seq.extent_m, "scene half-width in metres")->capture_default_str();
  gen->add_option("--noise", seq.noise_sigma_m, "range noise sigma in metres")->capture_default_str();
  gen->add_option("--fps", seq.fps)->capture_default_str();
  gen->add_option("--beams", beams)->capture_default_str();
  gen->add_option("--cols", cols)->capture_default_str();
  gen->add_flag("--ascii", gen_ascii, "write ASCII PCD");
  add_config(gen);

  // encode
  auto* enc = app.add_subcommand("encode", "compress a PCD file into a PC3D frame");
  CodecFlags enc_flags;
  std::string enc_in, enc_out, enc_sensor;
  std::uint64_t enc_frame_id = 0;
  add_codec_flags(enc, enc_flags);
  enc->add_option("--in", enc_in, "input PCD")->required();
  enc->add_option("--out", enc_out, "output frame")->required();
  enc->add_option("--sensor", enc_sensor, "sensor calibration file (range codec)");
  enc->add_option("--frame-id", enc_frame_id)->capture_default_str();
  add_config(enc);

  // decode
  auto* dec = app.add_subcommand("decode", "decompress a PC3D frame into a PCD file");
  std::string dec_in, dec_out, dec_sensor;
  bool dec_ascii = false;
  dec->add_option("--in", dec_in, "input frame")->required();
  dec->add_option("--out", dec_out, "output PCD")->required();
  dec->add_option("--sensor", dec_sensor, "sensor calibration file (range codec)");
  dec->add_flag("--ascii", dec_ascii, "write ASCII PCD");
  add_config(dec);

  // eval
  auto* ev = app.add_subcommand("eval", "compare a reconstruction against the original");
  std::string ev_orig, ev_rec, ev_frame;
  std::size_t ev_k = metrics::kDefaultNormalNeighbors;
  bool ev_csv = false;
  ev->add_option("--original", ev_orig)->required();
  ev->add_option("--reconstructed", ev_rec)->required();
  ev->add_option("--frame", ev_frame, "compressed frame, adds bpp and compression ratio");
  ev->add_option("--k", ev_k, "neighbours for d2 normals")->capture_default_str();
  ev->add_flag("--csv", ev_csv, "print a CSV row instead of key: value lines");
  add_config(ev);

  // bench
  auto* be = app.add_subcommand("bench", "rate-distortion sweep to CSV and SVG");
  std::string be_codec = "octree", be_sweep, be_out = "bench", be_dir, be_sensor;
  std::uint64_t be_seed = 1;
  int be_frames = 5, be_reps = 5;
  be->add_option("--codec", be_codec)->check(CLI::IsMember({"octree", "range", "voxel"}))->capture_default_str();
  be->add_option("--sweep", be_sweep, "comma-separated setting labels, e.g. 8,12,16")->required();
  be->add_option("--out", be_out, "output prefix; writes PREFIX.csv and PREFIX.svg")->capture_default_str();
  be->add_option("--frames-dir", be_dir, "directory of PCD frames (default: simulate)");
  be->add_option("--seed", be_seed)->capture_default_str();
  be->add_option("--frames", be_frames)->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--repetitions", be_reps)->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--sensor", be_sensor);
  add_config(be);

  // serve
  auto* sv = app.add_subcommand("serve", "stream simulated frames to one subscriber");
  CodecFlags sv_flags;
  std::string sv_host = "127.0.0.1", sv_sensor, sv_dir;
  std::uint16_t sv_port = 7700;
  double sv_fps = 10.0;
  int sv_frames = 20;
  std::uint64_t sv_seed = 1;
  add_codec_flags(sv, sv_flags);
  sv->add_option("--host", sv_host)->capture_default_str();
  sv->add_option("--port", sv_port)->capture_default_str();
  sv->add_option("--fps", sv_fps)->check(CLI::PositiveNumber)->capture_default_str();
  sv->add_option("--frames", sv_frames, "frames to send (0 = until interrupted)")->capture_default_str();
  sv->add_option("--seed", sv_seed)->capture_default_str();
  sv->add_option("--frames-dir", sv_dir, "stream PCD files instead of simulating");
  sv->add_option("--sensor", sv_sensor);
  add_config(sv);

  // recv
  auto* rv = app.add_subcommand("recv", "subscribe, decode and report stream statistics");
  std::string rv_host = "127.0.0.1", rv_sensor;
  std::uint16_t rv_port = 7700;
  stream::Budget budget;
  rv->add_option("--host", rv_host)->capture_default_str();
  rv->add_option("--port", rv_port)->capture_default_str();
  rv->add_option("--max-kb", budget.max_kb)->capture_default_str();
  rv->add_option("--min-fps", budget.min_fps)->capture_default_str();
  rv->add_option("--sensor", rv_sensor);
  add_config(rv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    for (const auto& [sub, path] : g_configs) {
      if (*sub && !path.empty()) apply_config(sub, path);
    }
    if (*gen) {
      SensorModel sensor = default_sensor(beams, cols);
      sensor.validate();
      seq.seed = gen_seed;
      fs::create_directories(gen_out);
      write_file_atomic(fs::path(gen_out) / "sensor.txt", to_text(sensor));
      write_file_atomic(fs::path(gen_out) / "scene.txt",
                        scene::to_text(scene::generate_scene(seq.seed, seq.n_vehicles, seq.n_pedestrians, seq.extent_m)));
      for (int i = 0; i < gen_frames; ++i) {
        const auto ts = static_cast<std::uint64_t>(static_cast<double>(i) / seq.fps * 1e9);
        const auto scan = scene::simulate_frame(seq, sensor, static_cast<std::uint64_t>(i), ts);
        write_file_atomic(fs::path(gen_out) / frame_name(static_cast<std::uint64_t>(i)),
                          write_pcd(scan.cloud, gen_ascii ? PcdMode::ascii : PcdMode::binary));
        std::cout << frame_name(static_cast<std::uint64_t>(i)) << " " << scan.cloud.size() << " points\n";
      }
    } else if (*enc) {
      const auto setting = codec_setting(enc_flags);
      const SensorModel sensor = load_sensor(enc_sensor);
      const PointCloud cloud = load_pcd(enc_in);
      const CompressedFrame f0 = setting.encode(cloud, sensor);
      const CompressedFrame f(f0.codec(), enc_frame_id, f0.timestamp_ns(), f0.n_points_original(), f0.payload());
      write_file_atomic(enc_out, pack_frame(f));
      std::printf("codec: %s\nsetting: %s\npoints: %u\npayload_bytes: %zu\nbpp: %.6f\n",
                  codec_name(f.codec()).c_str(), setting.label.c_str(), f.n_points_original(),
                  f.payload().size(), metrics::bpp(f));
    } else if (*dec) {
      const CompressedFrame f = unpack_frame(read_file(dec_in));
      const PointCloud cloud = stream::decode_any(f, load_sensor(dec_sensor));
      write_file_atomic(dec_out, write_pcd(cloud, dec_ascii ? PcdMode::ascii : PcdMode::binary));
      std::printf("points: %zu\n", cloud.size());
    } else if (*ev) {
      const PointCloud a = load_pcd(ev_orig);
      const PointCloud b = load_pcd(ev_rec);
      metrics::MetricReport r = metrics::evaluate(a, b, ev_k);
      if (!ev_frame.empty()) {
        const CompressedFrame f = unpack_frame(read_file(ev_frame));
        r.bpp = metrics::bpp(f);
        r.compression_ratio = metrics::compression_ratio(raw_binary_size(a), f);
      }
      if (ev_csv) std::cout << metrics::MetricReport::csv_header() << "\n" << r.csv_row() << "\n";
      else std::cout << r.to_text();
    } else if (*be) {
      const CodecId codec = bench::parse_codec(be_codec);
      std::vector<std::string> settings;
      for (const auto& s : bench::detail::split(be_sweep, ',')) {
        if (!s.empty()) settings.push_back(s);
      }
      if (settings.size() < 2) throw UsageError("--sweep needs at least two settings");
      for (const auto& s : settings) {
        try {
          bench::parse_setting(codec, s);
        } catch (const Error& e) {
          throw UsageError(e.what());
        }
      }
      bench::SweepOptions opt;
      opt.sensor = load_sensor(be_sensor);
      opt.repetitions = be_reps;
      std::vector<PointCloud> frames;
      bench::Metadata meta{{"codec", be_codec}};
      if (!be_dir.empty()) {
        for (const auto& p : pcd_files(be_dir)) frames.push_back(load_pcd(p.string()));
        meta.push_back({"frames_dir", be_dir});
      } else {
        scene::SequenceConfig cfg;
        cfg.seed = be_seed;
        for (int i = 0; i < be_frames; ++i) {
          frames.push_back(scene::simulate_frame(cfg, opt.sensor, static_cast<std::uint64_t>(i)).cloud);
        }
        meta.push_back({"seed", std::to_string(be_seed)});
      }
      meta.push_back({"frames", std::to_string(frames.size())});
      meta.push_back({"repetitions", std::to_string(be_reps)});
      const bench::RDCurve curve = bench::run_sweep(frames, codec, settings, opt);
      for (auto [kind, key] : {std::pair{metrics::PsnrKind::d1, "auc_d1_db"}, std::pair{metrics::PsnrKind::d2, "auc_d2_db"}}) {
        try {
          meta.push_back({key, bench::detail::fixed(bench::auc(curve, kind), 6)});
        } catch (const Error& e) {
          meta.push_back({key, std::string("na (") + std::string(to_string(e.code())) + ")"});
        }
      }
      meta.push_back({"auc_normalization", "trapezoid area divided by bpp span"});
      write_file_atomic(be_out + ".csv", bench::export_csv(curve, meta));
      write_file_atomic(be_out + ".svg", bench::export_svg(curve));
      std::cout << bench::export_csv(curve, meta);
    } else if (*sv) {
      const auto setting = codec_setting(sv_flags);
      stream::ServeConfig cfg;
      cfg.codec = setting;
      cfg.sensor = load_sensor(sv_sensor);
      cfg.fps = sv_fps;
      cfg.stop = &g_stop;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::vector<fs::path> files;
      if (!sv_dir.empty()) files = pcd_files(sv_dir);
      scene::SequenceConfig seqcfg;
      seqcfg.seed = sv_seed;
      seqcfg.fps = sv_fps;
      const stream::FrameSource source = [&](std::uint64_t i) -> std::optional<PointCloud> {
        if (sv_frames > 0 && i >= static_cast<std::uint64_t>(sv_frames)) return std::nullopt;
        if (!files.empty()) return load_pcd(files[i % files.size()].string());
        return scene::simulate_frame(seqcfg, cfg.sensor, i).cloud;
      };
      stream::TcpListener listener(sv_host, sv_port);
      std::cout << "listening on " << sv_host << ":" << listener.port() << std::endl;
      auto t = listener.accept();
      const auto tr = stream::serve_on(*t, source, cfg);
      std::printf("frames_sent: %u\ndeadline_misses: %u\nframes_dropped: %u\nencoder_errors: %u\n",
                  tr.frames_sent, tr.deadline_misses, tr.frames_dropped, tr.encoder_errors);
    } else if (*rv) {
      stream::ReceiveOptions opt;
      opt.sensor = load_sensor(rv_sensor);
      const auto stats = stream::receive(rv_host, rv_port, budget, opt);
      std::cout << stream::to_text(stats);
      if (!stats.terminated) {
        std::cerr << "error: stream ended without terminator\n";
        return 2;
      }
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
