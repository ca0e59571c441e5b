// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <thread>

#include "pc3d/scenegen.hpp"
#include "pc3d/stream.hpp"

using namespace pc3d;
using namespace pc3d::stream;

namespace {

SensorModel small_sensor() { return default_sensor(16, 256); }

const std::vector<PointCloud>& frames() {
  static const std::vector<PointCloud> out = [] {
    std::vector<PointCloud> v;
    for (std::uint64_t i = 0; i < 10; ++i) {
      v.push_back(scene::simulate_frame(scene::SequenceConfig{}, small_sensor(), i).cloud);
    }
    return v;
  }();
  return out;
}

FrameSource source_of(std::size_t n) {
  return [n](std::uint64_t i) -> std::optional<PointCloud> {
    if (i >= n) return std::nullopt;
    return frames()[i % frames().size()];
  };
}

ServeConfig config(double fps, const std::string& setting = "12") {
  ServeConfig cfg;
  cfg.codec = bench::parse_setting(CodecId::octree, setting);
  cfg.sensor = small_sensor();
  cfg.fps = fps;
  return cfg;
}

ReceiveOptions recv_options() {
  ReceiveOptions o;
  o.sensor = small_sensor();
  return o;
}

// Forwards to another transport; optionally corrupts one write or sleeps on
// every frame-sized write.
class Tap final : public Transport {
 public:
  explicit Tap(Transport& inner) : inner_(inner) {}
  int corrupt_write = -1;
  std::chrono::milliseconds stall{0};

  void write_all(std::span<const std::uint8_t> data) override {
    const int n = writes_++;
    if (data.size() > 64 && stall.count() > 0) std::this_thread::sleep_for(stall);
    if (n == corrupt_write) {
      std::vector<std::uint8_t> copy(data.begin(), data.end());
      copy[copy.size() / 2] ^= 0x40;
      inner_.write_all(copy);
      return;
    }
    inner_.write_all(data);
  }
  void read_exact(std::span<std::uint8_t> out) override { inner_.read_exact(out); }
  void close() override { inner_.close(); }

 private:
  Transport& inner_;
  int writes_ = 0;
};

std::pair<PublisherTrailer, StreamStats> run_memory(const FrameSource& src, const ServeConfig& cfg,
                                                    const Budget& budget, Tap* tap = nullptr) {
  auto [pub, sub] = memory_pipe();
  Transport* out = pub.get();
  if (tap) out = tap;
  auto fut = std::async(std::launch::async, [&] { return receive_on(*sub, budget, recv_options()); });
  const PublisherTrailer t = serve_on(*out, src, cfg);
  return {t, fut.get()};
}

}  // namespace

TEST(Stream, MemoryTransportDeliversAllFrames) {
  std::size_t decoded = 0;
  auto [pub, sub] = memory_pipe();
  ReceiveOptions opt = recv_options();
  opt.on_frame = [&](const CompressedFrame& f, const PointCloud& c) {
    EXPECT_EQ(f.frame_id(), decoded);
    EXPECT_GT(c.size(), 0u);
    ++decoded;
  };
  auto fut = std::async(std::launch::async, [&] { return receive_on(*sub, {105, 0}, opt); });
  const PublisherTrailer t = serve_on(*pub, source_of(6), config(50));
  const StreamStats s = fut.get();
  EXPECT_TRUE(s.terminated);
  EXPECT_EQ(s.frames_received, 6u);
  EXPECT_EQ(decoded, 6u);
  EXPECT_EQ(t.frames_sent, 6u);
  EXPECT_EQ(s.publisher, t);
  EXPECT_EQ(s.crc_failures, 0u);
  EXPECT_EQ(s.frame_id_gaps, 0u);
  EXPECT_EQ(s.budget_violations, 0u);
  EXPECT_GT(s.mean_frame_bytes, 0u);
  EXPECT_GE(s.max_frame_bytes, s.mean_frame_bytes);
  EXPECT_GE(s.mean_e2e_latency_ms, 0.0);
  EXPECT_NE(to_text(s).find("terminated: true"), std::string::npos);
}

TEST(Stream, TinyBudgetFlagsEveryFrame) {
  const auto [t, s] = run_memory(source_of(5), config(50), {1, 0});
  EXPECT_EQ(s.frames_received, 5u);
  EXPECT_EQ(s.budget_violations, 5u);
  EXPECT_EQ(s.size_violations, 5u);
}

TEST(Stream, CorruptedFrameIsCountedAndSessionContinues) {
  auto [pub, sub] = memory_pipe();
  Tap tap(*pub);
  tap.corrupt_write = 2;  // handshake is write 0
  auto fut = std::async(std::launch::async, [&] { return receive_on(*sub, {105, 0}, recv_options()); });
  serve_on(tap, source_of(5), config(50));
  const StreamStats s = fut.get();
  EXPECT_TRUE(s.terminated);
  EXPECT_EQ(s.frames_received, 5u);
  EXPECT_EQ(s.crc_failures, 1u);
  EXPECT_EQ(s.frame_id_gaps, 0u);
}

TEST(Stream, StalledWriterDropsOldest) {
  auto [pub, sub] = memory_pipe();
  Tap tap(*pub);
  tap.stall = std::chrono::milliseconds(150);
  auto fut = std::async(std::launch::async, [&] { return receive_on(*sub, {105, 0}, recv_options()); });
  const PublisherTrailer t = serve_on(tap, source_of(10), config(50));
  const StreamStats s = fut.get();
  EXPECT_GT(t.frames_dropped, 0u);
  EXPECT_EQ(t.frames_sent + t.frames_dropped + t.encoder_errors, 10u);
  EXPECT_EQ(s.frames_received, t.frames_sent);
  EXPECT_EQ(s.frame_id_gaps, t.frames_dropped);
}

TEST(Stream, BadMagicRejected) {
  auto [pub, sub] = memory_pipe();
  const std::array<std::uint8_t, 5> hello{'N', 'O', 'P', 'E', 1};
  pub->write_all(hello);
  try {
    receive_on(*sub, {}, recv_options());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
  std::array<std::uint8_t, 1> ack{};
  pub->read_exact(ack);
  EXPECT_EQ(ack[0], kAckReject);
}

TEST(Stream, RejectedHandshakeFailsPublisher) {
  auto [pub, sub] = memory_pipe();
  const std::array<std::uint8_t, 1> nack{kAckReject};
  sub->write_all(nack);
  try {
    serve_on(*pub, source_of(1), config(50));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::HandshakeFailure);
  }
}

TEST(Stream, UnterminatedStream) {
  auto [pub, sub] = memory_pipe();
  auto fut = std::async(std::launch::async, [&] { return receive_on(*sub, {}, recv_options()); });
  send_handshake(*pub);
  pub->write_all(pack_frame(octree::encode(frames()[0], {10, entropy::ContextMode::order0})));
  pub->close();
  const StreamStats s = fut.get();
  EXPECT_FALSE(s.terminated);
  EXPECT_EQ(s.frames_received, 1u);
}

TEST(Stream, TcpLoopbackMatchesMemory) {
  const ServeConfig cfg = config(50, "14");
  TcpListener listener("127.0.0.1", 0);
  const std::uint16_t port = listener.port();
  ASSERT_NE(port, 0);
  auto fut = std::async(std::launch::async, [&] { return receive("127.0.0.1", port, {105, 0}, recv_options()); });
  auto conn = listener.accept(std::chrono::milliseconds(5000));
  ASSERT_TRUE(conn);
  const PublisherTrailer t = serve_on(*conn, source_of(6), cfg);
  const StreamStats tcp = fut.get();
  const auto [mt, mem] = run_memory(source_of(6), cfg, {105, 0});
  EXPECT_TRUE(tcp.terminated);
  EXPECT_EQ(tcp.frames_received, mem.frames_received);
  EXPECT_EQ(tcp.mean_frame_bytes, mem.mean_frame_bytes);
  EXPECT_EQ(tcp.max_frame_bytes, mem.max_frame_bytes);
  EXPECT_EQ(tcp.size_violations, mem.size_violations);
  EXPECT_EQ(tcp.crc_failures, mem.crc_failures);
  EXPECT_EQ(tcp.frame_id_gaps, mem.frame_id_gaps);
  EXPECT_EQ(t, mt);
}

TEST(Stream, PacedAtRequestedRate) {
  const auto start = std::chrono::steady_clock::now();
  const auto [t, s] = run_memory(source_of(10), config(10, "10"), {105, 10});
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(s.frames_received, 10u);
  EXPECT_NEAR(elapsed, 1.0, 0.2);
  EXPECT_NEAR(s.achieved_fps, 10.0, 2.0);
}

TEST(Stream, ConnectFailure) {
  std::uint16_t port = 0;
  {
    TcpListener l("127.0.0.1", 0);
    port = l.port();
  }
  try {
    tcp_connect("127.0.0.1", port);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConnectFailure);
  }
}
