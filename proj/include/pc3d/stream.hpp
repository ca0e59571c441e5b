// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Compressed frame streaming over a reliable byte stream.
//
// Wire protocol (little-endian):
//   publisher  -> "PC3S" u8 version
//   subscriber -> u8 ack (1 = accepted, 0 = rejected)
//   publisher  -> PC3D frames ...
//   publisher  -> terminator: 32-byte PC3D header with payload_len 0, no CRC,
//                 then u32 frames_sent, u32 deadline_misses,
//                 u32 frames_dropped, u32 encoder_errors

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdio>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include "pc3d/bench.hpp"
#include "pc3d/frame.hpp"

namespace pc3d::stream {

inline constexpr std::array<std::uint8_t, 4> kStreamMagic{'P', 'C', '3', 'S'};
inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::uint8_t kAckAccept = 1;
inline constexpr std::uint8_t kAckReject = 0;
inline constexpr std::size_t kMaxQueuedFrames = 2;
inline constexpr double kDeadlineTolerance = 0.25;
inline constexpr std::size_t kTrailerSize = 16;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_all(std::span<const std::uint8_t> data) = 0;
  /// Fills `out` completely or throws IoFailure.
  virtual void read_exact(std::span<std::uint8_t> out) = 0;
  /// Signals end of stream to the peer.
  virtual void close() = 0;
};

// ---------------------------------------------------------------------------
// In-memory transport

namespace detail {

struct Channel {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::uint8_t> data;
  bool closed = false;
};

}  // namespace detail

class MemoryTransport final : public Transport {
 public:
  MemoryTransport(std::shared_ptr<detail::Channel> in, std::shared_ptr<detail::Channel> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~MemoryTransport() override { close(); }

  void write_all(std::span<const std::uint8_t> data) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw Error(ErrorCode::IoFailure, "write to closed channel");
    out_->data.insert(out_->data.end(), data.begin(), data.end());
    out_->cv.notify_all();
  }

  void read_exact(std::span<std::uint8_t> out) override {
    std::unique_lock lock(in_->mu);
    std::size_t got = 0;
    while (got < out.size()) {
      in_->cv.wait(lock, [this] { return !in_->data.empty() || in_->closed; });
      if (in_->data.empty()) throw Error(ErrorCode::IoFailure, "channel closed by peer");
      while (got < out.size() && !in_->data.empty()) {
        out[got++] = in_->data.front();
        in_->data.pop_front();
      }
    }
  }

  void close() override {
    std::lock_guard lock(out_->mu);
    out_->closed = true;
    out_->cv.notify_all();
  }

 private:
  std::shared_ptr<detail::Channel> in_;
  std::shared_ptr<detail::Channel> out_;
};

/// Two connected endpoints.
inline std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> memory_pipe() {
  auto a = std::make_shared<detail::Channel>();
  auto b = std::make_shared<detail::Channel>();
  return {std::make_unique<MemoryTransport>(a, b), std::make_unique<MemoryTransport>(b, a)};
}

// ---------------------------------------------------------------------------
// TCP transport

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(int fd) : fd_(fd) {
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  }
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_all(std::span<const std::uint8_t> data) override {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(ErrorCode::IoFailure, std::string("send: ") + std::strerror(errno));
      sent += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::span<std::uint8_t> out) override {
    std::size_t got = 0;
    while (got < out.size()) {
      const ssize_t n = ::recv(fd_, out.data() + got, out.size() - got, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n == 0) throw Error(ErrorCode::IoFailure, "connection closed by peer");
      if (n < 0) throw Error(ErrorCode::IoFailure, std::string("recv: ") + std::strerror(errno));
      got += static_cast<std::size_t>(n);
    }
  }

  void close() override {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

 private:
  int fd_;
};

namespace detail {

inline sockaddr_in resolve(const std::string& host, std::uint16_t port, ErrorCode code) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(code, "cannot resolve " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace detail

class TcpListener {
 public:
  /// Port 0 picks an ephemeral port; see port().
  TcpListener(const std::string& host, std::uint16_t port) {
    const sockaddr_in addr = detail::resolve(host, port, ErrorCode::BindFailure);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error(ErrorCode::BindFailure, std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 4) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw Error(ErrorCode::BindFailure, host + ":" + std::to_string(port) + ": " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
  }
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;
  ~TcpListener() { ::close(fd_); }

  std::uint16_t port() const { return port_; }

  /// Waits for one subscriber; a zero timeout waits forever.
  std::unique_ptr<Transport> accept(std::chrono::milliseconds timeout = std::chrono::milliseconds{0}) {
    if (timeout.count() > 0) {
      pollfd p{fd_, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (rc <= 0) throw Error(ErrorCode::IoFailure, "no subscriber connected in time");
    }
    int c = -1;
    do {
      c = ::accept(fd_, nullptr, nullptr);
    } while (c < 0 && errno == EINTR);
    if (c < 0) throw Error(ErrorCode::IoFailure, std::string("accept: ") + std::strerror(errno));
    return std::make_unique<TcpTransport>(c);
  }

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

inline std::unique_ptr<Transport> tcp_connect(const std::string& host, std::uint16_t port) {
  const sockaddr_in addr = detail::resolve(host, port, ErrorCode::ConnectFailure);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw Error(ErrorCode::ConnectFailure, std::string("socket: ") + std::strerror(errno));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(ErrorCode::ConnectFailure, host + ":" + std::to_string(port) + ": " + why);
  }
  return std::make_unique<TcpTransport>(fd);
}

// ---------------------------------------------------------------------------
// Handshake

inline void send_handshake(Transport& t) {
  std::array<std::uint8_t, 5> hello{kStreamMagic[0], kStreamMagic[1], kStreamMagic[2], kStreamMagic[3],
                                    kStreamVersion};
  t.write_all(hello);
  std::array<std::uint8_t, 1> ack{};
  try {
    t.read_exact(ack);
  } catch (const Error&) {
    throw Error(ErrorCode::HandshakeFailure, "no acknowledgement from subscriber");
  }
  if (ack[0] != kAckAccept) throw Error(ErrorCode::HandshakeFailure, "subscriber rejected the stream");
}

inline void accept_handshake(Transport& t) {
  std::array<std::uint8_t, 5> hello{};
  try {
    t.read_exact(hello);
  } catch (const Error&) {
    throw Error(ErrorCode::HandshakeFailure, "publisher closed during handshake");
  }
  auto reject = [&t] {
    const std::array<std::uint8_t, 1> nack{kAckReject};
    try {
      t.write_all(nack);
    } catch (const Error&) {
    }
  };
  if (!std::equal(kStreamMagic.begin(), kStreamMagic.end(), hello.begin())) {
    reject();
    throw Error(ErrorCode::BadMagic, "publisher did not send PC3S");
  }
  if (hello[4] != kStreamVersion) {
    reject();
    throw Error(ErrorCode::HandshakeFailure, "unsupported stream version " + std::to_string(hello[4]));
  }
  const std::array<std::uint8_t, 1> ack{kAckAccept};
  t.write_all(ack);
}

// ---------------------------------------------------------------------------
// Publisher

struct PublisherTrailer {
  std::uint32_t frames_sent = 0;
  std::uint32_t deadline_misses = 0;
  std::uint32_t frames_dropped = 0;
  std::uint32_t encoder_errors = 0;

  friend bool operator==(const PublisherTrailer&, const PublisherTrailer&) = default;
};

/// Cloud for frame `index`, or nullopt when the source is exhausted.
using FrameSource = std::function<std::optional<PointCloud>(std::uint64_t index)>;

struct ServeConfig {
  bench::CodecSetting codec;
  SensorModel sensor = default_sensor();
  double fps = 10.0;
  /// Polled between frames; setting it ends the stream gracefully.
  const std::atomic<bool>* stop = nullptr;
};

inline std::uint64_t wall_clock_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count());
}

inline pc3d::detail::Bytes terminator_bytes(const PublisherTrailer& t) {
  pc3d::detail::Bytes out;
  write_frame_header(out, {0, 0, 0, 0, 0});
  pc3d::detail::ByteWriter w(out);
  w.u32(t.frames_sent);
  w.u32(t.deadline_misses);
  w.u32(t.frames_dropped);
  w.u32(t.encoder_errors);
  return out;
}

/// Runs the publisher on an accepted connection: handshake, then one frame
/// per 1/fps tick until the source ends or `stop` is set, then the
/// terminator. Encoding runs on a worker thread and overlaps transmission;
/// at most kMaxQueuedFrames encoded frames wait, older ones are dropped.
inline PublisherTrailer serve_on(Transport& t, const FrameSource& source, const ServeConfig& cfg) {
  if (!(cfg.fps > 0.0) || !std::isfinite(cfg.fps)) throw Error(ErrorCode::InvalidConfig, "fps must be positive");
  send_handshake(t);

  std::mutex mu;
  std::condition_variable cv;
  std::deque<CompressedFrame> queue;
  bool producer_done = false;
  std::atomic<bool> abort{false};
  std::exception_ptr producer_error;
  PublisherTrailer stats;
  std::atomic<std::uint32_t> misses{0}, dropped{0}, enc_errors{0};

  const auto period = std::chrono::duration<double>(1.0 / cfg.fps);
  std::thread producer([&] {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      for (std::uint64_t i = 0;; ++i) {
        if (abort.load() || (cfg.stop && cfg.stop->load())) break;
        std::this_thread::sleep_until(t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period * static_cast<double>(i)));
        std::optional<PointCloud> cloud = source(i);
        if (!cloud) break;
        const std::uint64_t capture_ns = wall_clock_ns();
        const auto start = std::chrono::steady_clock::now();
        std::optional<CompressedFrame> frame;
        try {
          const CompressedFrame f = cfg.codec.encode(*cloud, cfg.sensor);
          frame.emplace(f.codec(), i, capture_ns, f.n_points_original(), f.payload());
        } catch (const Error&) {
          enc_errors.fetch_add(1);
          continue;
        }
        if (std::chrono::steady_clock::now() - start > period) misses.fetch_add(1);
        std::lock_guard lock(mu);
        if (queue.size() >= kMaxQueuedFrames) {
          queue.pop_front();
          dropped.fetch_add(1);
        }
        queue.push_back(std::move(*frame));
        cv.notify_all();
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    std::lock_guard lock(mu);
    producer_done = true;
    cv.notify_all();
  });

  try {
    for (;;) {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return !queue.empty() || producer_done; });
      if (queue.empty()) break;
      CompressedFrame f = std::move(queue.front());
      queue.pop_front();
      lock.unlock();
      t.write_all(pack_frame(f));
      ++stats.frames_sent;
    }
  } catch (...) {
    abort = true;
    producer.join();
    throw;
  }
  producer.join();
  if (producer_error) std::rethrow_exception(producer_error);
  stats.deadline_misses = misses.load();
  stats.frames_dropped = dropped.load();
  stats.encoder_errors = enc_errors.load();
  t.write_all(terminator_bytes(stats));
  t.close();
  return stats;
}

/// Binds, accepts one subscriber and serves it.
inline PublisherTrailer serve(const std::string& host, std::uint16_t port, const FrameSource& source,
                              const ServeConfig& cfg) {
  TcpListener listener(host, port);
  auto t = listener.accept();
  return serve_on(*t, source, cfg);
}

// ---------------------------------------------------------------------------
// Subscriber

struct Budget {
  double max_kb = 105.0;
  double min_fps = 10.0;  // <= 0 disables the timing check
};

struct StreamStats {
  std::uint64_t frames_received = 0;
  std::uint64_t mean_frame_bytes = 0;  // payload bytes
  std::uint64_t max_frame_bytes = 0;
  double achieved_fps = 0.0;
  double mean_e2e_latency_ms = 0.0;
  std::uint64_t budget_violations = 0;
  std::uint64_t size_violations = 0;
  std::uint64_t deadline_violations = 0;
  std::uint64_t crc_failures = 0;
  std::uint64_t decode_failures = 0;
  std::uint64_t frame_id_gaps = 0;
  bool terminated = false;
  PublisherTrailer publisher;
};

struct ReceiveOptions {
  SensorModel sensor = default_sensor();
  bool decode = true;
  /// Called for every successfully decoded frame.
  std::function<void(const CompressedFrame&, const PointCloud&)> on_frame;
};

/// "key: value" lines in field order.
inline std::string to_text(const StreamStats& s) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "frames_received: %llu\nmean_frame_bytes: %llu\nmax_frame_bytes: %llu\n"
                "achieved_fps: %.3f\nmean_e2e_latency_ms: %.3f\nbudget_violations: %llu\n"
                "size_violations: %llu\ndeadline_violations: %llu\ncrc_failures: %llu\n"
                "decode_failures: %llu\nframe_id_gaps: %llu\nterminated: %s\n"
                "publisher_frames_sent: %u\npublisher_deadline_misses: %u\n"
                "publisher_frames_dropped: %u\npublisher_encoder_errors: %u\n",
                static_cast<unsigned long long>(s.frames_received),
                static_cast<unsigned long long>(s.mean_frame_bytes),
                static_cast<unsigned long long>(s.max_frame_bytes), s.achieved_fps,
                s.mean_e2e_latency_ms, static_cast<unsigned long long>(s.budget_violations),
                static_cast<unsigned long long>(s.size_violations),
                static_cast<unsigned long long>(s.deadline_violations),
                static_cast<unsigned long long>(s.crc_failures),
                static_cast<unsigned long long>(s.decode_failures),
                static_cast<unsigned long long>(s.frame_id_gaps), s.terminated ? "true" : "false",
                s.publisher.frames_sent, s.publisher.deadline_misses, s.publisher.frames_dropped,
                s.publisher.encoder_errors);
  return buf;
}

inline PointCloud decode_any(const CompressedFrame& f, const SensorModel& sensor) {
  switch (f.codec()) {
    case CodecId::octree: return octree::decode(f);
    case CodecId::range: return range::decode_cloud(f, sensor);
    case CodecId::voxel: return voxel::decode_cloud(f);
  }
  throw Error(ErrorCode::WrongCodec, "unknown codec");
}

/// Subscriber side on an established connection. Returns at the terminator;
/// a connection that closes before it yields stats with terminated = false.
inline StreamStats receive_on(Transport& t, const Budget& budget, const ReceiveOptions& opt = {}) {
  accept_handshake(t);
  StreamStats s;
  double bytes_sum = 0.0, latency_sum = 0.0;
  std::uint64_t expected_id = 0;
  std::optional<std::chrono::steady_clock::time_point> first, last;
  const double max_bytes = budget.max_kb * 1024.0;
  const double max_gap_s = budget.min_fps > 0.0 ? (1.0 / budget.min_fps) * (1.0 + kDeadlineTolerance) : 0.0;

  for (;;) {
    pc3d::detail::Bytes buf(kFrameHeaderSize);
    try {
      t.read_exact(buf);
    } catch (const Error&) {
      break;
    }
    const FrameHeader h = parse_frame_header(buf);
    if (h.payload_len == 0) {
      std::array<std::uint8_t, kTrailerSize> tr{};
      t.read_exact(tr);
      pc3d::detail::ByteReader r(tr, ErrorCode::TruncatedFrame);
      s.publisher = {r.u32(), r.u32(), r.u32(), r.u32()};
      s.terminated = true;
      break;
    }
    buf.resize(kFrameHeaderSize + h.payload_len + kFrameTrailerSize);
    t.read_exact(std::span(buf).subspan(kFrameHeaderSize));
    const auto now = std::chrono::steady_clock::now();
    const std::uint64_t now_ns = wall_clock_ns();

    ++s.frames_received;
    bytes_sum += h.payload_len;
    s.max_frame_bytes = std::max<std::uint64_t>(s.max_frame_bytes, h.payload_len);
    latency_sum += (static_cast<double>(now_ns) - static_cast<double>(h.timestamp_ns)) / 1e6;
    bool size_bad = h.payload_len > max_bytes;
    bool late = last && max_gap_s > 0.0 && std::chrono::duration<double>(now - *last).count() > max_gap_s;
    s.size_violations += size_bad;
    s.deadline_violations += late;
    s.budget_violations += size_bad || late;
    if (!first) first = now;
    last = now;

    if (h.frame_id != expected_id) {
      s.frame_id_gaps += h.frame_id > expected_id ? h.frame_id - expected_id : 1;
    }
    expected_id = h.frame_id + 1;

    std::optional<CompressedFrame> frame;
    try {
      frame.emplace(unpack_frame(buf));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::CrcMismatch) ++s.crc_failures;
      else ++s.decode_failures;
      continue;
    }
    if (!opt.decode) continue;
    try {
      const PointCloud cloud = decode_any(*frame, opt.sensor);
      if (opt.on_frame) opt.on_frame(*frame, cloud);
    } catch (const Error&) {
      ++s.decode_failures;
    }
  }
  if (s.frames_received > 0) {
    s.mean_frame_bytes = static_cast<std::uint64_t>(std::llround(bytes_sum / static_cast<double>(s.frames_received)));
    s.mean_e2e_latency_ms = latency_sum / static_cast<double>(s.frames_received);
  }
  if (s.frames_received > 1) {
    const double span = std::chrono::duration<double>(*last - *first).count();
    if (span > 0.0) s.achieved_fps = static_cast<double>(s.frames_received - 1) / span;
  }
  return s;
}

inline StreamStats receive(const std::string& host, std::uint16_t port, const Budget& budget,
                           const ReceiveOptions& opt = {}) {
  auto t = tcp_connect(host, port);
  return receive_on(*t, budget, opt);
}

}  // namespace pc3d::stream
