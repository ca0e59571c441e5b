// SPDX-FileCopyrightText: 2026 pc3d contributors
// SPDX-License-Identifier: Apache-2.0

// Byte-oriented range coder (carry-propagating, 32-bit range, 2^24
// normalisation threshold) with adaptive frequency models. Shared by the
// octree and voxel codecs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pc3d/error.hpp"

namespace pc3d::entropy {

inline constexpr std::uint32_t kTop = 1U << 24;

/// Adaptive frequency table over `alphabet` symbols. Every symbol starts with
/// frequency 1; each coded symbol adds `kIncrement`; when the total would pass
/// `kMaxTotal` all frequencies are halved (rounding up, so none reach 0).
/// Cumulative frequencies live in a Fenwick tree.
class AdaptiveModel {
 public:
  static constexpr std::uint32_t kIncrement = 32;
  static constexpr std::uint32_t kMaxTotal = 1U << 16;

  explicit AdaptiveModel(std::uint32_t alphabet = 256) : freq_(alphabet, 1), tree_(alphabet + 1, 0) {
    if (alphabet < 2 || alphabet > 4096) {
      throw Error(ErrorCode::InvalidConfig, "alphabet size " + std::to_string(alphabet));
    }
    rebuild();
  }

  std::uint32_t alphabet() const { return static_cast<std::uint32_t>(freq_.size()); }
  std::uint32_t total() const { return total_; }
  std::uint32_t frequency(std::uint32_t s) const { return freq_[s]; }

  /// Sum of frequencies of symbols < s.
  std::uint32_t cumulative(std::uint32_t s) const {
    std::uint32_t sum = 0;
    for (std::uint32_t i = s; i > 0; i -= i & (~i + 1)) sum += tree_[i];
    return sum;
  }

  /// Largest symbol whose cumulative frequency is <= target.
  std::uint32_t find(std::uint32_t target, std::uint32_t& cum_out) const {
    std::uint32_t pos = 0;
    std::uint32_t cum = 0;
    for (std::uint32_t step = top_bit_; step > 0; step >>= 1) {
      const std::uint32_t next = pos + step;
      if (next < tree_.size() && cum + tree_[next] <= target) {
        pos = next;
        cum += tree_[next];
      }
    }
    cum_out = cum;
    return pos;
  }

  void update(std::uint32_t s) {
    if (total_ + kIncrement > kMaxTotal) {
      for (auto& f : freq_) f = (f + 1) / 2;
      rebuild();
    }
    freq_[s] += kIncrement;
    total_ += kIncrement;
    for (std::uint32_t i = s + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += kIncrement;
  }

 private:
  void rebuild() {
    total_ = 0;
    std::fill(tree_.begin(), tree_.end(), 0U);
    for (std::uint32_t s = 0; s < freq_.size(); ++s) {
      total_ += freq_[s];
      for (std::uint32_t i = s + 1; i < tree_.size(); i += i & (~i + 1)) tree_[i] += freq_[s];
    }
    top_bit_ = 1;
    while (top_bit_ * 2 < tree_.size()) top_bit_ *= 2;
  }

  std::vector<std::uint32_t> freq_;
  std::vector<std::uint32_t> tree_;
  std::uint32_t total_ = 0;
  std::uint32_t top_bit_ = 1;
};

class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
    const std::uint32_t r = range_ / total;
    low_ += static_cast<std::uint64_t>(r) * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void encode(AdaptiveModel& model, std::uint32_t symbol) {
    encode(model.cumulative(symbol), model.frequency(symbol), model.total());
    model.update(symbol);
  }

  /// Flushes the coder state and returns the byte stream. The encoder must
  /// not be used afterwards.
  std::vector<std::uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

 private:
  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000U || (low_ >> 32) != 0) {
      const auto carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t temp = cache_;
      do {
        emit(static_cast<std::uint8_t>(temp + carry));
        temp = 0xFF;
      } while (--cache_size_ != 0);
      cache_ = static_cast<std::uint8_t>(static_cast<std::uint32_t>(low_) >> 24);
    }
    ++cache_size_;
    low_ = (low_ & 0x00FFFFFFULL) << 8;
  }

  // The first byte out of the carry cache is always zero; it is not stored.
  void emit(std::uint8_t b) {
    if (skip_first_) {
      skip_first_ = false;
      return;
    }
    out_.push_back(b);
  }

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFU;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
  bool skip_first_ = true;
  std::vector<std::uint8_t> out_;
};

/// Decoder for RangeEncoder streams. Any attempt to read past the input, or
/// a code value outside the model's total, raises CorruptPayload.
class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> in) : in_(in) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  std::uint32_t decode(AdaptiveModel& model) {
    const std::uint32_t total = model.total();
    const std::uint32_t r = range_ / total;
    const std::uint32_t value = code_ / r;
    if (value >= total) throw Error(ErrorCode::CorruptPayload, "range code out of model bounds");
    std::uint32_t cum = 0;
    const std::uint32_t symbol = model.find(value, cum);
    const std::uint32_t freq = model.frequency(symbol);
    code_ -= r * cum;
    range_ = r * freq;
    while (range_ < kTop) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
    model.update(symbol);
    return symbol;
  }

  bool fully_consumed() const { return pos_ == in_.size(); }
  std::size_t consumed() const { return pos_; }

 private:
  std::uint32_t next_byte() {
    if (pos_ >= in_.size()) throw Error(ErrorCode::CorruptPayload, "entropy stream exhausted");
    return in_[pos_++];
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFU;
};

enum class ContextMode : std::uint8_t { order0 = 0, parent_context = 1 };

/// Codes a symbol sequence with one adaptive model per context. `contexts`
/// is either empty (order-0, one model) or parallel to `symbols`.
inline std::vector<std::uint8_t> encode_symbols(std::span<const std::uint32_t> symbols,
                                                std::uint32_t alphabet,
                                                std::span<const std::uint8_t> contexts = {}) {
  if (symbols.empty()) return {};
  const bool ctx = !contexts.empty();
  std::vector<AdaptiveModel> models(ctx ? 256 : 1, AdaptiveModel(alphabet));
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] >= alphabet) throw Error(ErrorCode::InvalidConfig, "symbol outside alphabet");
    enc.encode(models[ctx ? contexts[i] : 0], symbols[i]);
  }
  return enc.finish();
}

/// Inverse of encode_symbols. The decoder must know the context of each
/// symbol, as the octree decoder does from already-decoded parents.
inline std::vector<std::uint32_t> decode_symbols(std::span<const std::uint8_t> coded,
                                                 std::size_t count, std::uint32_t alphabet,
                                                 std::span<const std::uint8_t> contexts = {}) {
  std::vector<std::uint32_t> out;
  if (count == 0) {
    if (!coded.empty()) throw Error(ErrorCode::CorruptPayload, "data after empty stream");
    return out;
  }
  const bool ctx = !contexts.empty();
  if (ctx && contexts.size() != count) throw Error(ErrorCode::InvalidConfig, "context count");
  std::vector<AdaptiveModel> models(ctx ? 256 : 1, AdaptiveModel(alphabet));
  RangeDecoder dec(coded);
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(dec.decode(models[ctx ? contexts[i] : 0]));
  if (!dec.fully_consumed()) throw Error(ErrorCode::CorruptPayload, "trailing entropy bytes");
  return out;
}

/// Order-0 byte coding: alphabet 256, one model.
inline std::vector<std::uint8_t> encode_bytes(std::span<const std::uint8_t> bytes) {
  std::vector<std::uint32_t> symbols(bytes.begin(), bytes.end());
  return encode_symbols(symbols, 256);
}

inline std::vector<std::uint8_t> decode_bytes(std::span<const std::uint8_t> coded,
                                              std::size_t count) {
  std::vector<std::uint8_t> out;
  if (count == 0) {
    if (!coded.empty()) throw Error(ErrorCode::CorruptPayload, "data after empty stream");
    return out;
  }
  out.reserve(count);
  AdaptiveModel model(256);
  RangeDecoder dec(coded);
  for (std::size_t i = 0; i < count; ++i) out.push_back(static_cast<std::uint8_t>(dec.decode(model)));
  if (!dec.fully_consumed()) throw Error(ErrorCode::CorruptPayload, "trailing entropy bytes");
  return out;
}

/// Order-0 Shannon bound in bytes: n * H(empirical histogram) / 8.
inline double shannon_bound_bytes(std::span<const std::uint32_t> symbols) {
  if (symbols.empty()) return 0.0;
  std::uint32_t max_sym = 0;
  for (auto s : symbols) max_sym = std::max(max_sym, s);
  std::vector<std::uint64_t> hist(max_sym + 1, 0);
  for (auto s : symbols) ++hist[s];
  const double n = static_cast<double>(symbols.size());
  double bits = 0.0;
  for (auto c : hist) {
    if (c) bits -= static_cast<double>(c) * std::log2(static_cast<double>(c) / n);
  }
  return bits / 8.0;
}

}  // namespace pc3d::entropy
