#pragma once

#include <cstdint>
#include <vector>

#include "lfc/errors.hpp"

namespace lfc {

/// MSB-first bit packer. flush() pads the final byte with zeros.
class BitWriter {
public:
  void put_bit(int bit) {
    acc_ = static_cast<uint8_t>((acc_ << 1) | (bit & 1));
    if (++nbits_ == 8) {
      bytes_.push_back(acc_);
      acc_ = 0;
      nbits_ = 0;
    }
  }

  void put_bits(uint32_t value, int count) {
    for (int i = count - 1; i >= 0; --i) put_bit(static_cast<int>((value >> i) & 1));
  }

  /// Unsigned Exp-Golomb.
  void put_ue(uint32_t value) {
    const uint64_t code = static_cast<uint64_t>(value) + 1;
    int len = 0;
    while ((code >> len) > 1) ++len;
    for (int i = 0; i < len; ++i) put_bit(0);
    for (int i = len; i >= 0; --i) put_bit(static_cast<int>((code >> i) & 1));
  }

  /// Signed Exp-Golomb: 0, 1, -1, 2, -2, ...
  void put_se(int32_t value) {
    const uint32_t mapped = value > 0 ? static_cast<uint32_t>(2 * value - 1)
                                      : static_cast<uint32_t>(-2 * static_cast<int64_t>(value));
    put_ue(mapped);
  }

  std::vector<uint8_t> flush() {
    while (nbits_ != 0) put_bit(0);
    return std::move(bytes_);
  }

  size_t bit_count() const { return bytes_.size() * 8 + nbits_; }

private:
  std::vector<uint8_t> bytes_;
  uint8_t acc_ = 0;
  int nbits_ = 0;
};

/// MSB-first bit reader over a byte buffer. Reading past the end throws
/// MalformedPayload.
class BitReader {
public:
  explicit BitReader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  int get_bit() {
    if (pos_ >= bytes_.size() * 8) throw MalformedPayload("bitstream: read past end of payload");
    const int bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1;
    ++pos_;
    return bit;
  }

  uint32_t get_bits(int count) {
    uint32_t v = 0;
    for (int i = 0; i < count; ++i) v = (v << 1) | static_cast<uint32_t>(get_bit());
    return v;
  }

  uint32_t get_ue() {
    int zeros = 0;
    while (get_bit() == 0) {
      if (++zeros > 32) throw MalformedPayload("bitstream: exp-golomb prefix too long");
    }
    uint64_t code = 1;
    for (int i = 0; i < zeros; ++i) code = (code << 1) | static_cast<uint64_t>(get_bit());
    return static_cast<uint32_t>(code - 1);
  }

  int32_t get_se() {
    const uint32_t mapped = get_ue();
    if (mapped % 2 == 1) return static_cast<int32_t>((mapped + 1) / 2);
    return -static_cast<int32_t>(mapped / 2);
  }

  size_t bit_pos() const { return pos_; }

private:
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

}  // namespace lfc
