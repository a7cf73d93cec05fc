#pragma once

#include "core.hpp"

namespace imv {

// MSB-first bit writer with exponential-Golomb helpers.
class BitWriter {
public:
  void put_bit(bool bit) {
    if (fill_ == 0) {
      bytes_.push_back(0);
    }
    if (bit) {
      bytes_.back() = static_cast<std::uint8_t>(bytes_.back() | (0x80U >> fill_));
    }
    fill_ = (fill_ + 1) % 8;
    ++bits_;
  }

  void put_bits(std::uint64_t value, int count) {
    for (int i = count - 1; i >= 0; --i) {
      put_bit(((value >> static_cast<unsigned>(i)) & 1U) != 0);
    }
  }

  // Order-0 unsigned exp-Golomb.
  void put_ue(std::uint64_t value) {
    const std::uint64_t x = value + 1;
    int len = 0;
    while ((x >> static_cast<unsigned>(len)) > 1) {
      ++len;
    }
    put_bits(0, len);
    put_bits(x, len + 1);
  }

  // Signed mapping: k > 0 -> 2k - 1, k <= 0 -> -2k.
  void put_se(std::int64_t value) {
    put_ue(value > 0 ? static_cast<std::uint64_t>(2 * value - 1) : static_cast<std::uint64_t>(-2 * value));
  }

  [[nodiscard]] auto bit_count() const { return bits_; }

  auto finish() -> std::vector<std::uint8_t> {
    fill_ = 0;
    return std::move(bytes_);
  }

private:
  std::vector<std::uint8_t> bytes_;
  int fill_{};
  std::size_t bits_{};
};

class BitReader {
public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  auto get_bit() -> bool {
    verify(pos_ < bytes_.size() * 8, Errc::corrupt_stream, "read past end of payload");
    const bool bit = ((bytes_[pos_ / 8] >> (7U - pos_ % 8)) & 1U) != 0;
    ++pos_;
    return bit;
  }

  auto get_bits(int count) -> std::uint64_t {
    std::uint64_t v = 0;
    for (int i = 0; i < count; ++i) {
      v = (v << 1U) | static_cast<std::uint64_t>(get_bit());
    }
    return v;
  }

  auto get_ue() -> std::uint64_t {
    int zeros = 0;
    while (!get_bit()) {
      ++zeros;
      verify(zeros <= 40, Errc::corrupt_stream, "malformed exp-Golomb prefix");
    }
    return ((std::uint64_t{1} << static_cast<unsigned>(zeros)) | get_bits(zeros)) - 1;
  }

  auto get_se() -> std::int64_t {
    const auto k = get_ue();
    return (k & 1U) != 0 ? static_cast<std::int64_t>((k + 1) / 2) : -static_cast<std::int64_t>(k / 2);
  }

  [[nodiscard]] auto position() const { return pos_; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_{};
};

} // namespace imv
