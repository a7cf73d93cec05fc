#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace imv {

enum class Errc {
  missing_file,
  dimension_mismatch,
  bad_calibration,
  degenerate_spec,
  bad_dimensions,
  bad_quant,
  corrupt_stream,
  invalid_state,
  infeasible_budget,
  insufficient_overlap,
  out_of_cone,
  missing_frame,
  storage_full,
  store_mismatch,
  protocol,
};

inline auto errc_name(Errc e) -> const char * {
  switch (e) {
  case Errc::missing_file: return "MissingFile";
  case Errc::dimension_mismatch: return "DimensionMismatch";
  case Errc::bad_calibration: return "BadCalibration";
  case Errc::degenerate_spec: return "DegenerateSpec";
  case Errc::bad_dimensions: return "BadDimensions";
  case Errc::bad_quant: return "BadQuant";
  case Errc::corrupt_stream: return "CorruptStream";
  case Errc::invalid_state: return "InvalidState";
  case Errc::infeasible_budget: return "InfeasibleBudget";
  case Errc::insufficient_overlap: return "InsufficientOverlap";
  case Errc::out_of_cone: return "OutOfCone";
  case Errc::missing_frame: return "MissingFrame";
  case Errc::storage_full: return "StorageFull";
  case Errc::store_mismatch: return "StoreMismatch";
  case Errc::protocol: return "ProtocolError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
public:
  Error(Errc code, const std::string &detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] auto code() const noexcept { return code_; }

private:
  Errc code_;
};

inline void verify(bool cond, Errc code, const std::string &detail) {
  if (!cond) {
    throw Error(code, detail);
  }
}

// Interleaved multi-channel raster, row-major.
template <typename T> class Image {
public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  [[nodiscard]] auto width() const noexcept { return width_; }
  [[nodiscard]] auto height() const noexcept { return height_; }
  [[nodiscard]] auto channels() const noexcept { return channels_; }
  [[nodiscard]] auto empty() const noexcept { return data_.empty(); }
  [[nodiscard]] auto size() const noexcept { return data_.size(); }

  [[nodiscard]] auto index(int x, int y, int c = 0) const noexcept -> std::size_t {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  auto operator()(int x, int y, int c = 0) noexcept -> T & { return data_[index(x, y, c)]; }
  auto operator()(int x, int y, int c = 0) const noexcept -> const T & {
    return data_[index(x, y, c)];
  }

  [[nodiscard]] auto data() noexcept -> std::span<T> { return data_; }
  [[nodiscard]] auto data() const noexcept -> std::span<const T> { return data_; }
  [[nodiscard]] auto vec() const noexcept -> const std::vector<T> & { return data_; }

  [[nodiscard]] auto same_shape(const auto &other) const noexcept {
    return width_ == other.width() && height_ == other.height() && channels_ == other.channels();
  }

  friend auto operator==(const Image &, const Image &) -> bool = default;

private:
  int width_{};
  int height_{};
  int channels_{};
  std::vector<T> data_;
};

// 8-bit RGB picture.
using Frame = Image<std::uint8_t>;
// Signed RGB residual, samples in [-255, 255].
using Residual = Image<std::int16_t>;

inline auto make_frame(int width, int height, std::uint8_t fill = 0) { return Frame(width, height, 3, fill); }

template <typename A, typename B> auto mse(const Image<A> &a, const Image<B> &b) -> double {
  verify(a.same_shape(b), Errc::dimension_mismatch, "mse operands differ in shape");
  if (a.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  const auto da = a.data();
  const auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = static_cast<double>(da[i]) - static_cast<double>(db[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(da.size());
}

inline constexpr double psnr_cap_db = 100.0;

// PSNR for 8-bit content; identical images report psnr_cap_db.
inline auto psnr_from_mse(double m) -> double {
  if (m <= 0.0) {
    return psnr_cap_db;
  }
  return std::min(psnr_cap_db, 10.0 * std::log10(255.0 * 255.0 / m));
}

inline auto psnr(const Frame &a, const Frame &b) -> double { return psnr_from_mse(mse(a, b)); }

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra for camera geometry.

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline auto identity3() -> Mat3 { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline auto operator*(const Mat3 &m, const Vec3 &v) -> Vec3 {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline auto operator*(const Mat3 &a, const Mat3 &b) -> Mat3 {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return r;
}

inline auto operator+(const Vec3 &a, const Vec3 &b) -> Vec3 { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline auto operator-(const Vec3 &a, const Vec3 &b) -> Vec3 { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline auto operator*(double s, const Vec3 &v) -> Vec3 { return {s * v[0], s * v[1], s * v[2]}; }

inline auto norm(const Vec3 &v) -> double { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

inline auto transpose(const Mat3 &m) -> Mat3 {
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r[i][j] = m[j][i];
    }
  }
  return r;
}

// Max-abs deviation of RᵀR from identity.
inline auto orthonormality_error(const Mat3 &r) -> double {
  const auto p = transpose(r) * r;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      worst = std::max(worst, std::abs(p[i][j] - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

// Portable seeded randomness: std distributions are implementation-defined, so
// everything that must be bit-reproducible goes through these helpers.
inline auto splitmix64(std::uint64_t x) -> std::uint64_t {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

template <typename Rng> auto uniform01(Rng &rng) -> double {
  return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

template <typename Rng> auto uniform_real(Rng &rng, double lo, double hi) -> double {
  return lo + (hi - lo) * uniform01(rng);
}

template <typename Rng> auto uniform_int(Rng &rng, int lo, int hi_inclusive) -> int {
  const auto span = static_cast<std::uint64_t>(hi_inclusive - lo) + 1U;
  return lo + static_cast<int>(rng() % span);
}

} // namespace imv
