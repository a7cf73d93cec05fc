#pragma once

#include "bitstream.hpp"
#include "rdcurve.hpp"
#include "synthesis.hpp"

#include <functional>

namespace imv {

struct QuantLadder {
  std::vector<int> steps{4, 8, 12, 16, 24, 32, 48, 64};

  void validate() const {
    verify(!steps.empty() && steps.size() <= 64, Errc::bad_quant, "ladder must hold 1..64 steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      verify(steps[i] >= 1, Errc::bad_quant, "quantization steps must be >= 1");
      verify(i == 0 || steps[i] > steps[i - 1], Errc::bad_quant, "ladder must be strictly increasing");
    }
  }

  [[nodiscard]] auto index_of(int step) const -> int {
    const auto it = std::find(steps.begin(), steps.end(), step);
    verify(it != steps.end(), Errc::bad_quant, "step " + std::to_string(step) + " is not on the ladder");
    return static_cast<int>(it - steps.begin());
  }

  [[nodiscard]] auto step_at(int index) const -> int {
    verify(index >= 0 && index < static_cast<int>(steps.size()), Errc::corrupt_stream, "q-index outside ladder");
    return steps[static_cast<std::size_t>(index)];
  }

  friend auto operator==(const QuantLadder &, const QuantLadder &) -> bool = default;
};

enum class FrameKind : std::uint8_t { intra = 0, predicted = 1, residual = 2, depth = 3 };

inline auto kind_name(FrameKind k) -> const char * {
  switch (k) {
  case FrameKind::intra: return "intra";
  case FrameKind::predicted: return "predicted";
  case FrameKind::residual: return "residual";
  case FrameKind::depth: return "depth";
  }
  return "?";
}

struct EncodedFrame {
  std::vector<std::uint8_t> payload;
  std::size_t bits{}; // 8 * payload size; frames carry no declared padding
  FrameKind kind{FrameKind::intra};
  int q{};
  FrameId frame_id{};

  friend auto operator==(const EncodedFrame &, const EncodedFrame &) -> bool = default;
};

// Depth codes span 16 bits, so their quantizer runs this many times coarser
// than the ladder step it is signalled with.
inline constexpr int depth_step_scale = 64;

namespace detail {

struct DctTables {
  std::array<std::array<double, 8>, 8> c{}; // c[k][n]
  std::array<int, 64> zigzag{};              // scan index -> raster index

  DctTables() {
    const double pi = 3.14159265358979323846;
    for (int k = 0; k < 8; ++k) {
      const double a = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) {
        c[k][n] = a * std::cos((2 * n + 1) * k * pi / 16.0);
      }
    }
    int i = 0;
    for (int s = 0; s < 15; ++s) {
      if (s % 2 == 0) {
        for (int y = std::min(s, 7); y >= 0 && s - y < 8; --y) {
          zigzag[i++] = y * 8 + (s - y);
        }
      } else {
        for (int x = std::min(s, 7); x >= 0 && s - x < 8; --x) {
          zigzag[i++] = (s - x) * 8 + x;
        }
      }
    }
  }
};

inline auto dct_tables() -> const DctTables & {
  static const DctTables tables;
  return tables;
}

using Block = std::array<double, 64>;

inline void forward_dct(Block &b) {
  const auto &c = dct_tables().c;
  Block tmp{};
  for (int k = 0; k < 8; ++k) {
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) {
        s += c[k][n] * b[n * 8 + x];
      }
      tmp[k * 8 + x] = s;
    }
  }
  for (int k = 0; k < 8; ++k) {
    for (int l = 0; l < 8; ++l) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) {
        s += c[l][n] * tmp[k * 8 + n];
      }
      b[k * 8 + l] = s;
    }
  }
}

inline void inverse_dct(Block &b) {
  const auto &c = dct_tables().c;
  Block tmp{};
  for (int n = 0; n < 8; ++n) {
    for (int l = 0; l < 8; ++l) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) {
        s += c[k][n] * b[k * 8 + l];
      }
      tmp[n * 8 + l] = s;
    }
  }
  for (int n = 0; n < 8; ++n) {
    for (int m = 0; m < 8; ++m) {
      double s = 0.0;
      for (int l = 0; l < 8; ++l) {
        s += c[l][m] * tmp[n * 8 + l];
      }
      b[n * 8 + m] = s;
    }
  }
}

struct SampleRange {
  int lo;
  int hi;
};

inline auto range_of(FrameKind k) -> SampleRange {
  switch (k) {
  case FrameKind::intra: return {0, 255};
  case FrameKind::predicted:
  case FrameKind::residual: return {-255, 255};
  case FrameKind::depth: return {0, 65535};
  }
  return {0, 0};
}

inline auto channels_of(FrameKind k) { return k == FrameKind::depth ? 1 : 3; }
inline auto dim_unit_of(FrameKind k) { return k == FrameKind::depth ? 8 : 16; }

// Quantized levels of one plane, in zigzag order per block.
using Levels = std::vector<std::array<int, 64>>;

inline auto quantize_plane(const Image<std::int32_t> &samples, double step) -> Levels {
  const auto &zz = dct_tables().zigzag;
  const int bw = samples.width() / 8;
  const int bh = samples.height() / 8;
  Levels levels;
  levels.reserve(static_cast<std::size_t>(bw) * bh * samples.channels());
  for (int c = 0; c < samples.channels(); ++c) {
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        Block blk{};
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            blk[y * 8 + x] = samples(bx * 8 + x, by * 8 + y, c);
          }
        }
        forward_dct(blk);
        std::array<int, 64> lv{};
        for (int i = 0; i < 64; ++i) {
          lv[i] = static_cast<int>(std::lround(blk[zz[i]] / step));
        }
        levels.push_back(lv);
      }
    }
  }
  return levels;
}

// Runs are sent as ue(run + 1); ue(0) ends the block.
inline constexpr std::uint64_t eob_code = 0;

inline void write_levels(BitWriter &bw, const Levels &levels) {
  for (const auto &lv : levels) {
    int run = 0;
    for (int i = 0; i < 64; ++i) {
      if (lv[i] == 0) {
        ++run;
        continue;
      }
      bw.put_ue(static_cast<std::uint64_t>(run) + 1);
      bw.put_se(lv[i]);
      run = 0;
    }
    bw.put_ue(eob_code);
  }
}

inline auto read_levels(BitReader &br, std::size_t n_blocks) -> Levels {
  Levels levels(n_blocks);
  for (auto &lv : levels) {
    lv.fill(0);
    int pos = 0;
    for (;;) {
      const auto code = br.get_ue();
      if (code == eob_code) {
        break;
      }
      const auto run = code - 1;
      verify(run < 64 && pos + static_cast<int>(run) < 64, Errc::corrupt_stream, "block overrun");
      pos += static_cast<int>(run);
      const auto level = br.get_se();
      verify(level != 0, Errc::corrupt_stream, "zero level in run-length pair");
      verify(std::abs(level) <= (1 << 24), Errc::corrupt_stream, "level out of range");
      lv[pos++] = static_cast<int>(level);
    }
  }
  return levels;
}

inline auto reconstruct_plane(const Levels &levels, int width, int height, int channels, double step,
                              SampleRange range) -> Image<std::int32_t> {
  const auto &zz = dct_tables().zigzag;
  Image<std::int32_t> out(width, height, channels);
  const int bw = width / 8;
  const int bh = height / 8;
  std::size_t i = 0;
  for (int c = 0; c < channels; ++c) {
    for (int by = 0; by < bh; ++by) {
      for (int bx = 0; bx < bw; ++bx) {
        const auto &lv = levels[i++];
        Block blk{};
        for (int k = 0; k < 64; ++k) {
          blk[zz[k]] = step * lv[k];
        }
        inverse_dct(blk);
        for (int y = 0; y < 8; ++y) {
          for (int x = 0; x < 8; ++x) {
            const auto s = static_cast<int>(std::lround(blk[y * 8 + x]));
            out(bx * 8 + x, by * 8 + y, c) = std::clamp(s, range.lo, range.hi);
          }
        }
      }
    }
  }
  return out;
}

inline auto effective_step(FrameKind kind, int step) -> double {
  return kind == FrameKind::depth ? static_cast<double>(step) * depth_step_scale : static_cast<double>(step);
}

// Replicates the last row/column so both dimensions reach a multiple of unit.
inline auto pad_to(const Image<std::int32_t> &img, int unit) -> Image<std::int32_t> {
  const int w = (img.width() + unit - 1) / unit * unit;
  const int h = (img.height() + unit - 1) / unit * unit;
  if (w == img.width() && h == img.height()) {
    return img;
  }
  Image<std::int32_t> out(w, h, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out(x, y, c) = img(std::min(x, img.width() - 1), std::min(y, img.height() - 1), c);
      }
    }
  }
  return out;
}

template <typename T> auto widen(const Image<T> &img) -> Image<std::int32_t> {
  Image<std::int32_t> out(img.width(), img.height(), img.channels());
  std::copy(img.vec().begin(), img.vec().end(), out.data().begin());
  return out;
}

template <typename T> auto narrow(const Image<std::int32_t> &img, int width, int height) -> Image<T> {
  Image<T> out(width, height, img.channels());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < img.channels(); ++c) {
        out(x, y, c) = static_cast<T>(img(x, y, c));
      }
    }
  }
  return out;
}

} // namespace detail

struct DecodedPlanes {
  FrameKind kind{};
  int q{};
  Image<std::int32_t> samples;
};

// Block-DCT intra coding of a sample plane set; the header is
// {kind:2, q-index:6, width/unit:8, height/unit:8} with unit 16 (8 for depth).
inline auto encode_samples(const Image<std::int32_t> &samples, FrameKind kind, int q,
                           const QuantLadder &ladder = {}) -> EncodedFrame {
  const int unit = detail::dim_unit_of(kind);
  verify(samples.channels() == detail::channels_of(kind), Errc::bad_dimensions, "channel count does not match kind");
  const auto padded = kind == FrameKind::depth ? detail::pad_to(samples, unit) : samples;
  verify(padded.width() > 0 && padded.height() > 0 && padded.width() % unit == 0 && padded.height() % unit == 0,
         Errc::bad_dimensions, "plane dimensions must be multiples of " + std::to_string(unit));
  verify(padded.width() / unit < 256 && padded.height() / unit < 256, Errc::bad_dimensions, "plane too large");
  const int q_index = ladder.index_of(q);

  BitWriter bw;
  bw.put_bits(static_cast<std::uint64_t>(kind), 2);
  bw.put_bits(static_cast<std::uint64_t>(q_index), 6);
  bw.put_bits(static_cast<std::uint64_t>(padded.width() / unit), 8);
  bw.put_bits(static_cast<std::uint64_t>(padded.height() / unit), 8);
  detail::write_levels(bw, detail::quantize_plane(padded, detail::effective_step(kind, q)));
  EncodedFrame e;
  e.payload = bw.finish();
  e.bits = e.payload.size() * 8;
  e.kind = kind;
  e.q = q;
  return e;
}

inline auto decode_samples(std::span<const std::uint8_t> payload, const QuantLadder &ladder = {}) -> DecodedPlanes {
  BitReader br(payload);
  DecodedPlanes out;
  out.kind = static_cast<FrameKind>(br.get_bits(2));
  out.q = ladder.step_at(static_cast<int>(br.get_bits(6)));
  const int unit = detail::dim_unit_of(out.kind);
  const int w = static_cast<int>(br.get_bits(8)) * unit;
  const int h = static_cast<int>(br.get_bits(8)) * unit;
  verify(w > 0 && h > 0, Errc::corrupt_stream, "zero plane dimensions");
  const int ch = detail::channels_of(out.kind);
  const auto n_blocks = static_cast<std::size_t>(w / 8) * (h / 8) * ch;
  const auto levels = detail::read_levels(br, n_blocks);
  verify(payload.size() * 8 - br.position() < 8, Errc::corrupt_stream, "trailing data after frame");
  out.samples = detail::reconstruct_plane(levels, w, h, ch, detail::effective_step(out.kind, out.q),
                                          detail::range_of(out.kind));
  return out;
}

// Re-emits the entropy layer from decoded levels (used to check bit exactness).
inline auto reencode_payload(std::span<const std::uint8_t> payload) -> std::vector<std::uint8_t> {
  BitReader br(payload);
  BitWriter bw;
  const auto kind = static_cast<FrameKind>(br.get_bits(2));
  const auto q_index = br.get_bits(6);
  const auto wu = br.get_bits(8);
  const auto hu = br.get_bits(8);
  bw.put_bits(static_cast<std::uint64_t>(kind), 2);
  bw.put_bits(q_index, 6);
  bw.put_bits(wu, 8);
  bw.put_bits(hu, 8);
  const int unit = detail::dim_unit_of(kind);
  const auto n_blocks = static_cast<std::size_t>(wu * unit / 8) * (hu * unit / 8) * detail::channels_of(kind);
  detail::write_levels(bw, detail::read_levels(br, n_blocks));
  return bw.finish();
}

inline auto encode_intra(const Frame &img, int q, const QuantLadder &ladder = {}) -> EncodedFrame {
  return encode_samples(detail::widen(img), FrameKind::intra, q, ladder);
}

inline auto encode_intra(const Residual &plane, int q, const QuantLadder &ladder = {}) -> EncodedFrame {
  return encode_samples(detail::widen(plane), FrameKind::residual, q, ladder);
}

inline auto encode_depth(const Image<std::uint16_t> &plane, int q, const QuantLadder &ladder = {}) -> EncodedFrame {
  return encode_samples(detail::widen(plane), FrameKind::depth, q, ladder);
}

inline auto decode_intra(const EncodedFrame &e, const QuantLadder &ladder = {}) -> Frame {
  auto d = decode_samples(e.payload, ladder);
  verify(d.kind == FrameKind::intra, Errc::corrupt_stream, "payload is not an intra frame");
  return detail::narrow<std::uint8_t>(d.samples, d.samples.width(), d.samples.height());
}

// Residual and predicted payloads both decode to signed planes.
inline auto decode_residual(const EncodedFrame &e, const QuantLadder &ladder = {}) -> Residual {
  auto d = decode_samples(e.payload, ladder);
  verify(d.kind == FrameKind::residual || d.kind == FrameKind::predicted, Errc::corrupt_stream,
         "payload is not a residual plane");
  return detail::narrow<std::int16_t>(d.samples, d.samples.width(), d.samples.height());
}

inline auto decode_depth(const EncodedFrame &e, int width, int height, const QuantLadder &ladder = {})
    -> Image<std::uint16_t> {
  auto d = decode_samples(e.payload, ladder);
  verify(d.kind == FrameKind::depth, Errc::corrupt_stream, "payload is not a depth plane");
  verify(d.samples.width() >= width && d.samples.height() >= height && d.samples.width() - width < 8 &&
             d.samples.height() - height < 8,
         Errc::corrupt_stream, "depth plane size does not match");
  return detail::narrow<std::uint16_t>(d.samples, width, height);
}

// ---------------------------------------------------------------------------
// Reference GOPs: I frame then closed-loop P frames coding the difference to
// the previously decoded frame.

struct GopStructure {
  int gop_size{16};

  void validate() const {
    verify(gop_size == 1 || gop_size == 2 || gop_size == 4 || gop_size == 8 || gop_size == 16 || gop_size == 32,
           Errc::invalid_state, "gop size must be a power of two in 1..32");
  }
  [[nodiscard]] auto is_intra(int t) const { return t % gop_size == 0; }
  [[nodiscard]] auto gop_index(int t) const { return t / gop_size; }
  [[nodiscard]] auto gop_start(int t) const { return t - t % gop_size; }

  friend auto operator==(const GopStructure &, const GopStructure &) -> bool = default;
};

// Applies one decoded P-frame difference to the previous reconstruction.
inline auto apply_prediction(const Frame &prev, const Residual &diff) -> Frame {
  verify(prev.same_shape(diff), Errc::dimension_mismatch, "prediction size mismatch");
  Frame out = prev;
  auto o = out.data();
  const auto d = diff.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<std::uint8_t>(std::clamp(o[i] + d[i], 0, 255));
  }
  return out;
}

struct EncodedGop {
  std::vector<EncodedFrame> frames;
  std::vector<Frame> reconstructions; // encoder-side decoded state per frame
};

inline auto encode_gop(std::span<const Frame> frames, const GopStructure &gop, int q, const QuantLadder &ladder = {})
    -> EncodedGop {
  gop.validate();
  verify(!frames.empty(), Errc::invalid_state, "no frames to encode");
  EncodedGop out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (gop.is_intra(static_cast<int>(t))) {
      auto e = encode_intra(frames[t], q, ladder);
      out.reconstructions.push_back(decode_intra(e, ladder));
      out.frames.push_back(std::move(e));
      continue;
    }
    const auto &prev = out.reconstructions.back();
    Residual diff(prev.width(), prev.height(), 3);
    auto dd = diff.data();
    const auto cur = frames[t].data();
    const auto pv = prev.data();
    for (std::size_t i = 0; i < dd.size(); ++i) {
      dd[i] = static_cast<std::int16_t>(cur[i] - pv[i]);
    }
    auto e = encode_samples(detail::widen(diff), FrameKind::predicted, q, ladder);
    out.reconstructions.push_back(apply_prediction(prev, decode_residual(e, ladder)));
    out.frames.push_back(std::move(e));
  }
  return out;
}

// Decodes frame k of a stream given the decoded predecessor (ignored for I).
inline auto decode_reference(const EncodedFrame &e, const Frame *prev, const QuantLadder &ladder = {}) -> Frame {
  if (e.kind == FrameKind::intra) {
    return decode_intra(e, ladder);
  }
  verify(e.kind == FrameKind::predicted && prev != nullptr, Errc::missing_frame, "P frame without predecessor");
  return apply_prediction(*prev, decode_residual(e, ladder));
}

// Frames of the same GOP that must be decoded before frame t, inclusive of t.
inline auto dependency_chain(const GopStructure &gop, int t) -> std::vector<int> {
  std::vector<int> chain;
  for (int k = gop.gop_start(t); k <= t; ++k) {
    chain.push_back(k);
  }
  return chain;
}

// ---------------------------------------------------------------------------

// Encodes at every ladder step and keeps the lower convex hull of
// (bits, distortion). The default distortion is the MSE of the decoded plane.
template <typename Plane>
auto rd_sweep(const Plane &img, const QuantLadder &ladder = {},
              const std::function<double(const Plane &decoded)> &distortion = {}) -> RDCurve {
  std::vector<RDPoint> pts;
  for (const int q : ladder.steps) {
    const auto e = encode_intra(img, q, ladder);
    Plane decoded;
    if constexpr (std::is_same_v<Plane, Frame>) {
      decoded = decode_intra(e, ladder);
    } else {
      decoded = decode_residual(e, ladder);
    }
    const double d = distortion ? distortion(decoded) : mse(img, decoded);
    pts.push_back({static_cast<double>(e.bits), d, q});
  }
  return RDCurve{{}, lower_hull(std::move(pts))};
}

} // namespace imv
