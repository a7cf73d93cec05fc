#pragma once

#include "projection.hpp"

#include <atomic>
#include <optional>

namespace imv {

struct FrameId {
  int v{};
  int t{};

  friend auto operator==(const FrameId &, const FrameId &) -> bool = default;
  friend auto operator<=>(const FrameId &, const FrameId &) = default;
};

struct SynthesisConfig {
  int block_size{8};
  int n_refs{2};
  int inpaint_max_iters{1 << 16};
};

inline void validate_config(const SynthesisConfig &cfg, int width, int height) {
  verify(is_valid_block_size(cfg.block_size), Errc::bad_dimensions, "block size must be 1, 4, 8 or 16");
  verify(cfg.n_refs == 1 || cfg.n_refs == 2, Errc::invalid_state, "n_refs must be 1 or 2");
  verify(cfg.inpaint_max_iters >= width + height, Errc::invalid_state, "inpaint_max_iters must be >= W + H");
}

// Process-wide count of inpaint() calls, for complexity accounting.
inline std::atomic<std::uint64_t> inpaint_invocations{0};

// Background-biased hole filling. Each sweep fills, from the state at the start
// of the sweep, every hole pixel that touches a non-hole 8-neighbour, with the
// rounded mean of the neighbours whose depth is within 10% of the farthest
// neighbour. Inside one connected hole region only the pixels whose farthest
// neighbour is within 10% of the region's farthest frontier depth are filled,
// so a region grows inward from its background side. With background_gate off
// this reduces to a plain neighbour average.
inline auto inpaint(const ProjectedImage &img, bool background_gate = true,
                    int max_iters = std::numeric_limits<int>::max(), std::uint64_t *sweeps_out = nullptr)
    -> Frame {
  inpaint_invocations.fetch_add(1, std::memory_order_relaxed);
  const int w = img.width();
  const int h = img.height();
  Frame out = img.pixels;
  auto hole = img.hole;
  auto zbuf = img.zbuf;
  std::size_t remaining = img.hole_count();
  std::uint64_t sweeps = 0;

  if (remaining == hole.size()) {
    std::fill(out.data().begin(), out.data().end(), std::uint8_t{128});
    if (sweeps_out != nullptr) {
      *sweeps_out = 0;
    }
    return out;
  }

  constexpr double gate = 0.9;
  std::vector<int> label(hole.size(), -1);
  std::vector<double> region_max;
  std::vector<double> frontier_max(hole.size(), 0.0);
  std::vector<std::size_t> stack;
  struct Fill {
    std::size_t k;
    std::array<std::uint8_t, 3> rgb;
    double z;
  };
  std::vector<Fill> fills;

  auto for_neighbours = [&](std::size_t k, auto &&fn) {
    const int x = static_cast<int>(k % w);
    const int y = static_cast<int>(k / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if ((dx != 0 || dy != 0) && x + dx >= 0 && x + dx < w && y + dy >= 0 && y + dy < h) {
          fn(static_cast<std::size_t>(y + dy) * w + (x + dx));
        }
      }
    }
  };

  while (remaining > 0) {
    const bool gated = background_gate && static_cast<int>(sweeps) < max_iters;
    ++sweeps;

    // Farthest non-hole neighbour of each frontier pixel.
    for (std::size_t k = 0; k < hole.size(); ++k) {
      frontier_max[k] = -1.0;
      if (hole[k] == 0) {
        continue;
      }
      for_neighbours(k, [&](std::size_t n) {
        if (hole[n] == 0) {
          frontier_max[k] = std::max(frontier_max[k], zbuf[n]);
        }
      });
    }

    if (gated) {
      std::fill(label.begin(), label.end(), -1);
      region_max.clear();
      for (std::size_t k = 0; k < hole.size(); ++k) {
        if (hole[k] == 0 || label[k] >= 0) {
          continue;
        }
        const int id = static_cast<int>(region_max.size());
        double best = -1.0;
        stack.assign(1, k);
        label[k] = id;
        while (!stack.empty()) {
          const auto cur = stack.back();
          stack.pop_back();
          best = std::max(best, frontier_max[cur]);
          for_neighbours(cur, [&](std::size_t n) {
            if (hole[n] != 0 && label[n] < 0) {
              label[n] = id;
              stack.push_back(n);
            }
          });
        }
        region_max.push_back(best);
      }
    }

    fills.clear();
    for (std::size_t k = 0; k < hole.size(); ++k) {
      if (hole[k] == 0 || frontier_max[k] < 0.0) {
        continue;
      }
      if (gated && frontier_max[k] < gate * region_max[label[k]]) {
        continue;
      }
      const double zmax = frontier_max[k];
      std::array<int, 3> sum{};
      int count = 0;
      for_neighbours(k, [&](std::size_t n) {
        if (hole[n] == 0 && (!background_gate || zbuf[n] >= gate * zmax)) {
          const int x = static_cast<int>(n % w);
          const int y = static_cast<int>(n / w);
          for (int c = 0; c < 3; ++c) {
            sum[c] += out(x, y, c);
          }
          ++count;
        }
      });
      Fill f{k, {}, zmax};
      for (int c = 0; c < 3; ++c) {
        f.rgb[c] = static_cast<std::uint8_t>(std::lround(static_cast<double>(sum[c]) / count));
      }
      fills.push_back(f);
    }

    for (const auto &f : fills) {
      const int x = static_cast<int>(f.k % w);
      const int y = static_cast<int>(f.k / w);
      for (int c = 0; c < 3; ++c) {
        out(x, y, c) = f.rgb[c];
      }
      hole[f.k] = 0;
      zbuf[f.k] = f.z;
    }
    remaining -= fills.size();
  }
  if (sweeps_out != nullptr) {
    *sweeps_out = sweeps;
  }
  return out;
}

// Reference data fed to a synthesis path: color, per-block depth and camera.
struct RefView {
  const Frame *color{};
  const BlockDepthMap *depth{};
  CameraParams camera;
};

// Decoder-side synthesis: block projection of each reference, fused when there
// are two. Holes are left in place.
inline auto noncomplex_vvs(std::span<const RefView> refs, const CameraParams &target, const SynthesisConfig &cfg)
    -> Projection {
  verify(static_cast<int>(refs.size()) == cfg.n_refs, Errc::invalid_state, "reference count != n_refs");
  for (const auto &r : refs) {
    verify(r.depth->block_size == cfg.block_size, Errc::invalid_state, "depth block size != configured block size");
  }
  auto first = project_view(*refs[0].color, *refs[0].depth, refs[0].camera, target);
  if (refs.size() == 1) {
    return first;
  }
  auto second = project_view(*refs[1].color, *refs[1].depth, refs[1].camera, target);
  const auto c = target.center();
  auto fused = fuse_projections(first.image, second.image, norm(refs[0].camera.center() - c),
                                norm(refs[1].camera.center() - c));
  fused.stats += first.stats;
  fused.stats += second.stats;
  return fused;
}

struct OriginalRef {
  const Frame *color{};
  const DepthMap *depth{};
  CameraParams camera;
};

// Server-side target: dense projection from both originals, fusion, inpainting.
inline auto complex_vvs(const OriginalRef &left, const OriginalRef &right, const CameraParams &target) -> Frame {
  const auto dl = downsample_depth(*left.depth, 1);
  const auto dr = downsample_depth(*right.depth, 1);
  const auto pl = project_view(*left.color, dl, left.camera, target);
  const auto pr = project_view(*right.color, dr, right.camera, target);
  const auto c = target.center();
  const auto fused =
      fuse_projections(pl.image, pr.image, norm(left.camera.center() - c), norm(right.camera.center() - c));
  return inpaint(fused.image);
}

struct EFrame {
  Residual residual;
  FrameId frame_id;
  int block_size{};
  std::pair<int, int> ref_pair{};
};

// residual = complex - noncomplex, hole pixels counting as 0.
inline auto make_eframe(const ProjectedImage &noncomplex_out, const Frame &complex_out, FrameId id,
                        const SynthesisConfig &cfg, std::pair<int, int> ref_pair = {}) -> EFrame {
  verify(noncomplex_out.pixels.same_shape(complex_out), Errc::dimension_mismatch, "e-frame inputs differ in size");
  EFrame e{Residual(complex_out.width(), complex_out.height(), 3), id, cfg.block_size, ref_pair};
  const int w = complex_out.width();
  for (int y = 0; y < complex_out.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const bool is_hole = noncomplex_out.hole[static_cast<std::size_t>(y) * w + x] != 0;
      for (int c = 0; c < 3; ++c) {
        const int base = is_hole ? 0 : noncomplex_out.pixels(x, y, c);
        e.residual(x, y, c) = static_cast<std::int16_t>(complex_out(x, y, c) - base);
      }
    }
  }
  return e;
}

// The entire decoder-side enhancement: add the residual and clamp.
inline auto apply_eframe(const ProjectedImage &noncomplex_out, const Residual &residual) -> Frame {
  verify(noncomplex_out.pixels.same_shape(residual), Errc::dimension_mismatch, "residual does not match frame");
  Frame out = make_frame(residual.width(), residual.height());
  const int w = residual.width();
  for (int y = 0; y < residual.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const bool is_hole = noncomplex_out.hole[static_cast<std::size_t>(y) * w + x] != 0;
      for (int c = 0; c < 3; ++c) {
        const int base = is_hole ? 0 : noncomplex_out.pixels(x, y, c);
        out(x, y, c) = static_cast<std::uint8_t>(std::clamp(base + residual(x, y, c), 0, 255));
      }
    }
  }
  return out;
}

inline auto apply_eframe(const ProjectedImage &noncomplex_out, const EFrame &e) -> Frame {
  return apply_eframe(noncomplex_out, e.residual);
}

inline auto residual_variance(const Residual &r) -> double {
  const auto d = r.data();
  if (d.empty()) {
    return 0.0;
  }
  double sum = 0.0;
  double sq = 0.0;
  for (const auto s : d) {
    sum += s;
    sq += static_cast<double>(s) * s;
  }
  const double n = static_cast<double>(d.size());
  const double mean = sum / n;
  return sq / n - mean * mean;
}

} // namespace imv
