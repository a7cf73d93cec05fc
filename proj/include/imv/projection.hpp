#pragma once

#include "scene.hpp"

#include <algorithm>
#include <limits>

namespace imv {

inline auto is_valid_block_size(int b) { return b == 1 || b == 4 || b == 8 || b == 16; }

// One depth code per b x b block of the source image.
struct BlockDepthMap {
  Image<std::uint16_t> codes;
  int block_size{1};
  DepthRange range;

  friend auto operator==(const BlockDepthMap &, const BlockDepthMap &) -> bool = default;
};

struct ProjectedImage {
  Frame pixels;
  std::vector<std::uint8_t> hole; // 1 where no source pixel landed
  std::vector<double> zbuf;       // camera-space depth, +inf on holes

  ProjectedImage() = default;
  ProjectedImage(int width, int height)
      : pixels(make_frame(width, height)), hole(static_cast<std::size_t>(width) * height, 1),
        zbuf(static_cast<std::size_t>(width) * height, std::numeric_limits<double>::infinity()) {}

  [[nodiscard]] auto width() const { return pixels.width(); }
  [[nodiscard]] auto height() const { return pixels.height(); }
  [[nodiscard]] auto hole_count() const -> std::size_t {
    return static_cast<std::size_t>(std::count(hole.begin(), hole.end(), std::uint8_t{1}));
  }
};

struct ProjectionStats {
  std::uint64_t point_projections{};
  std::uint64_t pixels_copied{};
  std::uint64_t fusion_blends{};

  auto operator+=(const ProjectionStats &o) -> ProjectionStats & {
    point_projections += o.point_projections;
    pixels_copied += o.pixels_copied;
    fusion_blends += o.fusion_blends;
    return *this;
  }
  friend auto operator==(const ProjectionStats &, const ProjectionStats &) -> bool = default;
};

struct Projection {
  ProjectedImage image;
  ProjectionStats stats;
};

// Each cell takes the lower median of its b x b codes; b = 1 is the identity.
inline auto downsample_depth(const DepthMap &d, int b) -> BlockDepthMap {
  verify(is_valid_block_size(b), Errc::bad_dimensions, "block size must be 1, 4, 8 or 16");
  verify(d.width() % b == 0 && d.height() % b == 0, Errc::bad_dimensions, "block size must divide depth map");
  if (b == 1) {
    return {d.codes, 1, d.range};
  }
  BlockDepthMap out{Image<std::uint16_t>(d.width() / b, d.height() / b, 1), b, d.range};
  std::vector<std::uint16_t> cell(static_cast<std::size_t>(b) * b);
  for (int by = 0; by < out.codes.height(); ++by) {
    for (int bx = 0; bx < out.codes.width(); ++bx) {
      std::size_t k = 0;
      for (int y = 0; y < b; ++y) {
        for (int x = 0; x < b; ++x) {
          cell[k++] = d.codes(bx * b + x, by * b + y);
        }
      }
      const auto mid = cell.begin() + static_cast<std::ptrdiff_t>((cell.size() - 1) / 2);
      std::nth_element(cell.begin(), mid, cell.end());
      out.codes(bx, by) = *mid;
    }
  }
  return out;
}

// Forward-warps src_color into dst_cam, one displacement per depth block.
// Blocks are visited in raster order; a later block only overwrites a pixel
// when strictly nearer, so equal-depth ties keep the earlier block.
inline auto project_view(const Frame &src_color, const BlockDepthMap &src_depth, const CameraParams &src_cam,
                         const CameraParams &dst_cam) -> Projection {
  const int b = src_depth.block_size;
  const int w = src_color.width();
  const int h = src_color.height();
  verify(src_depth.codes.width() * b == w && src_depth.codes.height() * b == h, Errc::dimension_mismatch,
         "block depth map does not match color frame");

  Projection out{ProjectedImage(w, h), {}};
  auto &img = out.image;
  const auto kinv = intrinsic_inverse(src_cam.intrinsic);
  const auto src_rt = transpose(src_cam.rotation);
  const double half = (b - 1) / 2.0;

  for (int by = 0; by < src_depth.codes.height(); ++by) {
    for (int bx = 0; bx < src_depth.codes.width(); ++bx) {
      const double u = bx * b + half;
      const double v = by * b + half;
      const double z = depth_from_code(src_depth.codes(bx, by), src_depth.range);

      // image -> source camera -> world -> destination camera -> image
      const auto ray = kinv * Vec3{u, v, 1.0};
      const auto x_cam = z * ray;
      const auto x_world = src_rt * (x_cam - src_cam.translation);
      const auto x_dst = dst_cam.rotation * x_world + dst_cam.translation;
      const auto p = dst_cam.intrinsic * x_dst;
      ++out.stats.point_projections;
      const double z_dst = x_dst[2];
      if (!(z_dst > 0.0)) {
        continue;
      }
      const auto dx = static_cast<int>(std::lround(p[0] / p[2] - u));
      const auto dy = static_cast<int>(std::lround(p[1] / p[2] - v));

      for (int y = by * b; y < (by + 1) * b; ++y) {
        const int ty = y + dy;
        if (ty < 0 || ty >= h) {
          continue;
        }
        for (int x = bx * b; x < (bx + 1) * b; ++x) {
          const int tx = x + dx;
          if (tx < 0 || tx >= w) {
            continue;
          }
          const auto k = static_cast<std::size_t>(ty) * w + tx;
          if (z_dst < img.zbuf[k]) {
            img.zbuf[k] = z_dst;
            img.hole[k] = 0;
            for (int c = 0; c < 3; ++c) {
              img.pixels(tx, ty, c) = src_color(x, y, c);
            }
            ++out.stats.pixels_copied;
          }
        }
      }
    }
  }
  return out;
}

// Blends two projections with weights proportional to 1/distance. A zero
// distance gives that side full weight.
inline auto fuse_projections(const ProjectedImage &left, const ProjectedImage &right, double left_dist,
                             double right_dist) -> Projection {
  verify(left.width() == right.width() && left.height() == right.height(), Errc::dimension_mismatch,
         "fusion inputs differ in size");
  double wl = 0.5;
  if (left_dist <= 0.0 && right_dist > 0.0) {
    wl = 1.0;
  } else if (right_dist <= 0.0 && left_dist > 0.0) {
    wl = 0.0;
  } else if (left_dist > 0.0 && right_dist > 0.0) {
    wl = (1.0 / left_dist) / (1.0 / left_dist + 1.0 / right_dist);
  }
  const double wr = 1.0 - wl;

  Projection out{ProjectedImage(left.width(), left.height()), {}};
  auto &img = out.image;
  const int w = left.width();
  for (std::size_t k = 0; k < img.hole.size(); ++k) {
    const int x = static_cast<int>(k % w);
    const int y = static_cast<int>(k / w);
    const bool l = left.hole[k] == 0;
    const bool r = right.hole[k] == 0;
    if (l && r) {
      for (int c = 0; c < 3; ++c) {
        img.pixels(x, y, c) = static_cast<std::uint8_t>(
            std::lround(wl * left.pixels(x, y, c) + wr * right.pixels(x, y, c)));
      }
      img.zbuf[k] = std::min(left.zbuf[k], right.zbuf[k]);
      img.hole[k] = 0;
      ++out.stats.fusion_blends;
    } else if (l || r) {
      const auto &src = l ? left : right;
      for (int c = 0; c < 3; ++c) {
        img.pixels(x, y, c) = src.pixels(x, y, c);
      }
      img.zbuf[k] = src.zbuf[k];
      img.hole[k] = 0;
    }
  }
  return out;
}

} // namespace imv
