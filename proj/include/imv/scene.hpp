#pragma once

#include "core.hpp"

#include <random>
#include <string>
#include <vector>

namespace imv {

// Pinhole camera. Points map world -> camera as X_cam = R * X_world + t.
struct CameraParams {
  Mat3 intrinsic = identity3();
  Mat3 rotation = identity3();
  Vec3 translation{};
  int id{};

  [[nodiscard]] auto center() const -> Vec3 {
    const auto rt = transpose(rotation);
    const auto c = rt * translation;
    return {-c[0], -c[1], -c[2]};
  }

  friend auto operator==(const CameraParams &, const CameraParams &) -> bool = default;
};

inline constexpr double rotation_tolerance = 1e-9;

inline void validate_camera(const CameraParams &cam) {
  verify(orthonormality_error(cam.rotation) <= rotation_tolerance, Errc::bad_calibration,
         "rotation of camera " + std::to_string(cam.id) + " is not orthonormal");
  const auto &k = cam.intrinsic;
  verify(k[0][0] > 0.0 && k[1][1] > 0.0 && k[2][2] > 0.0, Errc::bad_calibration,
         "intrinsic focal entries must be positive");
  verify(k[1][0] == 0.0 && k[2][0] == 0.0 && k[2][1] == 0.0, Errc::bad_calibration,
         "intrinsic matrix must be upper triangular");
}

// Inverse of an upper-triangular intrinsic matrix.
inline auto intrinsic_inverse(const Mat3 &k) -> Mat3 {
  const double a = k[0][0];
  const double b = k[0][1];
  const double c = k[0][2];
  const double d = k[1][1];
  const double e = k[1][2];
  const double f = k[2][2];
  Mat3 r{};
  r[0][0] = 1.0 / a;
  r[0][1] = -b / (a * d);
  r[0][2] = (b * e - c * d) / (a * d * f);
  r[1][1] = 1.0 / d;
  r[1][2] = -e / (d * f);
  r[2][2] = 1.0 / f;
  return r;
}

inline auto make_intrinsic(double focal, double cx, double cy) -> Mat3 {
  return {{{focal, 0.0, cx}, {0.0, focal, cy}, {0.0, 0.0, 1.0}}};
}

// ---------------------------------------------------------------------------
// Depth: 16-bit codes linear in inverse depth. 65535 is z_near, 0 is z_far.

struct DepthRange {
  double z_near{1.0};
  double z_far{100.0};

  friend auto operator==(const DepthRange &, const DepthRange &) -> bool = default;
};

inline void validate_range(const DepthRange &r) {
  verify(r.z_near > 0.0 && r.z_near < r.z_far, Errc::degenerate_spec, "require 0 < z_near < z_far");
}

inline auto depth_from_code(std::uint16_t code, const DepthRange &r) -> double {
  const double inv_far = 1.0 / r.z_far;
  const double inv = inv_far + (static_cast<double>(code) / 65535.0) * (1.0 / r.z_near - inv_far);
  return 1.0 / inv;
}

inline auto code_from_depth(double z, const DepthRange &r) -> std::uint16_t {
  const double inv_far = 1.0 / r.z_far;
  const double s = (1.0 / z - inv_far) / (1.0 / r.z_near - inv_far);
  return static_cast<std::uint16_t>(std::clamp(std::lround(s * 65535.0), 0L, 65535L));
}

struct DepthMap {
  Image<std::uint16_t> codes;
  DepthRange range;

  [[nodiscard]] auto width() const { return codes.width(); }
  [[nodiscard]] auto height() const { return codes.height(); }

  friend auto operator==(const DepthMap &, const DepthMap &) -> bool = default;
};

// ---------------------------------------------------------------------------

struct ViewSequence {
  CameraParams camera;
  std::vector<Frame> frames;
  std::vector<DepthMap> depths;

  friend auto operator==(const ViewSequence &, const ViewSequence &) -> bool = default;
};

struct MultiviewSequence {
  std::vector<ViewSequence> views;
  int width{};
  int height{};
  int n_frames{};
  double fps{15.0};

  [[nodiscard]] auto n_views() const { return static_cast<int>(views.size()); }

  friend auto operator==(const MultiviewSequence &, const MultiviewSequence &) -> bool = default;
};

inline constexpr int max_block_size = 16;

inline void validate_sequence(const MultiviewSequence &seq) {
  verify(seq.width > 0 && seq.height > 0 && seq.width % max_block_size == 0 &&
             seq.height % max_block_size == 0,
         Errc::dimension_mismatch, "frame dimensions must be positive multiples of 16");
  verify(seq.n_frames > 0 && !seq.views.empty(), Errc::dimension_mismatch, "empty sequence");
  for (std::size_t v = 0; v < seq.views.size(); ++v) {
    const auto &view = seq.views[v];
    validate_camera(view.camera);
    verify(view.camera.id == static_cast<int>(v), Errc::bad_calibration, "camera ids must be 0..n-1");
    verify(static_cast<int>(view.frames.size()) == seq.n_frames &&
               static_cast<int>(view.depths.size()) == seq.n_frames,
           Errc::dimension_mismatch, "view " + std::to_string(v) + " has wrong frame count");
    for (int t = 0; t < seq.n_frames; ++t) {
      const auto &f = view.frames[t];
      const auto &d = view.depths[t];
      verify(f.width() == seq.width && f.height() == seq.height && f.channels() == 3,
             Errc::dimension_mismatch, "color frame size mismatch");
      verify(d.width() == seq.width && d.height() == seq.height && d.codes.channels() == 1,
             Errc::dimension_mismatch, "depth frame size mismatch");
      validate_range(d.range);
    }
  }
  // Left-to-right ordering along the rig: camera centers must progress along x.
  for (std::size_t v = 1; v < seq.views.size(); ++v) {
    verify(seq.views[v].camera.center()[0] > seq.views[v - 1].camera.center()[0],
           Errc::bad_calibration, "cameras are not in left-to-right order");
  }
}

// Reference views plus evenly spaced virtual views between each adjacent pair.
struct ViewGrid {
  int n_ref_views{3};
  int n_intermediate{2};

  [[nodiscard]] auto spacing() const { return n_intermediate + 1; }
  [[nodiscard]] auto total_views() const { return n_ref_views + (n_ref_views - 1) * n_intermediate; }
  [[nodiscard]] auto is_reference(int v) const { return v % spacing() == 0; }
  [[nodiscard]] auto view_of_ref(int r) const { return r * spacing(); }
  [[nodiscard]] auto ref_of_view(int v) const { return v / spacing(); }
  // Bracketing references of a virtual view.
  [[nodiscard]] auto left_ref(int v) const { return v / spacing(); }
  [[nodiscard]] auto right_ref(int v) const { return v / spacing() + 1; }
  [[nodiscard]] auto alpha(int v) const {
    return static_cast<double>(v % spacing()) / static_cast<double>(spacing());
  }

  friend auto operator==(const ViewGrid &, const ViewGrid &) -> bool = default;
};

// ---------------------------------------------------------------------------
// Virtual camera placement.

namespace detail {
using Quat = std::array<double, 4>; // w, x, y, z

inline auto quat_from_matrix(const Mat3 &m) -> Quat {
  const double tr = m[0][0] + m[1][1] + m[2][2];
  Quat q{};
  if (tr > 0.0) {
    const double s = std::sqrt(tr + 1.0) * 2.0;
    q = {0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s};
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
    q = {(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s};
  } else if (m[1][1] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
    q = {(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s};
  } else {
    const double s = std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
    q = {(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s};
  }
  return q;
}

inline auto matrix_from_quat(Quat q) -> Mat3 {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (auto &c : q) {
    c /= n;
  }
  const auto [w, x, y, z] = q;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}
} // namespace detail

// Linear interpolation of intrinsics and translation; rotation by normalized
// quaternion lerp. alpha = 0 and alpha = 1 return the endpoints unchanged.
inline auto interpolate_camera(const CameraParams &left, const CameraParams &right, double alpha)
    -> CameraParams {
  if (alpha <= 0.0) {
    return left;
  }
  if (alpha >= 1.0) {
    return right;
  }
  CameraParams out;
  out.id = left.id;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      out.intrinsic[i][j] = left.intrinsic[i][j] + alpha * (right.intrinsic[i][j] - left.intrinsic[i][j]);
    }
    out.translation[i] = left.translation[i] + alpha * (right.translation[i] - left.translation[i]);
  }
  if (left.rotation == right.rotation) {
    out.rotation = left.rotation;
    return out;
  }
  const auto q0 = detail::quat_from_matrix(left.rotation);
  auto q1 = detail::quat_from_matrix(right.rotation);
  const double dot = q0[0] * q1[0] + q0[1] * q1[1] + q0[2] * q1[2] + q0[3] * q1[3];
  if (dot < 0.0) {
    for (auto &c : q1) {
      c = -c;
    }
  }
  detail::Quat q{};
  for (int i = 0; i < 4; ++i) {
    q[i] = (1.0 - alpha) * q0[i] + alpha * q1[i];
  }
  out.rotation = detail::matrix_from_quat(q);
  return out;
}

// Camera for any view on the grid: references come from the sequence, virtual
// views sit at alpha = k / (n_intermediate + 1) between their references.
inline auto camera_for_view(const std::vector<CameraParams> &refs, const ViewGrid &grid, int v)
    -> CameraParams {
  if (grid.is_reference(v)) {
    return refs.at(grid.ref_of_view(v));
  }
  auto cam = interpolate_camera(refs.at(grid.left_ref(v)), refs.at(grid.right_ref(v)), grid.alpha(v));
  cam.id = v;
  return cam;
}

inline auto reference_cameras(const MultiviewSequence &seq) -> std::vector<CameraParams> {
  std::vector<CameraParams> cams;
  cams.reserve(seq.views.size());
  for (const auto &view : seq.views) {
    cams.push_back(view.camera);
  }
  return cams;
}

// ---------------------------------------------------------------------------
// Synthetic scenes: textured fronto-parallel rectangles in front of a rig of
// cameras with identity rotation spaced along the x axis.

struct SceneRect {
  double x0{}, y0{}, x1{}, y1{}; // world extent at frame 0
  double z{};                    // world depth of the plane
  double vx{}, vy{};             // world units per frame

  friend auto operator==(const SceneRect &, const SceneRect &) -> bool = default;
};

struct SceneSpec {
  int width{128};
  int height{128};
  int n_views{3};
  int n_frames{32};
  double fps{15.0};
  double focal{100.0};
  double baseline{0.24};
  DepthRange range{2.0, 16.0};
  double noise_amplitude{10.0}; // texel noise, 8-bit levels
  double texel_pixels{4.0};     // texel edge in pixels at the plane's depth
  std::vector<SceneRect> rects;

  friend auto operator==(const SceneSpec &, const SceneSpec &) -> bool = default;
};

inline void validate_scene_spec(const SceneSpec &spec) {
  verify(!spec.rects.empty(), Errc::degenerate_spec, "scene has no rectangles");
  verify(spec.width > 0 && spec.height > 0 && spec.width % max_block_size == 0 &&
             spec.height % max_block_size == 0,
         Errc::degenerate_spec, "scene dimensions must be positive multiples of 16");
  verify(spec.n_views >= 1 && spec.n_frames >= 1, Errc::degenerate_spec, "need views and frames");
  verify(spec.focal > 0.0 && spec.baseline > 0.0, Errc::degenerate_spec, "focal and baseline must be > 0");
  verify(spec.texel_pixels > 0.0, Errc::degenerate_spec, "texel size must be > 0");
  validate_range(spec.range);
  for (const auto &r : spec.rects) {
    verify(r.z > 0.0, Errc::degenerate_spec, "rectangle depth must be > 0");
    verify(r.z >= spec.range.z_near && r.z <= spec.range.z_far, Errc::degenerate_spec,
           "rectangle depth outside depth range");
    verify(r.x1 > r.x0 && r.y1 > r.y0, Errc::degenerate_spec, "rectangle has no area");
  }
}

inline auto synthetic_camera(const SceneSpec &spec, int view) -> CameraParams {
  CameraParams cam;
  cam.id = view;
  cam.intrinsic = make_intrinsic(spec.focal, spec.width / 2.0, spec.height / 2.0);
  const double cx = (view - (spec.n_views - 1) / 2.0) * spec.baseline;
  cam.translation = {-cx, 0.0, 0.0};
  return cam;
}

namespace detail {
inline auto texel_noise(std::uint64_t seed, std::size_t rect, std::int64_t i, std::int64_t j, int c) -> double {
  auto h = splitmix64(seed ^ (rect * 0x9E3779B97F4A7C15ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(i) * 0xC2B2AE3D27D4EB4FULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(j) * 0x165667B19E3779F9ULL);
  h = splitmix64(h + static_cast<std::uint64_t>(c));
  return static_cast<double>(h >> 11U) * 0x1.0p-53 * 2.0 - 1.0;
}

struct RectLook {
  std::array<double, 3> base{};
  std::array<double, 3> amp{};
  double wx{}, wy{}, phase{};
};

inline auto rect_look(std::uint64_t seed, std::size_t rect) -> RectLook {
  std::mt19937_64 rng(splitmix64(seed * 31U + rect + 1U));
  RectLook look;
  for (int c = 0; c < 3; ++c) {
    look.base[c] = uniform_real(rng, 100.0, 150.0);
    look.amp[c] = uniform_real(rng, 15.0, 45.0);
  }
  look.wx = uniform_real(rng, 0.6, 2.5);
  look.wy = uniform_real(rng, 0.6, 2.5);
  look.phase = uniform_real(rng, 0.0, 6.283185307179586);
  return look;
}
} // namespace detail

struct RenderedView {
  Frame color;
  DepthMap depth;
  // Index of the visible rectangle per pixel, -1 where nothing was hit.
  std::vector<int> surface;
};

// Ray-casts the scene into an arbitrary camera at frame t.
inline auto render_view(const SceneSpec &spec, std::uint64_t seed, const CameraParams &cam, int t)
    -> RenderedView {
  RenderedView out{make_frame(spec.width, spec.height),
                   {Image<std::uint16_t>(spec.width, spec.height, 1), spec.range},
                   std::vector<int>(static_cast<std::size_t>(spec.width) * spec.height, -1)};
  std::vector<detail::RectLook> looks;
  looks.reserve(spec.rects.size());
  for (std::size_t i = 0; i < spec.rects.size(); ++i) {
    looks.push_back(detail::rect_look(seed, i));
  }
  const auto kinv = intrinsic_inverse(cam.intrinsic);
  const auto rt = transpose(cam.rotation);
  const auto c = cam.center();
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const auto dir = rt * (kinv * Vec3{static_cast<double>(x), static_cast<double>(y), 1.0});
      int best = -1;
      double best_depth = std::numeric_limits<double>::infinity();
      Vec3 best_point{};
      for (std::size_t i = 0; i < spec.rects.size(); ++i) {
        const auto &r = spec.rects[i];
        if (dir[2] <= 0.0) {
          continue;
        }
        const double s = (r.z - c[2]) / dir[2];
        if (s <= 0.0) {
          continue;
        }
        const auto p = c + s * dir;
        const double ox = r.vx * t;
        const double oy = r.vy * t;
        if (p[0] < r.x0 + ox || p[0] >= r.x1 + ox || p[1] < r.y0 + oy || p[1] >= r.y1 + oy) {
          continue;
        }
        const double cam_z = (cam.rotation * p + cam.translation)[2];
        if (cam_z < best_depth) {
          best_depth = cam_z;
          best = static_cast<int>(i);
          best_point = p;
        }
      }
      const auto pix = static_cast<std::size_t>(y) * spec.width + x;
      out.surface[pix] = best;
      if (best < 0) {
        out.depth.codes(x, y) = 0;
        continue;
      }
      const auto &r = spec.rects[best];
      const auto &look = looks[best];
      const double lx = best_point[0] - (r.x0 + r.vx * t);
      const double ly = best_point[1] - (r.y0 + r.vy * t);
      const double texel = spec.texel_pixels * r.z / spec.focal;
      const auto ti = static_cast<std::int64_t>(std::floor(lx / texel));
      const auto tj = static_cast<std::int64_t>(std::floor(ly / texel));
      for (int ch = 0; ch < 3; ++ch) {
        const double smooth = look.amp[ch] * std::sin(look.wx * lx * 6.283185307179586 + look.phase) *
                              std::cos(look.wy * ly * 6.283185307179586 + ch);
        const double noise = spec.noise_amplitude * detail::texel_noise(seed, best, ti, tj, ch);
        out.color(x, y, ch) =
            static_cast<std::uint8_t>(std::clamp(std::lround(look.base[ch] + smooth + noise), 0L, 255L));
      }
      out.depth.codes(x, y) = code_from_depth(best_depth, spec.range);
    }
  }
  return out;
}

inline auto generate_synthetic_scene(const SceneSpec &spec, std::uint64_t seed) -> MultiviewSequence {
  validate_scene_spec(spec);
  MultiviewSequence seq;
  seq.width = spec.width;
  seq.height = spec.height;
  seq.n_frames = spec.n_frames;
  seq.fps = spec.fps;
  for (int v = 0; v < spec.n_views; ++v) {
    ViewSequence view;
    view.camera = synthetic_camera(spec, v);
    for (int t = 0; t < spec.n_frames; ++t) {
      auto r = render_view(spec, seed, view.camera, t);
      view.frames.push_back(std::move(r.color));
      view.depths.push_back(std::move(r.depth));
    }
    seq.views.push_back(std::move(view));
  }
  return seq;
}

// A seeded scene: a wide background plane plus 2-3 moving foreground cards.
inline auto random_scene_spec(std::uint64_t seed, int width = 128, int height = 128, int n_views = 3,
                              int n_frames = 32) -> SceneSpec {
  SceneSpec spec;
  spec.width = width;
  spec.height = height;
  spec.n_views = n_views;
  spec.n_frames = n_frames;
  // Fine, strong texture: misplaced pixels inside a block show up in the
  // residual instead of blending into a smooth surface.
  spec.texel_pixels = 2.0;
  spec.noise_amplitude = 20.0;
  // Wide rig: card edges land several pixels off between neighboring views.
  spec.baseline = 0.8;
  std::mt19937_64 rng(splitmix64(seed ^ 0x5CE7E5EEDULL));
  const double bg_z = uniform_real(rng, 9.0, 12.0);
  const double half_w = bg_z * width / spec.focal;
  const double half_h = bg_z * height / spec.focal;
  spec.rects.push_back({-2.0 * half_w, -2.0 * half_h, 2.0 * half_w, 2.0 * half_h, bg_z, 0.0, 0.0});
  const int n_cards = uniform_int(rng, 2, 3);
  for (int i = 0; i < n_cards; ++i) {
    const double z = uniform_real(rng, 2.6, 6.0) + 0.5 * i;
    const double view_half = 0.5 * z * width / spec.focal;
    const double w = uniform_real(rng, 0.25, 0.45) * 2.0 * view_half;
    const double h = uniform_real(rng, 0.25, 0.5) * 2.0 * view_half;
    const double cx = uniform_real(rng, -0.6, 0.6) * view_half;
    const double cy = uniform_real(rng, -0.6, 0.6) * view_half;
    // Up to about half a pixel of image motion per frame.
    const double px = z / spec.focal;
    const double vx = uniform_real(rng, -0.5, 0.5) * px;
    const double vy = uniform_real(rng, -0.3, 0.3) * px;
    spec.rects.push_back({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2, z, vx, vy});
  }
  return spec;
}

} // namespace imv
