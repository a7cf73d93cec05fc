#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

using namespace imv;

namespace {

auto textured(int w, int h) -> Frame {
  Frame f = make_frame(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        f(x, y, c) = static_cast<std::uint8_t>((x * 7 + y * 13 + c * 50) % 256);
      }
    }
  }
  return f;
}

auto constant_depth(int w, int h, double z, const DepthRange &r) -> DepthMap {
  return {Image<std::uint16_t>(w, h, 1, code_from_depth(z, r)), r};
}

auto camera(double tx) -> CameraParams {
  CameraParams c;
  c.intrinsic = make_intrinsic(100.0, 16.0, 16.0);
  c.translation = {tx, 0.0, 0.0};
  return c;
}

} // namespace

TEST_CASE("downsample takes the lower median") {
  DepthMap d{Image<std::uint16_t>(4, 4, 1), {}};
  std::uint16_t v = 16;
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      d.codes(x, y) = v--;
    }
  }
  const auto b = downsample_depth(d, 4);
  REQUIRE(b.codes.width() == 1);
  CHECK(b.codes(0, 0) == 8);
}

TEST_CASE("downsample of constant depth and b = 1") {
  const DepthRange r{2.0, 16.0};
  const auto d = constant_depth(32, 32, 5.0, r);
  for (const int b : {4, 8, 16}) {
    const auto out = downsample_depth(d, b);
    CHECK(out.codes.width() == 32 / b);
    for (const auto c : out.codes.vec()) {
      CHECK(c == d.codes(0, 0));
    }
  }
  auto noisy = d;
  noisy.codes(3, 7) = 17;
  CHECK(downsample_depth(noisy, 1).codes == noisy.codes);
  CHECK_THROWS_AS(downsample_depth(d, 3), Error);
}

TEST_CASE("identity camera reproduces the source") {
  const DepthRange r{2.0, 16.0};
  const auto color = textured(32, 32);
  const auto cam = camera(0.0);
  for (const int b : {1, 4, 8, 16}) {
    const auto p = project_view(color, downsample_depth(constant_depth(32, 32, 6.0, r), b), cam, cam);
    CHECK(p.image.pixels == color);
    CHECK(p.image.hole_count() == 0);
    CHECK(p.stats.point_projections == static_cast<std::uint64_t>((32 / b) * (32 / b)));
  }
}

TEST_CASE("horizontal baseline shifts by round(f tx / z)") {
  const DepthRange r{2.0, 16.0};
  const auto color = textured(32, 32);
  const double z = 5.0;
  const double tx = 0.12; // 100 * 0.12 / 5 = 2.4 -> 2
  const auto d = constant_depth(32, 32, z, r);
  const double zq = depth_from_code(d.codes(0, 0), r);
  const int shift = static_cast<int>(std::lround(100.0 * tx / zq));
  REQUIRE(shift == 2);
  for (const int b : {1, 8}) {
    const auto p = project_view(color, downsample_depth(d, b), camera(0.0), camera(tx));
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const bool hole = p.image.hole[static_cast<std::size_t>(y) * 32 + x] != 0;
        if (x < shift) {
          CHECK(hole);
        } else {
          REQUIRE_FALSE(hole);
          REQUIRE(p.image.pixels(x, y, 1) == color(x - shift, y, 1));
        }
      }
    }
  }
}

TEST_CASE("holes open exactly on the uncovered background strip") {
  // Background at z = 10, a near card at z = 4 covering pixels 12..19 of the
  // source view (edges fall between pixel centres). Moving the camera right by tx shifts the card by f tx / 4 and
  // the background by f tx / 10; the strip in between is uncovered.
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.n_views = 1;
  spec.n_frames = 1;
  spec.texel_pixels = 1.0;
  spec.rects.push_back({-100, -100, 100, 100, 10.0, 0, 0});
  spec.rects.push_back({(11.5 - 16) * 4.0 / 100, -100, (19.5 - 16) * 4.0 / 100, 100, 4.0, 0, 0});
  const auto src = camera(0.0);
  const auto dst = camera(-0.2); // camera moves to +x
  const auto view = render_view(spec, 1, src, 0);
  const auto p = project_view(view.color, downsample_depth(view.depth, 1), src, dst);
  // Oracle: pixels of the destination whose ray hits the background but whose
  // background point is hidden by the card in the source view.
  const auto truth = render_view(spec, 1, dst, 0);
  int expected = 0;
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const auto k = static_cast<std::size_t>(y) * 32 + x;
      const double z = depth_from_code(view.depth.codes(0, 0), spec.range);
      const int bg_src_x = x - static_cast<int>(std::lround(100.0 * -0.2 / z));
      const bool visible_bg = truth.surface[k] == 0;
      const bool hidden = bg_src_x >= 0 && bg_src_x < 32 && view.surface[static_cast<std::size_t>(y) * 32 + bg_src_x] == 1;
      const bool off_frame = bg_src_x < 0 || bg_src_x >= 32;
      const bool should_hole = visible_bg && (hidden || off_frame);
      expected += should_hole ? 1 : 0;
      REQUIRE((p.image.hole[k] != 0) == should_hole);
    }
  }
  CHECK(expected > 0);
}

TEST_CASE("fusion weights") {
  ProjectedImage l(2, 1);
  ProjectedImage r(2, 1);
  for (int c = 0; c < 3; ++c) {
    l.pixels(0, 0, c) = 100;
    r.pixels(0, 0, c) = 200;
    l.pixels(1, 0, c) = 11;
  }
  l.hole = {0, 0};
  r.hole = {0, 1};
  l.zbuf = {5.0, 5.0};
  r.zbuf = {5.0, std::numeric_limits<double>::infinity()};

  SECTION("inverse distance") {
    const auto f = fuse_projections(l, r, 1.0, 3.0);
    CHECK(f.image.pixels(0, 0, 0) == 125);
    CHECK(f.image.pixels(1, 0, 0) == 11);
    CHECK(f.stats.fusion_blends == 1);
  }
  SECTION("equal distances average") {
    r.pixels(0, 0, 0) = 201;
    const auto f = fuse_projections(l, r, 2.0, 2.0);
    CHECK(f.image.pixels(0, 0, 0) == 151);
    CHECK(f.image.pixels(0, 0, 1) == 150);
  }
  SECTION("right all holes gives left") {
    r.hole = {1, 1};
    const auto f = fuse_projections(l, r, 1.0, 1.0);
    CHECK(f.image.pixels == l.pixels);
    CHECK(f.image.hole == l.hole);
  }
}
