#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

using namespace imv;

namespace {

void set_pixel(ProjectedImage &img, int x, int y, std::uint8_t value, double z) {
  const auto k = static_cast<std::size_t>(y) * img.width() + x;
  for (int c = 0; c < 3; ++c) {
    img.pixels(x, y, c) = value;
  }
  img.hole[k] = 0;
  img.zbuf[k] = z;
}

struct Fixture {
  MultiviewSequence seq;
  ViewGrid grid{3, 1};
  std::vector<CameraParams> cams;
  std::vector<std::vector<Frame>> dec;

  Fixture() : seq(generate_synthetic_scene(random_scene_spec(11, 64, 64, 3, 2), 11)), cams(reference_cameras(seq)) {
    for (const auto &v : seq.views) {
      dec.push_back(encode_gop(v.frames, {8}, 8).reconstructions);
    }
  }

  [[nodiscard]] auto depth(int r, int b) const -> BlockDepthMap {
    return downsample_depth(seq.views[static_cast<std::size_t>(r)].depths[0], b);
  }

  [[nodiscard]] auto target(int v) const -> Frame {
    const auto l = static_cast<std::size_t>(grid.left_ref(v));
    const auto r = static_cast<std::size_t>(grid.right_ref(v));
    return complex_vvs({&seq.views[l].frames[0], &seq.views[l].depths[0], cams[l]},
                       {&seq.views[r].frames[0], &seq.views[r].depths[0], cams[r]}, camera_for_view(cams, grid, v));
  }
};

} // namespace

TEST_CASE("inpaint without holes is the identity") {
  ProjectedImage img(4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      set_pixel(img, x, y, static_cast<std::uint8_t>(x * 40 + y), 5.0);
    }
  }
  CHECK(inpaint(img) == img.pixels);
}

TEST_CASE("single hole takes its constant neighborhood") {
  ProjectedImage img(3, 3);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      set_pixel(img, x, y, 77, 9.0);
    }
  }
  img.hole[4] = 1;
  img.pixels(1, 1, 0) = 0;
  const auto out = inpaint(img);
  for (int c = 0; c < 3; ++c) {
    CHECK(out(1, 1, c) == 77);
  }
}

TEST_CASE("hole strip between near and far fills from the far side") {
  // Columns 0-1 near (z = 10), 2-3 holes, 4-5 far (z = 50).
  ProjectedImage img(6, 4);
  for (int y = 0; y < 4; ++y) {
    set_pixel(img, 0, y, 40, 10.0);
    set_pixel(img, 1, y, 40, 10.0);
    set_pixel(img, 4, y, 200, 50.0);
    set_pixel(img, 5, y, 200, 50.0);
  }
  std::uint64_t sweeps = 0;
  const auto out = inpaint(img, true, 1 << 16, &sweeps);
  for (int y = 0; y < 4; ++y) {
    for (int x = 2; x < 4; ++x) {
      for (int c = 0; c < 3; ++c) {
        CHECK(out(x, y, c) == 200);
      }
    }
  }
  CHECK(sweeps == 2);

  // A plain neighbour average mixes both sides into column 2.
  const auto plain = inpaint(img, false);
  CHECK(plain(2, 1, 0) < 200);
}

TEST_CASE("an image of holes becomes mid grey") {
  const ProjectedImage img(8, 8);
  const auto out = inpaint(img);
  for (const auto v : out.vec()) {
    REQUIRE(v == 128);
  }
}

TEST_CASE("inpaint counts its invocations") {
  const auto before = inpaint_invocations.load();
  (void)inpaint(ProjectedImage(4, 4));
  (void)inpaint(ProjectedImage(4, 4), false);
  CHECK(inpaint_invocations.load() - before == 2);
}

TEST_CASE("block synthesis at a reference camera returns the reference") {
  const Fixture f;
  const auto &left = f.seq.views[0].frames[0];
  const auto d0 = f.depth(0, 1);
  const auto d1 = f.depth(1, 1);
  const std::vector<RefView> one{{&left, &d0, f.cams[0]}};
  const auto p1 = noncomplex_vvs(one, f.cams[0], {1, 1});
  CHECK(p1.image.pixels == left);
  CHECK(p1.image.hole_count() == 0);

  const std::vector<RefView> two{{&left, &d0, f.cams[0]}, {&f.seq.views[1].frames[0], &d1, f.cams[1]}};
  const auto p2 = noncomplex_vvs(two, f.cams[0], {1, 2});
  CHECK(p2.image.pixels == left);
}

TEST_CASE("two references leave no more holes than either one") {
  const Fixture f;
  for (const int b : {1, 4, 8, 16}) {
    const auto d0 = f.depth(0, b);
    const auto d1 = f.depth(1, b);
    const auto target = camera_for_view(f.cams, f.grid, 1);
    const std::vector<RefView> l{{&f.dec[0][0], &d0, f.cams[0]}};
    const std::vector<RefView> r{{&f.dec[1][0], &d1, f.cams[1]}};
    const std::vector<RefView> both{l[0], r[0]};
    const auto hl = noncomplex_vvs(l, target, {b, 1}).image;
    const auto hr = noncomplex_vvs(r, target, {b, 1}).image;
    const auto hb = noncomplex_vvs(both, target, {b, 2}).image;
    CHECK(hb.hole_count() <= hl.hole_count());
    CHECK(hb.hole_count() <= hr.hole_count());
    for (std::size_t k = 0; k < hb.hole.size(); ++k) {
      REQUIRE(hb.hole[k] == (hl.hole[k] & hr.hole[k]));
    }
  }
}

TEST_CASE("projection count scales with 1/b^2") {
  const Fixture f;
  const auto target = camera_for_view(f.cams, f.grid, 1);
  const auto d1 = f.depth(0, 1);
  const auto d16 = f.depth(0, 16);
  const auto e1 = f.depth(1, 1);
  const auto e16 = f.depth(1, 16);
  const std::vector<RefView> dense{{&f.dec[0][0], &d1, f.cams[0]}, {&f.dec[1][0], &e1, f.cams[1]}};
  const std::vector<RefView> block{{&f.dec[0][0], &d16, f.cams[0]}, {&f.dec[1][0], &e16, f.cams[1]}};
  const auto a = noncomplex_vvs(dense, target, {1, 2});
  const auto b = noncomplex_vvs(block, target, {16, 2});
  CHECK(a.stats.point_projections == 2U * 64U * 64U);
  CHECK(a.stats.point_projections == 256U * b.stats.point_projections);
}

TEST_CASE("complex synthesis") {
  const Fixture f;
  const auto &v0 = f.seq.views[0];
  const auto &v1 = f.seq.views[1];
  SECTION("at a reference camera it is the original") {
    const auto out = complex_vvs({&v0.frames[0], &v0.depths[0], f.cams[0]}, {&v1.frames[0], &v1.depths[0], f.cams[1]},
                                 f.cams[0]);
    CHECK(out == v0.frames[0]);
  }
  SECTION("is deterministic") {
    CHECK(f.target(1) == f.target(1));
    CHECK(f.target(3) == f.target(3));
  }
}

TEST_CASE("constant-depth plane between two cameras") {
  // One textured plane: the mid view is the blend of two exact shifts, holes
  // only at the borders where inpainting fills them.
  SceneSpec spec;
  spec.width = 32;
  spec.height = 32;
  spec.n_views = 2;
  spec.n_frames = 1;
  spec.baseline = 0.2;
  spec.rects.push_back({-100, -100, 100, 100, 5.0, 0, 0});
  const auto seq = generate_synthetic_scene(spec, 3);
  const auto cams = reference_cameras(seq);
  const auto mid = interpolate_camera(cams[0], cams[1], 0.5);
  const auto &a = seq.views[0];
  const auto &b = seq.views[1];
  const auto out = complex_vvs({&a.frames[0], &a.depths[0], cams[0]}, {&b.frames[0], &b.depths[0], cams[1]}, mid);
  const double z = depth_from_code(a.depths[0].codes(0, 0), spec.range);
  const int s = static_cast<int>(std::lround(100.0 * 0.1 / z)); // 2 pixels each way
  REQUIRE(s == 2);
  for (int y = 0; y < 32; ++y) {
    for (int x = s; x < 32 - s; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double blend = 0.5 * a.frames[0](x + s, y, c) + 0.5 * b.frames[0](x - s, y, c);
        REQUIRE(out(x, y, c) == static_cast<std::uint8_t>(std::lround(blend)));
      }
    }
  }
}

TEST_CASE("e-frame residual conventions") {
  ProjectedImage nc(16, 16);
  Frame target = make_frame(16, 16, 90);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      set_pixel(nc, x, y, 90, 4.0);
    }
  }
  SECTION("perfect prediction gives a zero residual") {
    const auto e = make_eframe(nc, target, {1, 0}, {8, 2});
    for (const auto v : e.residual.vec()) {
      REQUIRE(v == 0);
    }
    CHECK(apply_eframe(nc, e) == nc.pixels);
  }
  SECTION("hole pixels carry the full target value") {
    nc.hole[3] = 1;
    target(3, 0, 0) = 200;
    const auto e = make_eframe(nc, target, {1, 0}, {8, 2});
    CHECK(e.residual(3, 0, 0) == 200);
    CHECK(apply_eframe(nc, e) == target);
  }
}

TEST_CASE("lossless residual restores the complex target") {
  const Fixture f;
  for (const int b : {1, 4, 16}) {
    const auto d0 = f.depth(0, b);
    const auto d1 = f.depth(1, b);
    const std::vector<RefView> refs{{&f.dec[0][0], &d0, f.cams[0]}, {&f.dec[1][0], &d1, f.cams[1]}};
    const auto nc = noncomplex_vvs(refs, camera_for_view(f.cams, f.grid, 1), {b, 2});
    const auto target = f.target(1);
    const auto before = inpaint_invocations.load();
    const auto e = make_eframe(nc.image, target, {1, 0}, {b, 2});
    CHECK(apply_eframe(nc.image, e) == target);
    CHECK(inpaint_invocations.load() == before);
  }
}

TEST_CASE("quantized residual quality falls as the step grows") {
  const Fixture f;
  const auto d0 = f.depth(0, 8);
  const auto d1 = f.depth(1, 8);
  const std::vector<RefView> refs{{&f.dec[0][0], &d0, f.cams[0]}, {&f.dec[1][0], &d1, f.cams[1]}};
  const auto nc = noncomplex_vvs(refs, camera_for_view(f.cams, f.grid, 1), {8, 2});
  const auto target = f.target(1);
  const auto e = make_eframe(nc.image, target, {1, 0}, {8, 2});
  double prev = std::numeric_limits<double>::infinity();
  const QuantLadder ladder;
  for (const int q : ladder.steps) {
    const auto out = apply_eframe(nc.image, decode_residual(encode_intra(e.residual, q)));
    const double p = psnr(out, target);
    CHECK(p <= prev);
    prev = p;
  }
}

TEST_CASE("residual variance is larger at b = 16 than at b = 4") {
  DeskScene d;
  ComplexitySpec spec;
  spec.block_sizes = {4, 16};
  spec.frame_stride = 8;
  const auto rows = complexity_rows(desk_sequence(d), d.grid(), spec);
  CHECK(rows[1].residual_variance > rows[0].residual_variance);
}
