#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

using namespace imv;

namespace {

DeskScene tiny() {
  DeskScene d;
  d.width = 64;
  d.height = 64;
  d.n_intermediate = 1;
  d.n_frames = 8;
  return d;
}

const Store &tiny_store() {
  static const Store s = [] {
    const auto d = tiny();
    SessionConfig cfg;
    cfg.gop = {4};
    return build_store(desk_sequence(d), d.grid(), cfg);
  }();
  return s;
}

} // namespace

TEST_CASE("sweep tables are deterministic") {
  SweepSpec spec;
  spec.configs = {{2, 0}, {4, 0}};
  spec.steps = {16, 32, 64};
  spec.n_paths = 2;
  const auto a = sweep_nt_nd(tiny_store(), spec);
  const auto b = sweep_nt_nd(tiny_store(), spec);
  CHECK(a.table.to_tsv() == b.table.to_tsv());
  CHECK(a.table.rows.size() == 6);
}

TEST_CASE("a single config and step gives one row") {
  SweepSpec spec;
  spec.configs = {{2, 0}};
  spec.steps = {16};
  spec.n_paths = 1;
  const auto r = sweep_nt_nd(tiny_store(), spec);
  CHECK(r.table.rows.size() == 1);
  CHECK(r.table.rows[0][0] == "2");
}

TEST_CASE("projection counts follow the block size") {
  const auto d = tiny();
  ComplexitySpec spec;
  spec.frame_stride = 4;
  const auto rows = complexity_rows(desk_sequence(d), d.grid(), spec);
  REQUIRE(rows.size() == 4);
  const double dense = 64.0 * 64.0 * 2;
  CHECK(rows[0].point_projections == dense);
  CHECK(rows[0].point_projections / dense == 1.0);
  CHECK(rows[3].point_projections / dense == 1.0 / 256.0);
  for (const auto &r : rows) {
    CHECK(r.decoder_inpaint_calls == 0);
  }
}

TEST_CASE("result tables") {
  ResultTable t;
  t.name = "x";
  t.columns = {"a", "b"};
  t.add({"1", "2"});
  t.note("k", "v");
  CHECK(t.to_tsv() == "# x format 1\na\tb\n1\t2\n# k=v\n");
  CHECK(t.value("k") == "v");
  CHECK_THROWS_AS(t.add({"1"}), Error);
  CHECK_THROWS_AS(t.value("missing"), Error);
}

TEST_CASE("rate interpolation helpers") {
  const std::vector<RatePsnr> pts{{1000, 30}, {4000, 36}};
  CHECK(psnr_at_rate(pts, 2000) == Catch::Approx(33.0));
  CHECK(std::isnan(psnr_at_rate(pts, 500)));
  CHECK(best_psnr_within(pts, 3999) == psnr_at_rate(pts, 3999));
  CHECK(best_psnr_within(pts, 5000) == 36.0);
  CHECK(best_psnr_within(pts, 999) == -std::numeric_limits<double>::infinity());
  const auto env = upper_envelope({{1000, 30}, {1500, 29}, {2000, 31}});
  CHECK(env.size() == 2);
}

TEST_CASE("GOP comparison with one candidate") {
  const auto d = tiny();
  GopSearch s;
  s.candidates = {4};
  s.n_t = 2;
  s.n_paths = 4;
  const auto r = compare_gop(desk_sequence(d), d.grid(), {0.5, 0.4, 0.5}, s);
  CHECK(r.aware.best == 4);
  CHECK(r.blind.best == 4);
  CHECK(r.penalty_pct == 0.0);
}

TEST_CASE("without e-frames the dense decoder can beat the block decoder") {
  // With no residual to correct it, b = 16 block projection leaves visibly
  // worse views than dense projection at the same reference rate.
  const auto d = tiny();
  BaselineSpec spec;
  spec.ref_steps = {8, 32};
  spec.eframe_steps = {48};
  spec.gop_size = 4;
  spec.n_t = 2;
  spec.n_paths = 3;
  const auto r = run_baselines(desk_sequence(d), d.grid(), spec);
  REQUIRE(r.block_inpaint.size() == 2);
  for (std::size_t i = 0; i < r.block_inpaint.size(); ++i) {
    CHECK(r.dense_inpaint[i].psnr > r.block_inpaint[i].psnr);
  }
  CHECK(r.budgets.size() == 2);
}
