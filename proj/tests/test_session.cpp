#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

using namespace imv;

namespace {

auto small_store(int n_intermediate = 1, int block_size = 8) -> Store {
  const auto seq = generate_synthetic_scene(random_scene_spec(21, 64, 64, 3, 8), 21);
  SessionConfig cfg;
  cfg.block_size = block_size;
  cfg.gop = {4};
  return build_store(seq, {3, n_intermediate}, cfg);
}

const Store &shared_store() {
  static const Store s = small_store();
  return s;
}

} // namespace

TEST_CASE("store holds one e-frame per virtual frame and ladder step") {
  const auto &s = shared_store();
  const auto st = s.stats();
  CHECK(st.eframe_count == 16U * s.cfg.ladder.steps.size());
  CHECK(s.curves.size() == 16);
  for (const int q : s.cfg.ladder.steps) {
    int n = 0;
    for (const auto &[k, p] : s.payloads) {
      n += k.cat == Category::eframe && k.q == q ? 1 : 0;
    }
    CHECK(n == 16);
  }
}

TEST_CASE("more intermediate views cost e-frame storage, not reference storage") {
  const auto &one = shared_store();
  const auto two = small_store(2);
  const auto a = one.stats();
  const auto b = two.stats();
  CHECK(b.ref_bytes == a.ref_bytes);
  CHECK(b.depth_bytes == a.depth_bytes);
  const double ratio = static_cast<double>(b.eframe_bytes) / static_cast<double>(a.eframe_bytes);
  CHECK(ratio > 1.6);
  CHECK(ratio < 2.4);
}

TEST_CASE("one-step request covers three frames") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 1, 0);
  const TransitionModel m{0.8, 0.5, 0.4};
  History h;
  (void)handle_request(s, cfg, m, {0, at_rest(3), true}, h, {AllocPolicy::weighted, 1e9, 16});
  const auto b = handle_request(s, cfg, m, {0, at_rest(3), false}, h, {AllocPolicy::weighted, 1e9, 16});
  CHECK(b.covered.size() == 3);
  CHECK(b.window.first == 1);
  CHECK(b.window.last == 1);
  CHECK(b.allocation.size() == 1); // 2 and 4 are reference views
  for (const auto &e : b.entries) {
    if (e.key.cat == Category::ref) {
      CHECK((e.key.v == 2 || e.key.v == 4));
    }
  }
}

TEST_CASE("bundle bits do not fall as the request delay grows") {
  const auto &s = shared_store();
  const TransitionModel m{0.7, 0.4, 0.5};
  std::uint64_t prev = 0;
  for (const int nd : {0, 1, 2, 3}) {
    const auto cfg = session_config(s, 2, nd);
    History h;
    auto b0 = handle_request(s, cfg, m, {0, at_rest(3), true}, h, {AllocPolicy::uniform, 0, 16});
    auto b1 = handle_request(s, cfg, m, {0, at_rest(3), false}, h, {AllocPolicy::uniform, 0, 16});
    const auto total = b0.total_bits() + b1.total_bits();
    CHECK(total >= prev);
    prev = total;
  }
}

TEST_CASE("payloads are shipped once per session") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 1);
  const TransitionModel m{0.9, 0.1, 0.9};
  History h;
  std::set<PayloadKey> seen;
  auto take = [&](const SoFBundle &b) {
    for (const auto &e : b.entries) {
      CHECK(seen.insert(e.key).second);
    }
  };
  take(handle_request(s, cfg, m, {0, at_rest(2), true}, h, {AllocPolicy::uniform, 0, 16}));
  take(handle_request(s, cfg, m, {0, at_rest(2), false}, h, {AllocPolicy::uniform, 0, 16}));
  take(handle_request(s, cfg, m, {2, NavState{{2, 2}, 2}, false}, h, {AllocPolicy::uniform, 0, 16}));
}

TEST_CASE("request protocol violations") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 0);
  const TransitionModel m;
  const BudgetSpec spend{AllocPolicy::uniform, 0, 16};
  History h;
  CHECK_THROWS_AS(handle_request(s, cfg, m, {0, at_rest(2), false}, h, spend), Error);
  (void)handle_request(s, cfg, m, {0, at_rest(2), true}, h, spend);
  (void)handle_request(s, cfg, m, {0, at_rest(2), false}, h, spend);
  CHECK_THROWS_MATCHES(handle_request(s, cfg, m, {2, NavState{{4, 2}, 4}, false}, h, spend), Error,
                       Catch::Matchers::Predicate<Error>([](const Error &e) { return e.code() == Errc::out_of_cone; }));
}

TEST_CASE("weighted budgets below the minimum rates are infeasible") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 0);
  History h;
  CHECK_THROWS_MATCHES(handle_request(s, cfg, {}, {0, at_rest(1), true}, h, {AllocPolicy::weighted, 1.0, 16}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error &e) { return e.code() == Errc::infeasible_budget; }));
}

TEST_CASE("a viewer parked on a reference view needs no synthesis") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 1);
  const auto rep = run_session(s, cfg, {1.0, 0.5, 0.5}, at_rest(2), 8, 5, {AllocPolicy::weighted, 20000, 16});
  CHECK(rep.eframe_bits == 0);
  CHECK(rep.projection.point_projections == 0);
  CHECK(rep.inpaint_calls == 0);
  for (const auto &f : rep.frames) {
    const auto &e = *s.payload({Category::ref, 2, f.frame.t, 0});
    (void)e;
    REQUIRE(f.frame.v == 2);
  }
  // Frame 0 is intra: its PSNR is the reference codec's.
  const auto decoded = decode_intra(*s.payload({Category::ref, 2, 0, 0}));
  CHECK(rep.frames.front().psnr == psnr(decoded, s.target({2, 0})));
}

TEST_CASE("finer e-frames give better virtual views") {
  const auto &s = shared_store();
  auto &cache = *s.cache;
  const auto lookup = s.lookup();
  const FrameId f{1, 3};
  const auto &nc = cache.noncomplex(f, s.grid, s.cfg, s.cameras, s.width, s.height, s.range, lookup);
  CHECK(nc.stats.point_projections == 2U * (64 / 8) * (64 / 8));
  const auto fine = apply_eframe(nc.image, cache.residual({Category::eframe, 1, 3, 4}, s.cfg.ladder, lookup));
  const auto coarse = apply_eframe(nc.image, cache.residual({Category::eframe, 1, 3, 64}, s.cfg.ladder, lookup));
  CHECK(psnr(fine, s.target(f)) > psnr(coarse, s.target(f)));
  CHECK(psnr(fine, s.target(f)) > 40.0);
}

TEST_CASE("session accounting") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 1);
  const TransitionModel m{0.5, 0.5, 0.4};
  const BudgetSpec spend{AllocPolicy::weighted, 30000, 16};
  const auto a = run_session(s, cfg, m, at_rest(3), 8, 11, spend);
  const auto b = run_session(s, cfg, m, at_rest(3), 8, 11, spend);
  CHECK(a.frames.size() == 8);
  CHECK(a.total_bits() == b.total_bits());
  CHECK(a.mean_psnr == b.mean_psnr);
  CHECK(a.share(a.ref_bits) + a.share(a.depth_bits) + a.share(a.eframe_bits) == Catch::Approx(100.0));
  std::uint64_t sum = 0;
  for (const auto x : a.bundle_bits) {
    sum += x;
  }
  CHECK(sum == a.total_bits());
  CHECK(a.stalls == 0);
  CHECK(a.inpaint_calls == 0);
}

TEST_CASE("stalls are counted when the delay reaches the interval") {
  const auto &s = shared_store();
  const auto rep = run_session(s, session_config(s, 2, 2), {0.8, 0.3, 0.6}, at_rest(3), 8, 2,
                               {AllocPolicy::uniform, 0, 16});
  CHECK(rep.stalls > 0);
}

TEST_CASE("e-frame share grows with block size") {
  const TransitionModel m{0.6, 0.4, 0.5};
  double prev = 0.0;
  for (const int b : {4, 8, 16}) {
    const auto s = b == 8 ? small_store() : small_store(1, b);
    const auto cfg = session_config(s, 2, 1);
    double share = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto rep = run_session(s, cfg, m, at_rest(1 + i % 3), 8, 100 + static_cast<std::uint64_t>(i),
                                   {AllocPolicy::uniform, 0, 16});
      share += rep.share(rep.eframe_bits);
    }
    CHECK(share > prev);
    prev = share;
  }
}

TEST_CASE("cone soundness over many seeded sessions") {
  const auto &s = shared_store();
  const auto cfg = session_config(s, 2, 1);
  int sessions = 0;
  for (const auto &m : {TransitionModel{0.9, 0.1, 0.9}, TransitionModel{0.1, 0.9, 0.1}, TransitionModel{0.3, 0.3, 0.3}}) {
    for (int v = 0; v < 5; ++v) {
      for (std::uint64_t seed = 0; seed < 40; ++seed) {
        REQUIRE_NOTHROW(run_session(s, cfg, m, at_rest(v), 8, seed, {AllocPolicy::uniform, 0, 16}));
        ++sessions;
      }
    }
  }
  CHECK(sessions == 600);
}
