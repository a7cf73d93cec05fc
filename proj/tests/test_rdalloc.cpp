#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

#include <random>

using namespace imv;

namespace {

auto curve(std::vector<RDPoint> pts, int v = 0) -> RDCurve { return {{v, 0}, std::move(pts)}; }

auto three_point() -> RDCurve { return curve({{100, 50, 32}, {200, 20, 16}, {400, 10, 8}}); }

// Lagrange interpolation through four points, evaluated at x.
auto lagrange(const std::vector<double> &xs, const std::vector<double> &ys, double x) -> double {
  double out = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double l = 1.0;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      if (j != i) {
        l *= (x - xs[j]) / (xs[i] - xs[j]);
      }
    }
    out += ys[i] * l;
  }
  return out;
}

} // namespace

TEST_CASE("a lone frame with room takes its best point") {
  const std::vector<RDCurve> c{three_point()};
  const std::vector<double> w{1.0};
  const auto a = allocate(c, w, 1000);
  CHECK(a.choices[0] == 2);
  CHECK(a.total_bits == 400);
  CHECK(a.lambda == 0.0);
}

TEST_CASE("the more popular frame gets the upgrade") {
  const std::vector<RDCurve> c{three_point(), three_point()};
  const std::vector<double> w{0.1, 0.9};
  const auto a = allocate(c, w, 300);
  CHECK(a.choices == std::vector<int>{0, 1});
  CHECK(a.total_bits == 300);
}

TEST_CASE("budget below the minimum rates is infeasible") {
  const std::vector<RDCurve> c{three_point(), three_point()};
  const std::vector<double> w{0.5, 0.5};
  CHECK_THROWS_MATCHES(allocate(c, w, 199), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error &e) { return e.code() == Errc::infeasible_budget; }));
  CHECK(allocate(c, w, 200).total_bits == 200);
}

TEST_CASE("expected distortion") {
  const std::vector<RDCurve> c{three_point(), three_point(), three_point()};
  SECTION("at minimum distortion points") {
    const std::vector<double> w{0.2, 0.3, 0.5};
    const auto a = allocate(c, w, 1200);
    CHECK(expected_distortion(a, c, w) == Catch::Approx(10.0));
  }
  SECTION("a zero-popularity frame does not count") {
    const std::vector<double> w{0.0, 0.4, 0.6};
    auto a = allocate(c, w, 500);
    const double d = expected_distortion(a, c, w);
    CHECK(a.choices[0] == 0);
    a.choices[0] = 2;
    CHECK(expected_distortion(a, c, w) == d);
  }
}

TEST_CASE("four frames by four points against exhaustive search") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RDCurve> curves;
    std::vector<double> w;
    double max_step = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    for (int f = 0; f < 4; ++f) {
      // Convex: rate increments grow while distortion drops shrink.
      std::vector<RDPoint> pts;
      double r = 100 + 100 * u(rng);
      double d = 200 + 100 * u(rng);
      double dr = 50 + 50 * u(rng);
      double dd = 80 + 40 * u(rng);
      for (int k = 0; k < 4; ++k) {
        pts.push_back({r, d, k});
        if (k < 3) {
          max_step = std::max(max_step, dr);
        }
        r += dr;
        d -= dd;
        dr *= 1.3 + u(rng);
        dd *= 0.3 + 0.4 * u(rng);
      }
      lo += pts.front().bits;
      hi += pts.back().bits;
      REQUIRE(lower_hull(pts).size() == 4);
      curves.push_back(curve(pts, f));
      w.push_back(u(rng));
    }
    for (int b = 0; b <= 10; ++b) {
      const double budget = lo + (hi - lo) * b / 10.0;
      const auto a = allocate(curves, w, budget);
      REQUIRE(a.total_bits <= budget);
      double best = std::numeric_limits<double>::infinity();
      double best_slack = std::numeric_limits<double>::infinity();
      for (int code = 0; code < 256; ++code) {
        double bits = 0.0;
        double dist = 0.0;
        for (int f = 0; f < 4; ++f) {
          const auto &p = curves[static_cast<std::size_t>(f)].points[static_cast<std::size_t>((code >> (2 * f)) & 3)];
          bits += p.bits;
          dist += w[static_cast<std::size_t>(f)] * p.mse;
        }
        if (bits <= a.total_bits) {
          best = std::min(best, dist);
        }
        if (bits <= budget - max_step) {
          best_slack = std::min(best_slack, dist);
        }
      }
      const double got = expected_distortion(a, curves, w);
      // Optimal at its own rate, and no worse than any choice one hull step
      // below the budget.
      CHECK(got <= best + 1e-9);
      if (std::isfinite(best_slack)) {
        CHECK(got <= best_slack + 1e-9);
      }
    }
  }
}

TEST_CASE("allocation is monotone in budget and scale free in popularity") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<RDCurve> curves;
  std::vector<double> w;
  for (int f = 0; f < 6; ++f) {
    curves.push_back(curve({{100, 90, 64}, {180 + 20 * u(rng), 40, 32}, {400, 20 * u(rng), 16}, {900, 1, 8}}, f));
    w.push_back(u(rng));
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double budget = 600; budget <= 5400; budget += 150) {
    const auto a = allocate(curves, w, budget);
    const double d = expected_distortion(a, curves, w);
    CHECK(d <= prev + 1e-12);
    prev = d;
    for (const double c : {0.3, 5.0}) {
      std::vector<double> ws;
      for (const double x : w) {
        ws.push_back(x * c);
      }
      CHECK(allocate(curves, ws, budget).choices == a.choices);
    }
    // No single-frame swap improves the Lagrangian at the returned lambda.
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto &cur = a.chosen(curves, i);
      for (const auto &p : curves[i].points) {
        CHECK(w[i] * cur.mse + a.lambda * cur.bits <= w[i] * p.mse + a.lambda * p.bits + 1e-9);
      }
    }
  }
}

TEST_CASE("uniform allocation picks the nearest step") {
  const std::vector<RDCurve> c{three_point(), curve({{100, 5, 64}, {300, 2, 4}})};
  const auto a = allocate_uniform(c, 16);
  CHECK(a.choices == std::vector<int>{1, 1});
  CHECK(a.total_bits == 500);
}

TEST_CASE("Bjontegaard rate") {
  const std::vector<RatePsnr> a{{1000, 30}, {2000, 33}, {4000, 36}, {8000, 39}};
  SECTION("identical curves") { CHECK(bjontegaard_rate(a, a) == Catch::Approx(0.0).margin(1e-12)); }
  SECTION("rates scaled by 1.1") {
    auto b = a;
    for (auto &p : b) {
      p.bits *= 1.1;
    }
    CHECK(std::abs(bjontegaard_rate(a, b) - 10.0) < 1e-9);
  }
  SECTION("matches trapezoid quadrature of the interpolating cubics") {
    const std::vector<RatePsnr> b{{1100, 29.5}, {1900, 32.0}, {3500, 35.2}, {9000, 40.0}};
    std::vector<double> xa, ya, xb, yb;
    for (const auto &p : a) {
      xa.push_back(p.psnr);
      ya.push_back(std::log10(p.bits));
    }
    for (const auto &p : b) {
      xb.push_back(p.psnr);
      yb.push_back(std::log10(p.bits));
    }
    const double lo = 30.0;
    const double hi = 39.0;
    const int n = 10000;
    double integral = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double x = lo + (hi - lo) * i / n;
      const double f = lagrange(xb, yb, x) - lagrange(xa, ya, x);
      integral += (i == 0 || i == n ? 0.5 : 1.0) * f;
    }
    integral *= (hi - lo) / n;
    const double oracle = (std::pow(10.0, integral / (hi - lo)) - 1.0) * 100.0;
    CHECK(std::abs(bjontegaard_rate(a, b) - oracle) < 1e-6);
  }
  SECTION("antisymmetry") {
    const std::vector<RatePsnr> b{{900, 30.5}, {2100, 33.5}, {3900, 35.9}, {7000, 38.2}};
    const double x = bjontegaard_rate(a, b);
    const double y = bjontegaard_rate(b, a);
    CHECK(std::abs((1 + x / 100) * (1 + y / 100) - 1.0) < 1e-6);
  }
  SECTION("errors") {
    const std::vector<RatePsnr> far{{1000, 50}, {2000, 51}, {4000, 52}, {8000, 53}};
    CHECK_THROWS_AS(bjontegaard_rate(a, far), Error);
    CHECK_THROWS_AS(bjontegaard_rate(a, {a.begin(), a.begin() + 3}), Error);
  }
}

TEST_CASE("GOP size selection") {
  auto spec = random_scene_spec(3, 32, 32, 2, 16);
  const auto seq = generate_synthetic_scene(spec, 3);
  const ViewGrid grid{2, 1};
  GopSearch s;
  s.candidates = {1, 4, 16};
  s.n_t = 4;
  s.n_paths = 6;
  SECTION("a single candidate is chosen") {
    auto one = s;
    one.candidates = {4};
    const auto r = select_gop_size(seq, grid, {0.8, 0.2, 0.7}, one);
    CHECK(r.best == 4);
    CHECK(r.table.size() == 1);
  }
  SECTION("a viewer that never switches favours long GOPs") {
    const auto r = select_gop_size(seq, grid, {1.0, 0.5, 0.5}, s);
    CHECK(r.best == 16);
    for (std::size_t i = 1; i < r.table.size(); ++i) {
      CHECK(r.table[i].mean_bits <= r.table[i - 1].mean_bits);
    }
  }
  SECTION("deterministic") {
    const auto a = select_gop_size(seq, grid, {0.6, 0.3, 0.5}, s);
    const auto b = select_gop_size(seq, grid, {0.6, 0.3, 0.5}, s);
    REQUIRE(a.table.size() == b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) {
      CHECK(a.table[i].mean_bits == b.table[i].mean_bits);
    }
  }
}
