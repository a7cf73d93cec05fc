#pragma once

#include "navmodel.hpp"
#include "rdcurve.hpp"

#include <map>

namespace imv {

struct RateAllocation {
  std::vector<FrameId> frames;
  std::vector<int> choices; // hull index per frame
  double total_bits{};
  double budget{};
  double lambda{};

  [[nodiscard]] auto chosen(const std::vector<RDCurve> &curves, std::size_t i) const -> const RDPoint & {
    return curves[i].points[static_cast<std::size_t>(choices[i])];
  }
};

namespace detail {
// Index of the hull point minimizing w*D + lambda*r; ties keep the lower rate.
inline auto lagrangian_choice(const RDCurve &c, double w, double lambda) -> int {
  int k = 0;
  const auto &p = c.points;
  while (static_cast<std::size_t>(k) + 1 < p.size()) {
    const double slope = w * (p[k].mse - p[k + 1].mse) / (p[k + 1].bits - p[k].bits);
    if (!(slope > lambda)) {
      break;
    }
    ++k;
  }
  return k;
}
} // namespace detail

// Popularity-weighted Lagrangian allocation over convex RD hulls. Returns the
// smallest multiplier whose per-frame choices fit the budget.
inline auto allocate(const std::vector<RDCurve> &curves, std::span<const double> weights, double budget)
    -> RateAllocation {
  verify(curves.size() == weights.size(), Errc::invalid_state, "one popularity per curve required");
  double min_total = 0.0;
  std::vector<double> candidates{0.0};
  for (std::size_t i = 0; i < curves.size(); ++i) {
    validate_curve(curves[i]);
    verify(weights[i] >= 0.0, Errc::invalid_state, "negative popularity");
    const auto &p = curves[i].points;
    min_total += p.front().bits;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      candidates.push_back(weights[i] * (p[k].mse - p[k + 1].mse) / (p[k + 1].bits - p[k].bits));
    }
  }
  verify(budget >= min_total, Errc::infeasible_budget,
         "budget " + std::to_string(budget) + " below minimum " + std::to_string(min_total));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  auto solve = [&](double lambda) {
    RateAllocation a;
    a.lambda = lambda;
    a.budget = budget;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const int k = detail::lagrangian_choice(curves[i], weights[i], lambda);
      a.frames.push_back(curves[i].frame_id);
      a.choices.push_back(k);
      a.total_bits += curves[i].points[static_cast<std::size_t>(k)].bits;
    }
    return a;
  };

  // total_bits is non-increasing in lambda; bisect over the breakpoints.
  std::size_t lo = 0;
  std::size_t hi = candidates.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (solve(candidates[mid]).total_bits <= budget) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return solve(candidates[lo]);
}

// Every frame at the same step when present on its hull; otherwise the hull
// point whose step is nearest.
inline auto allocate_uniform(const std::vector<RDCurve> &curves, int q) -> RateAllocation {
  RateAllocation a;
  for (const auto &c : curves) {
    validate_curve(c);
    int best = 0;
    for (std::size_t k = 0; k < c.points.size(); ++k) {
      if (std::abs(c.points[k].q - q) < std::abs(c.points[static_cast<std::size_t>(best)].q - q)) {
        best = static_cast<int>(k);
      }
    }
    a.frames.push_back(c.frame_id);
    a.choices.push_back(best);
    a.total_bits += c.points[static_cast<std::size_t>(best)].bits;
  }
  a.budget = a.total_bits;
  return a;
}

inline auto expected_distortion(const RateAllocation &a, const std::vector<RDCurve> &curves,
                                std::span<const double> weights) -> double {
  double d = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    d += weights[i] * a.chosen(curves, i).mse;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Bjontegaard rate difference.

struct RatePsnr {
  double bits{};
  double psnr{};
};

namespace detail {
struct Cubic {
  double center{};
  double scale{1.0};
  std::array<double, 4> c{}; // in s = (x - center) / scale

  [[nodiscard]] auto antiderivative(double x) const -> double {
    const double s = (x - center) / scale;
    return scale * (c[0] * s + c[1] * s * s / 2.0 + c[2] * s * s * s / 3.0 + c[3] * s * s * s * s / 4.0);
  }
  [[nodiscard]] auto operator()(double x) const -> double {
    const double s = (x - center) / scale;
    return c[0] + s * (c[1] + s * (c[2] + s * c[3]));
  }
};

// Least-squares cubic y(x) via normal equations on centred, scaled x.
inline auto fit_cubic(const std::vector<double> &x, const std::vector<double> &y) -> Cubic {
  Cubic f;
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  f.center = (*mn + *mx) / 2.0;
  f.scale = std::max((*mx - *mn) / 2.0, 1e-12);
  std::array<std::array<double, 5>, 4> a{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = (x[i] - f.center) / f.scale;
    const std::array<double, 4> pw{1.0, s, s * s, s * s * s};
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        a[r][c] += pw[r] * pw[c];
      }
      a[r][4] += pw[r] * y[i];
    }
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
        piv = r;
      }
    }
    std::swap(a[col], a[piv]);
    verify(std::abs(a[col][col]) > 1e-300, Errc::insufficient_overlap, "degenerate rate-PSNR curve");
    for (int r = 0; r < 4; ++r) {
      if (r == col) {
        continue;
      }
      const double k = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) {
        a[r][c] -= k * a[col][c];
      }
    }
  }
  for (int r = 0; r < 4; ++r) {
    f.c[r] = a[r][4] / a[r][r];
  }
  return f;
}
} // namespace detail

// Average rate difference of b against a in percent, over the common PSNR range.
inline auto bjontegaard_rate(const std::vector<RatePsnr> &a, const std::vector<RatePsnr> &b) -> double {
  verify(a.size() >= 4 && b.size() >= 4, Errc::insufficient_overlap, "need at least 4 points per curve");
  auto split = [](const std::vector<RatePsnr> &c, std::vector<double> &x, std::vector<double> &y) {
    for (const auto &p : c) {
      verify(p.bits > 0.0, Errc::insufficient_overlap, "rates must be positive");
      x.push_back(p.psnr);
      y.push_back(std::log10(p.bits));
    }
  };
  std::vector<double> xa;
  std::vector<double> ya;
  std::vector<double> xb;
  std::vector<double> yb;
  split(a, xa, ya);
  split(b, xb, yb);
  const double lo = std::max(*std::min_element(xa.begin(), xa.end()), *std::min_element(xb.begin(), xb.end()));
  const double hi = std::min(*std::max_element(xa.begin(), xa.end()), *std::max_element(xb.begin(), xb.end()));
  verify(hi > lo, Errc::insufficient_overlap, "PSNR ranges do not overlap");
  const auto fa = detail::fit_cubic(xa, ya);
  const auto fb = detail::fit_cubic(xb, yb);
  const double ia = fa.antiderivative(hi) - fa.antiderivative(lo);
  const double ib = fb.antiderivative(hi) - fb.antiderivative(lo);
  const double delta = (ib - ia) / (hi - lo);
  return (std::pow(10.0, delta) - 1.0) * 100.0;
}

} // namespace imv
