#pragma once

#include "synthesis.hpp"

namespace imv {

struct RDPoint {
  double bits{};
  double mse{};
  int q{};

  friend auto operator==(const RDPoint &, const RDPoint &) -> bool = default;
};

struct RDCurve {
  FrameId frame_id{};
  std::vector<RDPoint> points; // increasing bits, decreasing mse, convex

  friend auto operator==(const RDCurve &, const RDCurve &) -> bool = default;
};

// Lower convex hull of (bits, mse) keeping only points where distortion
// strictly drops as rate grows.
inline auto lower_hull(std::vector<RDPoint> pts) -> std::vector<RDPoint> {
  std::sort(pts.begin(), pts.end(), [](const RDPoint &a, const RDPoint &b) {
    return a.bits != b.bits ? a.bits < b.bits : (a.mse != b.mse ? a.mse < b.mse : a.q > b.q);
  });
  std::vector<RDPoint> mono;
  for (const auto &p : pts) {
    if (mono.empty() || p.mse < mono.back().mse) {
      if (!mono.empty() && p.bits == mono.back().bits) {
        continue;
      }
      mono.push_back(p);
    }
  }
  std::vector<RDPoint> hull;
  for (const auto &p : mono) {
    while (hull.size() >= 2) {
      const auto &o = hull[hull.size() - 2];
      const auto &a = hull.back();
      const double cross = (a.bits - o.bits) * (p.mse - o.mse) - (a.mse - o.mse) * (p.bits - o.bits);
      if (cross > 0.0) {
        break;
      }
      hull.pop_back();
    }
    hull.push_back(p);
  }
  return hull;
}

inline void validate_curve(const RDCurve &c) {
  verify(!c.points.empty(), Errc::invalid_state, "empty RD curve");
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    verify(c.points[i].bits > c.points[i - 1].bits && c.points[i].mse < c.points[i - 1].mse, Errc::invalid_state,
           "RD curve is not strictly monotone");
  }
}

} // namespace imv
