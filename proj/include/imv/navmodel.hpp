#pragma once

#include "synthesis.hpp"

#include <random>
#include <sstream>

namespace imv {

// Second-order view-switching behaviour.
//   p1: stay when at rest
//   p2: keep switching in the same direction
//   p3: stop a switch
struct TransitionModel {
  double p1{0.9};
  double p2{0.1};
  double p3{0.9};

  void validate() const {
    auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    verify(in01(p1) && in01(p2) && in01(p3) && p2 + p3 <= 1.0 + 1e-15, Errc::invalid_state,
           "transition model needs p1,p2,p3 in [0,1] and p2+p3 <= 1");
  }

  friend auto operator==(const TransitionModel &, const TransitionModel &) -> bool = default;
};

// Parses "p1,p2,p3".
inline auto parse_model(const std::string &text) -> TransitionModel {
  std::istringstream in(text);
  TransitionModel m{};
  char c1 = 0;
  char c2 = 0;
  in >> m.p1 >> c1 >> m.p2 >> c2 >> m.p3;
  verify(!in.fail() && c1 == ',' && c2 == ',', Errc::invalid_state, "model must be p1,p2,p3: " + text);
  m.validate();
  return m;
}

struct NavState {
  FrameId current{};
  int previous_view{};

  friend auto operator==(const NavState &, const NavState &) -> bool = default;
};

inline auto at_rest(int v, int t = 0) -> NavState { return {{v, t}, v}; }

inline void validate_nav(const NavState &s, int n_views) {
  verify(s.current.v >= 0 && s.current.v < n_views && s.previous_view >= 0 && s.previous_view < n_views,
         Errc::invalid_state, "view outside grid");
  verify(std::abs(s.current.v - s.previous_view) <= 1, Errc::invalid_state, "previous view not adjacent");
}

namespace detail {
// Unfolded probability of moving by `step` in {-1,0,1} given the last move.
inline auto raw_step_prob(const TransitionModel &m, int step, int last_move) -> double {
  if (last_move == 0) {
    return step == 0 ? m.p1 : (1.0 - m.p1) / 2.0;
  }
  if (step == last_move) {
    return m.p2;
  }
  if (step == 0) {
    return m.p3;
  }
  // p2 + p3 may exceed 1 by rounding, e.g. 0.9 + 0.1.
  return std::max(0.0, 1.0 - m.p2 - m.p3);
}
} // namespace detail

// p(next | cur, prev). Mass of a move that would leave [0, n_views) is
// added to staying at cur.
inline auto transition_prob(const TransitionModel &m, int next_v, int cur_v, int prev_v, int n_views) -> double {
  verify(std::abs(next_v - cur_v) <= 1 && std::abs(cur_v - prev_v) <= 1, Errc::invalid_state,
         "views are not adjacent");
  verify(cur_v >= 0 && cur_v < n_views && next_v >= 0 && next_v < n_views, Errc::invalid_state, "view outside grid");
  const int last = cur_v - prev_v;
  double p = detail::raw_step_prob(m, next_v - cur_v, last);
  if (next_v == cur_v) {
    if (cur_v == 0) {
      p += detail::raw_step_prob(m, -1, last);
    }
    if (cur_v == n_views - 1) {
      p += detail::raw_step_prob(m, +1, last);
    }
  }
  return p;
}

// P(F_{v,t} | start) for t0 < t <= t0 + horizon.
struct PopularityGrid {
  NavState origin{};
  int horizon{};
  int n_views{};
  std::vector<std::vector<double>> slices; // slices[tau-1][v]

  [[nodiscard]] auto at(int v, int t) const -> double {
    const int tau = t - origin.current.t;
    if (tau < 1 || tau > horizon || v < 0 || v >= n_views) {
      return 0.0;
    }
    return slices[static_cast<std::size_t>(tau - 1)][static_cast<std::size_t>(v)];
  }
};

namespace detail {
inline auto neighbours(int v, int n_views) {
  std::vector<int> out;
  for (int u = std::max(0, v - 1); u <= std::min(n_views - 1, v + 1); ++u) {
    out.push_back(u);
  }
  return out;
}

// Marginal recursion over the two previous slices. When `normalize_inner`
// is set the t-2 weights around each v' are rescaled to sum to one.
inline auto marginal_recursion(const TransitionModel &m, const NavState &s0, int horizon, int n_views,
                               bool normalize_inner) -> PopularityGrid {
  m.validate();
  validate_nav(s0, n_views);
  verify(horizon >= 1, Errc::invalid_state, "horizon must be >= 1");
  PopularityGrid g{s0, horizon, n_views, {}};
  std::vector<double> older(static_cast<std::size_t>(n_views), 0.0);
  std::vector<double> old(static_cast<std::size_t>(n_views), 0.0);
  older[static_cast<std::size_t>(s0.previous_view)] = 1.0;
  old[static_cast<std::size_t>(s0.current.v)] = 1.0;
  for (int tau = 1; tau <= horizon; ++tau) {
    std::vector<double> cur(static_cast<std::size_t>(n_views), 0.0);
    for (int v = 0; v < n_views; ++v) {
      double acc = 0.0;
      for (const int v1 : neighbours(v, n_views)) {
        const double p1 = old[static_cast<std::size_t>(v1)];
        if (p1 == 0.0) {
          continue;
        }
        double inner = 0.0;
        double weight = 0.0;
        for (const int v2 : neighbours(v1, n_views)) {
          const double p2 = older[static_cast<std::size_t>(v2)];
          inner += p2 * transition_prob(m, v, v1, v2, n_views);
          weight += p2;
        }
        if (normalize_inner) {
          inner = weight > 0.0 ? inner / weight : 0.0;
        }
        acc += p1 * inner;
      }
      cur[static_cast<std::size_t>(v)] = acc;
    }
    g.slices.push_back(cur);
    older = std::move(old);
    old = std::move(cur);
  }
  return g;
}
} // namespace detail

// Marginal popularity recursion: each frame collects mass from its neighbours
// at t-1, weighted by the transition from the neighbour's own neighbourhood
// at t-2. The t-2 weights are normalized per neighbour so each slice sums to 1.
inline auto popularity_paper(const TransitionModel &m, const NavState &s0, int horizon, int n_views)
    -> PopularityGrid {
  return detail::marginal_recursion(m, s0, horizon, n_views, true);
}

// The same recursion without the per-neighbour normalization; it leaks mass
// from the third step on and exists for comparison only.
inline auto popularity_unnormalized(const TransitionModel &m, const NavState &s0, int horizon, int n_views)
    -> PopularityGrid {
  return detail::marginal_recursion(m, s0, horizon, n_views, false);
}

// Exact marginals of the second-order chain via a DP over (previous, current).
inline auto popularity_exact(const TransitionModel &m, const NavState &s0, int horizon, int n_views)
    -> PopularityGrid {
  m.validate();
  validate_nav(s0, n_views);
  verify(horizon >= 1, Errc::invalid_state, "horizon must be >= 1");
  const auto n = static_cast<std::size_t>(n_views);
  // joint[prev * n + cur]
  std::vector<double> joint(n * n, 0.0);
  joint[static_cast<std::size_t>(s0.previous_view) * n + static_cast<std::size_t>(s0.current.v)] = 1.0;
  PopularityGrid g{s0, horizon, n_views, {}};
  for (int tau = 1; tau <= horizon; ++tau) {
    std::vector<double> next(n * n, 0.0);
    std::vector<double> marginal(n, 0.0);
    for (int prev = 0; prev < n_views; ++prev) {
      for (int cur = std::max(0, prev - 1); cur <= std::min(n_views - 1, prev + 1); ++cur) {
        const double p = joint[static_cast<std::size_t>(prev) * n + static_cast<std::size_t>(cur)];
        if (p == 0.0) {
          continue;
        }
        for (const int nv : detail::neighbours(cur, n_views)) {
          const double q = p * transition_prob(m, nv, cur, prev, n_views);
          next[static_cast<std::size_t>(cur) * n + static_cast<std::size_t>(nv)] += q;
        }
      }
    }
    for (std::size_t cur = 0; cur < n; ++cur) {
      for (std::size_t nv = 0; nv < n; ++nv) {
        marginal[nv] += next[cur * n + nv];
      }
    }
    g.slices.push_back(marginal);
    joint = std::move(next);
  }
  return g;
}

// Uniform popularity over the achievable cone (model-blind baseline).
inline auto popularity_flat(const NavState &s0, int horizon, int n_views) -> PopularityGrid {
  PopularityGrid g{s0, horizon, n_views, {}};
  for (int tau = 1; tau <= horizon; ++tau) {
    const int lo = std::max(0, s0.current.v - tau);
    const int hi = std::min(n_views - 1, s0.current.v + tau);
    std::vector<double> s(static_cast<std::size_t>(n_views), 0.0);
    for (int v = lo; v <= hi; ++v) {
      s[static_cast<std::size_t>(v)] = 1.0 / (hi - lo + 1);
    }
    g.slices.push_back(s);
  }
  return g;
}

// Draws the next view from {cur-1, cur, cur+1} by inverse CDF.
template <typename Rng>
auto sample_next_view(const TransitionModel &m, int cur, int prev, int n_views, Rng &rng) -> int {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_valid = cur;
  for (int nv = cur - 1; nv <= cur + 1; ++nv) {
    if (nv < 0 || nv >= n_views) {
      continue;
    }
    acc += transition_prob(m, nv, cur, prev, n_views);
    last_valid = nv;
    if (u < acc) {
      return nv;
    }
  }
  return last_valid;
}

// path[0] is the start frame, followed by length-1 sampled steps.
inline auto sample_path(const TransitionModel &m, const NavState &s0, int length, std::uint64_t seed, int n_views)
    -> std::vector<FrameId> {
  m.validate();
  validate_nav(s0, n_views);
  verify(length >= 1, Errc::invalid_state, "path length must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<FrameId> path{s0.current};
  int prev = s0.previous_view;
  int cur = s0.current.v;
  for (int k = 1; k < length; ++k) {
    const int nv = sample_next_view(m, cur, prev, n_views, rng);
    prev = cur;
    cur = nv;
    path.push_back({cur, s0.current.t + k});
  }
  return path;
}

struct AchievableSet {
  FrameId origin{};
  int horizon{};
  std::vector<FrameId> frames; // ordered by t, then v

  [[nodiscard]] auto contains(FrameId f) const -> bool {
    return std::binary_search(frames.begin(), frames.end(), f,
                              [](FrameId a, FrameId b) { return a.t != b.t ? a.t < b.t : a.v < b.v; });
  }
  [[nodiscard]] auto view_range(int t) const -> std::pair<int, int> {
    int lo = std::numeric_limits<int>::max();
    int hi = -1;
    for (const auto &f : frames) {
      if (f.t == t) {
        lo = std::min(lo, f.v);
        hi = std::max(hi, f.v);
      }
    }
    return {lo, hi};
  }
};

inline auto achievable_set(FrameId origin, int n_t, int n_d, const ViewGrid &grid, int n_frames) -> AchievableSet {
  verify(n_t >= 1 && n_d >= 0, Errc::invalid_state, "N_T must be >= 1 and N_D >= 0");
  const int n_views = grid.total_views();
  verify(origin.v >= 0 && origin.v < n_views && origin.t >= 0 && origin.t < n_frames, Errc::invalid_state,
         "origin outside sequence");
  AchievableSet s{origin, n_t + n_d, {}};
  for (int tau = 1; tau <= s.horizon && origin.t + tau < n_frames; ++tau) {
    for (int v = std::max(0, origin.v - tau); v <= std::min(n_views - 1, origin.v + tau); ++v) {
      s.frames.push_back({v, origin.t + tau});
    }
  }
  return s;
}

// Text export: one "t v" line per position.
inline auto path_to_text(const std::vector<FrameId> &path) -> std::string {
  std::string out;
  for (const auto &f : path) {
    out += std::to_string(f.t) + " " + std::to_string(f.v) + "\n";
  }
  return out;
}

} // namespace imv
