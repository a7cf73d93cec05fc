#pragma once

#include "codec.hpp"
#include "navmodel.hpp"

#include <set>

namespace imv {

enum class Category : std::uint8_t { ref = 0, depth = 1, eframe = 2 };

inline auto category_name(Category c) -> const char * {
  switch (c) {
  case Category::ref: return "ref";
  case Category::depth: return "depth";
  case Category::eframe: return "eframe";
  }
  return "?";
}

inline auto category_from_name(const std::string &s) -> Category {
  if (s == "ref") {
    return Category::ref;
  }
  if (s == "depth") {
    return Category::depth;
  }
  verify(s == "eframe", Errc::protocol, "unknown frame category " + s);
  return Category::eframe;
}

// Identifies one stored payload. For ref/depth v is the grid view of the
// reference; q is 0 unless the payload is an e-frame.
struct PayloadKey {
  Category cat{};
  int v{};
  int t{};
  int q{};

  friend auto operator==(const PayloadKey &, const PayloadKey &) -> bool = default;
  friend auto operator<=>(const PayloadKey &, const PayloadKey &) = default;
};

// Reference views feeding the synthesis of view v (empty for a reference view).
inline auto synthesis_refs(const ViewGrid &grid, int v, int n_refs) -> std::vector<int> {
  if (grid.is_reference(v)) {
    return {};
  }
  const int l = grid.view_of_ref(grid.left_ref(v));
  const int r = grid.view_of_ref(grid.right_ref(v));
  if (n_refs == 2) {
    return {l, r};
  }
  return {grid.alpha(v) <= 0.5 ? l : r};
}

// Inclusive display window of a request.
struct Window {
  int first{};
  int last{};

  [[nodiscard]] auto empty() const { return last < first; }
  [[nodiscard]] auto contains(int t) const { return t >= first && t <= last; }
  friend auto operator==(const Window &, const Window &) -> bool = default;
};

inline auto request_window(int t0, int n_t, int n_d, int n_frames) -> Window {
  return {t0 + n_d + 1, std::min(t0 + n_d + n_t, n_frames - 1)};
}

inline auto join_window(int n_d, int n_frames) -> Window { return {0, std::min(n_d, n_frames - 1)}; }

// Frames of the window reachable from `origin` (the origin itself included
// when its time lies in the window).
inline auto window_frames(FrameId origin, Window w, int n_t, int n_d, const ViewGrid &grid, int n_frames)
    -> std::vector<FrameId> {
  std::vector<FrameId> out;
  if (w.contains(origin.t)) {
    out.push_back(origin);
  }
  for (const auto &f : achievable_set(origin, n_t, n_d, grid, n_frames).frames) {
    if (w.contains(f.t)) {
      out.push_back(f);
    }
  }
  return out;
}

// Every reference payload needed to display `frames`: color of each used
// reference plus its GOP chain back to the I frame, and block depth for
// references that feed a synthesis.
inline auto reference_closure(const std::vector<FrameId> &frames, const ViewGrid &grid, const GopStructure &gop,
                              int n_refs) -> std::set<PayloadKey> {
  std::set<PayloadKey> keys;
  auto add_color = [&](int rv, int t) {
    for (const int k : dependency_chain(gop, t)) {
      keys.insert({Category::ref, rv, k, 0});
    }
  };
  for (const auto &f : frames) {
    if (grid.is_reference(f.v)) {
      add_color(f.v, f.t);
      continue;
    }
    for (const int rv : synthesis_refs(grid, f.v, n_refs)) {
      add_color(rv, f.t);
      keys.insert({Category::depth, rv, f.t, 0});
    }
  }
  return keys;
}

} // namespace imv
