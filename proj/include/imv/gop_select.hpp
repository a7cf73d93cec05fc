#pragma once

#include "session.hpp"

namespace imv {

// Bits of every reference color frame, per grid view and time.
using RefBitTable = std::map<std::pair<int, int>, std::uint64_t>;

inline auto reference_bit_table(const MultiviewSequence &seq, const ViewGrid &grid, const GopStructure &gop, int q,
                                const QuantLadder &ladder = {}) -> RefBitTable {
  RefBitTable bits;
  for (int r = 0; r < grid.n_ref_views; ++r) {
    const auto enc = encode_gop(seq.views[static_cast<std::size_t>(r)].frames, gop, q, ladder);
    for (std::size_t t = 0; t < enc.frames.size(); ++t) {
      bits[{grid.view_of_ref(r), static_cast<int>(t)}] = enc.frames[t].bits;
    }
  }
  return bits;
}

// Reference color bits a session along `path` receives: the union of the
// closures of its join and periodic bundles, each frame counted once.
inline auto reference_transmission_bits(const RefBitTable &bits, const ViewGrid &grid, const GopStructure &gop,
                                        int n_refs, int n_t, int n_d, int n_frames, const std::vector<FrameId> &path,
                                        int start_prev) -> std::uint64_t {
  std::set<PayloadKey> shipped;
  auto ship = [&](const std::vector<FrameId> &frames) {
    for (const auto &k : reference_closure(frames, grid, gop, n_refs)) {
      if (k.cat == Category::ref) {
        shipped.insert(k);
      }
    }
  };
  const int n_views = grid.total_views();
  std::vector<FrameId> join{path.front()};
  for (int tau = 1; tau <= n_d && tau < n_frames; ++tau) {
    for (int v = std::max(0, path.front().v - tau); v <= std::min(n_views - 1, path.front().v + tau); ++v) {
      join.push_back({v, tau});
    }
  }
  ship(join);
  SessionConfig cfg;
  cfg.n_t = n_t;
  cfg.n_d = n_d;
  for (const int t0 : request_times(cfg, static_cast<int>(path.size()))) {
    const auto nav = nav_at(path, t0, start_prev);
    ship(window_frames(nav.current, request_window(t0, n_t, n_d, n_frames), n_t, n_d, grid, n_frames));
  }
  std::uint64_t total = 0;
  for (const auto &k : shipped) {
    total += bits.at({k.v, k.t});
  }
  return total;
}

struct GopRow {
  int gop_size{};
  double mean_bits{};
};

struct GopSelection {
  int best{};
  std::vector<GopRow> table;
};

struct GopSearch {
  std::vector<int> candidates{1, 2, 4, 8, 16, 32};
  int n_t{8};
  int n_d{0};
  int n_refs{2};
  int ref_q{8};
  int n_paths{50};
  std::uint64_t seed{1};
};

// Seeded starts: uniform view, at rest.
inline auto path_start(std::uint64_t seed, int path_index, int n_views) -> NavState {
  const auto h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(path_index) + 0x51ULL));
  return at_rest(static_cast<int>(h % static_cast<std::uint64_t>(n_views)));
}

inline auto path_seed(std::uint64_t seed, int path_index) -> std::uint64_t {
  return splitmix64(seed + 0x9E37ULL * static_cast<std::uint64_t>(path_index + 1));
}

using GopBitTables = std::map<int, RefBitTable>;

inline auto gop_bit_tables(const MultiviewSequence &seq, const ViewGrid &grid, const GopSearch &search,
                           const QuantLadder &ladder = {}) -> GopBitTables {
  GopBitTables tables;
  for (const int g : search.candidates) {
    const GopStructure gop{g};
    gop.validate();
    tables.emplace(g, reference_bit_table(seq, grid, gop, search.ref_q, ladder));
  }
  return tables;
}

// Mean transmitted reference bits per candidate GOP size under `model`;
// the smallest mean wins, ties going to the smaller size.
inline auto select_gop_size(const MultiviewSequence &seq, const ViewGrid &grid, const TransitionModel &model,
                            const GopSearch &search, const GopBitTables &tables) -> GopSelection {
  verify(!search.candidates.empty(), Errc::invalid_state, "no GOP candidates");
  GopSelection out;
  const int n_views = grid.total_views();
  std::vector<std::pair<std::vector<FrameId>, int>> paths;
  for (int i = 0; i < search.n_paths; ++i) {
    const auto s0 = path_start(search.seed, i, n_views);
    paths.emplace_back(sample_path(model, s0, seq.n_frames, path_seed(search.seed, i), n_views), s0.previous_view);
  }
  auto candidates = search.candidates;
  std::sort(candidates.begin(), candidates.end());
  for (const int g : candidates) {
    const GopStructure gop{g};
    const auto it = tables.find(g);
    verify(it != tables.end(), Errc::invalid_state, "no bit table for GOP " + std::to_string(g));
    double sum = 0.0;
    for (const auto &[p, prev] : paths) {
      sum += static_cast<double>(reference_transmission_bits(it->second, grid, gop, search.n_refs, search.n_t,
                                                             search.n_d, seq.n_frames, p, prev));
    }
    out.table.push_back({g, sum / static_cast<double>(paths.size())});
  }
  const auto best = std::min_element(out.table.begin(), out.table.end(),
                                     [](const GopRow &a, const GopRow &b) { return a.mean_bits < b.mean_bits; });
  out.best = best->gop_size;
  return out;
}

inline auto select_gop_size(const MultiviewSequence &seq, const ViewGrid &grid, const TransitionModel &model,
                            const GopSearch &search, const QuantLadder &ladder = {}) -> GopSelection {
  verify(!search.candidates.empty(), Errc::invalid_state, "no GOP candidates");
  return select_gop_size(seq, grid, model, search, gop_bit_tables(seq, grid, search, ladder));
}

} // namespace imv
