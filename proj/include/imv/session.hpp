#pragma once

#include "rdalloc.hpp"
#include "store.hpp"

namespace imv {

enum class AllocPolicy : std::uint8_t {
  weighted,         // popularity-weighted Lagrangian split of the budget
  uniform,          // every e-frame at one step
  weighted_matched, // weighted, with the budget the uniform step would spend
  none,             // no e-frames; the client fills holes itself
};

inline auto policy_name(AllocPolicy p) -> const char * {
  switch (p) {
  case AllocPolicy::weighted: return "weighted";
  case AllocPolicy::uniform: return "uniform";
  case AllocPolicy::weighted_matched: return "weighted_matched";
  case AllocPolicy::none: return "none";
  }
  return "?";
}

inline auto policy_from_name(const std::string &s) -> AllocPolicy {
  for (const auto p : {AllocPolicy::weighted, AllocPolicy::uniform, AllocPolicy::weighted_matched, AllocPolicy::none}) {
    if (s == policy_name(p)) {
      return p;
    }
  }
  throw Error(Errc::invalid_state, "unknown allocation policy " + s);
}

struct BudgetSpec {
  AllocPolicy policy{AllocPolicy::weighted};
  double budget{}; // e-frame bits per regular bundle (weighted)
  int q{16};       // step for uniform and weighted_matched
};

struct Request {
  int t0{};
  NavState nav{};
  bool join{};
};

struct BundleEntry {
  PayloadKey key;
  PayloadPtr frame;
};

struct AllocationRow {
  FrameId frame;
  double popularity{};
  int q{};
  double bits{};
  double mse{};
};

struct SoFBundle {
  int request_id{};
  Request request;
  Window window{};
  std::vector<FrameId> covered; // displayable frames of the window
  std::vector<BundleEntry> entries;
  std::vector<AllocationRow> allocation;
  double budget{};
  double lambda{};
  std::uint64_t ref_bits{};
  std::uint64_t depth_bits{};
  std::uint64_t eframe_bits{};

  [[nodiscard]] auto total_bits() const { return ref_bits + depth_bits + eframe_bits; }
};

// Server-side per-session state.
struct History {
  std::set<PayloadKey> shipped;
  std::set<FrameId> covered;
  int requests{};
  int next_t0{};
  bool joined{};
};

inline void check_store_config(const Store &store, const SessionConfig &cfg) {
  cfg.validate();
  verify(cfg.block_size == store.cfg.block_size && cfg.gop == store.cfg.gop && cfg.n_refs == store.cfg.n_refs &&
             cfg.ladder == store.cfg.ladder && cfg.ref_q == store.cfg.ref_q,
         Errc::invalid_state, "session config does not match the store");
}

// Copies the storage fields of the store into a session config.
inline auto session_config(const Store &store, int n_t, int n_d) -> SessionConfig {
  auto c = store.cfg;
  c.n_t = n_t;
  c.n_d = n_d;
  return c;
}

// Builds the SoF for one request: cone, popularity, e-frame allocation and the
// reference closure not yet shipped in this session.
inline auto handle_request(const Store &store, const SessionConfig &cfg, const TransitionModel &model,
                           const Request &req, History &hist, const BudgetSpec &spend) -> SoFBundle {
  check_store_config(store, cfg);
  const int n_views = store.n_views();
  validate_nav(req.nav, n_views);
  verify(req.nav.current.t == req.t0, Errc::invalid_state, "request time differs from reported position");

  SoFBundle b;
  b.request_id = hist.requests;
  b.request = req;
  if (req.join) {
    verify(!hist.joined && hist.requests == 0, Errc::invalid_state, "join must be the first request");
    verify(req.t0 == 0, Errc::invalid_state, "join must start at t = 0");
    b.window = join_window(cfg.n_d, store.n_frames);
  } else {
    verify(hist.joined, Errc::invalid_state, "request before join");
    verify(req.t0 == hist.next_t0, Errc::invalid_state,
           "expected request at t0 = " + std::to_string(hist.next_t0) + ", got " + std::to_string(req.t0));
    verify(hist.covered.contains(req.nav.current), Errc::out_of_cone, "reported position was not displayable");
    verify(req.t0 == 0 || hist.covered.contains({req.nav.previous_view, req.t0 - 1}), Errc::out_of_cone,
           "reported previous view was not displayable");
    b.window = request_window(req.t0, cfg.n_t, cfg.n_d, store.n_frames);
  }
  const int horizon = req.join ? std::max(cfg.n_d, 1) : cfg.n_t + cfg.n_d;
  if (req.join) {
    // The join cone is anchored at t = 0 with horizon N_D.
    b.covered.push_back(req.nav.current);
    for (int tau = 1; tau <= cfg.n_d && tau < store.n_frames; ++tau) {
      for (int v = std::max(0, req.nav.current.v - tau); v <= std::min(n_views - 1, req.nav.current.v + tau); ++v) {
        b.covered.push_back({v, tau});
      }
    }
  } else {
    b.covered = window_frames(req.nav.current, b.window, cfg.n_t, cfg.n_d, store.grid, store.n_frames);
  }

  // E-frames for the virtual frames of the window.
  const auto pop = popularity_paper(model, req.nav, horizon, n_views);
  std::vector<RDCurve> curves;
  std::vector<double> weights;
  for (const auto &f : b.covered) {
    if (store.grid.is_reference(f.v) || spend.policy == AllocPolicy::none) {
      continue;
    }
    // A frame the model can never reach gets no e-frame.
    const double w = f == req.nav.current ? 1.0 : pop.at(f.v, f.t);
    if (w == 0.0) {
      continue;
    }
    curves.push_back(store.curve(f));
    weights.push_back(w);
  }
  if (spend.policy != AllocPolicy::none && !curves.empty()) {
    verify(store.has_eframes, Errc::missing_frame, "store holds no e-frames");
    RateAllocation a;
    const double frames_in_window = static_cast<double>(b.window.last - b.window.first + 1);
    switch (spend.policy) {
    case AllocPolicy::weighted:
      b.budget = req.join ? spend.budget * frames_in_window / cfg.n_t : spend.budget;
      a = allocate(curves, weights, b.budget);
      break;
    case AllocPolicy::uniform:
      a = allocate_uniform(curves, spend.q);
      b.budget = a.total_bits;
      break;
    case AllocPolicy::weighted_matched:
      b.budget = allocate_uniform(curves, spend.q).total_bits;
      a = allocate(curves, weights, b.budget);
      break;
    case AllocPolicy::none: break;
    }
    b.lambda = a.lambda;
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const auto &p = a.chosen(curves, i);
      const auto &f = curves[i].frame_id;
      b.allocation.push_back({f, weights[i], p.q, p.bits, p.mse});
    }
  }

  for (const auto &key : reference_closure(b.covered, store.grid, cfg.gop, cfg.n_refs)) {
    if (hist.shipped.insert(key).second) {
      b.entries.push_back({key, store.payload(key)});
    }
  }
  for (const auto &row : b.allocation) {
    const PayloadKey key{Category::eframe, row.frame.v, row.frame.t, row.q};
    hist.shipped.insert(key);
    b.entries.push_back({key, store.payload(key)});
  }
  for (const auto &e : b.entries) {
    const auto bits = static_cast<std::uint64_t>(e.frame->bits);
    (e.key.cat == Category::ref ? b.ref_bits : e.key.cat == Category::depth ? b.depth_bits : b.eframe_bits) += bits;
  }

  hist.covered.insert(b.covered.begin(), b.covered.end());
  hist.joined = true;
  ++hist.requests;
  if (!req.join) {
    hist.next_t0 = req.t0 + cfg.n_t;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Client decoder.

struct FrameStat {
  FrameId frame;
  double psnr{};
  int eframe_q{}; // 0 when none applied
};

struct ClientStats {
  std::vector<FrameStat> frames;
  ProjectionStats projection;
  std::uint64_t ref_bits{};
  std::uint64_t depth_bits{};
  std::uint64_t eframe_bits{};
  std::uint64_t inpaint_calls{};
  int stalls{};
  int bundles{};
};

struct ClientState {
  NavState nav{};
  std::map<PayloadKey, PayloadPtr> received;
  std::map<FrameId, int> eframe_q;
  std::set<FrameId> displayable;
  ClientStats stats;
};

namespace detail {
inline auto client_lookup(const ClientState &cs) -> DecodeCache::Lookup {
  return [&cs](const PayloadKey &k) -> const EncodedFrame & {
    const auto it = cs.received.find(k);
    verify(it != cs.received.end(), Errc::missing_frame, "payload not received");
    return *it->second;
  };
}
} // namespace detail

// Takes in a bundle and displays the given positions of its window. Decoding
// uses only received payloads; the store supplies geometry and the
// measurement targets.
inline void client_step(ClientState &cs, const SoFBundle &bundle, std::span<const FrameId> positions,
                        const Store &store, const SessionConfig &cfg) {
  for (const auto &e : bundle.entries) {
    cs.received.emplace(e.key, e.frame);
    const auto bits = static_cast<std::uint64_t>(e.frame->bits);
    (e.key.cat == Category::ref ? cs.stats.ref_bits
     : e.key.cat == Category::depth ? cs.stats.depth_bits
                                    : cs.stats.eframe_bits) += bits;
  }
  for (const auto &row : bundle.allocation) {
    cs.eframe_q[row.frame] = row.q;
  }
  cs.displayable.insert(bundle.covered.begin(), bundle.covered.end());
  ++cs.stats.bundles;
  if (!bundle.request.join && !cfg.realtime()) {
    ++cs.stats.stalls;
  }

  const auto lookup = detail::client_lookup(cs);
  auto &cache = *store.cache;
  for (const auto &f : positions) {
    verify(bundle.window.contains(f.t), Errc::invalid_state, "position outside bundle window");
    verify(cs.displayable.contains(f), Errc::missing_frame, "position outside the shipped cone");
    for (const auto &k : reference_closure({f}, store.grid, cfg.gop, cfg.n_refs)) {
      verify(cs.received.contains(k), Errc::missing_frame, "reference payload missing");
    }
    FrameStat st{f, 0.0, 0};
    if (store.grid.is_reference(f.v)) {
      const auto &img = cache.ref_frame({Category::ref, f.v, f.t, 0}, cfg.gop, cfg.ladder, lookup);
      st.psnr = psnr(img, store.target(f));
    } else {
      const auto &nc =
          cache.noncomplex(f, store.grid, cfg, store.cameras, store.width, store.height, store.range, lookup);
      cs.stats.projection += nc.stats;
      const auto q = cs.eframe_q.find(f);
      Frame out;
      if (q != cs.eframe_q.end()) {
        const PayloadKey key{Category::eframe, f.v, f.t, q->second};
        out = apply_eframe(nc.image, cache.residual(key, cfg.ladder, lookup));
        st.eframe_q = q->second;
      } else {
        out = inpaint(nc.image, false);
        ++cs.stats.inpaint_calls;
      }
      st.psnr = psnr(out, store.target(f));
    }
    cs.stats.frames.push_back(st);
    cs.nav = {f, cs.nav.current.v};
  }
}

// ---------------------------------------------------------------------------

struct SessionReport {
  std::vector<FrameId> path;
  std::vector<FrameStat> frames;
  std::vector<std::uint64_t> bundle_bits;
  std::uint64_t ref_bits{};
  std::uint64_t depth_bits{};
  std::uint64_t eframe_bits{};
  ProjectionStats projection;
  std::uint64_t inpaint_calls{};
  int stalls{};
  double mean_psnr{};

  [[nodiscard]] auto total_bits() const { return ref_bits + depth_bits + eframe_bits; }
  [[nodiscard]] auto share(std::uint64_t part) const -> double {
    const auto t = total_bits();
    return t == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(t);
  }
};

// The request schedule of a session over `length` displayed frames.
inline auto request_times(const SessionConfig &cfg, int length) -> std::vector<int> {
  std::vector<int> out;
  for (int t0 = 0; t0 + cfg.n_d + 1 <= length - 1; t0 += cfg.n_t) {
    out.push_back(t0);
  }
  return out;
}

inline auto nav_at(const std::vector<FrameId> &path, int t, int start_prev) -> NavState {
  return {path[static_cast<std::size_t>(t)], t == 0 ? start_prev : path[static_cast<std::size_t>(t - 1)].v};
}

inline auto window_positions(const std::vector<FrameId> &path, Window w) -> std::span<const FrameId> {
  const int last = std::min(w.last, static_cast<int>(path.size()) - 1);
  if (last < w.first) {
    return {};
  }
  return std::span(path).subspan(static_cast<std::size_t>(w.first), static_cast<std::size_t>(last - w.first + 1));
}

// Samples a navigation path and plays it through join + periodic requests.
inline auto run_session(const Store &store, const SessionConfig &cfg, const TransitionModel &model,
                        const NavState &start, int length, std::uint64_t seed, const BudgetSpec &spend)
    -> SessionReport {
  check_store_config(store, cfg);
  verify(length >= 1 && length <= store.n_frames, Errc::invalid_state, "path length outside sequence");
  verify(start.current.t == 0, Errc::invalid_state, "sessions start at t = 0");
  SessionReport rep;
  rep.path = sample_path(model, start, length, seed, store.n_views());
  History hist;
  ClientState cs;
  cs.nav = start;

  auto play = [&](const Request &req) {
    const auto b = handle_request(store, cfg, model, req, hist, spend);
    rep.bundle_bits.push_back(b.total_bits());
    rep.ref_bits += b.ref_bits;
    rep.depth_bits += b.depth_bits;
    rep.eframe_bits += b.eframe_bits;
    client_step(cs, b, window_positions(rep.path, b.window), store, cfg);
  };
  play({0, start, true});
  for (const int t0 : request_times(cfg, length)) {
    play({t0, nav_at(rep.path, t0, start.previous_view), false});
  }

  rep.frames = cs.stats.frames;
  rep.projection = cs.stats.projection;
  rep.inpaint_calls = cs.stats.inpaint_calls;
  rep.stalls = cs.stats.stalls;
  double sum = 0.0;
  for (const auto &f : rep.frames) {
    sum += f.psnr;
  }
  rep.mean_psnr = rep.frames.empty() ? 0.0 : sum / static_cast<double>(rep.frames.size());
  return rep;
}

} // namespace imv
