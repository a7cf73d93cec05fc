#pragma once

#include "gop_select.hpp"
#include "protocol.hpp"

#include <cstdio>

namespace imv {

struct DeskScene {
  std::uint64_t seed{7};
  int width{128};
  int height{128};
  int n_ref_views{3};
  int n_intermediate{2};
  int n_frames{32};

  [[nodiscard]] auto grid() const -> ViewGrid { return {n_ref_views, n_intermediate}; }
};

inline auto desk_sequence(const DeskScene &d) -> MultiviewSequence {
  return generate_synthetic_scene(random_scene_spec(d.seed, d.width, d.height, d.n_ref_views, d.n_frames), d.seed);
}

inline auto fmt(double v, int precision = 6) -> std::string {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", precision, v);
  return buf.data();
}

// Tab-separated rows plus the configuration that produced them.
struct ResultTable {
  static constexpr int format_version = 1;
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> summary;
  Json config = Json::object();

  void add(std::vector<std::string> row) {
    verify(row.size() == columns.size(), Errc::invalid_state, "row width != column count");
    rows.push_back(std::move(row));
  }
  void note(const std::string &key, const std::string &value) { summary.emplace_back(key, value); }

  [[nodiscard]] auto value(const std::string &key) const -> std::string {
    for (const auto &[k, v] : summary) {
      if (k == key) {
        return v;
      }
    }
    throw Error(Errc::invalid_state, "no summary entry " + key);
  }

  [[nodiscard]] auto to_tsv() const -> std::string {
    std::string out = "# " + name + " format " + std::to_string(format_version) + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out += (i == 0 ? "" : "\t") + columns[i];
    }
    out += "\n";
    for (const auto &r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        out += (i == 0 ? "" : "\t") + r[i];
      }
      out += "\n";
    }
    for (const auto &[k, v] : summary) {
      out += "# " + k + "=" + v + "\n";
    }
    return out;
  }

  void write(const fs::path &dir) const {
    const auto tsv = to_tsv();
    detail::write_file_bytes(dir / (name + ".tsv"),
                             std::span(reinterpret_cast<const std::uint8_t *>(tsv.data()), tsv.size()));
    const auto cfg = config.dump(2) + "\n";
    detail::write_file_bytes(dir / (name + ".config.json"),
                             std::span(reinterpret_cast<const std::uint8_t *>(cfg.data()), cfg.size()));
  }
};

inline auto model_json(const TransitionModel &m) -> Json { return {m.p1, m.p2, m.p3}; }

// ---------------------------------------------------------------------------
// Averaging over seeded paths.

struct RunSummary {
  double mean_psnr{};
  double total_bits{};
  double ref_bits{};
  double depth_bits{};
  double eframe_bits{};
  int stalls{};
  std::uint64_t inpaint_calls{};
  ProjectionStats projection;
  std::uint64_t virtual_frames{};
};

inline auto average_sessions(const Store &store, const SessionConfig &cfg, const TransitionModel &model, int n_paths,
                             std::uint64_t seed, const BudgetSpec &spend, int length = 0) -> RunSummary {
  verify(n_paths >= 1, Errc::invalid_state, "n_paths must be >= 1");
  const int len = length > 0 ? length : store.n_frames;
  RunSummary s;
  double psnr_sum = 0.0;
  std::size_t frames = 0;
  for (int i = 0; i < n_paths; ++i) {
    const auto rep =
        run_session(store, cfg, model, path_start(seed, i, store.n_views()), len, path_seed(seed, i), spend);
    for (const auto &f : rep.frames) {
      psnr_sum += f.psnr;
      if (!store.grid.is_reference(f.frame.v)) {
        ++s.virtual_frames;
      }
    }
    frames += rep.frames.size();
    s.ref_bits += static_cast<double>(rep.ref_bits);
    s.depth_bits += static_cast<double>(rep.depth_bits);
    s.eframe_bits += static_cast<double>(rep.eframe_bits);
    s.stalls += rep.stalls;
    s.inpaint_calls += rep.inpaint_calls;
    s.projection += rep.projection;
  }
  const double n = n_paths;
  s.mean_psnr = psnr_sum / static_cast<double>(frames);
  s.ref_bits /= n;
  s.depth_bits /= n;
  s.eframe_bits /= n;
  s.total_bits = s.ref_bits + s.depth_bits + s.eframe_bits;
  return s;
}

// PSNR of a rate-PSNR series at `bits`, linear in log-rate; NaN outside.
inline auto psnr_at_rate(std::vector<RatePsnr> pts, double bits) -> double {
  std::sort(pts.begin(), pts.end(), [](const RatePsnr &a, const RatePsnr &b) { return a.bits < b.bits; });
  if (pts.empty() || bits < pts.front().bits || bits > pts.back().bits) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (bits <= pts[i].bits) {
      const double la = std::log10(pts[i - 1].bits);
      const double lb = std::log10(pts[i].bits);
      const double w = lb > la ? (std::log10(bits) - la) / (lb - la) : 1.0;
      return pts[i - 1].psnr + w * (pts[i].psnr - pts[i - 1].psnr);
    }
  }
  return pts.front().psnr;
}

// Highest PSNR a series reaches with at most `bits`.
inline auto best_psnr_within(const std::vector<RatePsnr> &pts, double bits) -> double {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto &p : pts) {
    if (p.bits <= bits) {
      best = std::max(best, p.psnr);
    }
  }
  const double inside = psnr_at_rate(pts, bits);
  return std::isnan(inside) ? best : std::max(best, inside);
}

// Geometric middle of the rate range all series share; NaN without overlap.
inline auto common_rate(const std::vector<std::vector<RatePsnr>> &series) -> double {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  for (const auto &s : series) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = 0.0;
    for (const auto &p : s) {
      mn = std::min(mn, p.bits);
      mx = std::max(mx, p.bits);
    }
    lo = std::max(lo, mn);
    hi = std::min(hi, mx);
  }
  if (!(hi >= lo) || lo <= 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return std::sqrt(lo * hi);
}

// ---------------------------------------------------------------------------
// N_T / N_D sweep.

struct SweepSpec {
  std::vector<std::pair<int, int>> configs{{2, 0}, {4, 0}, {8, 0}}; // (N_T, N_D)
  std::vector<int> steps{8, 16, 32, 64};                            // e-frame steps to sweep
  TransitionModel model{0.6, 0.5, 0.3};
  int n_paths{20};
  std::uint64_t seed{1};
};

struct SweepResult {
  ResultTable table;
  std::vector<std::vector<RatePsnr>> series; // one per config
  std::vector<double> psnr_at_common;        // one per config
  double common_bits{};
};

inline auto sweep_nt_nd(const Store &store, const SweepSpec &spec) -> SweepResult {
  SweepResult out;
  auto &t = out.table;
  t.name = "sweep";
  t.columns = {"n_t", "n_d", "q", "mean_psnr_db", "total_kbit", "ref_pct", "depth_pct", "eframe_pct", "stalls"};
  Json cfgs = Json::array();
  for (const auto &[nt, nd] : spec.configs) {
    cfgs.push_back({nt, nd});
  }
  t.config = {{"command", "sweep"},   {"configs", cfgs},         {"steps", spec.steps},
              {"model", model_json(spec.model)}, {"n_paths", spec.n_paths}, {"seed", spec.seed},
              {"block_size", store.cfg.block_size}, {"gop_size", store.cfg.gop.gop_size}, {"ref_q", store.cfg.ref_q}};
  for (const auto &[nt, nd] : spec.configs) {
    const auto cfg = session_config(store, nt, nd);
    std::vector<RatePsnr> series;
    for (const int q : spec.steps) {
      const auto s = average_sessions(store, cfg, spec.model, spec.n_paths, spec.seed,
                                      {AllocPolicy::weighted_matched, 0.0, q});
      series.push_back({s.total_bits, s.mean_psnr});
      t.add({std::to_string(nt), std::to_string(nd), std::to_string(q), fmt(s.mean_psnr, 4), fmt(s.total_bits / 1000.0, 3),
             fmt(100.0 * s.ref_bits / s.total_bits, 2), fmt(100.0 * s.depth_bits / s.total_bits, 2),
             fmt(100.0 * s.eframe_bits / s.total_bits, 2), std::to_string(s.stalls)});
    }
    out.series.push_back(std::move(series));
  }
  out.common_bits = common_rate(out.series);
  t.note("common_kbit", fmt(out.common_bits / 1000.0, 3));
  for (std::size_t i = 0; i < spec.configs.size(); ++i) {
    const double p = psnr_at_rate(out.series[i], out.common_bits);
    out.psnr_at_common.push_back(p);
    t.note("psnr_at_common_nt" + std::to_string(spec.configs[i].first) + "_nd" + std::to_string(spec.configs[i].second),
           fmt(p, 4));
  }
  return out;
}

// ---------------------------------------------------------------------------
// GOP size with and without the behaviour model.

struct GopCompare {
  ResultTable table;
  GopSelection aware;
  GopSelection blind;      // chosen under equiprobable switching
  double blind_bits{};     // true-model rate of the blind choice
  double aware_bits{};     // true-model rate of the aware choice
  double penalty_pct{};
};

inline const TransitionModel equiprobable_model{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

inline auto compare_gop(const MultiviewSequence &seq, const ViewGrid &grid, const TransitionModel &model,
                        const GopSearch &search, const QuantLadder &ladder = {}) -> GopCompare {
  GopCompare out;
  const auto tables = gop_bit_tables(seq, grid, search, ladder);
  out.aware = select_gop_size(seq, grid, model, search, tables);
  out.blind = select_gop_size(seq, grid, equiprobable_model, search, tables);
  auto &t = out.table;
  t.name = "gop";
  t.columns = {"gop_size", "model_kbit", "equiprobable_kbit"};
  Json cands = search.candidates;
  t.config = {{"command", "gop"},         {"model", model_json(model)}, {"candidates", cands},
              {"n_t", search.n_t},        {"n_d", search.n_d},         {"n_refs", search.n_refs},
              {"ref_q", search.ref_q},    {"n_paths", search.n_paths}, {"seed", search.seed}};
  for (std::size_t i = 0; i < out.aware.table.size(); ++i) {
    t.add({std::to_string(out.aware.table[i].gop_size), fmt(out.aware.table[i].mean_bits / 1000.0, 3),
           fmt(out.blind.table[i].mean_bits / 1000.0, 3)});
    if (out.aware.table[i].gop_size == out.blind.best) {
      out.blind_bits = out.aware.table[i].mean_bits;
    }
    if (out.aware.table[i].gop_size == out.aware.best) {
      out.aware_bits = out.aware.table[i].mean_bits;
    }
  }
  out.penalty_pct = 100.0 * (out.blind_bits / out.aware_bits - 1.0);
  t.note("best_with_model", std::to_string(out.aware.best));
  t.note("best_equiprobable", std::to_string(out.blind.best));
  t.note("penalty_pct", fmt(out.penalty_pct, 3));
  return out;
}

// ---------------------------------------------------------------------------
// Popularity-weighted versus uniform e-frame allocation.

enum class RateBasis : std::uint8_t { total, eframe };

struct AllocCompareSpec {
  std::vector<TransitionModel> scenarios{{0.9, 0.1, 0.9}, {0.3, 0.3, 0.3}, {0.1, 0.9, 0.1}, {0.1, 0.1, 0.1}};
  std::vector<int> steps{8, 12, 16, 24, 32, 48, 64};
  int n_t{8};
  int n_d{0};
  int n_paths{20};
  std::uint64_t seed{1};
  RateBasis basis{RateBasis::eframe};
};

struct AllocCompareResult {
  ResultTable table;
  std::vector<double> bd_rate; // per scenario, weighted versus uniform
};

inline auto alloc_compare(const Store &store, const AllocCompareSpec &spec) -> AllocCompareResult {
  AllocCompareResult out;
  auto &t = out.table;
  t.name = "alloc_compare";
  t.columns = {"p1", "p2", "p3", "q", "uniform_kbit", "uniform_psnr_db", "weighted_kbit", "weighted_psnr_db"};
  Json sc = Json::array();
  for (const auto &m : spec.scenarios) {
    sc.push_back(model_json(m));
  }
  t.config = {{"command", "alloc-compare"},
              {"scenarios", sc},
              {"steps", spec.steps},
              {"n_t", spec.n_t},
              {"n_d", spec.n_d},
              {"n_paths", spec.n_paths},
              {"seed", spec.seed},
              {"rate", spec.basis == RateBasis::eframe ? "eframe" : "total"},
              {"block_size", store.cfg.block_size},
              {"gop_size", store.cfg.gop.gop_size}};
  const auto cfg = session_config(store, spec.n_t, spec.n_d);
  for (const auto &m : spec.scenarios) {
    std::vector<RatePsnr> uni;
    std::vector<RatePsnr> wtd;
    for (const int q : spec.steps) {
      const auto u = average_sessions(store, cfg, m, spec.n_paths, spec.seed, {AllocPolicy::uniform, 0.0, q});
      const auto w = average_sessions(store, cfg, m, spec.n_paths, spec.seed, {AllocPolicy::weighted_matched, 0.0, q});
      const double ub = spec.basis == RateBasis::eframe ? u.eframe_bits : u.total_bits;
      const double wb = spec.basis == RateBasis::eframe ? w.eframe_bits : w.total_bits;
      uni.push_back({ub, u.mean_psnr});
      wtd.push_back({wb, w.mean_psnr});
      t.add({fmt(m.p1, 2), fmt(m.p2, 2), fmt(m.p3, 2), std::to_string(q), fmt(ub / 1000.0, 3), fmt(u.mean_psnr, 4),
             fmt(wb / 1000.0, 3), fmt(w.mean_psnr, 4)});
    }
    const double bd = bjontegaard_rate(uni, wtd);
    out.bd_rate.push_back(bd);
    t.note("bd_rate_pct_" + fmt(m.p1, 2) + "_" + fmt(m.p2, 2) + "_" + fmt(m.p3, 2), fmt(bd, 4));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoders without e-frames.

struct BaselineSpec {
  int block_size{16};
  std::vector<int> ref_steps{4, 8, 16, 32, 64};
  // e-frame operating points, as the step a uniform split would use
  std::vector<int> eframe_steps{192, 96, 48, 24, 12};
  // coarse steps let unlikely frames ship almost nothing
  QuantLadder ladder{{4, 8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256}};
  int gop_size{8};
  int n_t{8};
  int n_d{0};
  TransitionModel model{0.9, 0.1, 0.9};
  int n_paths{10};
  std::uint64_t seed{1};
};

struct BaselineBudgetRow {
  double budget{};
  double proposed{};
  double block_inpaint{};
  double dense_inpaint{};
};

struct BaselineResult {
  ResultTable table;
  std::vector<RatePsnr> proposed; // every (ref step, e-frame step) point
  std::vector<RatePsnr> block_inpaint;
  std::vector<RatePsnr> dense_inpaint;
  std::vector<BaselineBudgetRow> budgets; // ascending
};

// Points no other point beats at lower or equal rate, by rate.
inline auto upper_envelope(std::vector<RatePsnr> pts) -> std::vector<RatePsnr> {
  std::sort(pts.begin(), pts.end(),
            [](const RatePsnr &a, const RatePsnr &b) { return a.bits < b.bits || (a.bits == b.bits && a.psnr > b.psnr); });
  std::vector<RatePsnr> out;
  for (const auto &p : pts) {
    if (out.empty() || p.psnr > out.back().psnr) {
      out.push_back(p);
    }
  }
  return out;
}

// Tested budgets are the block decoder's own rates. At each one every decoder
// reports the best PSNR it reaches without exceeding it.
inline auto run_baselines(const MultiviewSequence &seq, const ViewGrid &grid, const BaselineSpec &spec)
    -> BaselineResult {
  spec.ladder.validate();
  BaselineResult out;
  auto &t = out.table;
  t.name = "baselines";
  t.columns = {"decoder", "ref_q", "eframe_q", "total_kbit", "mean_psnr_db"};
  t.config = {{"command", "baselines"},       {"block_size", spec.block_size}, {"ref_steps", spec.ref_steps},
              {"eframe_steps", spec.eframe_steps}, {"ladder", spec.ladder.steps}, {"gop_size", spec.gop_size},
              {"n_t", spec.n_t},              {"n_d", spec.n_d},               {"model", model_json(spec.model)},
              {"n_paths", spec.n_paths},      {"seed", spec.seed}};
  for (const int rq : spec.ref_steps) {
    SessionConfig cfg;
    cfg.n_t = spec.n_t;
    cfg.n_d = spec.n_d;
    cfg.block_size = spec.block_size;
    cfg.gop = {spec.gop_size};
    cfg.ladder = spec.ladder;
    cfg.ref_q = rq;
    const auto store = build_store(seq, grid, cfg);
    const auto b = average_sessions(store, cfg, spec.model, spec.n_paths, spec.seed, {AllocPolicy::none, 0.0, rq});
    out.block_inpaint.push_back({b.total_bits, b.mean_psnr});
    t.add({"block_inpaint_b" + std::to_string(spec.block_size), std::to_string(rq), "-",
           fmt(b.total_bits / 1000.0, 3), fmt(b.mean_psnr, 4)});
    for (const int eq : spec.eframe_steps) {
      const auto p = average_sessions(store, cfg, spec.model, spec.n_paths, spec.seed,
                                      {AllocPolicy::weighted_matched, 0.0, eq});
      out.proposed.push_back({p.total_bits, p.mean_psnr});
      t.add({"proposed_b" + std::to_string(spec.block_size), std::to_string(rq), std::to_string(eq),
             fmt(p.total_bits / 1000.0, 3), fmt(p.mean_psnr, 4)});
    }
    auto dense_cfg = cfg;
    dense_cfg.block_size = 1;
    const auto dense_store = build_store(seq, grid, dense_cfg, {false});
    const auto d = average_sessions(dense_store, dense_cfg, spec.model, spec.n_paths, spec.seed,
                                    {AllocPolicy::none, 0.0, rq});
    out.dense_inpaint.push_back({d.total_bits, d.mean_psnr});
    t.add({"dense_inpaint", std::to_string(rq), "-", fmt(d.total_bits / 1000.0, 3), fmt(d.mean_psnr, 4)});
  }
  const auto prop = upper_envelope(out.proposed);
  const auto block = upper_envelope(out.block_inpaint);
  const auto dense = upper_envelope(out.dense_inpaint);
  std::vector<double> budgets;
  for (const auto &p : out.block_inpaint) {
    budgets.push_back(p.bits);
  }
  std::sort(budgets.begin(), budgets.end());
  for (const double r : budgets) {
    const BaselineBudgetRow row{r, best_psnr_within(prop, r), best_psnr_within(block, r), best_psnr_within(dense, r)};
    out.budgets.push_back(row);
    t.note("at_kbit_" + fmt(r / 1000.0, 1), "proposed=" + fmt(row.proposed, 3) +
                                                  ",block_inpaint=" + fmt(row.block_inpaint, 3) +
                                                  ",dense_inpaint=" + fmt(row.dense_inpaint, 3));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decoder complexity and residual energy per block size.

struct ComplexityRow {
  int block_size{};
  double point_projections{}; // per virtual frame
  double pixels_copied{};
  double residual_variance{};
  double hole_fraction{};
  std::uint64_t decoder_inpaint_calls{};
};

struct ComplexitySpec {
  std::vector<int> block_sizes{1, 4, 8, 16};
  int ref_q{8};
  int gop_size{8};
  int n_refs{2};
  int frame_stride{4};
};

// Residual statistics of every virtual view at every stride-th frame.
inline auto complexity_rows(const MultiviewSequence &seq, const ViewGrid &grid, const ComplexitySpec &spec)
    -> std::vector<ComplexityRow> {
  const auto cams = reference_cameras(seq);
  const QuantLadder ladder;
  std::vector<std::vector<Frame>> dec(static_cast<std::size_t>(grid.n_ref_views));
  for (int r = 0; r < grid.n_ref_views; ++r) {
    dec[static_cast<std::size_t>(r)] =
        encode_gop(seq.views[static_cast<std::size_t>(r)].frames, {spec.gop_size}, spec.ref_q, ladder).reconstructions;
  }
  std::map<FrameId, Frame> targets;
  std::vector<ComplexityRow> rows;
  for (const int b : spec.block_sizes) {
    ComplexityRow row{b, 0, 0, 0, 0, 0};
    std::size_t n = 0;
    const SynthesisConfig syn{b, spec.n_refs, std::max(1 << 16, seq.width + seq.height)};
    for (int t = 0; t < seq.n_frames; t += spec.frame_stride) {
      std::vector<BlockDepthMap> depth;
      for (int r = 0; r < grid.n_ref_views; ++r) {
        const auto block = downsample_depth(seq.views[static_cast<std::size_t>(r)].depths[static_cast<std::size_t>(t)], b);
        const auto e = encode_depth(block.codes, spec.ref_q, ladder);
        depth.push_back({decode_depth(e, block.codes.width(), block.codes.height(), ladder), b, block.range});
      }
      for (int v = 0; v < grid.total_views(); ++v) {
        if (grid.is_reference(v)) {
          continue;
        }
        const auto cam = camera_for_view(cams, grid, v);
        const auto ts = static_cast<std::size_t>(t);
        auto it = targets.find({v, t});
        if (it == targets.end()) {
          const auto &l = seq.views[static_cast<std::size_t>(grid.left_ref(v))];
          const auto &r = seq.views[static_cast<std::size_t>(grid.right_ref(v))];
          it = targets
                   .emplace(FrameId{v, t},
                            complex_vvs({&l.frames[ts], &l.depths[ts], cams[static_cast<std::size_t>(grid.left_ref(v))]},
                                        {&r.frames[ts], &r.depths[ts], cams[static_cast<std::size_t>(grid.right_ref(v))]},
                                        cam))
                   .first;
        }
        std::vector<RefView> refs;
        for (const int sv : synthesis_refs(grid, v, spec.n_refs)) {
          const auto r = static_cast<std::size_t>(grid.ref_of_view(sv));
          refs.push_back({&dec[r][ts], &depth[r], cams[r]});
        }
        const auto ef_before = inpaint_invocations.load();
        const auto nc = noncomplex_vvs(refs, cam, syn);
        const auto ef = make_eframe(nc.image, it->second, {v, t}, syn);
        (void)apply_eframe(nc.image, ef);
        row.decoder_inpaint_calls += inpaint_invocations.load() - ef_before;
        row.point_projections += static_cast<double>(nc.stats.point_projections);
        row.pixels_copied += static_cast<double>(nc.stats.pixels_copied);
        row.residual_variance += residual_variance(ef.residual);
        row.hole_fraction += static_cast<double>(nc.image.hole_count()) / static_cast<double>(nc.image.hole.size());
        ++n;
      }
    }
    const double dn = static_cast<double>(std::max<std::size_t>(n, 1));
    row.point_projections /= dn;
    row.pixels_copied /= dn;
    row.residual_variance /= dn;
    row.hole_fraction /= dn;
    rows.push_back(row);
  }
  return rows;
}

inline auto complexity_table(const std::vector<std::uint64_t> &scene_seeds, const DeskScene &base,
                             const ComplexitySpec &spec) -> ResultTable {
  ResultTable t;
  t.name = "complexity";
  t.columns = {"scene_seed", "block_size", "point_projections", "projection_ratio", "pixels_copied",
               "residual_variance", "hole_fraction", "decoder_inpaint_calls"};
  Json seeds = scene_seeds;
  t.config = {{"command", "complexity"}, {"scene_seeds", seeds},       {"block_sizes", spec.block_sizes},
              {"ref_q", spec.ref_q},     {"gop_size", spec.gop_size}, {"n_refs", spec.n_refs},
              {"frame_stride", spec.frame_stride}};
  for (const auto s : scene_seeds) {
    auto d = base;
    d.seed = s;
    const auto rows = complexity_rows(desk_sequence(d), d.grid(), spec);
    const double dense = static_cast<double>(d.width) * d.height * spec.n_refs;
    for (const auto &r : rows) {
      t.add({std::to_string(s), std::to_string(r.block_size), fmt(r.point_projections, 1),
             fmt(r.point_projections / dense, 8), fmt(r.pixels_copied, 1), fmt(r.residual_variance, 4),
             fmt(r.hole_fraction, 6), std::to_string(r.decoder_inpaint_calls)});
    }
  }
  return t;
}

} // namespace imv
