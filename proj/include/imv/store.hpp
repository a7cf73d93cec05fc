#pragma once

#include "scene_io.hpp"
#include "transmission.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace imv {

struct SessionConfig {
  int n_t{4};
  int n_d{1};
  int block_size{8};
  GopStructure gop{8};
  int n_refs{2};
  QuantLadder ladder{};
  int ref_q{8};

  void validate() const {
    verify(n_t >= 1 && n_d >= 0, Errc::invalid_state, "N_T must be >= 1 and N_D >= 0");
    verify(is_valid_block_size(block_size), Errc::bad_dimensions, "block size must be 1, 4, 8 or 16");
    verify(n_refs == 1 || n_refs == 2, Errc::invalid_state, "n_refs must be 1 or 2");
    gop.validate();
    ladder.validate();
    (void)ladder.index_of(ref_q);
  }
  // Live operation needs the bundle to arrive before its window starts.
  [[nodiscard]] auto realtime() const { return n_d < n_t; }
};

using PayloadPtr = std::shared_ptr<const EncodedFrame>;

// Memoized decoder state. Every entry is a pure function of the payloads it
// was built from, so one cache may serve any number of sessions.
class DecodeCache {
public:
  using Lookup = std::function<const EncodedFrame &(const PayloadKey &)>;

  auto ref_frame(const PayloadKey &key, const GopStructure &gop, const QuantLadder &ladder, const Lookup &lookup)
      -> const Frame & {
    std::lock_guard lock(mutex_);
    return ref_frame_locked(key, gop, ladder, lookup);
  }

  auto depth(const PayloadKey &key, int block_size, int width, int height, const DepthRange &range,
             const QuantLadder &ladder, const Lookup &lookup) -> const BlockDepthMap & {
    std::lock_guard lock(mutex_);
    return depth_locked(key, block_size, width, height, range, ladder, lookup);
  }

  auto residual(const PayloadKey &key, const QuantLadder &ladder, const Lookup &lookup) -> const Residual & {
    std::lock_guard lock(mutex_);
    auto it = residuals_.find(key);
    if (it == residuals_.end()) {
      it = residuals_.emplace(key, decode_residual(lookup(key), ladder)).first;
    }
    return it->second;
  }

  // Block-projected synthesis of a virtual frame, built from decoded data.
  auto noncomplex(FrameId f, const ViewGrid &grid, const SessionConfig &cfg, const std::vector<CameraParams> &cams,
                  int width, int height, const DepthRange &range, const Lookup &lookup) -> const Projection & {
    std::lock_guard lock(mutex_);
    const auto key = std::tuple{f.v, f.t, cfg.block_size, cfg.n_refs};
    auto it = noncomplex_.find(key);
    if (it != noncomplex_.end()) {
      return it->second;
    }
    std::vector<RefView> refs;
    for (const int rv : synthesis_refs(grid, f.v, cfg.n_refs)) {
      const auto &color = ref_frame_locked({Category::ref, rv, f.t, 0}, cfg.gop, cfg.ladder, lookup);
      const auto &depth =
          depth_locked({Category::depth, rv, f.t, 0}, cfg.block_size, width, height, range, cfg.ladder, lookup);
      refs.push_back({&color, &depth, cams[static_cast<std::size_t>(grid.ref_of_view(rv))]});
    }
    const auto target = camera_for_view(cams, grid, f.v);
    const SynthesisConfig syn{cfg.block_size, cfg.n_refs, std::max(1 << 16, width + height)};
    return noncomplex_.emplace(key, noncomplex_vvs(refs, target, syn)).first->second;
  }

private:
  auto ref_frame_locked(const PayloadKey &key, const GopStructure &gop, const QuantLadder &ladder,
                        const Lookup &lookup) -> const Frame & {
    auto it = refs_.find(key);
    if (it != refs_.end()) {
      return it->second;
    }
    const auto &e = lookup(key);
    Frame f;
    if (gop.is_intra(key.t)) {
      f = decode_reference(e, nullptr, ladder);
    } else {
      const auto &prev = ref_frame_locked({Category::ref, key.v, key.t - 1, 0}, gop, ladder, lookup);
      f = decode_reference(e, &prev, ladder);
    }
    return refs_.emplace(key, std::move(f)).first->second;
  }

  auto depth_locked(const PayloadKey &key, int block_size, int width, int height, const DepthRange &range,
                    const QuantLadder &ladder, const Lookup &lookup) -> const BlockDepthMap & {
    auto it = depths_.find(key);
    if (it == depths_.end()) {
      BlockDepthMap d{decode_depth(lookup(key), width / block_size, height / block_size, ladder), block_size, range};
      it = depths_.emplace(key, std::move(d)).first;
    }
    return it->second;
  }

  std::recursive_mutex mutex_;
  std::map<PayloadKey, Frame> refs_;
  std::map<PayloadKey, BlockDepthMap> depths_;
  std::map<PayloadKey, Residual> residuals_;
  std::map<std::tuple<int, int, int, int>, Projection> noncomplex_;
};

struct StorageStats {
  std::uint64_t ref_bytes{};
  std::uint64_t depth_bytes{};
  std::uint64_t eframe_bytes{};
  std::uint64_t eframe_count{};
};

struct StoreOptions {
  bool eframes{true};
};

// Everything the server ships, precomputed. Independent of N_T and N_D.
struct Store {
  int width{};
  int height{};
  int n_frames{};
  double fps{};
  DepthRange range;
  ViewGrid grid;
  SessionConfig cfg; // only the storage fields are meaningful here
  std::vector<CameraParams> cameras;
  std::map<PayloadKey, PayloadPtr> payloads;
  std::map<FrameId, RDCurve> curves;  // virtual frames
  std::map<FrameId, Frame> targets;   // complex synthesis, or the original for reference views
  std::shared_ptr<DecodeCache> cache = std::make_shared<DecodeCache>();
  bool has_eframes{true};

  [[nodiscard]] auto payload(const PayloadKey &k) const -> const PayloadPtr & {
    const auto it = payloads.find(k);
    verify(it != payloads.end(), Errc::missing_frame,
           std::string(category_name(k.cat)) + " v" + std::to_string(k.v) + " t" + std::to_string(k.t) + " q" +
               std::to_string(k.q));
    return it->second;
  }
  [[nodiscard]] auto target(FrameId f) const -> const Frame & {
    const auto it = targets.find(f);
    verify(it != targets.end(), Errc::missing_frame, "no target for frame");
    return it->second;
  }
  [[nodiscard]] auto curve(FrameId f) const -> const RDCurve & {
    const auto it = curves.find(f);
    verify(it != curves.end(), Errc::missing_frame, "no RD curve for frame");
    return it->second;
  }
  [[nodiscard]] auto n_views() const { return grid.total_views(); }
  [[nodiscard]] auto lookup() const -> DecodeCache::Lookup {
    return [this](const PayloadKey &k) -> const EncodedFrame & { return *payload(k); };
  }
  [[nodiscard]] auto stats() const -> StorageStats {
    StorageStats s;
    for (const auto &[k, p] : payloads) {
      const auto n = static_cast<std::uint64_t>(p->payload.size());
      if (k.cat == Category::ref) {
        s.ref_bytes += n;
      } else if (k.cat == Category::depth) {
        s.depth_bytes += n;
      } else {
        s.eframe_bytes += n;
        ++s.eframe_count;
      }
    }
    return s;
  }
};

// Reads kind and step back from a payload header.
inline auto payload_info(std::vector<std::uint8_t> bytes, FrameId id, const QuantLadder &ladder) -> EncodedFrame {
  BitReader br(bytes);
  EncodedFrame e;
  e.kind = static_cast<FrameKind>(br.get_bits(2));
  e.q = ladder.step_at(static_cast<int>(br.get_bits(6)));
  e.bits = bytes.size() * 8;
  e.payload = std::move(bytes);
  e.frame_id = id;
  return e;
}

inline auto build_store(const MultiviewSequence &seq, const ViewGrid &grid, const SessionConfig &cfg,
                        const StoreOptions &opts = {}) -> Store {
  validate_sequence(seq);
  cfg.validate();
  verify(seq.n_views() == grid.n_ref_views, Errc::invalid_state, "sequence view count != reference views");
  verify(grid.n_ref_views >= 2 && grid.n_intermediate >= 0, Errc::invalid_state, "grid needs >= 2 references");
  verify(seq.width % 16 == 0 && seq.height % 16 == 0, Errc::bad_dimensions, "frame size must be a multiple of 16");

  Store s;
  s.width = seq.width;
  s.height = seq.height;
  s.n_frames = seq.n_frames;
  s.fps = seq.fps;
  s.range = seq.views.front().depths.front().range;
  s.grid = grid;
  s.cfg = cfg;
  s.cameras = reference_cameras(seq);
  s.has_eframes = opts.eframes;

  // Reference color streams and block depth, plus the encoder-side decoded
  // state the server synthesizes from.
  std::vector<std::vector<Frame>> dec_color(static_cast<std::size_t>(grid.n_ref_views));
  std::vector<std::vector<BlockDepthMap>> dec_depth(static_cast<std::size_t>(grid.n_ref_views));
  for (int r = 0; r < grid.n_ref_views; ++r) {
    const auto &view = seq.views[static_cast<std::size_t>(r)];
    const int rv = grid.view_of_ref(r);
    auto gop = encode_gop(view.frames, cfg.gop, cfg.ref_q, cfg.ladder);
    for (int t = 0; t < seq.n_frames; ++t) {
      auto &e = gop.frames[static_cast<std::size_t>(t)];
      e.frame_id = {rv, t};
      s.payloads[{Category::ref, rv, t, 0}] = std::make_shared<const EncodedFrame>(std::move(e));
      s.targets[{rv, t}] = view.frames[static_cast<std::size_t>(t)];

      const auto block = downsample_depth(view.depths[static_cast<std::size_t>(t)], cfg.block_size);
      auto de = encode_depth(block.codes, cfg.ref_q, cfg.ladder);
      de.frame_id = {rv, t};
      dec_depth[static_cast<std::size_t>(r)].push_back(
          {decode_depth(de, block.codes.width(), block.codes.height(), cfg.ladder), cfg.block_size, s.range});
      s.payloads[{Category::depth, rv, t, 0}] = std::make_shared<const EncodedFrame>(std::move(de));
    }
    dec_color[static_cast<std::size_t>(r)] = std::move(gop.reconstructions);
  }

  const SynthesisConfig syn{cfg.block_size, cfg.n_refs, std::max(1 << 16, seq.width + seq.height)};
  for (int v = 0; v < grid.total_views(); ++v) {
    if (grid.is_reference(v)) {
      continue;
    }
    const auto cam = camera_for_view(s.cameras, grid, v);
    const int lr = grid.left_ref(v);
    const int rr = grid.right_ref(v);
    for (int t = 0; t < seq.n_frames; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const auto &lv = seq.views[static_cast<std::size_t>(lr)];
      const auto &rvw = seq.views[static_cast<std::size_t>(rr)];
      auto target = complex_vvs({&lv.frames[ts], &lv.depths[ts], s.cameras[static_cast<std::size_t>(lr)]},
                                {&rvw.frames[ts], &rvw.depths[ts], s.cameras[static_cast<std::size_t>(rr)]}, cam);
      if (opts.eframes) {
        std::vector<RefView> refs;
        for (const int sv : synthesis_refs(grid, v, cfg.n_refs)) {
          const auto r = static_cast<std::size_t>(grid.ref_of_view(sv));
          refs.push_back({&dec_color[r][ts], &dec_depth[r][ts], s.cameras[r]});
        }
        const auto nc = noncomplex_vvs(refs, cam, syn);
        const auto ef = make_eframe(nc.image, target, {v, t}, syn, {lr, rr});
        std::vector<RDPoint> pts;
        for (const int q : cfg.ladder.steps) {
          auto e = encode_intra(ef.residual, q, cfg.ladder);
          e.frame_id = {v, t};
          const auto out = apply_eframe(nc.image, decode_residual(e, cfg.ladder));
          pts.push_back({static_cast<double>(e.bits), mse(out, target), q});
          s.payloads[{Category::eframe, v, t, q}] = std::make_shared<const EncodedFrame>(std::move(e));
        }
        s.curves[{v, t}] = RDCurve{{v, t}, lower_hull(std::move(pts))};
      }
      s.targets[{v, t}] = std::move(target);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// On-disk layout.

namespace detail {
inline void append_be32(std::vector<std::uint8_t> &out, std::uint32_t n) {
  for (int s = 24; s >= 0; s -= 8) {
    out.push_back(static_cast<std::uint8_t>((n >> static_cast<unsigned>(s)) & 0xFFU));
  }
}

inline auto read_be32(std::span<const std::uint8_t> in, std::size_t pos) -> std::uint32_t {
  verify(pos + 4 <= in.size(), Errc::corrupt_stream, "truncated length prefix");
  return (std::uint32_t{in[pos]} << 24U) | (std::uint32_t{in[pos + 1]} << 16U) | (std::uint32_t{in[pos + 2]} << 8U) |
         std::uint32_t{in[pos + 3]};
}

inline auto split_frames(std::span<const std::uint8_t> bytes) -> std::vector<std::vector<std::uint8_t>> {
  std::vector<std::vector<std::uint8_t>> out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto n = read_be32(bytes, pos);
    pos += 4;
    verify(pos + n <= bytes.size(), Errc::corrupt_stream, "truncated frame in container");
    out.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
  }
  return out;
}

// Writes a fresh file, or checks an existing one byte for byte.
inline void write_or_verify(const fs::path &path, std::span<const std::uint8_t> bytes, bool verify_existing) {
  if (verify_existing) {
    verify(fs::exists(path), Errc::store_mismatch, "missing " + path.string());
    const auto old = read_file_bytes(path);
    verify(old.size() == bytes.size() && std::equal(old.begin(), old.end(), bytes.begin()), Errc::store_mismatch,
           "contents differ: " + path.string());
    return;
  }
  write_file_bytes(path, bytes);
}

inline auto ppm_bytes(const Frame &f) -> std::vector<std::uint8_t> {
  const auto header = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), f.vec().begin(), f.vec().end());
  return bytes;
}

inline auto camera_json(const CameraParams &c) -> nlohmann::ordered_json {
  return {{"K", c.intrinsic}, {"R", c.rotation}, {"t", c.translation}};
}

inline auto camera_from_json(const nlohmann::json &j, int id) -> CameraParams {
  CameraParams c;
  c.intrinsic = j.at("K").get<Mat3>();
  c.rotation = j.at("R").get<Mat3>();
  c.translation = j.at("t").get<Vec3>();
  c.id = id;
  return c;
}
} // namespace detail

inline auto store_manifest_json(const Store &s) -> nlohmann::ordered_json {
  nlohmann::ordered_json m;
  m["format"] = "imv-store-1";
  m["width"] = s.width;
  m["height"] = s.height;
  m["n_frames"] = s.n_frames;
  m["fps"] = s.fps;
  m["z_near"] = s.range.z_near;
  m["z_far"] = s.range.z_far;
  m["n_ref_views"] = s.grid.n_ref_views;
  m["n_intermediate"] = s.grid.n_intermediate;
  m["block_size"] = s.cfg.block_size;
  m["gop_size"] = s.cfg.gop.gop_size;
  m["n_refs"] = s.cfg.n_refs;
  m["ladder"] = s.cfg.ladder.steps;
  m["ref_q"] = s.cfg.ref_q;
  m["eframes"] = s.has_eframes;
  auto cams = nlohmann::ordered_json::array();
  for (const auto &c : s.cameras) {
    cams.push_back(detail::camera_json(c));
  }
  m["cameras"] = cams;
  auto curves = nlohmann::ordered_json::array();
  for (const auto &[id, c] : s.curves) {
    auto pts = nlohmann::ordered_json::array();
    for (const auto &p : c.points) {
      pts.push_back({{"q", p.q}, {"bits", p.bits}, {"mse", p.mse}});
    }
    curves.push_back({{"v", id.v}, {"t", id.t}, {"hull", pts}});
  }
  m["rd_curves"] = curves;
  const auto st = s.stats();
  m["storage"] = {{"ref_bytes", st.ref_bytes}, {"depth_bytes", st.depth_bytes}, {"eframe_bytes", st.eframe_bytes}};
  return m;
}

// Writes the store under dir. If a manifest is already there every file is
// compared instead and any difference raises StoreMismatch.
inline void write_store(const Store &s, const fs::path &dir) {
  const bool existing = fs::exists(dir / "manifest.json");
  const int gop = s.cfg.gop.gop_size;
  for (int r = 0; r < s.grid.n_ref_views; ++r) {
    const int rv = s.grid.view_of_ref(r);
    for (int g = 0; g * gop < s.n_frames; ++g) {
      std::vector<std::uint8_t> bytes;
      for (int t = g * gop; t < std::min(s.n_frames, (g + 1) * gop); ++t) {
        const auto &p = s.payload({Category::ref, rv, t, 0})->payload;
        detail::append_be32(bytes, static_cast<std::uint32_t>(p.size()));
        bytes.insert(bytes.end(), p.begin(), p.end());
      }
      detail::write_or_verify(dir / "ref" / ("v" + std::to_string(rv)) / ("q" + std::to_string(s.cfg.ref_q)) /
                                  ("gop" + std::to_string(g) + ".bin"),
                              bytes, existing);
    }
    std::vector<std::uint8_t> depth;
    for (int t = 0; t < s.n_frames; ++t) {
      const auto &p = s.payload({Category::depth, rv, t, 0})->payload;
      detail::append_be32(depth, static_cast<std::uint32_t>(p.size()));
      depth.insert(depth.end(), p.begin(), p.end());
    }
    detail::write_or_verify(dir / "depth" / ("v" + std::to_string(rv) + ".bin"), depth, existing);
  }
  for (const auto &[k, p] : s.payloads) {
    if (k.cat == Category::eframe) {
      detail::write_or_verify(dir / "ef" / ("v" + std::to_string(k.v)) / ("t" + std::to_string(k.t)) /
                                  ("q" + std::to_string(k.q) + ".bin"),
                              p->payload, existing);
    }
  }
  for (const auto &[id, f] : s.targets) {
    detail::write_or_verify(dir / "target" / ("v" + std::to_string(id.v)) / ("t" + std::to_string(id.t) + ".ppm"),
                            detail::ppm_bytes(f), existing);
  }
  const auto text = store_manifest_json(s).dump(2) + "\n";
  detail::write_or_verify(dir / "manifest.json",
                          std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()), existing);
}

inline auto prepare_store(const MultiviewSequence &seq, const ViewGrid &grid, const SessionConfig &cfg,
                          const fs::path &out_dir, const StoreOptions &opts = {}) -> Store {
  auto s = build_store(seq, grid, cfg, opts);
  write_store(s, out_dir);
  return s;
}

inline auto load_store(const fs::path &dir) -> Store {
  const auto bytes = detail::read_file_bytes(dir / "manifest.json");
  Store s;
  try {
    const auto m = nlohmann::json::parse(bytes.begin(), bytes.end());
    verify(m.at("format").get<std::string>() == "imv-store-1", Errc::corrupt_stream, "unknown store format");
    s.width = m.at("width").get<int>();
    s.height = m.at("height").get<int>();
    s.n_frames = m.at("n_frames").get<int>();
    s.fps = m.at("fps").get<double>();
    s.range = {m.at("z_near").get<double>(), m.at("z_far").get<double>()};
    s.grid = {m.at("n_ref_views").get<int>(), m.at("n_intermediate").get<int>()};
    s.cfg.block_size = m.at("block_size").get<int>();
    s.cfg.gop.gop_size = m.at("gop_size").get<int>();
    s.cfg.n_refs = m.at("n_refs").get<int>();
    s.cfg.ladder.steps = m.at("ladder").get<std::vector<int>>();
    s.cfg.ref_q = m.at("ref_q").get<int>();
    s.has_eframes = m.at("eframes").get<bool>();
    s.cfg.validate();
    int id = 0;
    for (const auto &c : m.at("cameras")) {
      s.cameras.push_back(detail::camera_from_json(c, id++));
    }
    verify(static_cast<int>(s.cameras.size()) == s.grid.n_ref_views, Errc::corrupt_stream, "camera count");
    for (const auto &c : m.at("rd_curves")) {
      RDCurve curve{{c.at("v").get<int>(), c.at("t").get<int>()}, {}};
      for (const auto &p : c.at("hull")) {
        curve.points.push_back({p.at("bits").get<double>(), p.at("mse").get<double>(), p.at("q").get<int>()});
      }
      s.curves[curve.frame_id] = std::move(curve);
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::corrupt_stream, std::string("store manifest: ") + e.what());
  }

  const int gop = s.cfg.gop.gop_size;
  for (int r = 0; r < s.grid.n_ref_views; ++r) {
    const int rv = s.grid.view_of_ref(r);
    for (int g = 0; g * gop < s.n_frames; ++g) {
      const auto frames = detail::split_frames(detail::read_file_bytes(
          dir / "ref" / ("v" + std::to_string(rv)) / ("q" + std::to_string(s.cfg.ref_q)) /
          ("gop" + std::to_string(g) + ".bin")));
      const int expect = std::min(s.n_frames, (g + 1) * gop) - g * gop;
      verify(static_cast<int>(frames.size()) == expect, Errc::corrupt_stream, "GOP file frame count");
      for (int k = 0; k < expect; ++k) {
        const int t = g * gop + k;
        s.payloads[{Category::ref, rv, t, 0}] = std::make_shared<const EncodedFrame>(
            payload_info(frames[static_cast<std::size_t>(k)], {rv, t}, s.cfg.ladder));
      }
    }
    const auto depth = detail::split_frames(detail::read_file_bytes(dir / "depth" / ("v" + std::to_string(rv) + ".bin")));
    verify(static_cast<int>(depth.size()) == s.n_frames, Errc::corrupt_stream, "depth file frame count");
    for (int t = 0; t < s.n_frames; ++t) {
      s.payloads[{Category::depth, rv, t, 0}] = std::make_shared<const EncodedFrame>(
          payload_info(depth[static_cast<std::size_t>(t)], {rv, t}, s.cfg.ladder));
    }
  }
  for (int v = 0; v < s.grid.total_views(); ++v) {
    for (int t = 0; t < s.n_frames; ++t) {
      s.targets[{v, t}] = read_ppm(dir / "target" / ("v" + std::to_string(v)) / ("t" + std::to_string(t) + ".ppm"));
      if (s.grid.is_reference(v) || !s.has_eframes) {
        continue;
      }
      for (const int q : s.cfg.ladder.steps) {
        auto p = detail::read_file_bytes(dir / "ef" / ("v" + std::to_string(v)) / ("t" + std::to_string(t)) /
                                         ("q" + std::to_string(q) + ".bin"));
        s.payloads[{Category::eframe, v, t, q}] =
            std::make_shared<const EncodedFrame>(payload_info(std::move(p), {v, t}, s.cfg.ladder));
      }
    }
  }
  return s;
}

} // namespace imv
