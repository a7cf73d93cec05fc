#pragma once

#include "session.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

namespace imv {

using Json = nlohmann::ordered_json;

inline constexpr std::uint32_t max_message_bytes = 256U << 20U;

inline auto base64_encode(std::span<const std::uint8_t> bytes) -> std::string {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<const std::uint8_t *, 6, 8>>;
  std::string out(It(bytes.data()), It(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

inline auto base64_decode(std::string text) -> std::vector<std::uint8_t> {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  verify(text.size() % 4 == 0, Errc::protocol, "base64 length not a multiple of 4");
  std::size_t pad = 0;
  while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') {
    text[text.size() - 1 - pad] = 'A';
    ++pad;
  }
  try {
    std::vector<std::uint8_t> out(It(text.cbegin()), It(text.cend()));
    out.resize(out.size() - pad);
    return out;
  } catch (const std::exception &) {
    throw Error(Errc::protocol, "invalid base64");
  }
}

// 4-byte big-endian length + JSON text.
inline auto frame_message(const Json &msg) -> std::vector<std::uint8_t> {
  const auto text = msg.dump();
  verify(text.size() <= max_message_bytes, Errc::protocol, "message too large");
  std::vector<std::uint8_t> out;
  detail::append_be32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  return out;
}

inline auto parse_message(std::span<const std::uint8_t> body) -> Json {
  try {
    auto j = Json::parse(body.begin(), body.end());
    verify(j.is_object() && j.contains("type") && j["type"].is_string(), Errc::protocol, "message without type");
    return j;
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::protocol, std::string("bad JSON: ") + e.what());
  }
}

struct ServiceConfig {
  SessionConfig session;
  TransitionModel model;
  BudgetSpec spend;
};

inline auto hello_message(const Store &store, const ServiceConfig &sc) -> Json {
  Json cams = Json::array();
  for (const auto &c : store.cameras) {
    cams.push_back(detail::camera_json(c));
  }
  return {{"type", "HELLO"},
          {"config",
           {{"width", store.width},
            {"height", store.height},
            {"n_frames", store.n_frames},
            {"fps", store.fps},
            {"z_near", store.range.z_near},
            {"z_far", store.range.z_far},
            {"n_ref_views", store.grid.n_ref_views},
            {"n_intermediate", store.grid.n_intermediate},
            {"n_views", store.n_views()},
            {"block_size", sc.session.block_size},
            {"gop_size", sc.session.gop.gop_size},
            {"n_refs", sc.session.n_refs},
            {"ladder", sc.session.ladder.steps},
            {"ref_q", sc.session.ref_q},
            {"n_t", sc.session.n_t},
            {"n_d", sc.session.n_d},
            {"budget", sc.spend.budget},
            {"policy", policy_name(sc.spend.policy)},
            {"q", sc.spend.q},
            {"model", {sc.model.p1, sc.model.p2, sc.model.p3}},
            {"cameras", cams}}}};
}

inline auto request_message(const Request &r) -> Json {
  Json j{{"type", "REQUEST"}, {"t0", r.t0}, {"v", r.nav.current.v}, {"prev_v", r.nav.previous_view}};
  if (r.join) {
    j["join"] = true;
  }
  return j;
}

inline auto request_from_json(const Json &j) -> Request {
  try {
    Request r;
    r.t0 = j.at("t0").get<int>();
    r.nav = {{j.at("v").get<int>(), r.t0}, j.at("prev_v").get<int>()};
    r.join = j.value("join", false);
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::protocol, std::string("bad REQUEST: ") + e.what());
  }
}

inline auto bundle_message(const SoFBundle &b) -> Json {
  Json frames = Json::array();
  for (const auto &e : b.entries) {
    frames.push_back({{"cat", category_name(e.key.cat)},
                      {"v", e.key.v},
                      {"t", e.key.t},
                      {"q", e.frame->q},
                      {"kind", kind_name(e.frame->kind)},
                      {"bits", e.frame->bits},
                      {"payload", base64_encode(e.frame->payload)}});
  }
  Json alloc = Json::array();
  for (const auto &a : b.allocation) {
    alloc.push_back(
        {{"v", a.frame.v}, {"t", a.frame.t}, {"popularity", a.popularity}, {"q", a.q}, {"bits", a.bits}, {"mse", a.mse}});
  }
  Json covered = Json::array();
  for (const auto &f : b.covered) {
    covered.push_back({f.v, f.t});
  }
  return {{"type", "BUNDLE"},
          {"request_id", b.request_id},
          {"t0", b.request.t0},
          {"join", b.request.join},
          {"window", {b.window.first, b.window.last}},
          {"covered", covered},
          {"frames", frames},
          {"allocation", alloc},
          {"budget", b.budget},
          {"lambda", b.lambda},
          {"bits",
           {{"ref", b.ref_bits}, {"depth", b.depth_bits}, {"eframe", b.eframe_bits}, {"total", b.total_bits()}}}};
}

inline auto bundle_from_json(const Json &j, const QuantLadder &ladder) -> SoFBundle {
  try {
    SoFBundle b;
    b.request_id = j.at("request_id").get<int>();
    b.request.t0 = j.at("t0").get<int>();
    b.request.join = j.at("join").get<bool>();
    b.window = {j.at("window").at(0).get<int>(), j.at("window").at(1).get<int>()};
    for (const auto &c : j.at("covered")) {
      b.covered.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    }
    for (const auto &f : j.at("frames")) {
      const auto cat = category_from_name(f.at("cat").get<std::string>());
      const int v = f.at("v").get<int>();
      const int t = f.at("t").get<int>();
      auto e = payload_info(base64_decode(f.at("payload").get<std::string>()), {v, t}, ladder);
      verify(e.bits == f.at("bits").get<std::size_t>(), Errc::protocol, "frame bit count mismatch");
      const PayloadKey key{cat, v, t, cat == Category::eframe ? e.q : 0};
      const auto bits = static_cast<std::uint64_t>(e.bits);
      (cat == Category::ref ? b.ref_bits : cat == Category::depth ? b.depth_bits : b.eframe_bits) += bits;
      b.entries.push_back({key, std::make_shared<const EncodedFrame>(std::move(e))});
    }
    for (const auto &a : j.at("allocation")) {
      b.allocation.push_back({{a.at("v").get<int>(), a.at("t").get<int>()},
                              a.at("popularity").get<double>(),
                              a.at("q").get<int>(),
                              a.at("bits").get<double>(),
                              a.at("mse").get<double>()});
    }
    b.budget = j.at("budget").get<double>();
    b.lambda = j.at("lambda").get<double>();
    verify(b.total_bits() == j.at("bits").at("total").get<std::uint64_t>(), Errc::protocol, "bundle total mismatch");
    return b;
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::protocol, std::string("bad BUNDLE: ") + e.what());
  }
}

inline auto frame_ack_message(const FrameStat &s) -> Json {
  return {{"type", "FRAME_ACK"}, {"t", s.frame.t}, {"v", s.frame.v}, {"psnr", s.psnr}};
}

inline auto error_message(const std::string &code, const std::string &detail) -> Json {
  return {{"type", "ERROR"}, {"code", code}, {"detail", detail}};
}

// Server-side protocol state machine for one connection. Feed it one decoded
// message, get back zero or more replies.
class SessionEndpoint {
public:
  SessionEndpoint(const Store &store, ServiceConfig sc) : store_(store), sc_(std::move(sc)) {
    check_store_config(store_, sc_.session);
  }

  auto on_message(const Json &msg) -> std::vector<Json> {
    const auto type = msg.at("type").get<std::string>();
    try {
      if (type == "HELLO") {
        hello_ = true;
        return {hello_message(store_, sc_)};
      }
      verify(hello_, Errc::protocol, "HELLO expected first");
      if (type == "REQUEST") {
        const auto b = handle_request(store_, sc_.session, sc_.model, request_from_json(msg), hist_, sc_.spend);
        return {bundle_message(b)};
      }
      if (type == "FRAME_ACK") {
        acks_.push_back({{msg.at("v").get<int>(), msg.at("t").get<int>()}, msg.at("psnr").get<double>(), 0});
        return {};
      }
      throw Error(Errc::protocol, "unknown message type " + type);
    } catch (const Error &e) {
      return {error_message(errc_name(e.code()), e.what())};
    } catch (const nlohmann::json::exception &e) {
      return {error_message(errc_name(Errc::protocol), e.what())};
    }
  }

  [[nodiscard]] auto acks() const -> const std::vector<FrameStat> & { return acks_; }

private:
  const Store &store_;
  ServiceConfig sc_;
  History hist_;
  bool hello_{};
  std::vector<FrameStat> acks_;
};

} // namespace imv
