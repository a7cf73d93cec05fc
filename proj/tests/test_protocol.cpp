#include <imv/imv.hpp>

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <thread>
#include <unistd.h>

using namespace imv;

namespace {

const Store &shared_store() {
  static const Store s = [] {
    const auto seq = generate_synthetic_scene(random_scene_spec(31, 64, 64, 3, 8), 31);
    SessionConfig cfg;
    cfg.gop = {4};
    return build_store(seq, {3, 1}, cfg);
  }();
  return s;
}

auto run_cli(const std::string &args) -> std::pair<int, std::string> {
  const std::string cmd = std::string(IMVLAB_PATH) + " " + args + " 2>&1";
  FILE *p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p) != nullptr) {
    out += buf.data();
  }
  const int status = ::pclose(p);
  return {WEXITSTATUS(status), out};
}

} // namespace

TEST_CASE("base64 round trip and padding") {
  for (std::size_t n = 0; n < 10; ++n) {
    std::vector<std::uint8_t> bytes;
    for (std::size_t i = 0; i < n; ++i) {
      bytes.push_back(static_cast<std::uint8_t>(i * 37 + 250));
    }
    const auto text = base64_encode(bytes);
    CHECK(text.size() == 4 * ((n + 2) / 3));
    CHECK(base64_decode(text) == bytes);
  }
  CHECK(base64_encode(std::vector<std::uint8_t>{'M', 'a', 'n'}) == "TWFu");
  CHECK(base64_encode(std::vector<std::uint8_t>{'M'}) == "TQ==");
  CHECK_THROWS_AS(base64_decode("abc"), Error);
  CHECK_THROWS_AS(base64_decode("ab!?"), Error);
}

TEST_CASE("messages carry a big-endian length prefix") {
  const Json msg{{"type", "HELLO"}};
  const auto bytes = frame_message(msg);
  const auto text = msg.dump();
  REQUIRE(bytes.size() == 4 + text.size());
  CHECK(detail::read_be32(bytes, 0) == text.size());
  CHECK(parse_message(std::span(bytes).subspan(4)) == msg);
  const std::string junk = "[1,2]";
  CHECK_THROWS_MATCHES(parse_message(std::span(reinterpret_cast<const std::uint8_t *>(junk.data()), junk.size())), Error,
                       Catch::Matchers::Predicate<Error>([](const Error &e) { return e.code() == Errc::protocol; }));
}

TEST_CASE("endpoint state machine") {
  const auto &s = shared_store();
  ServiceConfig sc{session_config(s, 2, 1), {0.8, 0.3, 0.5}, {AllocPolicy::uniform, 0, 16}};
  SessionEndpoint ep(s, sc);
  SECTION("requests before HELLO are refused") {
    const auto r = ep.on_message(request_message({0, at_rest(1), true}));
    REQUIRE(r.size() == 1);
    CHECK(r[0]["type"] == "ERROR");
  }
  SECTION("HELLO echoes the configuration") {
    const auto r = ep.on_message({{"type", "HELLO"}});
    REQUIRE(r.size() == 1);
    const auto &c = r[0]["config"];
    CHECK(c["n_t"] == 2);
    CHECK(c["n_d"] == 1);
    CHECK(c["block_size"] == 8);
    CHECK(c["n_views"] == 5);
    CHECK(c["ladder"].size() == 8);
    CHECK(c["cameras"].size() == 3);
  }
  SECTION("bundles round trip through JSON") {
    (void)ep.on_message({{"type", "HELLO"}});
    const auto r = ep.on_message(request_message({0, at_rest(1), true}));
    REQUIRE(r[0]["type"] == "BUNDLE");
    const auto b = bundle_from_json(r[0], s.cfg.ladder);
    History h;
    const auto direct = handle_request(s, sc.session, sc.model, {0, at_rest(1), true}, h, sc.spend);
    CHECK(b.total_bits() == direct.total_bits());
    REQUIRE(b.entries.size() == direct.entries.size());
    for (std::size_t i = 0; i < b.entries.size(); ++i) {
      CHECK(b.entries[i].key == direct.entries[i].key);
      CHECK(b.entries[i].frame->payload == direct.entries[i].frame->payload);
    }
    const auto bad = ep.on_message(request_message({6, NavState{{4, 6}, 4}, false}));
    CHECK(bad[0]["type"] == "ERROR");
  }
  SECTION("unknown types") {
    (void)ep.on_message({{"type", "HELLO"}});
    CHECK(ep.on_message({{"type", "NOPE"}})[0]["code"] == "ProtocolError");
  }
}

TEST_CASE("socket client matches the in-process session") {
  const auto &s = shared_store();
  ServiceConfig sc{session_config(s, 2, 1), {0.6, 0.4, 0.5}, {AllocPolicy::weighted, 40000, 16}};
  Server server(s, sc, "127.0.0.1", 0);
  std::thread th([&] { server.run(); });
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto start = at_rest(static_cast<int>(seed));
    const auto rep = run_session(s, sc.session, sc.model, start, 8, seed, sc.spend);
    const auto net = run_socket_client("127.0.0.1", server.port(), rep.path, start.previous_view, &s);
    CHECK(net.bundle_bits == rep.bundle_bits);
    CHECK(net.total_bits() == rep.total_bits());
    REQUIRE(net.frames.size() == rep.frames.size());
    for (std::size_t i = 0; i < rep.frames.size(); ++i) {
      CHECK(net.frames[i].psnr == rep.frames[i].psnr);
    }
  }
  server.stop();
  th.join();
}

TEST_CASE("command line") {
  SECTION("help exits 0") {
    const auto [code, out] = run_cli("prepare --help");
    CHECK(code == 0);
    CHECK(out.find("--out") != std::string::npos);
  }
  SECTION("missing --out is an error") {
    const auto [code, out] = run_cli("prepare");
    CHECK(code != 0);
    CHECK(out.find("--out") != std::string::npos);
  }
  SECTION("a store path that does not exist is an error") {
    const auto [code, out] = run_cli("session --store /nonexistent/imv_store");
    CHECK(code != 0);
    CHECK_FALSE(out.empty());
  }
}
