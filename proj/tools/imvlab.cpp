// imvlab: store preparation, experiments and the live session service.

#include <imv/imv.hpp>

#include <CLI11.hpp>

#include <csignal>
#include <signal.h>
#include <iostream>

namespace {

using namespace imv;

auto parse_int_list(const std::string &text) -> std::vector<int> {
  std::vector<int> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(std::stoi(item));
    }
  }
  verify(!out.empty(), Errc::invalid_state, "empty list: " + text);
  return out;
}

auto parse_models(const std::string &text) -> std::vector<TransitionModel> {
  std::vector<TransitionModel> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ';')) {
    if (!item.empty()) {
      out.push_back(parse_model(item));
    }
  }
  verify(!out.empty(), Errc::invalid_state, "no models given");
  return out;
}

struct SourceArgs {
  std::string input;
  std::string synthetic_spec;
  std::uint64_t synthetic_seed{7};
  int intermediates{2};

  void add_to(CLI::App *cmd) {
    auto *in = cmd->add_option("--input", input, "sequence manifest (JSON)");
    auto *spec = cmd->add_option("--synthetic-spec", synthetic_spec, "synthetic scene description (JSON)");
    in->excludes(spec);
    cmd->add_option("--synthetic-seed", synthetic_seed, "seed of the synthetic scene")->capture_default_str();
    cmd->add_option("--intermediates", intermediates, "virtual views between two references")->capture_default_str();
  }

  [[nodiscard]] auto load() const -> MultiviewSequence {
    if (!input.empty()) {
      return load_sequence(input);
    }
    if (!synthetic_spec.empty()) {
      const auto bytes = detail::read_file_bytes(synthetic_spec);
      return generate_synthetic_scene(scene_spec_from_json(nlohmann::json::parse(bytes.begin(), bytes.end())),
                                      synthetic_seed);
    }
    DeskScene d;
    d.seed = synthetic_seed;
    return desk_sequence(d);
  }

  [[nodiscard]] auto grid(const MultiviewSequence &seq) const -> ViewGrid { return {seq.n_views(), intermediates}; }
};

void emit(const ResultTable &t, const std::string &out_dir) {
  if (!out_dir.empty()) {
    t.write(out_dir);
  }
  std::cout << t.to_tsv();
}

auto report_json(const SessionReport &r) -> Json {
  Json frames = Json::array();
  for (const auto &f : r.frames) {
    frames.push_back({{"t", f.frame.t}, {"v", f.frame.v}, {"psnr", f.psnr}, {"q", f.eframe_q}});
  }
  return {{"mean_psnr", r.mean_psnr},
          {"bits", {{"ref", r.ref_bits}, {"depth", r.depth_bits}, {"eframe", r.eframe_bits}, {"total", r.total_bits()}}},
          {"split_pct", {r.share(r.ref_bits), r.share(r.depth_bits), r.share(r.eframe_bits)}},
          {"bundle_bits", r.bundle_bits},
          {"stalls", r.stalls},
          {"point_projections", r.projection.point_projections},
          {"path", path_to_text(r.path)},
          {"frames", frames}};
}

Server *active_server = nullptr;

extern "C" void on_signal(int) {
  if (active_server != nullptr) {
    active_server->request_stop();
  }
}

} // namespace

auto main(int argc, char **argv) -> int {
  CLI::App app{"Interactive multiview streaming lab"};
  app.require_subcommand(1);

  // prepare
  auto *prepare = app.add_subcommand("prepare", "encode references and e-frames into a store");
  SourceArgs prep_src;
  prep_src.add_to(prepare);
  std::string prep_out;
  SessionConfig prep_cfg;
  std::string prep_ladder = "4,8,12,16,24,32,48,64";
  bool prep_no_eframes = false;
  prepare->add_option("--out", prep_out, "store directory")->required();
  prepare->add_option("--block-size", prep_cfg.block_size, "projection block size")->capture_default_str();
  prepare->add_option("--gop", prep_cfg.gop.gop_size, "reference GOP size")->capture_default_str();
  prepare->add_option("--ladder", prep_ladder, "quantization steps")->capture_default_str();
  prepare->add_option("--ref-q", prep_cfg.ref_q, "reference step")->capture_default_str();
  prepare->add_option("--n-refs", prep_cfg.n_refs, "references per synthesis (1 or 2)")->capture_default_str();
  prepare->add_flag("--no-eframes", prep_no_eframes, "skip e-frame generation");

  // sweep
  auto *sweep = app.add_subcommand("sweep", "RD points over N_T / N_D");
  std::string sw_store;
  std::string sw_nt = "2,4,8";
  std::string sw_nd = "0";
  std::string sw_q = "8,16,32,64";
  std::string sw_model = "0.6,0.5,0.3";
  std::string sw_out;
  SweepSpec sw_spec;
  sweep->add_option("--store", sw_store, "store directory")->required();
  sweep->add_option("--nt", sw_nt, "request intervals")->capture_default_str();
  sweep->add_option("--nd", sw_nd, "request delays")->capture_default_str();
  sweep->add_option("--q", sw_q, "e-frame steps (matched budgets)")->capture_default_str();
  sweep->add_option("--model", sw_model, "p1,p2,p3")->capture_default_str();
  sweep->add_option("--paths", sw_spec.n_paths, "paths per point")->capture_default_str();
  sweep->add_option("--seed", sw_spec.seed, "seed")->capture_default_str();
  sweep->add_option("--out", sw_out, "output directory");

  // gop
  auto *gop = app.add_subcommand("gop", "GOP size selection with and without the behaviour model");
  SourceArgs gop_src;
  gop_src.add_to(gop);
  GopSearch gop_search;
  std::string gop_candidates = "1,2,4,8,16,32";
  std::string gop_model = "0.9,0.1,0.9";
  std::string gop_out;
  gop->add_option("--candidates", gop_candidates, "GOP sizes")->capture_default_str();
  gop->add_option("--model", gop_model, "p1,p2,p3")->capture_default_str();
  gop->add_option("--nt", gop_search.n_t, "request interval")->capture_default_str();
  gop->add_option("--nd", gop_search.n_d, "request delay")->capture_default_str();
  gop->add_option("--ref-q", gop_search.ref_q, "reference step")->capture_default_str();
  gop->add_option("--paths", gop_search.n_paths, "paths")->capture_default_str();
  gop->add_option("--seed", gop_search.seed, "seed")->capture_default_str();
  gop->add_option("--out", gop_out, "output directory");

  // alloc-compare
  auto *alloc = app.add_subcommand("alloc-compare", "weighted versus uniform e-frame allocation");
  std::string ac_store;
  AllocCompareSpec ac_spec;
  std::string ac_scenarios = "0.9,0.1,0.9;0.3,0.3,0.3;0.1,0.9,0.1;0.1,0.1,0.1";
  std::string ac_q = "8,12,16,24,32,48,64";
  std::string ac_rate = "eframe";
  std::string ac_out;
  alloc->add_option("--store", ac_store, "store directory")->required();
  alloc->add_option("--scenarios", ac_scenarios, "models separated by ';'")->capture_default_str();
  alloc->add_option("--q", ac_q, "uniform steps")->capture_default_str();
  alloc->add_option("--nt", ac_spec.n_t, "request interval")->capture_default_str();
  alloc->add_option("--nd", ac_spec.n_d, "request delay")->capture_default_str();
  alloc->add_option("--paths", ac_spec.n_paths, "paths per point")->capture_default_str();
  alloc->add_option("--seed", ac_spec.seed, "seed")->capture_default_str();
  alloc->add_option("--rate", ac_rate, "rate axis: eframe or total")
      ->check(CLI::IsMember({"eframe", "total"}))
      ->capture_default_str();
  alloc->add_option("--out", ac_out, "output directory");

  // baselines
  auto *base = app.add_subcommand("baselines", "decoders without e-frames at matched rate");
  SourceArgs base_src;
  base_src.add_to(base);
  BaselineSpec base_spec;
  std::string base_ref_q = "4,8,16,32,64";
  std::string base_eq = "192,96,48,24,12";
  std::string base_ladder = "4,8,12,16,24,32,48,64,96,128,192,256";
  std::string base_model = "0.9,0.1,0.9";
  std::string base_out;
  base->add_option("--block-size", base_spec.block_size, "block size of the proposed decoder")->capture_default_str();
  base->add_option("--ref-q", base_ref_q, "reference steps")->capture_default_str();
  base->add_option("--eframe-q", base_eq, "e-frame operating points (uniform-equivalent steps)")
      ->capture_default_str();
  base->add_option("--ladder", base_ladder, "quantization ladder")->capture_default_str();
  base->add_option("--gop", base_spec.gop_size, "GOP size")->capture_default_str();
  base->add_option("--nt", base_spec.n_t, "request interval")->capture_default_str();
  base->add_option("--nd", base_spec.n_d, "request delay")->capture_default_str();
  base->add_option("--model", base_model, "p1,p2,p3")->capture_default_str();
  base->add_option("--paths", base_spec.n_paths, "paths")->capture_default_str();
  base->add_option("--seed", base_spec.seed, "seed")->capture_default_str();
  base->add_option("--out", base_out, "output directory");

  // complexity
  auto *cplx = app.add_subcommand("complexity", "projection counts and residual variance per block size");
  std::string cx_seeds = "1,2,3";
  std::string cx_blocks = "1,4,8,16";
  ComplexitySpec cx_spec;
  int cx_intermediates = 2;
  std::string cx_out;
  cplx->add_option("--scene-seeds", cx_seeds, "synthetic scene seeds")->capture_default_str();
  cplx->add_option("--block-sizes", cx_blocks, "block sizes")->capture_default_str();
  cplx->add_option("--ref-q", cx_spec.ref_q, "reference step")->capture_default_str();
  cplx->add_option("--gop", cx_spec.gop_size, "GOP size")->capture_default_str();
  cplx->add_option("--stride", cx_spec.frame_stride, "frame stride")->capture_default_str();
  cplx->add_option("--intermediates", cx_intermediates, "virtual views between references")->capture_default_str();
  cplx->add_option("--out", cx_out, "output directory");

  // session
  auto *sess = app.add_subcommand("session", "run one simulated session and print its report");
  std::string ss_store;
  int ss_nt = 4;
  int ss_nd = 1;
  std::string ss_model = "0.6,0.5,0.3";
  std::uint64_t ss_seed = 1;
  int ss_start = 0;
  int ss_length = 0;
  double ss_budget = 0.0;
  std::string ss_policy = "weighted_matched";
  int ss_q = 16;
  sess->add_option("--store", ss_store, "store directory")->required();
  sess->add_option("--nt", ss_nt, "request interval")->capture_default_str();
  sess->add_option("--nd", ss_nd, "request delay")->capture_default_str();
  sess->add_option("--model", ss_model, "p1,p2,p3")->capture_default_str();
  sess->add_option("--seed", ss_seed, "path seed")->capture_default_str();
  sess->add_option("--start-view", ss_start, "starting view")->capture_default_str();
  sess->add_option("--length", ss_length, "displayed frames (0 = whole sequence)");
  sess->add_option("--budget", ss_budget, "e-frame bits per bundle (weighted policy)");
  sess->add_option("--policy", ss_policy, "weighted, uniform, weighted_matched or none")->capture_default_str();
  sess->add_option("--q", ss_q, "step for uniform / weighted_matched")->capture_default_str();

  // serve
  auto *serve = app.add_subcommand("serve", "live session service");
  std::string sv_store;
  std::string sv_listen = "127.0.0.1:7878";
  int sv_nt = 4;
  int sv_nd = 1;
  double sv_budget = 0.0;
  std::string sv_model = "0.6,0.5,0.3";
  std::string sv_policy = "weighted_matched";
  int sv_q = 16;
  serve->add_option("--store", sv_store, "store directory")->required();
  serve->add_option("--listen", sv_listen, "host:port (port 0 picks a free one)")->capture_default_str();
  serve->add_option("--nt", sv_nt, "request interval")->capture_default_str();
  serve->add_option("--nd", sv_nd, "request delay")->capture_default_str();
  serve->add_option("--budget", sv_budget, "e-frame bits per bundle (weighted policy)");
  serve->add_option("--model", sv_model, "p1,p2,p3")->capture_default_str();
  serve->add_option("--policy", sv_policy, "allocation policy")->capture_default_str();
  serve->add_option("--q", sv_q, "step for uniform / weighted_matched")->capture_default_str();

  // client
  auto *client = app.add_subcommand("client", "scripted client replaying a seeded path");
  std::string cl_connect = "127.0.0.1:7878";
  std::string cl_model = "0.6,0.5,0.3";
  std::uint64_t cl_seed = 1;
  int cl_start = 0;
  int cl_length = 0;
  std::string cl_store;
  client->add_option("--connect", cl_connect, "host:port")->capture_default_str();
  client->add_option("--model", cl_model, "p1,p2,p3")->capture_default_str();
  client->add_option("--seed", cl_seed, "path seed")->capture_default_str();
  client->add_option("--start-view", cl_start, "starting view")->capture_default_str();
  client->add_option("--length", cl_length, "displayed frames (0 = whole sequence)");
  client->add_option("--store", cl_store, "store for PSNR measurement (optional)");

  // path
  auto *path = app.add_subcommand("path", "print a seeded navigation path as 't v' lines");
  std::string p_model = "0.6,0.5,0.3";
  std::uint64_t p_seed = 1;
  int p_start = 0;
  int p_length = 32;
  int p_views = 7;
  path->add_option("--model", p_model, "p1,p2,p3")->capture_default_str();
  path->add_option("--seed", p_seed, "seed")->capture_default_str();
  path->add_option("--start-view", p_start, "starting view")->capture_default_str();
  path->add_option("--length", p_length, "frames")->capture_default_str();
  path->add_option("--views", p_views, "number of views")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) {
      prep_cfg.ladder.steps = parse_int_list(prep_ladder);
      const auto seq = prep_src.load();
      const auto store = prepare_store(seq, prep_src.grid(seq), prep_cfg, prep_out, {!prep_no_eframes});
      const auto st = store.stats();
      std::cout << "store " << prep_out << ": ref " << st.ref_bytes << " B, depth " << st.depth_bytes
                << " B, e-frames " << st.eframe_bytes << " B (" << st.eframe_count << " payloads)\n";
    } else if (sweep->parsed()) {
      const auto store = load_store(sw_store);
      sw_spec.configs.clear();
      for (const int nt : parse_int_list(sw_nt)) {
        for (const int nd : parse_int_list(sw_nd)) {
          sw_spec.configs.emplace_back(nt, nd);
        }
      }
      sw_spec.steps = parse_int_list(sw_q);
      sw_spec.model = parse_model(sw_model);
      emit(sweep_nt_nd(store, sw_spec).table, sw_out);
    } else if (gop->parsed()) {
      const auto seq = gop_src.load();
      gop_search.candidates = parse_int_list(gop_candidates);
      emit(compare_gop(seq, gop_src.grid(seq), parse_model(gop_model), gop_search).table, gop_out);
    } else if (alloc->parsed()) {
      const auto store = load_store(ac_store);
      ac_spec.scenarios = parse_models(ac_scenarios);
      ac_spec.steps = parse_int_list(ac_q);
      ac_spec.basis = ac_rate == "eframe" ? RateBasis::eframe : RateBasis::total;
      emit(alloc_compare(store, ac_spec).table, ac_out);
    } else if (base->parsed()) {
      const auto seq = base_src.load();
      base_spec.ref_steps = parse_int_list(base_ref_q);
      base_spec.eframe_steps = parse_int_list(base_eq);
      base_spec.ladder.steps = parse_int_list(base_ladder);
      base_spec.model = parse_model(base_model);
      emit(run_baselines(seq, base_src.grid(seq), base_spec).table, base_out);
    } else if (cplx->parsed()) {
      std::vector<std::uint64_t> seeds;
      for (const int s : parse_int_list(cx_seeds)) {
        seeds.push_back(static_cast<std::uint64_t>(s));
      }
      cx_spec.block_sizes = parse_int_list(cx_blocks);
      DeskScene d;
      d.n_intermediate = cx_intermediates;
      emit(complexity_table(seeds, d, cx_spec), cx_out);
    } else if (sess->parsed()) {
      const auto store = load_store(ss_store);
      const auto cfg = session_config(store, ss_nt, ss_nd);
      const auto rep = run_session(store, cfg, parse_model(ss_model), at_rest(ss_start),
                                   ss_length > 0 ? ss_length : store.n_frames, ss_seed,
                                   {policy_from_name(ss_policy), ss_budget, ss_q});
      std::cout << report_json(rep).dump(2) << "\n";
    } else if (serve->parsed()) {
      const auto store = load_store(sv_store);
      const ServiceConfig sc{session_config(store, sv_nt, sv_nd), parse_model(sv_model),
                             {policy_from_name(sv_policy), sv_budget, sv_q}};
      const auto [host, port] = net::parse_endpoint(sv_listen);
      Server server(store, sc, host, port);
      active_server = &server;
      struct sigaction sa {};
      sa.sa_handler = on_signal;
      sigemptyset(&sa.sa_mask);
      sigaction(SIGINT, &sa, nullptr);
      sigaction(SIGTERM, &sa, nullptr);
      std::cout << "listening on " << host << ":" << server.port() << std::endl;
      server.run();
      active_server = nullptr;
    } else if (client->parsed()) {
      const auto [host, port] = net::parse_endpoint(cl_connect);
      std::optional<Store> store;
      if (!cl_store.empty()) {
        store = load_store(cl_store);
      }
      // The schedule needs the sequence length and view count from HELLO, so
      // ask for them first.
      boost::asio::io_context io;
      net::tcp::socket probe(io);
      probe.connect(net::tcp::endpoint(boost::asio::ip::make_address(host), port));
      net::write_message(probe, {{"type", "HELLO"}});
      const auto hello = net::read_message(probe);
      verify(hello.has_value() && (*hello)["type"] == "HELLO", Errc::protocol, "no HELLO from server");
      probe.close();
      const auto &c = (*hello)["config"];
      const int n_frames = c.at("n_frames").get<int>();
      const auto start = at_rest(cl_start);
      const auto p = sample_path(parse_model(cl_model), start, cl_length > 0 ? cl_length : n_frames, cl_seed,
                                 c.at("n_views").get<int>());
      const auto rep = run_socket_client(host, port, p, start.previous_view, store ? &*store : nullptr);
      Json frames = Json::array();
      for (const auto &f : rep.frames) {
        frames.push_back({{"t", f.frame.t}, {"v", f.frame.v}, {"psnr", f.psnr}});
      }
      std::cout << Json{{"bits",
                         {{"ref", rep.ref_bits},
                          {"depth", rep.depth_bits},
                          {"eframe", rep.eframe_bits},
                          {"total", rep.total_bits()}}},
                        {"bundle_bits", rep.bundle_bits},
                        {"frames", frames}}
                       .dump(2)
                << "\n";
    } else if (path->parsed()) {
      std::cout << path_to_text(sample_path(parse_model(p_model), at_rest(p_start), p_length, p_seed, p_views));
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
