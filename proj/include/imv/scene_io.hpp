#pragma once

#include "scene.hpp"

#include <json.hpp>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace imv {

namespace fs = std::filesystem;

namespace detail {
inline auto read_file_bytes(const fs::path &path) -> std::vector<std::uint8_t> {
  std::ifstream in(path, std::ios::binary);
  verify(static_cast<bool>(in), Errc::missing_file, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const fs::path &path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    verify(!ec, Errc::storage_full, "cannot create " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  verify(static_cast<bool>(out), Errc::storage_full, "cannot open " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  verify(static_cast<bool>(out), Errc::storage_full, "short write to " + path.string());
}

// Netpbm header: magic, width, height, maxval, single whitespace.
struct PnmHeader {
  std::string magic;
  int width{};
  int height{};
  int maxval{};
  std::size_t offset{};
};

inline auto parse_pnm_header(const std::vector<std::uint8_t> &bytes, const std::string &name) -> PnmHeader {
  PnmHeader h;
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') {
          ++pos;
        }
      } else if (std::isspace(bytes[pos]) != 0) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && std::isspace(bytes[pos]) == 0) {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::exception &) {
    throw Error(Errc::corrupt_stream, "bad netpbm header in " + name);
  }
  h.offset = pos + 1;
  return h;
}
} // namespace detail

inline auto read_ppm(const fs::path &path) -> Frame {
  const auto bytes = detail::read_file_bytes(path);
  const auto h = detail::parse_pnm_header(bytes, path.string());
  verify(h.magic == "P6" && h.maxval == 255, Errc::corrupt_stream, "expected 8-bit P6: " + path.string());
  Frame f = make_frame(h.width, h.height);
  verify(bytes.size() >= h.offset + f.size(), Errc::corrupt_stream, "truncated " + path.string());
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.offset), f.size(), f.data().begin());
  return f;
}

inline void write_ppm(const fs::path &path, const Frame &f) {
  const auto header = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), f.vec().begin(), f.vec().end());
  detail::write_file_bytes(path, bytes);
}

// 16-bit big-endian P5.
inline auto read_pgm16(const fs::path &path) -> Image<std::uint16_t> {
  const auto bytes = detail::read_file_bytes(path);
  const auto h = detail::parse_pnm_header(bytes, path.string());
  verify(h.magic == "P5" && h.maxval == 65535, Errc::corrupt_stream, "expected 16-bit P5: " + path.string());
  Image<std::uint16_t> img(h.width, h.height, 1);
  verify(bytes.size() >= h.offset + 2 * img.size(), Errc::corrupt_stream, "truncated " + path.string());
  auto out = img.data();
  for (std::size_t i = 0; i < img.size(); ++i) {
    out[i] = static_cast<std::uint16_t>((bytes[h.offset + 2 * i] << 8U) | bytes[h.offset + 2 * i + 1]);
  }
  return img;
}

inline void write_pgm16(const fs::path &path, const Image<std::uint16_t> &img) {
  const auto header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (const auto v : img.vec()) {
    bytes.push_back(static_cast<std::uint8_t>(v >> 8U));
    bytes.push_back(static_cast<std::uint8_t>(v & 0xFFU));
  }
  detail::write_file_bytes(path, bytes);
}

// Camera file: 21 whitespace-separated numbers per camera (K, R row-major, t).
inline auto read_cameras(const fs::path &path) -> std::vector<CameraParams> {
  std::ifstream in(path);
  verify(static_cast<bool>(in), Errc::missing_file, path.string());
  std::vector<CameraParams> cams;
  double value{};
  std::vector<double> vals;
  while (in >> value) {
    vals.push_back(value);
  }
  verify(vals.size() % 21 == 0 && !vals.empty(), Errc::bad_calibration,
         "camera file must hold 21 values per camera: " + path.string());
  for (std::size_t c = 0; c < vals.size() / 21; ++c) {
    CameraParams cam;
    cam.id = static_cast<int>(c);
    const double *p = vals.data() + 21 * c;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        cam.intrinsic[i][j] = p[3 * i + j];
        cam.rotation[i][j] = p[9 + 3 * i + j];
      }
      cam.translation[i] = p[18 + i];
    }
    cams.push_back(cam);
  }
  return cams;
}

inline void write_cameras(const fs::path &path, const std::vector<CameraParams> &cams) {
  std::ostringstream os;
  os.precision(17);
  for (const auto &cam : cams) {
    for (const auto &row : cam.intrinsic) {
      os << row[0] << ' ' << row[1] << ' ' << row[2] << '\n';
    }
    for (const auto &row : cam.rotation) {
      os << row[0] << ' ' << row[1] << ' ' << row[2] << '\n';
    }
    os << cam.translation[0] << ' ' << cam.translation[1] << ' ' << cam.translation[2] << "\n\n";
  }
  const auto s = os.str();
  detail::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t *>(s.data()), s.size()));
}

inline auto expand_pattern(std::string pattern, int view, int frame) -> std::string {
  auto replace = [&](const std::string &key, const std::string &val) {
    for (auto pos = pattern.find(key); pos != std::string::npos; pos = pattern.find(key, pos + val.size())) {
      pattern.replace(pos, key.size(), val);
    }
  };
  replace("{view}", std::to_string(view));
  replace("{frame}", std::to_string(frame));
  return pattern;
}

// Loads and validates a sequence described by a JSON manifest. Relative paths
// resolve against the manifest's directory.
inline auto load_sequence(const fs::path &manifest_path) -> MultiviewSequence {
  const auto bytes = detail::read_file_bytes(manifest_path);
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::corrupt_stream, std::string("manifest: ") + e.what());
  }
  const auto base = manifest_path.parent_path();
  MultiviewSequence seq;
  try {
    seq.width = m.at("width").get<int>();
    seq.height = m.at("height").get<int>();
    seq.n_frames = m.at("n_frames").get<int>();
    seq.fps = m.at("fps").get<double>();
    const auto n_views = m.at("n_views").get<int>();
    const DepthRange range{m.at("z_near").get<double>(), m.at("z_far").get<double>()};
    validate_range(range);
    const auto cams = read_cameras(base / m.at("camera_file").get<std::string>());
    verify(static_cast<int>(cams.size()) == n_views, Errc::bad_calibration, "camera count != n_views");
    const auto color_pattern = m.at("color_pattern").get<std::string>();
    const auto depth_pattern = m.at("depth_pattern").get<std::string>();
    for (int v = 0; v < n_views; ++v) {
      ViewSequence view;
      view.camera = cams[v];
      for (int t = 0; t < seq.n_frames; ++t) {
        view.frames.push_back(read_ppm(base / expand_pattern(color_pattern, v, t)));
        view.depths.push_back({read_pgm16(base / expand_pattern(depth_pattern, v, t)), range});
      }
      seq.views.push_back(std::move(view));
    }
  } catch (const nlohmann::json::exception &e) {
    throw Error(Errc::corrupt_stream, std::string("manifest field: ") + e.what());
  }
  validate_sequence(seq);
  return seq;
}

inline void save_sequence(const MultiviewSequence &seq, const fs::path &dir) {
  const DepthRange range = seq.views.front().depths.front().range;
  nlohmann::ordered_json m;
  m["width"] = seq.width;
  m["height"] = seq.height;
  m["n_views"] = seq.n_views();
  m["n_frames"] = seq.n_frames;
  m["fps"] = seq.fps;
  m["z_near"] = range.z_near;
  m["z_far"] = range.z_far;
  m["camera_file"] = "cameras.txt";
  m["color_pattern"] = "color/v{view}_f{frame}.ppm";
  m["depth_pattern"] = "depth/v{view}_f{frame}.pgm";
  write_cameras(dir / "cameras.txt", reference_cameras(seq));
  for (int v = 0; v < seq.n_views(); ++v) {
    for (int t = 0; t < seq.n_frames; ++t) {
      write_ppm(dir / expand_pattern("color/v{view}_f{frame}.ppm", v, t), seq.views[v].frames[t]);
      write_pgm16(dir / expand_pattern("depth/v{view}_f{frame}.pgm", v, t), seq.views[v].depths[t].codes);
    }
  }
  const auto text = m.dump(2) + "\n";
  detail::write_file_bytes(dir / "manifest.json",
                           std::span(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

// Scene specs as JSON, for --synthetic-spec.
inline auto scene_spec_to_json(const SceneSpec &s) -> nlohmann::ordered_json {
  nlohmann::ordered_json j;
  j["width"] = s.width;
  j["height"] = s.height;
  j["n_views"] = s.n_views;
  j["n_frames"] = s.n_frames;
  j["fps"] = s.fps;
  j["focal"] = s.focal;
  j["baseline"] = s.baseline;
  j["z_near"] = s.range.z_near;
  j["z_far"] = s.range.z_far;
  j["noise_amplitude"] = s.noise_amplitude;
  j["texel_pixels"] = s.texel_pixels;
  auto rects = nlohmann::ordered_json::array();
  for (const auto &r : s.rects) {
    rects.push_back({{"x0", r.x0}, {"y0", r.y0}, {"x1", r.x1}, {"y1", r.y1}, {"z", r.z}, {"vx", r.vx}, {"vy", r.vy}});
  }
  j["rects"] = rects;
  return j;
}

inline auto scene_spec_from_json(const nlohmann::json &j) -> SceneSpec {
  SceneSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.n_views = j.value("n_views", s.n_views);
  s.n_frames = j.value("n_frames", s.n_frames);
  s.fps = j.value("fps", s.fps);
  s.focal = j.value("focal", s.focal);
  s.baseline = j.value("baseline", s.baseline);
  s.range.z_near = j.value("z_near", s.range.z_near);
  s.range.z_far = j.value("z_far", s.range.z_far);
  s.noise_amplitude = j.value("noise_amplitude", s.noise_amplitude);
  s.texel_pixels = j.value("texel_pixels", s.texel_pixels);
  for (const auto &r : j.at("rects")) {
    s.rects.push_back({r.at("x0").get<double>(), r.at("y0").get<double>(), r.at("x1").get<double>(),
                       r.at("y1").get<double>(), r.at("z").get<double>(), r.value("vx", 0.0),
                       r.value("vy", 0.0)});
  }
  return s;
}

} // namespace imv
