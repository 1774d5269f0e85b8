#include "scd/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "scd/errors.hpp"

namespace scd::io {

namespace {

[[noreturn]] void io_fail(const fs::path& path, const std::string& what) {
  throw Error(ErrorKind::kIo, path.string() + ": " + what);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) io_fail(path, "write failed");
}

// Reads whitespace-separated header tokens (skipping '#' comments) and leaves
// `pos` just past the single whitespace byte that ends the last token.
class HeaderReader {
 public:
  HeaderReader(const std::string& data, const fs::path& path) : data_(data), path_(path) {}

  std::string token() {
    while (pos_ < data_.size()) {
      const char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) io_fail(path_, "truncated header");
    return data_.substr(start, pos_ - start);
  }

  long integer() {
    const std::string t = token();
    long value = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size()) io_fail(path_, "bad header number '" + t + "'");
    return value;
  }

  std::size_t end_of_header() {
    if (pos_ >= data_.size()) io_fail(path_, "missing pixel data");
    return pos_ + 1;
  }

 private:
  const std::string& data_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

Image read_pnm(const fs::path& path) {
  const std::string data = slurp(path);
  HeaderReader hdr(data, path);
  const std::string magic = hdr.token();
  int channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else io_fail(path, "not a binary PGM/PPM file");
  const long w = hdr.integer();
  const long h = hdr.integer();
  const long maxval = hdr.integer();
  if (w <= 0 || h <= 0) io_fail(path, "bad image size");
  if (maxval != 255) io_fail(path, "only 8-bit images (maxval 255) are supported");
  const std::size_t offset = hdr.end_of_header();
  const std::size_t needed = static_cast<std::size_t>(w * h * channels);
  if (data.size() < offset + needed) io_fail(path, "truncated pixel data");

  std::vector<Grid> ch(static_cast<std::size_t>(channels), Grid(h, w));
  const auto* px = reinterpret_cast<const unsigned char*>(data.data() + offset);
  for (long v = 0; v < h; ++v)
    for (long u = 0; u < w; ++u)
      for (int c = 0; c < channels; ++c) ch[static_cast<std::size_t>(c)](v, u) = *px++ / 255.0;
  return Image(std::move(ch));
}

void write_pnm(const fs::path& path, const Image& image) {
  const int channels = image.channels();
  if (channels != 1 && channels != 3) throw Error(ErrorKind::kDimension, "PNM images need 1 or 3 channels");
  std::string out = (channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(image.width() * image.height() * channels));
  for (int v = 0; v < image.height(); ++v)
    for (int u = 0; u < image.width(); ++u)
      for (int c = 0; c < channels; ++c) {
        const long q = std::lround(std::clamp(image(c, v, u), 0.0, 1.0) * 255.0);
        out.push_back(static_cast<char>(static_cast<unsigned char>(q)));
      }
  dump(path, out);
}

BoolGrid read_mask(const fs::path& path) {
  const Image img = read_pnm(path);
  if (img.channels() != 1) io_fail(path, "mask must be a single-channel PGM");
  return img.channel(0) > 0.0;
}

void write_mask(const fs::path& path, const BoolGrid& mask) {
  write_pnm(path, Image({mask.cast<double>()}));
}

Grid read_pfm(const fs::path& path) {
  const std::string data = slurp(path);
  HeaderReader hdr(data, path);
  const std::string magic = hdr.token();
  if (magic == "PF") io_fail(path, "three-channel PFM is not a depth map");
  if (magic != "Pf") io_fail(path, "not a PFM file");
  const long w = hdr.integer();
  const long h = hdr.integer();
  const std::string scale_text = hdr.token();
  const double scale = std::strtod(scale_text.c_str(), nullptr);
  if (w <= 0 || h <= 0 || scale == 0.0) io_fail(path, "bad PFM header");
  const std::size_t offset = hdr.end_of_header();
  if (data.size() < offset + static_cast<std::size_t>(w * h) * 4) io_fail(path, "truncated PFM data");
  const bool little = scale < 0.0;
  const bool swap = little != (std::endian::native == std::endian::little);

  Grid g(h, w);
  const char* px = data.data() + offset;
  for (long row = h - 1; row >= 0; --row) {
    for (long u = 0; u < w; ++u) {
      std::uint32_t bits;
      std::memcpy(&bits, px, 4);
      px += 4;
      if (swap) bits = __builtin_bswap32(bits);
      g(row, u) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  return g;
}

void write_pfm(const fs::path& path, const Grid& grid) {
  const long h = grid.rows();
  const long w = grid.cols();
  std::string out = "Pf\n" + std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(w * h) * 4);
  char* px = out.data() + header;
  for (long row = h - 1; row >= 0; --row) {
    for (long u = 0; u < w; ++u) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(grid(row, u)));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(px, &bits, 4);
      px += 4;
    }
  }
  dump(path, out);
}

std::string format_kitti_line(const PoseSE3& pose) {
  std::string line;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!line.empty()) line += ' ';
      line += format_double(c < 3 ? pose.rotation()(r, c) : pose.translation()(r));
    }
  }
  return line;
}

PoseSE3 parse_kitti_line(const std::string& line) {
  std::istringstream ss(line);
  double vals[12];
  for (double& x : vals) {
    std::string tok;
    if (!(ss >> tok)) throw Error(ErrorKind::kInvalidArgument, "KITTI pose line needs 12 numbers");
    char* end = nullptr;
    x = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw Error(ErrorKind::kInvalidArgument, "bad number '" + tok + "' in pose line");
  }
  std::string extra;
  if (ss >> extra) throw Error(ErrorKind::kInvalidArgument, "KITTI pose line has more than 12 numbers");
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int i = 0; i < 3; ++i) {
    r.row(i) << vals[4 * i], vals[4 * i + 1], vals[4 * i + 2];
    t[i] = vals[4 * i + 3];
  }
  return PoseSE3::from_approximate(r, t);
}

std::vector<PoseSE3> read_kitti_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open for reading");
  std::vector<PoseSE3> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      poses.push_back(parse_kitti_line(line));
    } catch (const Error& e) {
      throw Error(ErrorKind::kInvalidArgument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return poses;
}

void write_kitti_poses(const fs::path& path, const std::vector<PoseSE3>& poses) {
  std::string out;
  for (const PoseSE3& p : poses) out += format_kitti_line(p) + "\n";
  dump(path, out);
}

nlohmann::json intrinsics_to_json(const Intrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

Intrinsics intrinsics_from_json(const nlohmann::json& j) {
  Intrinsics K;
  try {
    K.fx = j.at("fx").get<double>();
    K.fy = j.at("fy").get<double>();
    K.cx = j.at("cx").get<double>();
    K.cy = j.at("cy").get<double>();
    K.width = j.at("width").get<int>();
    K.height = j.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, std::string("camera: ") + e.what());
  }
  K.validate();
  return K;
}

nlohmann::json read_json(const fs::path& path) {
  const std::string text = slurp(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) { dump(path, text); }

Intrinsics read_camera(const fs::path& path) { return intrinsics_from_json(read_json(path)); }

void write_camera(const fs::path& path, const Intrinsics& K) { dump(path, intrinsics_to_json(K).dump(2) + "\n"); }

namespace {

using nlohmann::json;

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kInvalidScene, "expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json bound_vec(const Eigen::Vector3d& v) {
  json a = json::array();
  for (int i = 0; i < 3; ++i) a.push_back(std::abs(v[i]) >= 1e299 ? json(nullptr) : json(v[i]));
  return a;
}

Eigen::Vector3d to_bound(const json& j, double unbounded) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::kInvalidScene, "bounds need 3-element arrays");
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) v[i] = j[static_cast<std::size_t>(i)].is_null() ? unbounded : j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json texture_json(const TextureSpec& t) {
  return {{"albedo", {t.albedo_min, t.albedo_max}},
          {"wavelength", {t.wavelength_min, t.wavelength_max}},
          {"components", t.components},
          {"solid", t.solid}};
}

TextureSpec texture_from(const json& j) {
  TextureSpec t;
  if (j.is_null()) return t;
  if (j.contains("albedo")) {
    t.albedo_min = j.at("albedo").at(0).get<double>();
    t.albedo_max = j.at("albedo").at(1).get<double>();
  }
  if (j.contains("wavelength")) {
    t.wavelength_min = j.at("wavelength").at(0).get<double>();
    t.wavelength_max = j.at("wavelength").at(1).get<double>();
  }
  if (j.contains("components")) t.components = j.at("components").get<int>();
  if (j.contains("solid")) t.solid = j.at("solid").get<bool>();
  return t;
}

PoseSE3 pose_from(const json& j) {
  if (j.contains("omega") || j.contains("v")) {
    Twist t;
    if (j.contains("omega")) t.omega = to_vec3(j.at("omega"));
    if (j.contains("v")) t.v = to_vec3(j.at("v"));
    return exp_twist(t);
  }
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 9) throw Error(ErrorKind::kInvalidScene, "rotation needs 9 row-major numbers");
  Eigen::Matrix3d m;
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
  return PoseSE3::from_approximate(m, to_vec3(j.at("translation")));
}

}  // namespace

nlohmann::json scene_to_json(const SceneSpec& spec) {
  json j;
  j["width"] = spec.width;
  j["height"] = spec.height;
  j["channels"] = spec.channels;
  j["seed"] = spec.seed;
  j["intrinsics"] = {{"fx", spec.intrinsics.fx}, {"fy", spec.intrinsics.fy},
                     {"cx", spec.intrinsics.cx}, {"cy", spec.intrinsics.cy}};
  j["planes"] = json::array();
  for (const PlaneSpec& p : spec.planes) {
    json pj{{"normal", vec3(p.normal)}, {"offset", p.offset}, {"texture", texture_json(p.texture)}};
    if (p.bounds) pj["bounds"] = {{"min", bound_vec(p.bounds->min)}, {"max", bound_vec(p.bounds->max)}};
    j["planes"].push_back(pj);
  }
  if (spec.moving_box) {
    const MovingBox& b = *spec.moving_box;
    j["moving_box"] = {{"center", vec3(b.center)},
                       {"half_extent", vec3(b.half_extent)},
                       {"translation_per_frame", vec3(b.translation_per_frame)},
                       {"texture", texture_json(b.texture)}};
  }
  j["camera_path"] = json::array();
  for (const PoseSE3& p : spec.camera_path) {
    json r = json::array();
    for (int i = 0; i < 9; ++i) r.push_back(p.rotation()(i / 3, i % 3));
    j["camera_path"].push_back({{"rotation", r}, {"translation", vec3(p.translation())}});
  }
  return j;
}

SceneSpec scene_from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.channels = j.value("channels", 1);
    s.seed = j.value("seed", std::uint64_t{0});
    const json& k = j.at("intrinsics");
    s.intrinsics.fx = k.at("fx").get<double>();
    s.intrinsics.fy = k.at("fy").get<double>();
    s.intrinsics.cx = k.at("cx").get<double>();
    s.intrinsics.cy = k.at("cy").get<double>();
    s.intrinsics.width = s.width;
    s.intrinsics.height = s.height;
    for (const json& pj : j.value("planes", json::array())) {
      PlaneSpec p;
      p.normal = to_vec3(pj.at("normal"));
      p.offset = pj.at("offset").get<double>();
      p.texture = texture_from(pj.value("texture", json()));
      if (pj.contains("bounds")) {
        AxisBox b;
        const json& bj = pj.at("bounds");
        if (bj.contains("min")) b.min = to_bound(bj.at("min"), -1e300);
        if (bj.contains("max")) b.max = to_bound(bj.at("max"), 1e300);
        p.bounds = b;
      }
      s.planes.push_back(p);
    }
    if (j.contains("moving_box") && !j.at("moving_box").is_null()) {
      const json& bj = j.at("moving_box");
      MovingBox b;
      b.center = to_vec3(bj.at("center"));
      b.half_extent = to_vec3(bj.at("half_extent"));
      if (bj.contains("translation_per_frame")) b.translation_per_frame = to_vec3(bj.at("translation_per_frame"));
      b.texture = texture_from(bj.value("texture", json()));
      s.moving_box = b;
    }
    for (const json& pj : j.at("camera_path")) s.camera_path.push_back(pose_from(pj));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidScene, std::string("malformed scene spec: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidScene) throw;
    throw Error(ErrorKind::kInvalidScene, e.what());
  }
  s.validate();
  return s;
}

SceneSpec read_scene(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidScene, path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

}  // namespace scd::io
