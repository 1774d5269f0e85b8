#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "scd/geometry.hpp"
#include "scd/image.hpp"
#include "scd/synth.hpp"

namespace scd::io {

namespace fs = std::filesystem;

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// 8-bit binary PGM (P5, one channel) or PPM (P6, three channels). Values are
/// stored as round(255·x) and read back as n / 255.
Image read_pnm(const fs::path& path);
void write_pnm(const fs::path& path, const Image& image);

/// Masks are P5 files with 0 for false and 255 for true; any nonzero byte
/// reads as true.
BoolGrid read_mask(const fs::path& path);
void write_mask(const fs::path& path, const BoolGrid& mask);

/// Single-channel PFM: "Pf\n<W> <H>\n-1.0\n" followed by little-endian
/// float32 rows stored bottom row first. A positive scale denotes big-endian
/// data when reading.
Grid read_pfm(const fs::path& path);
void write_pfm(const fs::path& path, const Grid& grid);
inline DepthMap read_depth(const fs::path& path) { return DepthMap(read_pfm(path)); }
inline void write_depth(const fs::path& path, const DepthMap& depth) { write_pfm(path, depth.values()); }

/// KITTI odometry poses: one line per frame, 12 numbers of the row-major 3×4
/// camera-to-world matrix [R|t].
std::string format_kitti_line(const PoseSE3& pose);
PoseSE3 parse_kitti_line(const std::string& line);
std::vector<PoseSE3> read_kitti_poses(const fs::path& path);
void write_kitti_poses(const fs::path& path, const std::vector<PoseSE3>& poses);

nlohmann::json intrinsics_to_json(const Intrinsics& K);
Intrinsics intrinsics_from_json(const nlohmann::json& j);
Intrinsics read_camera(const fs::path& path);
void write_camera(const fs::path& path, const Intrinsics& K);

nlohmann::json scene_to_json(const SceneSpec& spec);
/// Throws kInvalidScene for missing or mistyped fields.
SceneSpec scene_from_json(const nlohmann::json& j);
SceneSpec read_scene(const fs::path& path);

nlohmann::json read_json(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace scd::io
