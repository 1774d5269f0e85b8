#pragma once

#include <string>

#include "scd/evalkit.hpp"

namespace scd::cli {

/// Top-down (x–z) view of both camera paths on a common scale.
std::string trajectory_svg(const Trajectory& pred, const Trajectory& gt, int size = 600);

}  // namespace scd::cli
