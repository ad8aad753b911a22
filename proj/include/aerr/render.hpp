#pragma once

#include "aerr/runner.hpp"
#include "aerr/world.hpp"

#include <string>

namespace aerr {

/// SVG with one panel per floor: belief map, trajectory colored by state family, frontiers,
/// keypoints and, when the world is given, the target cells.
std::string render_svg(const EpisodeLog& log, const MultiFloorWorld* world = nullptr);

}  // namespace aerr
