#pragma once

#include "splatedit/splat_grid.hpp"

namespace splatedit {

/// Procedural demo asset: a sphere of Gaussians with eight distinctly
/// colored octants, seen from a ring of cameras. Every cell is pixel-aligned
/// (depth from the exact ray-sphere intersection); pixels that miss the
/// sphere carry zero opacity. Deterministic.
SplatGrid make_demo_asset(int views = 4, int size = 16);

}  // namespace splatedit
