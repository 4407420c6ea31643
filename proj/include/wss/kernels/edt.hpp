#pragma once

#include "wss/core/volume.hpp"

#include <vector>

namespace wss {

// Exact Euclidean distance (voxel units) from every true voxel to the
// nearest zero voxel; zero on false voxels. Out-of-grid counts as zero, so
// an all-true mask gets finite distances to the virtual border.
// Felzenszwalb-Huttenlocher separable transform, parallel across lines.
std::vector<double> distance_transform(const BinaryMask& mask);

} // namespace wss
