#pragma once

#include "wss/core/volume.hpp"

#include <vector>

namespace wss {

enum class Connectivity { kFace, kFull };

// Per-channel min-max rescale to [0, 1]; a constant channel maps to zeros.
IntensityVolume normalize_intensity(const IntensityVolume& volume);

// Nearest-neighbour resample to the target spacing, then symmetric centre
// crop / zero-pad to the target dims.
IntensityVolume resample_pad_crop(const IntensityVolume& volume, const GridSpec& target);
LabelVolume resample_pad_crop(const LabelVolume& volume, const GridSpec& target);

// Maximal connected sets of true voxels, ordered by each component's
// (min z, min y, min x) key. kFull is 26-neighbour in 3D (8 in-plane).
std::vector<std::vector<int64_t>> connected_components(const BinaryMask& mask,
                                                       Connectivity connectivity);

// |a ∩ b| / |a ∪ b| on sorted index vectors; 0 when both empty.
double iou(const std::vector<int64_t>& a, const std::vector<int64_t>& b);

// A voxel survives erosion iff the whole structuring element centred on it
// is inside the mask. 2D per-slice operation.
enum class StructuringElement { kCross, kSquare };
BinaryMask binary_erode(const BinaryMask& mask, StructuringElement element);

} // namespace wss
