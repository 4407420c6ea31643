#pragma once

#include "wss/core/volume.hpp"

#include <string>

namespace wss {

// Volume container: raw little-endian payload in x-fastest order plus a
// JSON sidecar (<payload path> + ".json") with dims, spacing_mm, channels,
// dtype ("f32" or "u8") and order ("xyz").
void write_volume(const std::string& path, const IntensityVolume& volume);
void write_volume(const std::string& path, const ProbabilityVolume& volume);
void write_volume(const std::string& path, const LabelVolume& volume);
void write_volume(const std::string& path, const AnnotationMask& volume);

IntensityVolume read_intensity_volume(const std::string& path);
ProbabilityVolume read_probability_volume(const std::string& path);
LabelVolume read_label_volume(const std::string& path);
AnnotationMask read_annotation_mask(const std::string& path);

} // namespace wss
