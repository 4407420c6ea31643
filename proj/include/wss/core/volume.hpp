#pragma once

#include "wss/core/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace wss {

// Class ids shared across the toolkit.
inline constexpr uint8_t kBackground = 0;
inline constexpr uint8_t kProstate = 1;
inline constexpr uint8_t kLesion = 2;
inline constexpr int kNumClasses = 3;

// Sentinel for voxels outside the annotated set.
inline constexpr uint8_t kUnlabeled = 255;

// Multi-channel scalar image over a grid. Channel data is stored
// channel-major, each channel in x-fastest order.
struct IntensityVolume {
    GridSpec grid;
    std::vector<std::string> channel_names;
    std::vector<std::vector<double>> channels;

    IntensityVolume() = default;
    IntensityVolume(const GridSpec& g, std::vector<std::string> names);

    int num_channels() const { return static_cast<int>(channels.size()); }
    void validate() const;
};

// Dense per-voxel class map (ground truth or argmax predictions).
struct LabelVolume {
    GridSpec grid;
    std::vector<uint8_t> labels;

    LabelVolume() = default;
    explicit LabelVolume(const GridSpec& g)
        : grid(g), labels(static_cast<size_t>(g.voxels()), kBackground) {}

    void validate() const;
};

// Partial labeling: kUnlabeled marks voxels outside the annotated set.
struct AnnotationMask {
    GridSpec grid;
    std::vector<uint8_t> labels;

    AnnotationMask() = default;
    explicit AnnotationMask(const GridSpec& g)
        : grid(g), labels(static_cast<size_t>(g.voxels()), kUnlabeled) {}

    int64_t annotated_count() const;
};

struct BinaryMask {
    GridSpec grid;
    std::vector<uint8_t> values;

    BinaryMask() = default;
    explicit BinaryMask(const GridSpec& g)
        : grid(g), values(static_cast<size_t>(g.voxels()), 0) {}

    int64_t count() const;
};

// Per-voxel softmax distribution over kNumClasses, stored class-major
// like IntensityVolume channels.
struct ProbabilityVolume {
    GridSpec grid;
    int num_classes = kNumClasses;
    std::vector<std::vector<double>> probs;

    ProbabilityVolume() = default;
    ProbabilityVolume(const GridSpec& g, int classes)
        : grid(g), num_classes(classes),
          probs(static_cast<size_t>(classes),
                std::vector<double>(static_cast<size_t>(g.voxels()), 0.0)) {}
};

// One connected predicted lesion. Voxels are sorted linear indices.
struct LesionCluster {
    std::vector<int64_t> voxels;
    double score = 0.0;
    int64_t volume_voxels = 0;
};

// Single-class views of a LabelVolume.
BinaryMask class_mask(const LabelVolume& labels, uint8_t class_id);
BinaryMask slice_mask(const BinaryMask& mask, int z);

} // namespace wss
