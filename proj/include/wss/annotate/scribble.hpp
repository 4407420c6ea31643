#pragma once

#include "wss/core/ops.hpp"
#include "wss/core/volume.hpp"
#include "wss/util/rng.hpp"

#include <optional>

namespace wss {

enum class ScribbleStrategy { kRandomValid, kCenterDistmap, kRandomDistmap, kErosion };

// Per-lesion area fractions for the erosion strategy, calibrated on the
// synthetic development corpus to land at ~10% / ~14% corpus-wide lesion
// coverage.
inline constexpr double kErosionPreset10 = 0.10;
inline constexpr double kErosionPreset14 = 0.14;

struct ScribbleConfig {
    double max_radius_mm = 3.0;
    ScribbleStrategy strategy = ScribbleStrategy::kRandomValid;
    double erosion_target_fraction = kErosionPreset14;
    StructuringElement erosion_element = StructuringElement::kSquare;
    // Fraction of voxels outside the dilated gland labelled as background.
    double background_fraction = 0.02;
    uint64_t seed = 0;

    void validate() const;
};

// All strategies take the 2D slice mask of a single lesion component and
// return the scribble mask on the same slice grid. An empty input slice
// yields an empty scribble.

// Random centre inside the lesion; the radius shrinks one voxel at a time
// until the rasterized circle fits, down to the single drawn voxel.
BinaryMask scribble_random_valid(const BinaryMask& lesion_slice, const ScribbleConfig& config,
                                 Rng& rng);

// Centre at the distance-transform maximum (ties: smallest (y, x)), radius
// bounded by the distance value and 3 mm.
BinaryMask scribble_center_distmap(const BinaryMask& lesion_slice, const ScribbleConfig& config);

// Centre sampled with probability proportional to the distance map; the
// circle keeps the full 3 mm radius and may spill outside the lesion.
BinaryMask scribble_random_distmap(const BinaryMask& lesion_slice, const ScribbleConfig& config,
                                   Rng& rng);

// Iterated erosion until the area drops to the target fraction of the
// original area; the largest component is kept at every step so the
// scribble stays connected.
BinaryMask scribble_erosion(const BinaryMask& lesion_slice, const ScribbleConfig& config);

// Full-case annotation: per axial slice, one scribble per lesion component,
// one random-valid circle inside the prostate, plus a sparse background
// sample away from the gland.
AnnotationMask annotate_case(const LabelVolume& truth, const ScribbleConfig& config,
                             uint64_t case_seed);

// |annotation ∩ class| / |class| for one case; absent when the class is
// empty in the ground truth.
std::optional<double> coverage_fraction(const AnnotationMask& annotation,
                                        const LabelVolume& truth, uint8_t class_id);

// Raw counts, for corpus-level aggregation.
struct CoverageCounts {
    int64_t annotated = 0;
    int64_t total = 0;
};
CoverageCounts coverage_counts(const AnnotationMask& annotation, const LabelVolume& truth,
                               uint8_t class_id);

} // namespace wss
