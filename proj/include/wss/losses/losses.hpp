#pragma once

#include "wss/core/volume.hpp"

#include <array>
#include <vector>

namespace wss {

// Lower/upper bound on a class's predicted soft volume, in voxels.
struct SizeBounds {
    double lower = 0.0;
    double upper = 0.0;

    void validate() const;
};

enum class ConstraintMode { kNone, kImageTag, kCommonBounds };

struct ClassConstraint {
    ConstraintMode mode = ConstraintMode::kNone;
    SizeBounds bounds; // used by kCommonBounds only
};

struct ConstraintConfig {
    double lambda = 0.0;
    // Indexed by class id; the background entry stays kNone.
    std::array<ClassConstraint, kNumClasses> constraints{};
    std::array<double, kNumClasses> class_weights{1.0, 1.0, 1.0};

    bool any_constraint() const;
    // Strict form used when loading run configurations.
    void validate() const;
};

// Per-voxel distribution over classes, stored class-major ([c*vox + p])
// to match network activations.
struct SoftmaxField {
    GridSpec grid;
    int num_classes = kNumClasses;
    std::vector<double> probs;

    SoftmaxField() = default;
    SoftmaxField(const GridSpec& g, int classes)
        : grid(g), num_classes(classes),
          probs(static_cast<size_t>(classes) * static_cast<size_t>(g.voxels()), 0.0) {}

    double at(int class_id, int64_t voxel) const {
        return probs[static_cast<size_t>(class_id) * static_cast<size_t>(grid.voxels()) +
                     static_cast<size_t>(voxel)];
    }

    void validate() const;
};

SoftmaxField softmax_from_scores(const GridSpec& grid, int classes,
                                 const std::vector<double>& scores);

// V_c: sum of the class-c probability over the whole domain.
double predicted_volume(const SoftmaxField& field, int class_id);

// Quadratic penalty outside [a, b] and its derivative in V.
struct Penalty {
    double value = 0.0;
    double derivative = 0.0;
};
Penalty constraint_penalty(double v, const SizeBounds& bounds);

// Presence prior: (1, |omega|) when the class is present, (0, 0) otherwise.
SizeBounds image_tag_bounds(bool present, int64_t omega);

// Loss value plus gradient w.r.t. pre-softmax scores (same layout as the
// field's probs).
struct LossResult {
    double value = 0.0;
    std::vector<double> grad_scores;
};

// Mean over annotated voxels of -w_y * ln S_y, probabilities clamped at
// kProbEpsilon inside the log.
inline constexpr double kProbEpsilon = 1e-7;
LossResult partial_cross_entropy(const SoftmaxField& field, const AnnotationMask& annotation,
                                 const std::array<double, kNumClasses>& class_weights);

// Partial cross-entropy plus lambda * sum of size penalties over the
// constrained classes. Image-tag bounds are derived from `present`;
// common bounds fall back to (0, 0) for absent classes.
LossResult combined_loss(const SoftmaxField& field, const AnnotationMask& annotation,
                         const ConstraintConfig& config,
                         const std::array<bool, kNumClasses>& present);

// Partial cross-entropy plus, per absent class, the mean over all voxels
// of -ln(1 - S_c).
LossResult partial_ce_with_negative(const SoftmaxField& field, const AnnotationMask& annotation,
                                    const std::array<bool, kNumClasses>& present,
                                    const std::array<double, kNumClasses>& class_weights);

// Fully supervised objective: mean cross-entropy over all voxels plus
// generalized Dice loss (inverse squared class-volume weighting), 1:1.
LossResult supervised_ce_dice(const SoftmaxField& field, const LabelVolume& truth);

} // namespace wss
