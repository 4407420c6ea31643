#pragma once

#include "wss/core/volume.hpp"
#include "wss/util/rng.hpp"

#include <array>

namespace wss {

// Test-time perturbation emulating a different scanner / protocol.
struct DomainShift {
    double gamma = 1.0;                 // per-channel intensity remap x -> x^gamma
    double extra_noise_sigma = 0.0;
    double lesion_contrast_scale = 1.0; // 1 = unchanged, <1 = less conspicuous

    bool identity() const {
        return gamma == 1.0 && extra_noise_sigma == 0.0 && lesion_contrast_scale == 1.0;
    }
};

struct PhantomConfig {
    GridSpec grid;
    int case_count = 100;
    double positive_fraction = 0.17;
    int min_lesions = 1;
    int max_lesions = 3;
    double lesion_volume_min = 30;    // voxels
    double lesion_volume_max = 4000;  // voxels
    double prostate_volume_min = 10000;
    double prostate_volume_max = 40000;
    // Mean intensity per channel and class (background, prostate, lesion).
    // The two channels carry opposite lesion contrast signs.
    std::array<std::array<double, kNumClasses>, 2> class_means{
        {{0.30, 0.55, 0.70}, {0.60, 0.65, 0.20}}};
    double noise_sigma = 0.05;
    DomainShift shift;
    uint64_t seed = 0;

    void validate() const;
};

struct PhantomCase {
    IntensityVolume image; // channels {"t2w", "adc"}, normalized to [0,1]
    LabelVolume labels;
    int lesion_count = 0;
    bool positive = false;
};

// Deterministic per (config.seed, case_index): ellipsoidal gland with
// noise-warped lesion blobs whose voxel counts stay inside the configured
// volume range.
PhantomCase generate_case(const PhantomConfig& config, int case_index);

// Gamma remap, additive noise, lesion contrast rescale, then renormalize.
// `labels` is required when the contrast scale differs from 1. Identity
// knobs return the input untouched.
IntensityVolume apply_domain_shift(const IntensityVolume& volume, const DomainShift& shift,
                                   const LabelVolume* labels, Rng& rng);

} // namespace wss
