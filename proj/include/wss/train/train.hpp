#pragma once

#include "wss/core/volume.hpp"
#include "wss/eval/metrics.hpp"
#include "wss/losses/losses.hpp"
#include "wss/model/adam.hpp"
#include "wss/model/net.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace wss {

enum class LossKind { kSupervisedCeDice, kPartialCe, kCeIt, kCeItCb };

struct TrainConfig {
    int epochs = 200;
    int batch_size = 16; // slices (2D) or volumes (3D)
    uint64_t seed = 0;
    int folds = 5;
    LossKind loss = LossKind::kCeItCb;
    bool balanced_sampler = true;
    int steps_per_epoch = 0; // 0: ceil(#units / batch_size)
    int val_interval = 1;    // epochs between validation passes

    void validate() const;
};

struct EvalParams {
    double detection_threshold = kDefaultDetectionThreshold;
    int min_lesion_voxels = kDefaultMinLesionVoxels;
    double iou_min = kDefaultIouMin;
};

// Deterministic stratified split by patient-level positivity; falls back to
// an unstratified split (with a warning flag) when positives are scarcer
// than folds.
struct FoldAssignment {
    int k = 0;
    std::vector<int> fold_of_case;
    bool stratified = true;
};
FoldAssignment kfold_split(const std::vector<uint8_t>& case_positive, int k, uint64_t seed);

// One draw = one training unit: a (case, slice) pair in 2D, a volume in 3D
// (slice = -1).
struct SampleUnit {
    int case_index = 0;
    int slice = -1;
};

// Lesion-positive and lesion-negative units are drawn with probability 1/2
// each; an empty group degrades to uniform sampling.
class BalancedSampler {
public:
    BalancedSampler(std::vector<SampleUnit> positive, std::vector<SampleUnit> negative,
                    uint64_t seed, bool balanced);

    SampleUnit next();
    bool uniform_fallback() const { return uniform_fallback_; }

private:
    std::vector<SampleUnit> positive_;
    std::vector<SampleUnit> negative_;
    std::vector<SampleUnit> all_;
    Rng rng_;
    bool uniform_fallback_ = false;
};

struct TrainCase {
    std::string id;
    IntensityVolume image;
    LabelVolume truth;
    AnnotationMask annotation; // weak labels; unused in supervised mode
    bool positive = false;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_ap = 0.0;
    bool validated = false;
};

struct TrainResult {
    Parameters best_params;
    int best_epoch = 0;
    double best_val_ap = 0.0;
    std::vector<EpochLog> log;
};

// Thrown when a batch produces a non-finite loss; carries a dump of the
// offending batch.
struct TrainingDiverged : std::runtime_error {
    explicit TrainingDiverged(const std::string& what, std::string dump_)
        : std::runtime_error(what), dump(std::move(dump_)) {}
    std::string dump;
};

// Full training loop. The constraint config is used as resolved by the
// caller (modes decide IT vs CB); checkpointing keeps the epoch with the
// best validation AP.
TrainResult train_model(const std::vector<TrainCase>& train_cases,
                        const std::vector<TrainCase>& val_cases, const TrainConfig& config,
                        const NetSpec& spec, const ConstraintConfig& constraints,
                        const AdamConfig& adam, const EvalParams& eval_params);

// Softmax probability volume for one case; 2D nets run slice by slice and
// stack the maps.
ProbabilityVolume predict_volume(const Network& net, const Parameters& params,
                                 const IntensityVolume& image);

// Voxelwise mean of the members' probability maps.
ProbabilityVolume ensemble_predict(const Network& net, const std::vector<Parameters>& members,
                                   const IntensityVolume& image);

// Validation-style evaluation of a parameter set over a list of cases.
EvalCase evaluate_case(const Network& net, const Parameters& params, const TrainCase& c,
                       const EvalParams& eval_params);

} // namespace wss
