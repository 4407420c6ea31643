#pragma once

#include "wss/core/ops.hpp"
#include "wss/core/volume.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wss {

inline constexpr double kDefaultIouMin = 0.1;
inline constexpr int kDefaultMinLesionVoxels = 15;
inline constexpr double kDefaultDetectionThreshold = 0.5;

// Disjoint connected predicted-lesion clusters for one case.
struct DetectionMap {
    std::string case_id;
    std::vector<LesionCluster> clusters;
};

struct MatchPair {
    int pred = -1;
    int gt = -1;
    double iou = 0.0;
};

// One-to-one matching in descending prediction-score order; every pair has
// iou >= iou_min.
struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_pred;
    std::vector<int> unmatched_gt;
};

struct CurvePoint {
    double threshold = 0.0;
    double sensitivity = 0.0;
    double fp_per_patient = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct EvalCase {
    std::string case_id;
    DetectionMap detections;
    std::vector<std::vector<int64_t>> gt_lesions;
};

// Binarize the lesion channel, cluster with full connectivity, drop
// components below min_voxels, score survivors by mean lesion probability.
DetectionMap extract_lesions(const ProbabilityVolume& prob, double threshold, int min_voxels,
                             const std::string& case_id = {});

MatchResult match_lesions(const DetectionMap& pred,
                          const std::vector<std::vector<int64_t>>& gt_lesions,
                          double iou_min = kDefaultIouMin);

// Sweep over all distinct cluster scores, descending; empty when there are
// no ground-truth lesions at all.
std::vector<CurvePoint> froc(const std::vector<EvalCase>& cases,
                             double iou_min = kDefaultIouMin);

struct SensitivityAtFp {
    double sensitivity = 0.0;
    bool dagger = false; // the curve never reaches the FP budget
};
SensitivityAtFp sensitivity_at_fp(const std::vector<CurvePoint>& curve, double fp_budget = 1.0);

// Area under the step-interpolated precision-recall curve over the pooled
// predictions of all cases.
double average_precision(const std::vector<EvalCase>& cases, double iou_min = kDefaultIouMin);

// Mann-Whitney statistic over (score, positive-label) pairs; absent when a
// class is missing.
std::optional<double> auroc(const std::vector<std::pair<double, int>>& patient_scores);

// Patient-level likelihood: maximum cluster score, 0 without predictions.
double patient_score(const DetectionMap& detections);

// 2|A∩B| / (|A|+|B|); two empty masks agree perfectly (1.0).
double dice(const BinaryMask& pred, const BinaryMask& truth);

// Per-voxel argmax over the class channels (ties: lowest class id).
LabelVolume argmax_labels(const ProbabilityVolume& prob);

// test / validation performance ratio; absent for non-positive validation.
std::optional<double> relative_change(double test_value, double val_value);

// Operating point with every cluster kept: (max sensitivity, FP/patient).
struct DetectionSummary {
    double max_sensitivity = 0.0;
    double avg_fp_per_patient = 0.0;
};
DetectionSummary detection_summary(const std::vector<EvalCase>& cases,
                                   double iou_min = kDefaultIouMin);

} // namespace wss
