#include "wss/eval/metrics.hpp"

#include "wss/util/error.hpp"

#include <algorithm>
#include <cmath>

namespace wss {

DetectionMap extract_lesions(const ProbabilityVolume& prob, double threshold, int min_voxels,
                             const std::string& case_id) {
    require(threshold > 0.0 && threshold < 1.0, "detection threshold must be in (0,1)");
    require(prob.num_classes > kLesion, "probability volume lacks a lesion channel");
    const auto& lesion = prob.probs[kLesion];
    BinaryMask mask(prob.grid);
    for (size_t i = 0; i < lesion.size(); ++i) mask.values[i] = lesion[i] >= threshold ? 1 : 0;

    DetectionMap out;
    out.case_id = case_id;
    for (auto& comp : connected_components(mask, Connectivity::kFull)) {
        if (static_cast<int>(comp.size()) < min_voxels) continue;
        LesionCluster cluster;
        double sum = 0.0;
        for (int64_t v : comp) sum += lesion[static_cast<size_t>(v)];
        cluster.score = sum / static_cast<double>(comp.size());
        cluster.volume_voxels = static_cast<int64_t>(comp.size());
        cluster.voxels = std::move(comp);
        out.clusters.push_back(std::move(cluster));
    }
    return out;
}

MatchResult match_lesions(const DetectionMap& pred,
                          const std::vector<std::vector<int64_t>>& gt_lesions,
                          double iou_min) {
    MatchResult result;
    std::vector<int> order(pred.clusters.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pred.clusters[static_cast<size_t>(a)].score >
               pred.clusters[static_cast<size_t>(b)].score;
    });

    std::vector<uint8_t> gt_taken(gt_lesions.size(), 0);
    for (int pi : order) {
        double best_iou = 0.0;
        int best_gt = -1;
        for (size_t gi = 0; gi < gt_lesions.size(); ++gi) {
            if (gt_taken[gi]) continue;
            const double ov = iou(pred.clusters[static_cast<size_t>(pi)].voxels, gt_lesions[gi]);
            if (ov >= iou_min && ov > best_iou) {
                best_iou = ov;
                best_gt = static_cast<int>(gi);
            }
        }
        if (best_gt >= 0) {
            gt_taken[static_cast<size_t>(best_gt)] = 1;
            result.pairs.push_back({pi, best_gt, best_iou});
        } else {
            result.unmatched_pred.push_back(pi);
        }
    }
    for (size_t gi = 0; gi < gt_lesions.size(); ++gi)
        if (!gt_taken[gi]) result.unmatched_gt.push_back(static_cast<int>(gi));
    return result;
}

namespace {

// Matching tallies with only the clusters whose score passes the threshold.
struct Tally {
    int64_t matched_gt = 0;
    int64_t total_gt = 0;
    int64_t kept_pred = 0;
    int64_t unmatched_pred = 0;
};

Tally tally_at_threshold(const std::vector<EvalCase>& cases, double threshold, double iou_min) {
    Tally t;
    for (const EvalCase& ec : cases) {
        DetectionMap kept;
        for (const auto& c : ec.detections.clusters)
            if (c.score >= threshold) kept.clusters.push_back(c);
        const MatchResult m = match_lesions(kept, ec.gt_lesions, iou_min);
        t.matched_gt += static_cast<int64_t>(m.pairs.size());
        t.total_gt += static_cast<int64_t>(ec.gt_lesions.size());
        t.kept_pred += static_cast<int64_t>(kept.clusters.size());
        t.unmatched_pred += static_cast<int64_t>(m.unmatched_pred.size());
    }
    return t;
}

} // namespace

std::vector<CurvePoint> froc(const std::vector<EvalCase>& cases, double iou_min) {
    require(!cases.empty(), "froc needs at least one case");
    int64_t total_gt = 0;
    std::vector<double> thresholds;
    for (const EvalCase& ec : cases) {
        total_gt += static_cast<int64_t>(ec.gt_lesions.size());
        for (const auto& c : ec.detections.clusters) thresholds.push_back(c.score);
    }
    if (total_gt == 0) return {};
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    std::vector<CurvePoint> curve;
    for (double th : thresholds) {
        const Tally t = tally_at_threshold(cases, th, iou_min);
        CurvePoint pt;
        pt.threshold = th;
        pt.sensitivity = static_cast<double>(t.matched_gt) / static_cast<double>(t.total_gt);
        pt.fp_per_patient =
            static_cast<double>(t.unmatched_pred) / static_cast<double>(cases.size());
        pt.precision = t.kept_pred > 0
                           ? static_cast<double>(t.matched_gt) / static_cast<double>(t.kept_pred)
                           : 0.0;
        pt.recall = pt.sensitivity;
        curve.push_back(pt);
    }
    return curve;
}

SensitivityAtFp sensitivity_at_fp(const std::vector<CurvePoint>& curve, double fp_budget) {
    require(!curve.empty(), "sensitivity_at_fp needs a non-empty curve");
    double max_fp = 0.0, best_within = -1.0, best_overall = 0.0;
    for (const CurvePoint& pt : curve) {
        max_fp = std::max(max_fp, pt.fp_per_patient);
        best_overall = std::max(best_overall, pt.sensitivity);
        if (pt.fp_per_patient <= fp_budget) best_within = std::max(best_within, pt.sensitivity);
    }
    if (max_fp < fp_budget) return {best_overall, true};
    // No operating point within budget at all: report zero sensitivity.
    if (best_within < 0.0) return {0.0, false};
    return {best_within, false};
}

double average_precision(const std::vector<EvalCase>& cases, double iou_min) {
    int64_t total_gt = 0;
    for (const EvalCase& ec : cases) total_gt += static_cast<int64_t>(ec.gt_lesions.size());
    require(total_gt > 0, "average precision needs at least one ground-truth lesion");

    // TP/FP labels come from each case's full-pool matching.
    struct Pooled {
        double score;
        int case_index;
        int cluster_index;
        bool tp;
    };
    std::vector<Pooled> pool;
    for (size_t ci = 0; ci < cases.size(); ++ci) {
        const MatchResult m = match_lesions(cases[ci].detections, cases[ci].gt_lesions, iou_min);
        std::vector<uint8_t> is_tp(cases[ci].detections.clusters.size(), 0);
        for (const MatchPair& p : m.pairs) is_tp[static_cast<size_t>(p.pred)] = 1;
        for (size_t k = 0; k < cases[ci].detections.clusters.size(); ++k)
            pool.push_back({cases[ci].detections.clusters[k].score, static_cast<int>(ci),
                            static_cast<int>(k), is_tp[k] != 0});
    }
    if (pool.empty()) return 0.0;
    std::sort(pool.begin(), pool.end(), [](const Pooled& a, const Pooled& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.case_index != b.case_index) return a.case_index < b.case_index;
        return a.cluster_index < b.cluster_index;
    });

    double ap = 0.0, prev_recall = 0.0;
    int64_t tp = 0;
    for (size_t n = 0; n < pool.size(); ++n) {
        if (pool[n].tp) ++tp;
        const double recall = static_cast<double>(tp) / static_cast<double>(total_gt);
        const double precision = static_cast<double>(tp) / static_cast<double>(n + 1);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

std::optional<double> auroc(const std::vector<std::pair<double, int>>& patient_scores) {
    int64_t npos = 0, nneg = 0;
    for (const auto& [score, label] : patient_scores) {
        (void)score;
        label ? ++npos : ++nneg;
    }
    if (npos == 0 || nneg == 0) return std::nullopt;

    std::vector<std::pair<double, int>> sorted = patient_scores;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Walk groups of tied scores; positives in a group tie with the
    // negatives of the same group.
    double u = 0.0;
    int64_t neg_below = 0;
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        int64_t gpos = 0, gneg = 0;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) {
            sorted[j].second ? ++gpos : ++gneg;
            ++j;
        }
        u += static_cast<double>(gpos) *
             (static_cast<double>(neg_below) + 0.5 * static_cast<double>(gneg));
        neg_below += gneg;
        i = j;
    }
    return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double patient_score(const DetectionMap& detections) {
    double best = 0.0;
    for (const auto& c : detections.clusters) best = std::max(best, c.score);
    return best;
}

double dice(const BinaryMask& pred, const BinaryMask& truth) {
    require(pred.grid == truth.grid, "dice masks must share a grid");
    int64_t inter = 0, a = 0, b = 0;
    for (size_t i = 0; i < pred.values.size(); ++i) {
        const bool pa = pred.values[i] != 0;
        const bool pb = truth.values[i] != 0;
        inter += pa && pb;
        a += pa;
        b += pb;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

LabelVolume argmax_labels(const ProbabilityVolume& prob) {
    LabelVolume out(prob.grid);
    const int64_t vox = prob.grid.voxels();
    for (int64_t p = 0; p < vox; ++p) {
        int best = 0;
        for (int c = 1; c < prob.num_classes; ++c)
            if (prob.probs[static_cast<size_t>(c)][static_cast<size_t>(p)] >
                prob.probs[static_cast<size_t>(best)][static_cast<size_t>(p)])
                best = c;
        out.labels[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
    }
    return out;
}

std::optional<double> relative_change(double test_value, double val_value) {
    if (val_value <= 0.0) return std::nullopt;
    return test_value / val_value;
}

DetectionSummary detection_summary(const std::vector<EvalCase>& cases, double iou_min) {
    DetectionSummary out;
    if (cases.empty()) return out;
    const Tally t = tally_at_threshold(cases, -1.0, iou_min);
    out.avg_fp_per_patient =
        static_cast<double>(t.unmatched_pred) / static_cast<double>(cases.size());
    out.max_sensitivity =
        t.total_gt > 0 ? static_cast<double>(t.matched_gt) / static_cast<double>(t.total_gt) : 0.0;
    return out;
}

} // namespace wss
