#include "wss/losses/losses.hpp"

#include "wss/util/error.hpp"
#include "wss/util/parallel.hpp"

#include <cmath>

namespace wss {

void SizeBounds::validate() const {
    require(lower >= 0.0 && lower <= upper, "size bounds need 0 <= a <= b");
}

bool ConstraintConfig::any_constraint() const {
    for (const auto& c : constraints)
        if (c.mode != ConstraintMode::kNone) return true;
    return false;
}

void ConstraintConfig::validate() const {
    if (any_constraint())
        require(lambda > 0.0, "lambda must be > 0 when a class constraint is active");
    for (const auto& c : constraints)
        if (c.mode == ConstraintMode::kCommonBounds) c.bounds.validate();
    for (double w : class_weights) require(w > 0.0, "class weights must be positive");
}

void SoftmaxField::validate() const {
    grid.validate();
    const int64_t vox = grid.voxels();
    require(probs.size() == static_cast<size_t>(num_classes) * static_cast<size_t>(vox),
            "softmax field size mismatch");
    for (int64_t p = 0; p < vox; ++p) {
        double sum = 0.0;
        for (int c = 0; c < num_classes; ++c) {
            const double v = at(c, p);
            require(v >= 0.0, "negative probability");
            sum += v;
        }
        require(std::abs(sum - 1.0) <= 1e-6, "softmax rows must sum to 1");
    }
}

SoftmaxField softmax_from_scores(const GridSpec& grid, int classes,
                                 const std::vector<double>& scores) {
    const int64_t vox = grid.voxels();
    require(scores.size() == static_cast<size_t>(classes) * static_cast<size_t>(vox),
            "score field size mismatch");
    SoftmaxField out(grid, classes);
#pragma omp parallel for schedule(static) if (vox > 4096)
    for (int64_t p = 0; p < vox; ++p) {
        double mx = scores[static_cast<size_t>(p)];
        for (int c = 1; c < classes; ++c)
            mx = std::max(mx, scores[static_cast<size_t>(c) * vox + p]);
        double denom = 0.0;
        for (int c = 0; c < classes; ++c)
            denom += std::exp(scores[static_cast<size_t>(c) * vox + p] - mx);
        for (int c = 0; c < classes; ++c)
            out.probs[static_cast<size_t>(c) * vox + p] =
                std::exp(scores[static_cast<size_t>(c) * vox + p] - mx) / denom;
    }
    return out;
}

double predicted_volume(const SoftmaxField& field, int class_id) {
    require(class_id >= 0 && class_id < field.num_classes, "class id out of range");
    const int64_t vox = field.grid.voxels();
    const double* base = field.probs.data() + static_cast<size_t>(class_id) * vox;
    return chunked_sum(vox, [&](int64_t p) { return base[p]; });
}

Penalty constraint_penalty(double v, const SizeBounds& bounds) {
    bounds.validate();
    Penalty out;
    if (v < bounds.lower) {
        out.value = (v - bounds.lower) * (v - bounds.lower);
        out.derivative = 2.0 * (v - bounds.lower);
    } else if (v > bounds.upper) {
        out.value = (v - bounds.upper) * (v - bounds.upper);
        out.derivative = 2.0 * (v - bounds.upper);
    }
    return out;
}

SizeBounds image_tag_bounds(bool present, int64_t omega) {
    require(omega >= 1, "image domain must be non-empty");
    if (present) return SizeBounds{1.0, static_cast<double>(omega)};
    return SizeBounds{0.0, 0.0};
}

namespace {

// Accumulates -w*ln(max(S,eps)) over annotated voxels and the matching
// softmax-chained gradient. Shared by the partial-CE variants.
void add_partial_ce(const SoftmaxField& field, const AnnotationMask& annotation,
                    const std::array<double, kNumClasses>& weights, LossResult& result) {
    const int64_t vox = field.grid.voxels();
    const int C = field.num_classes;
    const int64_t n_annot = annotation.annotated_count();
    if (n_annot == 0) return;
    const double inv_n = 1.0 / static_cast<double>(n_annot);

    result.value += chunked_sum(vox, [&](int64_t p) -> double {
        const uint8_t y = annotation.labels[static_cast<size_t>(p)];
        if (y == kUnlabeled) return 0.0;
        const double s = field.at(y, p);
        return -weights[y] * std::log(std::max(s, kProbEpsilon)) * inv_n;
    });

    double* grad = result.grad_scores.data();
#pragma omp parallel for schedule(static) if (vox > 4096)
    for (int64_t p = 0; p < vox; ++p) {
        const uint8_t y = annotation.labels[static_cast<size_t>(p)];
        if (y == kUnlabeled) continue;
        const double sy = field.at(y, p);
        // d/dS of ln(max(S,eps)) vanishes in the clamped region.
        const double dlds = sy > kProbEpsilon ? -weights[y] / sy : 0.0;
        for (int k = 0; k < C; ++k) {
            const double sk = field.at(k, p);
            const double dsdz = sy * ((k == y ? 1.0 : 0.0) - sk);
            grad[static_cast<size_t>(k) * vox + p] += inv_n * dlds * dsdz;
        }
    }
}

void check_grid(const SoftmaxField& field, const AnnotationMask& annotation) {
    require(annotation.grid == field.grid, "annotation grid does not match field grid");
}

} // namespace

LossResult partial_cross_entropy(const SoftmaxField& field, const AnnotationMask& annotation,
                                 const std::array<double, kNumClasses>& class_weights) {
    check_grid(field, annotation);
    LossResult result;
    result.grad_scores.assign(field.probs.size(), 0.0);
    add_partial_ce(field, annotation, class_weights, result);
    return result;
}

LossResult combined_loss(const SoftmaxField& field, const AnnotationMask& annotation,
                         const ConstraintConfig& config,
                         const std::array<bool, kNumClasses>& present) {
    check_grid(field, annotation);
    for (double w : config.class_weights) require(w > 0.0, "class weights must be positive");

    LossResult result;
    result.grad_scores.assign(field.probs.size(), 0.0);
    add_partial_ce(field, annotation, config.class_weights, result);

    const int64_t vox = field.grid.voxels();
    const int C = field.num_classes;

    // lambda * C'(V_c) per constrained class; zero elsewhere.
    std::array<double, kNumClasses> coef{};
    bool any = false;
    for (int c = 1; c < C; ++c) {
        const ClassConstraint& cc = config.constraints[static_cast<size_t>(c)];
        if (cc.mode == ConstraintMode::kNone) continue;
        SizeBounds bounds;
        if (cc.mode == ConstraintMode::kImageTag) {
            bounds = image_tag_bounds(present[static_cast<size_t>(c)], vox);
        } else {
            if (cc.bounds.upper < cc.bounds.lower || cc.bounds.lower < 0.0)
                throw ConfigError("unresolved common bounds for constrained class " +
                                  std::to_string(c));
            bounds = present[static_cast<size_t>(c)] ? cc.bounds : SizeBounds{0.0, 0.0};
        }
        const double v = predicted_volume(field, c);
        const Penalty pen = constraint_penalty(v, bounds);
        result.value += config.lambda * pen.value;
        coef[static_cast<size_t>(c)] = config.lambda * pen.derivative;
        any = any || coef[static_cast<size_t>(c)] != 0.0;
    }

    if (any) {
        double* grad = result.grad_scores.data();
#pragma omp parallel for schedule(static) if (vox > 4096)
        for (int64_t p = 0; p < vox; ++p) {
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += coef[static_cast<size_t>(c)] * field.at(c, p);
            for (int k = 0; k < C; ++k) {
                const double sk = field.at(k, p);
                grad[static_cast<size_t>(k) * vox + p] +=
                    sk * (coef[static_cast<size_t>(k)] - dot);
            }
        }
    }
    return result;
}

LossResult partial_ce_with_negative(const SoftmaxField& field, const AnnotationMask& annotation,
                                    const std::array<bool, kNumClasses>& present,
                                    const std::array<double, kNumClasses>& class_weights) {
    check_grid(field, annotation);
    LossResult result;
    result.grad_scores.assign(field.probs.size(), 0.0);
    add_partial_ce(field, annotation, class_weights, result);

    const int64_t vox = field.grid.voxels();
    const int C = field.num_classes;
    const double inv_n = 1.0 / static_cast<double>(vox);
    for (int c = 1; c < C; ++c) {
        if (present[static_cast<size_t>(c)]) continue;
        result.value += chunked_sum(vox, [&](int64_t p) {
            return -std::log(std::max(1.0 - field.at(c, p), kProbEpsilon)) * inv_n;
        });
        double* grad = result.grad_scores.data();
#pragma omp parallel for schedule(static) if (vox > 4096)
        for (int64_t p = 0; p < vox; ++p) {
            const double sc = field.at(c, p);
            const double one_minus = 1.0 - sc;
            const double dlds = one_minus > kProbEpsilon ? inv_n / one_minus : 0.0;
            for (int k = 0; k < C; ++k) {
                const double sk = field.at(k, p);
                grad[static_cast<size_t>(k) * vox + p] +=
                    dlds * sc * ((k == c ? 1.0 : 0.0) - sk);
            }
        }
    }
    return result;
}

LossResult supervised_ce_dice(const SoftmaxField& field, const LabelVolume& truth) {
    require(truth.grid == field.grid, "label grid does not match field grid");
    const int64_t vox = field.grid.voxels();
    const int C = field.num_classes;

    LossResult result;
    result.grad_scores.assign(field.probs.size(), 0.0);

    // Cross-entropy over every voxel, uniform class weights.
    const double inv_n = 1.0 / static_cast<double>(vox);
    result.value += chunked_sum(vox, [&](int64_t p) {
        const uint8_t y = truth.labels[static_cast<size_t>(p)];
        return -std::log(std::max(field.at(y, p), kProbEpsilon)) * inv_n;
    });
    double* grad = result.grad_scores.data();
#pragma omp parallel for schedule(static) if (vox > 4096)
    for (int64_t p = 0; p < vox; ++p) {
        const uint8_t y = truth.labels[static_cast<size_t>(p)];
        const double sy = field.at(y, p);
        const double dlds = sy > kProbEpsilon ? -1.0 / sy : 0.0;
        for (int k = 0; k < C; ++k) {
            const double sk = field.at(k, p);
            grad[static_cast<size_t>(k) * vox + p] +=
                inv_n * dlds * sy * ((k == y ? 1.0 : 0.0) - sk);
        }
    }

    // Generalized Dice: weights 1/(sum g)^2, classes absent from the truth
    // are skipped.
    std::array<double, kNumClasses> w{}, inter{}, uni{};
    std::array<bool, kNumClasses> active{};
    double numerator = 0.0, denominator = 0.0;
    for (int c = 0; c < C; ++c) {
        double gsum = 0.0, isum = 0.0, ssum = 0.0;
        for (int64_t p = 0; p < vox; ++p) {
            const bool gt = truth.labels[static_cast<size_t>(p)] == c;
            const double s = field.at(c, p);
            gsum += gt ? 1.0 : 0.0;
            isum += gt ? s : 0.0;
            ssum += s;
        }
        if (gsum == 0.0) continue;
        active[static_cast<size_t>(c)] = true;
        w[static_cast<size_t>(c)] = 1.0 / (gsum * gsum);
        inter[static_cast<size_t>(c)] = isum;
        uni[static_cast<size_t>(c)] = ssum + gsum;
        numerator += w[static_cast<size_t>(c)] * isum;
        denominator += w[static_cast<size_t>(c)] * uni[static_cast<size_t>(c)];
    }
    if (denominator > 0.0) {
        result.value += 1.0 - 2.0 * numerator / denominator;
        // dL/dS_pc = -2 (w_c g_pc D - N w_c) / D^2 for active classes, then
        // chained through softmax.
        const double d2 = denominator * denominator;
#pragma omp parallel for schedule(static) if (vox > 4096)
        for (int64_t p = 0; p < vox; ++p) {
            std::array<double, kNumClasses> dlds{};
            for (int c = 0; c < C; ++c) {
                if (!active[static_cast<size_t>(c)]) continue;
                const double g = truth.labels[static_cast<size_t>(p)] == c ? 1.0 : 0.0;
                dlds[static_cast<size_t>(c)] = -2.0 * w[static_cast<size_t>(c)] *
                                               (g * denominator - numerator) / d2;
            }
            double dot = 0.0;
            for (int c = 0; c < C; ++c) dot += dlds[static_cast<size_t>(c)] * field.at(c, p);
            for (int k = 0; k < C; ++k) {
                const double sk = field.at(k, p);
                grad[static_cast<size_t>(k) * vox + p] +=
                    sk * (dlds[static_cast<size_t>(k)] - dot);
            }
        }
    }
    return result;
}

} // namespace wss
