#include <doctest.h>

#include "wss/losses/losses.hpp"
#include "wss/util/error.hpp"
#include "wss/util/rng.hpp"

#include <cmath>
#include <functional>

using namespace wss;

namespace {

SoftmaxField uniform_field(const GridSpec& g, int classes) {
    SoftmaxField f(g, classes);
    std::fill(f.probs.begin(), f.probs.end(), 1.0 / classes);
    return f;
}

std::vector<double> random_scores(const GridSpec& g, int classes, Rng& rng, double scale = 2.0) {
    std::vector<double> z(static_cast<size_t>(classes) * static_cast<size_t>(g.voxels()));
    for (auto& v : z) v = scale * (2.0 * rng.uniform() - 1.0);
    return z;
}

AnnotationMask random_annotation(const GridSpec& g, double density, Rng& rng) {
    AnnotationMask a(g);
    for (auto& l : a.labels)
        if (rng.uniform() < density) l = static_cast<uint8_t>(rng.uniform_int(kNumClasses));
    return a;
}

// Max relative error between analytic and central-difference gradients;
// components below the 1e-4 floor are compared absolutely against it.
double fd_max_rel_error(const GridSpec& g, int classes, const std::vector<double>& scores,
                        const std::function<LossResult(const SoftmaxField&)>& loss) {
    const double h = 1e-5;
    const SoftmaxField base = softmax_from_scores(g, classes, scores);
    const LossResult analytic = loss(base);
    double worst = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        std::vector<double> zp = scores, zm = scores;
        zp[i] += h;
        zm[i] -= h;
        const double fp = loss(softmax_from_scores(g, classes, zp)).value;
        const double fm = loss(softmax_from_scores(g, classes, zm)).value;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = analytic.grad_scores[i];
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-4});
        worst = std::max(worst, std::abs(fd - an) / denom);
    }
    return worst;
}

} // namespace

TEST_CASE("predicted_volume examples") {
    GridSpec g{10, 10, 3, 1, 1, 1}; // 300 voxels
    const SoftmaxField uni = uniform_field(g, 3);
    for (int c = 0; c < 3; ++c)
        CHECK(predicted_volume(uni, c) == doctest::Approx(100.0).epsilon(1e-12));

    SoftmaxField onehot(g, 3);
    for (int64_t p = 0; p < g.voxels(); ++p)
        onehot.probs[static_cast<size_t>((p < 42 ? kLesion : kBackground) * g.voxels() + p)] = 1.0;
    CHECK(predicted_volume(onehot, kLesion) == 42.0);

    Rng rng(3);
    SoftmaxField f(g, 3);
    for (int64_t p = 0; p < g.voxels(); ++p) {
        double sum = 0.0;
        double v[3];
        for (int c = 0; c < 3; ++c) sum += v[c] = rng.uniform() + 1e-3;
        for (int c = 0; c < 3; ++c)
            f.probs[static_cast<size_t>(c * g.voxels() + p)] = v[c] / sum;
    }
    for (int c = 0; c < 3; ++c) {
        double naive = 0.0;
        for (int64_t p = 0; p < g.voxels(); ++p) naive += f.at(c, p);
        CHECK(std::abs(predicted_volume(f, c) - naive) < 1e-9);
    }
}

TEST_CASE("constraint_penalty matches the piecewise definition") {
    CHECK(constraint_penalty(0.0, {1.0, 9216.0}).value == 1.0);
    CHECK(constraint_penalty(50.0, {1.0, 100.0}).value == 0.0);
    CHECK(constraint_penalty(50.0, {1.0, 100.0}).derivative == 0.0);
    const Penalty over = constraint_penalty(120.0, {1.0, 100.0});
    CHECK(over.value == 400.0);
    CHECK(over.derivative == 40.0);
}

TEST_CASE("constraint_penalty is continuous at the bounds") {
    const SizeBounds bounds{10.0, 200.0};
    for (double v : {10.0, 200.0}) {
        CHECK(constraint_penalty(v, bounds).value == 0.0);
        CHECK(constraint_penalty(v - 1e-9, bounds).value == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(constraint_penalty(v + 1e-9, bounds).value == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("image_tag_bounds") {
    const SizeBounds present = image_tag_bounds(true, 9216);
    CHECK(present.lower == 1.0);
    CHECK(present.upper == 9216.0);
    const SizeBounds absent = image_tag_bounds(false, 9216);
    CHECK(absent.lower == 0.0);
    CHECK(absent.upper == 0.0);
    const SizeBounds tiny = image_tag_bounds(true, 1);
    CHECK(tiny.lower == 1.0);
    CHECK(tiny.upper == 1.0);
}

TEST_CASE("image tag is inactive almost everywhere") {
    // Any volume between 1 and |Omega| escapes the penalty entirely, which
    // is what makes image tags strictly weaker than informative bounds.
    const int64_t omega = 500;
    const SizeBounds it = image_tag_bounds(true, omega);
    for (double v : {1.0, 2.5, 100.0, 499.0, 500.0})
        CHECK(constraint_penalty(v, it).value == 0.0);
    const SizeBounds cb{10.0, 100.0};
    CHECK(constraint_penalty(2.5, cb).value > 0.0);
    CHECK(constraint_penalty(499.0, cb).value > 0.0);
}

TEST_CASE("partial_cross_entropy examples") {
    GridSpec g{4, 1, 1, 1, 1, 1};
    const std::array<double, kNumClasses> w{1.0, 1.0, 1.0};

    SoftmaxField perfect(g, 3);
    AnnotationMask ann(g);
    for (int64_t p = 0; p < 4; ++p) {
        perfect.probs[static_cast<size_t>(kProstate * 4 + p)] = 1.0;
        ann.labels[static_cast<size_t>(p)] = kProstate;
    }
    CHECK(partial_cross_entropy(perfect, ann, w).value == 0.0);

    SoftmaxField half(g, 3);
    for (int64_t p = 0; p < 4; ++p) {
        half.probs[static_cast<size_t>(kBackground * 4 + p)] = 0.5;
        half.probs[static_cast<size_t>(kProstate * 4 + p)] = 0.5;
    }
    AnnotationMask one(g);
    one.labels[1] = kProstate;
    CHECK(partial_cross_entropy(half, one, w).value ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    AnnotationMask empty(g);
    const LossResult r = partial_cross_entropy(half, empty, w);
    CHECK(r.value == 0.0);
    for (double gv : r.grad_scores) CHECK(gv == 0.0);
}

TEST_CASE("combined_loss with lambda 0 equals partial cross-entropy bitwise") {
    Rng rng(11);
    GridSpec g{6, 5, 1, 1, 1, 1};
    const auto scores = random_scores(g, 3, rng);
    const SoftmaxField f = softmax_from_scores(g, 3, scores);
    const AnnotationMask ann = random_annotation(g, 0.4, rng);

    ConstraintConfig cfg;
    cfg.lambda = 0.0;
    cfg.constraints[kProstate] = {ConstraintMode::kCommonBounds, {5.0, 10.0}};
    cfg.constraints[kLesion] = {ConstraintMode::kImageTag, {}};
    const LossResult combined = combined_loss(f, ann, cfg, {true, true, true});
    const LossResult partial = partial_cross_entropy(f, ann, cfg.class_weights);
    CHECK(combined.value == partial.value);
    CHECK(combined.grad_scores == partial.grad_scores);
}

TEST_CASE("combined_loss equals partial CE when volumes sit inside the bounds") {
    Rng rng(13);
    GridSpec g{5, 5, 1, 1, 1, 1};
    const auto scores = random_scores(g, 3, rng);
    const SoftmaxField f = softmax_from_scores(g, 3, scores);
    const AnnotationMask ann = random_annotation(g, 0.3, rng);

    ConstraintConfig cfg;
    cfg.lambda = 0.1;
    cfg.constraints[kProstate] = {
        ConstraintMode::kCommonBounds, {0.0, static_cast<double>(g.voxels())}};
    cfg.constraints[kLesion] = {
        ConstraintMode::kCommonBounds, {0.0, static_cast<double>(g.voxels())}};
    const LossResult combined = combined_loss(f, ann, cfg, {true, true, true});
    const LossResult partial = partial_cross_entropy(f, ann, cfg.class_weights);
    CHECK(combined.value == partial.value);
    CHECK(combined.grad_scores == partial.grad_scores);
}

TEST_CASE("combined_loss recomposes from component pieces") {
    Rng rng(17);
    GridSpec g{8, 8, 1, 1, 1, 1};
    const auto scores = random_scores(g, 3, rng);
    const SoftmaxField f = softmax_from_scores(g, 3, scores);
    const AnnotationMask ann = random_annotation(g, 0.35, rng);

    ConstraintConfig cfg;
    cfg.lambda = 1e-3;
    cfg.class_weights = {1.0, 0.14, 0.22};
    cfg.constraints[kProstate] = {ConstraintMode::kCommonBounds, {30.0, 40.0}};
    cfg.constraints[kLesion] = {ConstraintMode::kCommonBounds, {1.0, 4.0}};
    const std::array<bool, kNumClasses> present{true, true, true};

    const double h = partial_cross_entropy(f, ann, cfg.class_weights).value;
    const double pen_p =
        constraint_penalty(predicted_volume(f, kProstate), cfg.constraints[kProstate].bounds)
            .value;
    const double pen_l =
        constraint_penalty(predicted_volume(f, kLesion), cfg.constraints[kLesion].bounds).value;
    const double expected = h + cfg.lambda * (pen_p + pen_l);
    CHECK(combined_loss(f, ann, cfg, present).value ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("combined_loss is invariant under voxel permutation") {
    Rng rng(19);
    GridSpec g{6, 4, 1, 1, 1, 1};
    const int64_t vox = g.voxels();
    const auto scores = random_scores(g, 3, rng);
    const AnnotationMask ann = random_annotation(g, 0.5, rng);

    std::vector<int64_t> perm(static_cast<size_t>(vox));
    for (int64_t i = 0; i < vox; ++i) perm[static_cast<size_t>(i)] = i;
    rng.shuffle(perm);
    std::vector<double> scores_p(scores.size());
    AnnotationMask ann_p(g);
    for (int64_t p = 0; p < vox; ++p) {
        const int64_t q = perm[static_cast<size_t>(p)];
        for (int c = 0; c < 3; ++c)
            scores_p[static_cast<size_t>(c * vox + q)] = scores[static_cast<size_t>(c * vox + p)];
        ann_p.labels[static_cast<size_t>(q)] = ann.labels[static_cast<size_t>(p)];
    }

    ConstraintConfig cfg;
    cfg.lambda = 1e-2;
    cfg.constraints[kProstate] = {ConstraintMode::kCommonBounds, {3.0, 5.0}};
    cfg.constraints[kLesion] = {ConstraintMode::kImageTag, {}};
    const std::array<bool, kNumClasses> present{true, true, false};
    const double a = combined_loss(softmax_from_scores(g, 3, scores), ann, cfg, present).value;
    const double b =
        combined_loss(softmax_from_scores(g, 3, scores_p), ann_p, cfg, present).value;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("combined_loss rejects unresolved common bounds") {
    GridSpec g{4, 4, 1, 1, 1, 1};
    const SoftmaxField f = uniform_field(g, 3);
    AnnotationMask ann(g);
    ConstraintConfig cfg;
    cfg.lambda = 1.0;
    cfg.constraints[kLesion].mode = ConstraintMode::kCommonBounds;
    cfg.constraints[kLesion].bounds = {5.0, 2.0}; // upper < lower
    CHECK_THROWS_AS(combined_loss(f, ann, cfg, {true, true, true}), ConfigError);
}

TEST_CASE("partial_ce_with_negative examples") {
    GridSpec g{10, 1, 1, 1, 1, 1};
    const std::array<double, kNumClasses> w{1.0, 1.0, 1.0};
    const std::array<bool, kNumClasses> all_present{true, true, true};
    const std::array<bool, kNumClasses> lesion_absent{true, true, false};

    Rng rng(23);
    const auto scores = random_scores(g, 3, rng);
    const SoftmaxField f = softmax_from_scores(g, 3, scores);
    const AnnotationMask ann = random_annotation(g, 0.5, rng);
    const LossResult with_neg = partial_ce_with_negative(f, ann, all_present, w);
    const LossResult plain = partial_cross_entropy(f, ann, w);
    CHECK(with_neg.value == plain.value);
    CHECK(with_neg.grad_scores == plain.grad_scores);

    // Lesion absent and never predicted: the negative term vanishes.
    SoftmaxField no_lesion(g, 3);
    for (int64_t p = 0; p < g.voxels(); ++p)
        no_lesion.probs[static_cast<size_t>(kBackground * g.voxels() + p)] = 1.0;
    AnnotationMask empty(g);
    CHECK(partial_ce_with_negative(no_lesion, empty, lesion_absent, w).value == 0.0);

    // Uniform field: mean over 10 voxels of -ln(2/3).
    const SoftmaxField uni = uniform_field(g, 3);
    CHECK(partial_ce_with_negative(uni, empty, lesion_absent, w).value ==
          doctest::Approx(-std::log(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("gradients match central finite differences") {
    Rng rng(29);
    GridSpec g{4, 3, 1, 1, 1, 1};

    for (int trial = 0; trial < 8; ++trial) {
        const auto scores = random_scores(g, 3, rng);
        const AnnotationMask ann = random_annotation(g, 0.4, rng);

        ConstraintConfig cfg;
        cfg.lambda = 0.05;
        cfg.class_weights = {1.0, 0.14, 0.22};
        cfg.constraints[kProstate] = {ConstraintMode::kCommonBounds, {2.0, 3.0}};
        cfg.constraints[kLesion] = {ConstraintMode::kImageTag, {}};
        const std::array<bool, kNumClasses> present{true, true, trial % 2 == 0};

        const double err = fd_max_rel_error(g, 3, scores, [&](const SoftmaxField& f) {
            return combined_loss(f, ann, cfg, present);
        });
        CHECK(err < 1e-4);

        const double err_neg = fd_max_rel_error(g, 3, scores, [&](const SoftmaxField& f) {
            return partial_ce_with_negative(f, ann, present, cfg.class_weights);
        });
        CHECK(err_neg < 1e-4);
    }
}

TEST_CASE("gradient stays correct approaching the penalty kinks") {
    Rng rng(31);
    GridSpec g{4, 3, 1, 1, 1, 1};
    const auto scores = random_scores(g, 3, rng);
    const SoftmaxField f = softmax_from_scores(g, 3, scores);
    const AnnotationMask ann = random_annotation(g, 0.4, rng);
    const double v = predicted_volume(f, kLesion);

    // Both sides of v = a and v = b, offset well beyond the FD step.
    const double lo = std::max(0.0, v - 10.0);
    const SizeBounds cases[] = {
        {v - 0.01, v + 10.0}, // just inside the lower bound
        {v + 0.01, v + 10.0}, // just below a: lower branch active
        {lo, v + 0.01},       // just inside the upper bound
        {lo, v - 0.01},       // just above b: upper branch active
    };
    for (const SizeBounds& bounds : cases) {
        ConstraintConfig cfg;
        cfg.lambda = 0.1;
        cfg.constraints[kLesion] = {ConstraintMode::kCommonBounds, bounds};
        const double err = fd_max_rel_error(g, 3, scores, [&](const SoftmaxField& field) {
            return combined_loss(field, ann, cfg, {true, true, true});
        });
        CHECK(err < 1e-4);
    }
}

TEST_CASE("supervised loss gradient matches finite differences") {
    Rng rng(37);
    GridSpec g{4, 3, 1, 1, 1, 1};
    const auto scores = random_scores(g, 3, rng);
    LabelVolume truth(g);
    for (auto& l : truth.labels) l = static_cast<uint8_t>(rng.uniform_int(3));
    const double err = fd_max_rel_error(g, 3, scores, [&](const SoftmaxField& f) {
        return supervised_ce_dice(f, truth);
    });
    CHECK(err < 1e-4);
}

TEST_CASE("softmax field validation") {
    GridSpec g{2, 2, 1, 1, 1, 1};
    SoftmaxField f = uniform_field(g, 3);
    CHECK_NOTHROW(f.validate());
    f.probs[0] = 0.9;
    CHECK_THROWS_AS(f.validate(), ValidationError);
}
