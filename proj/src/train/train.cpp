#include "wss/train/train.hpp"

#include "wss/util/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wss {

void TrainConfig::validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch size must be >= 1");
    require(folds >= 2, "fold count must be >= 2");
    require(steps_per_epoch >= 0, "steps per epoch must be >= 0");
    require(val_interval >= 1, "validation interval must be >= 1");
}

FoldAssignment kfold_split(const std::vector<uint8_t>& case_positive, int k, uint64_t seed) {
    require(k >= 2, "fold count must be >= 2");
    require(static_cast<int>(case_positive.size()) >= k, "need at least k cases");
    FoldAssignment out;
    out.k = k;
    out.fold_of_case.assign(case_positive.size(), -1);

    std::vector<int> positives, negatives;
    for (size_t i = 0; i < case_positive.size(); ++i)
        (case_positive[i] ? positives : negatives).push_back(static_cast<int>(i));

    Rng rng(derive_seed(seed, "kfold", 0));
    out.stratified = static_cast<int>(positives.size()) >= k;
    if (!out.stratified) {
        // Fewer positives than folds: plain shuffled deal.
        std::vector<int> all(case_positive.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        rng.shuffle(all);
        for (size_t i = 0; i < all.size(); ++i)
            out.fold_of_case[static_cast<size_t>(all[i])] = static_cast<int>(i % k);
        return out;
    }

    rng.shuffle(positives);
    rng.shuffle(negatives);
    int cursor = 0;
    for (int idx : positives) out.fold_of_case[static_cast<size_t>(idx)] = cursor++ % k;
    for (int idx : negatives) out.fold_of_case[static_cast<size_t>(idx)] = cursor++ % k;
    return out;
}

BalancedSampler::BalancedSampler(std::vector<SampleUnit> positive,
                                 std::vector<SampleUnit> negative, uint64_t seed, bool balanced)
    : positive_(std::move(positive)), negative_(std::move(negative)),
      rng_(derive_seed(seed, "sampler", 0)) {
    require(!positive_.empty() || !negative_.empty(), "sampler needs at least one unit");
    all_ = positive_;
    all_.insert(all_.end(), negative_.begin(), negative_.end());
    uniform_fallback_ = !balanced || positive_.empty() || negative_.empty();
}

SampleUnit BalancedSampler::next() {
    if (uniform_fallback_) return all_[static_cast<size_t>(rng_.uniform_int(all_.size()))];
    const bool draw_positive = rng_.uniform() < 0.5;
    const auto& group = draw_positive ? positive_ : negative_;
    return group[static_cast<size_t>(rng_.uniform_int(group.size()))];
}

namespace {

GridSpec slice_grid(const GridSpec& g) {
    GridSpec s = g;
    s.nz = 1;
    return s;
}

AnnotationMask annotation_slice(const AnnotationMask& a, int z) {
    AnnotationMask out(slice_grid(a.grid));
    const int64_t plane = static_cast<int64_t>(a.grid.nx) * a.grid.ny;
    std::copy(a.labels.begin() + z * plane, a.labels.begin() + (z + 1) * plane,
              out.labels.begin());
    return out;
}

LabelVolume label_slice(const LabelVolume& l, int z) {
    LabelVolume out(slice_grid(l.grid));
    const int64_t plane = static_cast<int64_t>(l.grid.nx) * l.grid.ny;
    std::copy(l.labels.begin() + z * plane, l.labels.begin() + (z + 1) * plane,
              out.labels.begin());
    return out;
}

bool has_class(const std::vector<uint8_t>& labels, uint8_t cls) {
    return std::find(labels.begin(), labels.end(), cls) != labels.end();
}

struct SampleView {
    Act input;
    GridSpec grid;
    AnnotationMask annotation;
    LabelVolume truth;
};

SampleView make_sample(const TrainCase& c, const SampleUnit& unit, bool is_2d) {
    SampleView s;
    if (is_2d) {
        s.input = slice_input(c.image, unit.slice);
        s.grid = slice_grid(c.image.grid);
        s.annotation = annotation_slice(c.annotation, unit.slice);
        s.truth = label_slice(c.truth, unit.slice);
    } else {
        s.input = volume_input(c.image);
        s.grid = c.image.grid;
        s.annotation = c.annotation;
        s.truth = c.truth;
    }
    return s;
}

LossResult sample_loss(const SampleView& s, const SoftmaxField& field, LossKind kind,
                       const ConstraintConfig& constraints) {
    std::array<bool, kNumClasses> present{};
    present[kBackground] = true;
    present[kProstate] = has_class(s.annotation.labels, kProstate);
    present[kLesion] = has_class(s.annotation.labels, kLesion);
    switch (kind) {
    case LossKind::kSupervisedCeDice:
        return supervised_ce_dice(field, s.truth);
    case LossKind::kPartialCe:
        return partial_ce_with_negative(field, s.annotation, present,
                                        constraints.class_weights);
    case LossKind::kCeIt:
    case LossKind::kCeItCb:
        return combined_loss(field, s.annotation, constraints, present);
    }
    throw ValidationError("unknown loss kind");
}

std::vector<std::vector<int64_t>> gt_lesion_components(const LabelVolume& truth) {
    return connected_components(class_mask(truth, kLesion), Connectivity::kFull);
}

} // namespace

ProbabilityVolume predict_volume(const Network& net, const Parameters& params,
                                 const IntensityVolume& image) {
    const GridSpec& g = image.grid;
    ProbabilityVolume out(g, net.spec().classes);
    const int64_t plane = static_cast<int64_t>(g.nx) * g.ny;
    if (net.spec().dims == 2) {
        for (int z = 0; z < g.nz; ++z) {
            const Act scores = net.forward(params, slice_input(image, z), false, nullptr, nullptr);
            const SoftmaxField field =
                softmax_from_scores(slice_grid(g), net.spec().classes, scores.v);
            for (int c = 0; c < net.spec().classes; ++c)
                std::copy(field.probs.begin() + c * plane, field.probs.begin() + (c + 1) * plane,
                          out.probs[static_cast<size_t>(c)].begin() + z * plane);
        }
    } else {
        const Act scores = net.forward(params, volume_input(image), false, nullptr, nullptr);
        const SoftmaxField field = softmax_from_scores(g, net.spec().classes, scores.v);
        for (int c = 0; c < net.spec().classes; ++c)
            std::copy(field.probs.begin() + c * g.voxels(),
                      field.probs.begin() + (c + 1) * g.voxels(),
                      out.probs[static_cast<size_t>(c)].begin());
    }
    return out;
}

ProbabilityVolume ensemble_predict(const Network& net, const std::vector<Parameters>& members,
                                   const IntensityVolume& image) {
    require(!members.empty(), "ensemble needs at least one member");
    ProbabilityVolume sum = predict_volume(net, members[0], image);
    for (size_t m = 1; m < members.size(); ++m) {
        const ProbabilityVolume pv = predict_volume(net, members[m], image);
        for (size_t c = 0; c < sum.probs.size(); ++c)
            for (size_t i = 0; i < sum.probs[c].size(); ++i) sum.probs[c][i] += pv.probs[c][i];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (auto& ch : sum.probs)
        for (auto& v : ch) v *= inv;
    return sum;
}

EvalCase evaluate_case(const Network& net, const Parameters& params, const TrainCase& c,
                       const EvalParams& eval_params) {
    EvalCase ec;
    ec.case_id = c.id;
    const ProbabilityVolume prob = predict_volume(net, params, c.image);
    ec.detections = extract_lesions(prob, eval_params.detection_threshold,
                                    eval_params.min_lesion_voxels, c.id);
    ec.gt_lesions = gt_lesion_components(c.truth);
    return ec;
}

namespace {

double validation_ap(const Network& net, const Parameters& params,
                     const std::vector<TrainCase>& val_cases, const EvalParams& eval_params) {
    if (val_cases.empty()) return 0.0;
    std::vector<EvalCase> cases;
    cases.reserve(val_cases.size());
    int64_t total_gt = 0;
    for (const TrainCase& c : val_cases) {
        cases.push_back(evaluate_case(net, params, c, eval_params));
        total_gt += static_cast<int64_t>(cases.back().gt_lesions.size());
    }
    if (total_gt == 0) return 0.0;
    return average_precision(cases, eval_params.iou_min);
}

} // namespace

TrainResult train_model(const std::vector<TrainCase>& train_cases,
                        const std::vector<TrainCase>& val_cases, const TrainConfig& config,
                        const NetSpec& spec, const ConstraintConfig& constraints,
                        const AdamConfig& adam, const EvalParams& eval_params) {
    config.validate();
    spec.validate();
    require(!train_cases.empty(), "no training cases");
    for (const TrainCase& c : train_cases)
        require(c.image.grid == train_cases[0].image.grid, "inconsistent training grids");

    const bool is_2d = spec.dims == 2;
    std::vector<SampleUnit> positive, negative;
    for (size_t ci = 0; ci < train_cases.size(); ++ci) {
        const TrainCase& c = train_cases[ci];
        if (is_2d) {
            const int64_t plane = static_cast<int64_t>(c.image.grid.nx) * c.image.grid.ny;
            for (int z = 0; z < c.image.grid.nz; ++z) {
                bool pos = false;
                const bool weak = config.loss != LossKind::kSupervisedCeDice;
                for (int64_t p = z * plane; p < (z + 1) * plane && !pos; ++p)
                    pos = weak ? c.annotation.labels[static_cast<size_t>(p)] == kLesion
                               : c.truth.labels[static_cast<size_t>(p)] == kLesion;
                (pos ? positive : negative).push_back({static_cast<int>(ci), z});
            }
        } else {
            (c.positive ? positive : negative).push_back({static_cast<int>(ci), -1});
        }
    }
    const int64_t n_units = static_cast<int64_t>(positive.size() + negative.size());
    const int steps =
        config.steps_per_epoch > 0
            ? config.steps_per_epoch
            : static_cast<int>((n_units + config.batch_size - 1) / config.batch_size);

    BalancedSampler sampler(std::move(positive), std::move(negative),
                            derive_seed(config.seed, "batches", 0), config.balanced_sampler);
    Rng dropout_rng(derive_seed(config.seed, "dropout", 0));

    const Network net(spec);
    Parameters params = net.init_params(derive_seed(config.seed, "init", 0));
    AdamState state = AdamState::zeros_like(params);

    TrainResult result;
    result.best_params = params;
    result.best_val_ap = -1.0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int step = 0; step < steps; ++step) {
            Parameters grads = net.zero_grads();
            double batch_loss = 0.0;
            std::vector<SampleUnit> batch(static_cast<size_t>(config.batch_size));
            for (auto& u : batch) u = sampler.next();
            for (const SampleUnit& unit : batch) {
                const SampleView s =
                    make_sample(train_cases[static_cast<size_t>(unit.case_index)], unit, is_2d);
                Network::Cache cache;
                const Act scores = net.forward(params, s.input, true, &dropout_rng, &cache);
                const SoftmaxField field = softmax_from_scores(s.grid, spec.classes, scores.v);
                const LossResult loss = sample_loss(s, field, config.loss, constraints);
                batch_loss += loss.value;
                Act grad_scores(scores.c, scores.z, scores.y, scores.x);
                grad_scores.v = loss.grad_scores;
                const Parameters g = net.backward(params, cache, grad_scores);
                for (size_t t = 0; t < grads.size(); ++t)
                    for (size_t i = 0; i < grads[t].data.size(); ++i)
                        grads[t].data[i] += g[t].data[i];
            }
            const double inv_b = 1.0 / static_cast<double>(config.batch_size);
            batch_loss *= inv_b;
            if (!std::isfinite(batch_loss)) {
                std::ostringstream dump;
                dump << "epoch " << epoch << " step " << step << " loss " << batch_loss << '\n';
                for (const SampleUnit& unit : batch)
                    dump << "  case "
                         << train_cases[static_cast<size_t>(unit.case_index)].id << " slice "
                         << unit.slice << '\n';
                throw TrainingDiverged("non-finite training loss", dump.str());
            }
            for (auto& t : grads)
                for (auto& v : t.data) v *= inv_b;
            adam_step(state, params, grads, adam);
            loss_sum += batch_loss;
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(steps);
        if (epoch % config.val_interval == 0 || epoch == config.epochs) {
            log.val_ap = validation_ap(net, params, val_cases, eval_params);
            log.validated = true;
            if (log.val_ap > result.best_val_ap) {
                result.best_val_ap = log.val_ap;
                result.best_epoch = epoch;
                result.best_params = params;
            }
        }
        result.log.push_back(log);
    }
    if (result.best_epoch == 0) {
        result.best_epoch = config.epochs;
        result.best_params = params;
        result.best_val_ap = 0.0;
    }
    return result;
}

} // namespace wss
