#include "wss/io/run_config.hpp"

#include "wss/util/error.hpp"

#include <fstream>

namespace wss {

using nlohmann::json;

namespace {

const char* loss_name(LossKind k) {
    switch (k) {
    case LossKind::kSupervisedCeDice: return "supervised_ce_dice";
    case LossKind::kPartialCe: return "partial_ce";
    case LossKind::kCeIt: return "ce_it";
    case LossKind::kCeItCb: return "ce_it_cb";
    }
    return "ce_it_cb";
}

LossKind loss_from_name(const std::string& s) {
    if (s == "supervised_ce_dice") return LossKind::kSupervisedCeDice;
    if (s == "partial_ce") return LossKind::kPartialCe;
    if (s == "ce_it") return LossKind::kCeIt;
    if (s == "ce_it_cb") return LossKind::kCeItCb;
    throw ConfigError("unknown loss kind: " + s);
}

const char* mode_name(ConstraintMode m) {
    switch (m) {
    case ConstraintMode::kNone: return "none";
    case ConstraintMode::kImageTag: return "image_tag";
    case ConstraintMode::kCommonBounds: return "common_bounds";
    }
    return "none";
}

ConstraintMode mode_from_name(const std::string& s) {
    if (s == "none") return ConstraintMode::kNone;
    if (s == "image_tag") return ConstraintMode::kImageTag;
    if (s == "common_bounds") return ConstraintMode::kCommonBounds;
    throw ConfigError("unknown constraint mode: " + s);
}

const char* strategy_name(ScribbleStrategy s) {
    switch (s) {
    case ScribbleStrategy::kRandomValid: return "random_valid";
    case ScribbleStrategy::kCenterDistmap: return "center_distmap";
    case ScribbleStrategy::kRandomDistmap: return "random_distmap";
    case ScribbleStrategy::kErosion: return "erosion";
    }
    return "random_valid";
}

ScribbleStrategy strategy_from_name(const std::string& s) {
    if (s == "random_valid") return ScribbleStrategy::kRandomValid;
    if (s == "center_distmap") return ScribbleStrategy::kCenterDistmap;
    if (s == "random_distmap") return ScribbleStrategy::kRandomDistmap;
    if (s == "erosion") return ScribbleStrategy::kErosion;
    throw ConfigError("unknown scribble strategy: " + s);
}

template <typename T>
void maybe(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

} // namespace

void RunConfig::validate() const {
    net.validate();
    train.validate();
    constraints.validate();
    scribble.validate();
    phantom.validate();
    require(eval.detection_threshold > 0.0 && eval.detection_threshold < 1.0,
            "detection threshold must be in (0,1)");
    require(eval.min_lesion_voxels >= 0, "min lesion voxels must be >= 0");
    require(eval.iou_min > 0.0 && eval.iou_min <= 1.0, "iou threshold must be in (0,1]");
    require(adam.lr > 0.0, "learning rate must be positive");
    require(adam.weight_decay >= 0.0, "weight decay must be non-negative");
}

RunConfig default_run_config() {
    RunConfig c;
    c.constraints.lambda = 1e-5;
    c.constraints.class_weights = {1.0, 0.14, 0.22};
    c.constraints.constraints[kProstate] = {ConstraintMode::kCommonBounds, {100.0, 2500.0}};
    c.constraints.constraints[kLesion] = {ConstraintMode::kCommonBounds, {5.0, 500.0}};
    return c;
}

void apply_loss_kind_modes(ConstraintConfig& constraints, LossKind kind) {
    switch (kind) {
    case LossKind::kCeIt:
        constraints.constraints[kProstate].mode = ConstraintMode::kImageTag;
        constraints.constraints[kLesion].mode = ConstraintMode::kImageTag;
        break;
    case LossKind::kCeItCb:
        constraints.constraints[kProstate].mode = ConstraintMode::kCommonBounds;
        constraints.constraints[kLesion].mode = ConstraintMode::kCommonBounds;
        break;
    case LossKind::kSupervisedCeDice:
    case LossKind::kPartialCe:
        constraints.constraints[kProstate].mode = ConstraintMode::kNone;
        constraints.constraints[kLesion].mode = ConstraintMode::kNone;
        break;
    }
}

json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;

    json net;
    net["dims"] = c.net.dims;
    net["stages"] = c.net.stages;
    net["filters"] = c.net.filters;
    net["kernel"] = c.net.kernel;
    net["strides"] = c.net.strides;
    net["norm"] = c.net.norm == NormKind::kInstance ? "instance" : "none";
    net["dropout"] = c.net.dropout;
    net["classes"] = c.net.classes;
    net["in_channels"] = c.net.in_channels;
    j["net"] = net;

    json train;
    train["epochs"] = c.train.epochs;
    train["batch_size"] = c.train.batch_size;
    train["folds"] = c.train.folds;
    train["loss"] = loss_name(c.train.loss);
    train["balanced_sampler"] = c.train.balanced_sampler;
    train["steps_per_epoch"] = c.train.steps_per_epoch;
    train["val_interval"] = c.train.val_interval;
    j["train"] = train;

    json adam;
    adam["lr"] = c.adam.lr;
    adam["beta1"] = c.adam.beta1;
    adam["beta2"] = c.adam.beta2;
    adam["eps"] = c.adam.eps;
    adam["weight_decay"] = c.adam.weight_decay;
    j["adam"] = adam;

    json cons;
    cons["lambda"] = c.constraints.lambda;
    cons["class_weights"] = c.constraints.class_weights;
    const char* names[kNumClasses] = {"background", "prostate", "lesion"};
    for (int cls = kProstate; cls < kNumClasses; ++cls) {
        json cc;
        cc["mode"] = mode_name(c.constraints.constraints[static_cast<size_t>(cls)].mode);
        cc["lower"] = c.constraints.constraints[static_cast<size_t>(cls)].bounds.lower;
        cc["upper"] = c.constraints.constraints[static_cast<size_t>(cls)].bounds.upper;
        cons[names[cls]] = cc;
    }
    j["constraints"] = cons;

    json scribble;
    scribble["max_radius_mm"] = c.scribble.max_radius_mm;
    scribble["strategy"] = strategy_name(c.scribble.strategy);
    scribble["erosion_target_fraction"] = c.scribble.erosion_target_fraction;
    scribble["erosion_element"] =
        c.scribble.erosion_element == StructuringElement::kSquare ? "square" : "cross";
    scribble["background_fraction"] = c.scribble.background_fraction;
    j["scribble"] = scribble;

    json ev;
    ev["detection_threshold"] = c.eval.detection_threshold;
    ev["min_lesion_voxels"] = c.eval.min_lesion_voxels;
    ev["iou_min"] = c.eval.iou_min;
    j["eval"] = ev;

    json ph;
    ph["dims"] = {c.phantom.grid.nx, c.phantom.grid.ny, c.phantom.grid.nz};
    ph["spacing_mm"] = {c.phantom.grid.sx, c.phantom.grid.sy, c.phantom.grid.sz};
    ph["case_count"] = c.phantom.case_count;
    ph["positive_fraction"] = c.phantom.positive_fraction;
    ph["min_lesions"] = c.phantom.min_lesions;
    ph["max_lesions"] = c.phantom.max_lesions;
    ph["lesion_volume_min"] = c.phantom.lesion_volume_min;
    ph["lesion_volume_max"] = c.phantom.lesion_volume_max;
    ph["prostate_volume_min"] = c.phantom.prostate_volume_min;
    ph["prostate_volume_max"] = c.phantom.prostate_volume_max;
    ph["class_means"] = c.phantom.class_means;
    ph["noise_sigma"] = c.phantom.noise_sigma;
    json shift;
    shift["gamma"] = c.phantom.shift.gamma;
    shift["extra_noise_sigma"] = c.phantom.shift.extra_noise_sigma;
    shift["lesion_contrast_scale"] = c.phantom.shift.lesion_contrast_scale;
    ph["shift"] = shift;
    j["phantom"] = ph;

    json sweep;
    sweep["learning_rates"] = c.sweep.learning_rates;
    sweep["weight_decays"] = c.sweep.weight_decays;
    sweep["lambdas"] = c.sweep.lambdas;
    sweep["lesion_lower_bounds"] = c.sweep.lesion_lower_bounds;
    sweep["lesion_upper_bounds"] = c.sweep.lesion_upper_bounds;
    sweep["epochs"] = c.sweep.epochs;
    j["sweep"] = sweep;
    return j;
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c = default_run_config();
    maybe(j, "seed", c.seed);

    if (j.contains("net")) {
        const json& n = j.at("net");
        maybe(n, "dims", c.net.dims);
        maybe(n, "stages", c.net.stages);
        maybe(n, "filters", c.net.filters);
        maybe(n, "kernel", c.net.kernel);
        maybe(n, "strides", c.net.strides);
        if (n.contains("norm"))
            c.net.norm = n.at("norm").get<std::string>() == "instance" ? NormKind::kInstance
                                                                       : NormKind::kNone;
        maybe(n, "dropout", c.net.dropout);
        maybe(n, "classes", c.net.classes);
        maybe(n, "in_channels", c.net.in_channels);
    }

    bool explicit_modes = false;
    if (j.contains("train")) {
        const json& t = j.at("train");
        maybe(t, "epochs", c.train.epochs);
        maybe(t, "batch_size", c.train.batch_size);
        maybe(t, "folds", c.train.folds);
        if (t.contains("loss")) c.train.loss = loss_from_name(t.at("loss").get<std::string>());
        maybe(t, "balanced_sampler", c.train.balanced_sampler);
        maybe(t, "steps_per_epoch", c.train.steps_per_epoch);
        maybe(t, "val_interval", c.train.val_interval);
    }

    if (j.contains("adam")) {
        const json& a = j.at("adam");
        maybe(a, "lr", c.adam.lr);
        maybe(a, "beta1", c.adam.beta1);
        maybe(a, "beta2", c.adam.beta2);
        maybe(a, "eps", c.adam.eps);
        maybe(a, "weight_decay", c.adam.weight_decay);
    }

    if (j.contains("constraints")) {
        const json& cons = j.at("constraints");
        maybe(cons, "lambda", c.constraints.lambda);
        maybe(cons, "class_weights", c.constraints.class_weights);
        const char* names[kNumClasses] = {"background", "prostate", "lesion"};
        for (int cls = kProstate; cls < kNumClasses; ++cls) {
            if (!cons.contains(names[cls])) continue;
            const json& cc = cons.at(names[cls]);
            auto& target = c.constraints.constraints[static_cast<size_t>(cls)];
            if (cc.contains("mode")) {
                target.mode = mode_from_name(cc.at("mode").get<std::string>());
                explicit_modes = true;
            }
            maybe(cc, "lower", target.bounds.lower);
            maybe(cc, "upper", target.bounds.upper);
        }
    }
    if (!explicit_modes) apply_loss_kind_modes(c.constraints, c.train.loss);

    if (j.contains("scribble")) {
        const json& s = j.at("scribble");
        maybe(s, "max_radius_mm", c.scribble.max_radius_mm);
        if (s.contains("strategy"))
            c.scribble.strategy = strategy_from_name(s.at("strategy").get<std::string>());
        maybe(s, "erosion_target_fraction", c.scribble.erosion_target_fraction);
        if (s.contains("erosion_element"))
            c.scribble.erosion_element = s.at("erosion_element").get<std::string>() == "cross"
                                             ? StructuringElement::kCross
                                             : StructuringElement::kSquare;
        maybe(s, "background_fraction", c.scribble.background_fraction);
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        maybe(e, "detection_threshold", c.eval.detection_threshold);
        maybe(e, "min_lesion_voxels", c.eval.min_lesion_voxels);
        maybe(e, "iou_min", c.eval.iou_min);
    }

    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        if (p.contains("dims")) {
            c.phantom.grid.nx = p.at("dims").at(0).get<int>();
            c.phantom.grid.ny = p.at("dims").at(1).get<int>();
            c.phantom.grid.nz = p.at("dims").at(2).get<int>();
        }
        if (p.contains("spacing_mm")) {
            c.phantom.grid.sx = p.at("spacing_mm").at(0).get<double>();
            c.phantom.grid.sy = p.at("spacing_mm").at(1).get<double>();
            c.phantom.grid.sz = p.at("spacing_mm").at(2).get<double>();
        }
        maybe(p, "case_count", c.phantom.case_count);
        maybe(p, "positive_fraction", c.phantom.positive_fraction);
        maybe(p, "min_lesions", c.phantom.min_lesions);
        maybe(p, "max_lesions", c.phantom.max_lesions);
        maybe(p, "lesion_volume_min", c.phantom.lesion_volume_min);
        maybe(p, "lesion_volume_max", c.phantom.lesion_volume_max);
        maybe(p, "prostate_volume_min", c.phantom.prostate_volume_min);
        maybe(p, "prostate_volume_max", c.phantom.prostate_volume_max);
        maybe(p, "class_means", c.phantom.class_means);
        maybe(p, "noise_sigma", c.phantom.noise_sigma);
        if (p.contains("shift")) {
            const json& s = p.at("shift");
            maybe(s, "gamma", c.phantom.shift.gamma);
            maybe(s, "extra_noise_sigma", c.phantom.shift.extra_noise_sigma);
            maybe(s, "lesion_contrast_scale", c.phantom.shift.lesion_contrast_scale);
        }
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        maybe(s, "learning_rates", c.sweep.learning_rates);
        maybe(s, "weight_decays", c.sweep.weight_decays);
        maybe(s, "lambdas", c.sweep.lambdas);
        maybe(s, "lesion_lower_bounds", c.sweep.lesion_lower_bounds);
        maybe(s, "lesion_upper_bounds", c.sweep.lesion_upper_bounds);
        maybe(s, "epochs", c.sweep.epochs);
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config: " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("malformed config " + path + ": " + e.what());
    }
    RunConfig c = run_config_from_json(j);
    // The phantom seed follows the run seed unless pinned separately.
    c.phantom.seed = c.seed;
    c.scribble.seed = c.seed;
    c.train.seed = c.seed;
    return c;
}

void save_run_config(const std::string& path, const RunConfig& config) {
    std::ofstream out(path);
    require(out.good(), "cannot write config: " + path);
    out << to_json(config).dump(2) << '\n';
}

} // namespace wss
