#include "wss/io/pipeline.hpp"

#include "wss/annotate/scribble.hpp"
#include "wss/core/container.hpp"
#include "wss/model/checkpoint.hpp"
#include "wss/synth/phantom.hpp"
#include "wss/train/train.hpp"
#include "wss/util/csv.hpp"
#include "wss/util/error.hpp"
#include "wss/util/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace wss {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void prepare_out_dir(const std::string& out_dir, const RunConfig& config) {
    fs::create_directories(out_dir);
    save_run_config((fs::path(out_dir) / "config.json").string(), config);
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv_num(*v) : std::string();
}

struct LoadedCase {
    TrainCase data;
    ManifestRecord record;
};

std::vector<LoadedCase> load_cases(const DatasetManifest& manifest, bool need_annotation) {
    std::vector<LoadedCase> cases;
    for (const ManifestRecord& r : manifest.records) {
        LoadedCase lc;
        lc.record = r;
        lc.data.id = r.case_id;
        lc.data.image = read_intensity_volume(r.image_path);
        lc.data.truth = read_label_volume(r.label_path);
        lc.data.positive = r.positive;
        if (!r.annotation_path.empty())
            lc.data.annotation = read_annotation_mask(r.annotation_path);
        else if (need_annotation)
            throw ValidationError("case " + r.case_id + " has no annotation; run annotate first");
        else
            lc.data.annotation = AnnotationMask(lc.data.truth.grid);
        cases.push_back(std::move(lc));
    }
    return cases;
}

} // namespace

void cmd_synth(const RunConfig& config, const std::string& out_dir,
               const std::string& domain_tag) {
    config.validate();
    prepare_out_dir(out_dir, config);
    const fs::path base(out_dir);
    DatasetManifest manifest;
    for (int i = 0; i < config.phantom.case_count; ++i) {
        PhantomCase pc = generate_case(config.phantom, i);
        if (!config.phantom.shift.identity()) {
            Rng rng(derive_seed(config.phantom.seed, "shift", static_cast<uint64_t>(i)));
            pc.image = apply_domain_shift(pc.image, config.phantom.shift, &pc.labels, rng);
        }
        char id[32];
        std::snprintf(id, sizeof(id), "case_%04d", i);
        const std::string image_path = (base / (std::string(id) + "_image.vol")).string();
        const std::string label_path = (base / (std::string(id) + "_labels.vol")).string();
        write_volume(image_path, pc.image);
        write_volume(label_path, pc.labels);
        ManifestRecord r;
        r.case_id = id;
        r.image_path = image_path;
        r.label_path = label_path;
        r.domain = domain_tag.empty() ? "synth" : domain_tag;
        r.positive = pc.lesion_count > 0;
        r.lesion_count = pc.lesion_count;
        manifest.records.push_back(std::move(r));
    }
    write_manifest((base / "manifest.jsonl").string(), manifest);
}

void cmd_annotate(const RunConfig& config, const std::string& manifest_path,
                  const std::string& out_dir) {
    config.validate();
    prepare_out_dir(out_dir, config);
    DatasetManifest manifest = read_manifest(manifest_path);
    CsvWriter coverage((fs::path(out_dir) / "coverage.csv").string(),
                       {"case_id", "class", "coverage_fraction"});
    const char* class_names[kNumClasses] = {"background", "prostate", "lesion"};
    for (size_t i = 0; i < manifest.records.size(); ++i) {
        ManifestRecord& r = manifest.records[i];
        const LabelVolume truth = read_label_volume(r.label_path);
        const AnnotationMask annotation = annotate_case(
            truth, config.scribble, derive_seed(config.scribble.seed, "annotate", i));
        const fs::path label_path(r.label_path);
        const std::string annot_path =
            (label_path.parent_path() / (r.case_id + "_annot.vol")).string();
        write_volume(annot_path, annotation);
        r.annotation_path = annot_path;
        for (int cls = kProstate; cls < kNumClasses; ++cls) {
            const auto frac = coverage_fraction(annotation, truth, static_cast<uint8_t>(cls));
            coverage.row({r.case_id, class_names[cls], opt_cell(frac)});
        }
    }
    write_manifest((fs::path(out_dir) / "annotated.jsonl").string(), manifest);
}

void cmd_train(const RunConfig& config, const std::string& manifest_path, int fold,
               const std::string& out_dir) {
    config.validate();
    prepare_out_dir(out_dir, config);
    const DatasetManifest manifest = read_manifest(manifest_path);
    require(fold >= 0 && fold < config.train.folds, "fold index out of range");
    const bool need_annotation = config.train.loss != LossKind::kSupervisedCeDice;
    std::vector<LoadedCase> cases = load_cases(manifest, need_annotation);
    require(!cases.empty(), "manifest has no cases");

    std::vector<uint8_t> positivity;
    for (const auto& lc : cases) positivity.push_back(lc.record.positive ? 1 : 0);
    const FoldAssignment folds = kfold_split(positivity, config.train.folds, config.seed);
    if (!folds.stratified)
        std::cerr << "warning: fewer positive cases than folds, unstratified split\n";

    std::vector<TrainCase> train_cases, val_cases;
    for (size_t i = 0; i < cases.size(); ++i) {
        if (folds.fold_of_case[i] == fold)
            val_cases.push_back(std::move(cases[i].data));
        else
            train_cases.push_back(std::move(cases[i].data));
    }

    TrainResult result;
    try {
        result = train_model(train_cases, val_cases, config.train, config.net,
                             config.constraints, config.adam, config.eval);
    } catch (const TrainingDiverged& e) {
        std::ofstream dump(fs::path(out_dir) / "diverged.txt");
        dump << e.dump;
        throw;
    }

    save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), result.best_params);
    CsvWriter log((fs::path(out_dir) / "loss_log.csv").string(),
                  {"epoch", "train_loss", "val_AP"});
    for (const EpochLog& e : result.log)
        log.row({std::to_string(e.epoch), csv_num(e.train_loss),
                 e.validated ? csv_num(e.val_ap) : std::string()});

    json meta;
    meta["fold"] = fold;
    meta["seed"] = config.seed;
    meta["best_epoch"] = result.best_epoch;
    meta["best_val_ap"] = result.best_val_ap;
    meta["stratified"] = folds.stratified;
    meta["config"] = to_json(config);
    std::ofstream meta_out(fs::path(out_dir) / "run_meta.json");
    meta_out << meta.dump(2) << '\n';
}

void cmd_predict(const RunConfig& config, const std::string& manifest_path,
                 const std::vector<std::string>& checkpoints, const std::string& out_dir) {
    config.validate();
    require(!checkpoints.empty(), "predict needs at least one checkpoint");
    prepare_out_dir(out_dir, config);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const Network net(config.net);
    std::vector<Parameters> members;
    for (const std::string& c : checkpoints) members.push_back(load_checkpoint(c));

    const fs::path base(out_dir);
    std::ofstream pred_manifest(base / "predictions.jsonl");
    require(pred_manifest.good(), "cannot write predictions manifest");
    for (const ManifestRecord& r : manifest.records) {
        const IntensityVolume image = read_intensity_volume(r.image_path);
        const ProbabilityVolume prob = members.size() == 1
                                           ? predict_volume(net, members[0], image)
                                           : ensemble_predict(net, members, image);
        const std::string prob_path = (base / (r.case_id + "_prob.vol")).string();
        write_volume(prob_path, prob);
        json j;
        j["case_id"] = r.case_id;
        j["prob"] = r.case_id + "_prob.vol";
        pred_manifest << j.dump() << '\n';
    }
}

void cmd_eval(const RunConfig& config, const std::string& manifest_path,
              const std::string& pred_dir, const std::string& out_dir,
              const std::string& model_name, const std::string& domain_filter) {
    config.validate();
    prepare_out_dir(out_dir, config);
    const DatasetManifest manifest =
        filter_domain(read_manifest(manifest_path), domain_filter);
    require(!manifest.records.empty(), "no cases to evaluate");

    // Map case ids to probability volumes.
    const fs::path pred_base(pred_dir);
    std::ifstream pd(pred_base / "predictions.jsonl");
    require(pd.good(), "missing predictions manifest in " + pred_dir);
    std::vector<std::pair<std::string, std::string>> pred_paths;
    std::string line;
    while (std::getline(pd, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        pred_paths.emplace_back(j.at("case_id").get<std::string>(),
                                (pred_base / j.at("prob").get<std::string>()).string());
    }

    std::vector<EvalCase> cases;
    std::vector<std::pair<double, int>> patient_scores;
    double dice_sum = 0.0;
    std::string dataset_name = domain_filter;
    for (const ManifestRecord& r : manifest.records) {
        const auto it = std::find_if(pred_paths.begin(), pred_paths.end(),
                                     [&](const auto& p) { return p.first == r.case_id; });
        require(it != pred_paths.end(), "no prediction for case " + r.case_id);
        const ProbabilityVolume prob = read_probability_volume(it->second);
        const LabelVolume truth = read_label_volume(r.label_path);

        EvalCase ec;
        ec.case_id = r.case_id;
        ec.detections = extract_lesions(prob, config.eval.detection_threshold,
                                        config.eval.min_lesion_voxels, r.case_id);
        ec.gt_lesions = connected_components(class_mask(truth, kLesion), Connectivity::kFull);
        patient_scores.emplace_back(patient_score(ec.detections), r.positive ? 1 : 0);
        dice_sum += dice(class_mask(argmax_labels(prob), kProstate), class_mask(truth, kProstate));
        cases.push_back(std::move(ec));
        if (dataset_name.empty())
            dataset_name = r.domain;
        else if (dataset_name != r.domain)
            dataset_name = "mixed";
    }

    int64_t total_gt = 0;
    for (const EvalCase& ec : cases) total_gt += static_cast<int64_t>(ec.gt_lesions.size());

    const auto curve = froc(cases, config.eval.iou_min);
    std::optional<double> sens1fp, ap;
    std::optional<bool> dagger;
    std::optional<double> max_sens, avg_fp;
    if (!curve.empty()) {
        const SensitivityAtFp s = sensitivity_at_fp(curve, 1.0);
        sens1fp = s.sensitivity;
        dagger = s.dagger;
    }
    if (total_gt > 0) {
        ap = average_precision(cases, config.eval.iou_min);
        const DetectionSummary summary = detection_summary(cases, config.eval.iou_min);
        max_sens = summary.max_sensitivity;
        avg_fp = summary.avg_fp_per_patient;
    }
    const auto roc = auroc(patient_scores);
    const double dice_prostate = dice_sum / static_cast<double>(cases.size());

    const fs::path base(out_dir);
    CsvWriter metrics((base / "metrics.csv").string(),
                      {"model", "dataset", "sensitivity_at_1fp", "dagger", "AP", "AUROC",
                       "dice_prostate", "max_sensitivity", "avg_fp_per_patient"});
    metrics.row({model_name, dataset_name, opt_cell(sens1fp),
                 dagger ? (*dagger ? "true" : "false") : std::string(), opt_cell(ap),
                 opt_cell(roc), csv_num(dice_prostate), opt_cell(max_sens), opt_cell(avg_fp)});

    CsvWriter froc_csv((base / "froc.csv").string(),
                       {"threshold", "sensitivity", "fp_per_patient"});
    CsvWriter pr_csv((base / "pr.csv").string(), {"threshold", "precision", "recall"});
    for (const CurvePoint& pt : curve) {
        froc_csv.row({csv_num(pt.threshold), csv_num(pt.sensitivity), csv_num(pt.fp_per_patient)});
        pr_csv.row({csv_num(pt.threshold), csv_num(pt.precision), csv_num(pt.recall)});
    }
}

void cmd_sweep(const RunConfig& config, const std::string& manifest_path,
               const std::string& out_dir) {
    config.validate();
    prepare_out_dir(out_dir, config);
    const DatasetManifest manifest = read_manifest(manifest_path);
    const bool need_annotation = config.train.loss != LossKind::kSupervisedCeDice;
    std::vector<LoadedCase> loaded = load_cases(manifest, need_annotation);
    std::vector<uint8_t> positivity;
    for (const auto& lc : loaded) positivity.push_back(lc.record.positive ? 1 : 0);
    const FoldAssignment folds = kfold_split(positivity, config.train.folds, config.seed);

    // Hyperparameters are searched on the first fold only.
    std::vector<TrainCase> train_cases, val_cases;
    for (size_t i = 0; i < loaded.size(); ++i) {
        if (folds.fold_of_case[i] == 0)
            val_cases.push_back(std::move(loaded[i].data));
        else
            train_cases.push_back(std::move(loaded[i].data));
    }

    auto axis = [](const std::vector<double>& values, double base) {
        return values.empty() ? std::vector<double>{base} : values;
    };
    const auto lrs = axis(config.sweep.learning_rates, config.adam.lr);
    const auto wds = axis(config.sweep.weight_decays, config.adam.weight_decay);
    const auto lambdas = axis(config.sweep.lambdas, config.constraints.lambda);
    const auto lows =
        axis(config.sweep.lesion_lower_bounds, config.constraints.constraints[kLesion].bounds.lower);
    const auto highs =
        axis(config.sweep.lesion_upper_bounds, config.constraints.constraints[kLesion].bounds.upper);

    struct SweepRow {
        double lr, wd, lambda, lo, hi, val_ap;
        int best_epoch;
    };
    std::vector<SweepRow> rows;
    for (double lr : lrs)
        for (double wd : wds)
            for (double lambda : lambdas)
                for (double lo : lows)
                    for (double hi : highs) {
                        if (lo > hi) continue;
                        RunConfig c = config;
                        c.adam.lr = lr;
                        c.adam.weight_decay = wd;
                        c.constraints.lambda = lambda;
                        c.constraints.constraints[kLesion].bounds = {lo, hi};
                        if (c.sweep.epochs > 0) c.train.epochs = c.sweep.epochs;
                        const TrainResult r = train_model(train_cases, val_cases, c.train,
                                                          c.net, c.constraints, c.adam, c.eval);
                        rows.push_back({lr, wd, lambda, lo, hi, r.best_val_ap, r.best_epoch});
                    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return a.val_ap > b.val_ap; });

    CsvWriter out((fs::path(out_dir) / "results.csv").string(),
                  {"rank", "learning_rate", "weight_decay", "lambda", "lesion_lower",
                   "lesion_upper", "val_AP", "best_epoch"});
    for (size_t i = 0; i < rows.size(); ++i)
        out.row({std::to_string(i + 1), csv_num(rows[i].lr), csv_num(rows[i].wd),
                 csv_num(rows[i].lambda), csv_num(rows[i].lo), csv_num(rows[i].hi),
                 csv_num(rows[i].val_ap), std::to_string(rows[i].best_epoch)});
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Weakly supervised lesion segmentation toolkit"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, out_dir, pred_dir, domain, model_name = "model";
    std::string val_csv, test_csv, curves_dir;
    std::vector<std::string> checkpoints;
    int fold = 0;
    int64_t seed_override = -1;

    if (const char* env = std::getenv("WSS_THREADS")) set_thread_count(std::atoi(env));

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "run configuration (JSON)");
        if (needs_config) opt->required();
        cmd->add_option("--seed", seed_override, "override the config seed");
        cmd->add_option("--out", out_dir, "output directory")->required();
    };

    auto* synth = app.add_subcommand("synth", "generate a phantom dataset");
    add_common(synth, true);
    synth->add_option("--domain", domain, "domain tag for the manifest");

    auto* annotate = app.add_subcommand("annotate", "generate weak scribble annotations");
    add_common(annotate, true);
    annotate->add_option("--manifest", manifest_path, "dataset manifest")->required();

    auto* train = app.add_subcommand("train", "train one fold");
    add_common(train, true);
    train->add_option("--manifest", manifest_path, "dataset manifest")->required();
    train->add_option("--fold", fold, "validation fold index")->required();

    auto* predict = app.add_subcommand("predict", "apply a checkpoint to a manifest");
    add_common(predict, true);
    predict->add_option("--manifest", manifest_path, "dataset manifest")->required();
    predict->add_option("--checkpoints", checkpoints, "checkpoint file")->required();

    auto* ensemble = app.add_subcommand("ensemble", "average probability maps of checkpoints");
    add_common(ensemble, true);
    ensemble->add_option("--manifest", manifest_path, "dataset manifest")->required();
    ensemble->add_option("--checkpoints", checkpoints, "checkpoint files")->required();

    auto* eval = app.add_subcommand("eval", "lesion and patient level metrics");
    add_common(eval, true);
    eval->add_option("--manifest", manifest_path, "ground-truth manifest")->required();
    eval->add_option("--pred", pred_dir, "directory with predictions.jsonl")->required();
    eval->add_option("--model", model_name, "model name for the metrics row");
    eval->add_option("--domain", domain, "evaluate only this domain tag");

    auto* report = app.add_subcommand("report", "curves and relative-change table");
    report->add_option("--val", val_csv, "validation metrics.csv")->required();
    report->add_option("--test", test_csv, "test metrics.csv")->required();
    report->add_option("--curves", curves_dir, "directory with froc.csv / pr.csv");
    report->add_option("--out", out_dir, "output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "hyperparameter grid search on fold 0");
    add_common(sweep, true);
    sweep->add_option("--manifest", manifest_path, "dataset manifest")->required();

    std::string active;
    try {
        app.parse(argc, argv);
        active = app.get_subcommands().front()->get_name();

        RunConfig config;
        if (!config_path.empty()) config = load_run_config(config_path);
        if (seed_override >= 0) {
            config.seed = static_cast<uint64_t>(seed_override);
            config.phantom.seed = config.seed;
            config.scribble.seed = config.seed;
            config.train.seed = config.seed;
        }

        if (synth->parsed()) cmd_synth(config, out_dir, domain);
        if (annotate->parsed()) cmd_annotate(config, manifest_path, out_dir);
        if (train->parsed()) cmd_train(config, manifest_path, fold, out_dir);
        if (predict->parsed()) cmd_predict(config, manifest_path, checkpoints, out_dir);
        if (ensemble->parsed()) {
            require(checkpoints.size() >= 2, "ensemble needs at least two checkpoints");
            cmd_predict(config, manifest_path, checkpoints, out_dir);
        }
        if (eval->parsed())
            cmd_eval(config, manifest_path, pred_dir, out_dir, model_name, domain);
        if (report->parsed()) cmd_report(val_csv, test_csv, curves_dir, out_dir);
        if (sweep->parsed()) cmd_sweep(config, manifest_path, out_dir);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        json err;
        err["command"] = active.empty() ? "unknown" : active;
        err["error"] = e.what();
        std::cerr << err.dump() << '\n';
        return 1;
    }
    return 0;
}

} // namespace wss
