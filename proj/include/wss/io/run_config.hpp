#pragma once

#include "wss/annotate/scribble.hpp"
#include "wss/losses/losses.hpp"
#include "wss/model/adam.hpp"
#include "wss/model/net.hpp"
#include "wss/synth/phantom.hpp"
#include "wss/train/train.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace wss {

// Grid-search axes; an empty list keeps the base config's value.
struct SweepConfig {
    std::vector<double> learning_rates;
    std::vector<double> weight_decays;
    std::vector<double> lambdas;
    std::vector<double> lesion_lower_bounds;
    std::vector<double> lesion_upper_bounds;
    int epochs = 0; // 0: use train.epochs
};

// Fully resolved experiment configuration; what gets persisted next to
// every artifact directory.
struct RunConfig {
    uint64_t seed = 0;
    NetSpec net;
    TrainConfig train;
    AdamConfig adam;
    ConstraintConfig constraints;
    ScribbleConfig scribble;
    EvalParams eval;
    PhantomConfig phantom;
    SweepConfig sweep;

    void validate() const;
};

// 2D defaults: lesion bounds (5, 500), prostate bounds (100, 2500),
// lambda 1e-5, class weights (1, 0.14, 0.22).
RunConfig default_run_config();

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

// Loading starts from defaults and overrides the keys present in the file;
// saving always materializes every field.
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& config);

// The constraint modes implied by a loss selection: image tags for CE+IT,
// common bounds for CE+IT+CB, none otherwise. Used when the config file
// does not pin modes explicitly.
void apply_loss_kind_modes(ConstraintConfig& constraints, LossKind kind);

} // namespace wss
