#pragma once

#include "wss/io/manifest.hpp"
#include "wss/io/run_config.hpp"

#include <string>
#include <vector>

namespace wss {

// Pipeline commands; every command persists the resolved RunConfig into its
// output directory. All are callable programmatically (the CLI is a thin
// wrapper) so tests drive the same code paths.

void cmd_synth(const RunConfig& config, const std::string& out_dir,
               const std::string& domain_tag);

// Annotation volumes are written alongside the input volumes; the annotated
// manifest and the per-case coverage report go to out_dir.
void cmd_annotate(const RunConfig& config, const std::string& manifest_path,
                  const std::string& out_dir);

void cmd_train(const RunConfig& config, const std::string& manifest_path, int fold,
               const std::string& out_dir);

// One checkpoint predicts, several ensemble-average.
void cmd_predict(const RunConfig& config, const std::string& manifest_path,
                 const std::vector<std::string>& checkpoints, const std::string& out_dir);

void cmd_eval(const RunConfig& config, const std::string& manifest_path,
              const std::string& pred_dir, const std::string& out_dir,
              const std::string& model_name, const std::string& domain_filter);

void cmd_report(const std::string& val_metrics_csv, const std::string& test_metrics_csv,
                const std::string& curves_dir, const std::string& out_dir);

void cmd_sweep(const RunConfig& config, const std::string& manifest_path,
               const std::string& out_dir);

// CLI entry point; returns the process exit status and prints a one-line
// JSON error record on failure.
int run_cli(int argc, char** argv);

} // namespace wss
