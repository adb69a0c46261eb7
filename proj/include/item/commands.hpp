#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "item/config.hpp"
#include "item/trainer.hpp"

namespace item {

// Run-level digest of a finished training run, the content of summary.json.
struct RunSummary {
    std::string mode;
    std::string criterion;
    uint64_t seed = 0;
    int epochs = 0;
    int warmup_epochs = 0;
    int class_count = 0;
    uint64_t dataset_hash = 0;
    double final_test_accuracy = 0.0;
    double best_test_accuracy = 0.0;
    int best_epoch = -1;
    double final_train_loss = 0.0;
    long final_selected_count = 0;
    double final_macro_f = 0.0;
    double final_min_f = 0.0;
    double final_imbalance = 0.0;
    bool final_imbalance_degenerate = false;
    std::vector<double> per_class_precision;
    std::vector<double> per_class_recall;
    std::vector<double> per_class_fscore;
    std::vector<double> per_class_test_accuracy;
    std::vector<long> per_class_selected;
    std::vector<long> head_draws; // whole run, warmup included
};

RunSummary summarize_run(const RunConfig& config, const RunResult& result);
std::string summary_json(const RunSummary& s); // fixed key order, ends with newline

// train: one run; writes metrics.csv, summary.json, checkpoint.bin into
// out_dir (created if missing). Outputs are byte-identical on repeat.
RunSummary run_train_command(const RunConfig& config, const std::string& out_dir);

// gen-data: clean blob set from the config's data block, saved as CSV.
void run_gen_data_command(const RunConfig& config, const std::string& out_path);

// inject-noise: load a CSV, corrupt labels per the config's noise block
// (stream "noise" of the master seed), save. True labels pass through.
void run_inject_noise_command(const RunConfig& config, const std::string& in_path,
                              const std::string& out_path);

struct AblateOutcome {
    std::vector<RunSummary> runs; // arm-major, seeds inner
    std::string table_csv;
    std::string table_json;
};

// ablate: every arm x seed on the shared base config; per-seed datasets must
// hash identically across arms. Writes ablation_table.{csv,json} plus one
// summary JSON per run under out_dir/runs/.
AblateOutcome run_ablate_command(const AblateManifest& manifest, const std::string& out_dir);

// report: melt metrics CSVs into long rows run_id,epoch,metric,class,value.
// run_id is the source file stem; empty cells are skipped; the head_draws
// cell fans out into one row per head. Returns the written text.
std::string run_report_command(const std::vector<std::string>& metrics_paths,
                               const std::string& out_path);

} // namespace item
