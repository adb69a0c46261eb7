#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "item/commands.hpp"
#include "item/errors.hpp"

namespace {

// --seed / --mode overrides applied on top of the config file
struct Overrides {
    uint64_t seed = 0;
    bool has_seed = false;
    std::string mode;
};

item::RunConfig load_config(const std::string& path, const Overrides& ov) {
    item::RunConfig cfg = item::load_run_config(path);
    if (ov.has_seed) cfg.seed = ov.seed;
    if (!ov.mode.empty()) cfg.mode = item::parse_mode(ov.mode, "run.mode");
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale lab for noise-tolerant expert training"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path;
    std::string manifest_path;
    std::string out_path;
    std::string in_path;
    std::vector<std::string> metrics_paths;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", ov.seed, "master seed override")
            ->each([&](const std::string&) { ov.has_seed = true; });
    };

    CLI::App* gen = app.add_subcommand("gen-data", "write a clean dataset CSV");
    gen->add_option("--config", config_path, "run config file")->required();
    gen->add_option("--out", out_path, "output CSV path")->required();
    add_seed(gen);

    CLI::App* inject = app.add_subcommand("inject-noise", "corrupt a dataset CSV's labels");
    inject->add_option("--config", config_path, "run config file")->required();
    inject->add_option("--in", in_path, "input CSV path")->required();
    inject->add_option("--out", out_path, "output CSV path")->required();
    add_seed(inject);

    CLI::App* train = app.add_subcommand("train", "run one training job");
    train->add_option("--config", config_path, "run config file")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--mode", ov.mode, "training mode override");
    add_seed(train);

    CLI::App* ablate = app.add_subcommand("ablate", "run an arms x seeds sweep");
    ablate->add_option("--manifest", manifest_path, "ablation manifest file")->required();
    ablate->add_option("--out", out_path, "output directory")->required();

    CLI::App* report = app.add_subcommand("report", "melt metrics CSVs into long format");
    report->add_option("--out", out_path, "output CSV path")->required();
    report->add_option("files", metrics_paths, "metrics CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            item::run_gen_data_command(load_config(config_path, ov), out_path);
        } else if (inject->parsed()) {
            item::run_inject_noise_command(load_config(config_path, ov), in_path, out_path);
        } else if (train->parsed()) {
            item::run_train_command(load_config(config_path, ov), out_path);
        } else if (ablate->parsed()) {
            item::run_ablate_command(item::load_ablate_manifest(manifest_path), out_path);
        } else if (report->parsed()) {
            item::run_report_command(metrics_paths, out_path);
        }
    } catch (const item::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const item::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const item::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const item::TrainingDiverged& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 2;
    }
    return 0;
}
