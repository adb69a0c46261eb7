#include "item/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>

#include "item/errors.hpp"
#include "item/format.hpp"
#include "item/log.hpp"
#include "item/metrics_io.hpp"

namespace fs = std::filesystem;

namespace item {

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
    MeanStd r;
    if (xs.empty()) return r;
    for (double x : xs) r.mean += x;
    r.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return r;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
        const size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

} // namespace

RunSummary summarize_run(const RunConfig& config, const RunResult& result) {
    RunSummary s;
    s.mode = mode_name(config.mode);
    s.criterion = criterion_name(config.criterion);
    s.seed = config.seed;
    s.epochs = config.epochs;
    s.warmup_epochs = config.warmup_epochs;
    s.class_count = result.log.class_count;
    s.dataset_hash = result.train_dataset_hash;
    s.head_draws = result.head_tally;
    if (result.log.epochs.empty()) return s;

    const EpochMetrics& last = result.log.epochs.back();
    s.final_test_accuracy = last.test_accuracy;
    for (const EpochMetrics& em : result.log.epochs) {
        if (em.test_accuracy > s.best_test_accuracy || s.best_epoch < 0) {
            s.best_test_accuracy = em.test_accuracy;
            s.best_epoch = em.epoch;
        }
    }
    s.final_train_loss = last.train_loss;
    s.final_selected_count = last.selected_count;
    s.final_macro_f = last.macro_f;
    s.final_min_f = last.fscore.empty() ? 0.0 : *std::min_element(last.fscore.begin(), last.fscore.end());
    s.final_imbalance = last.imbalance;
    s.final_imbalance_degenerate = last.imbalance_degenerate;
    s.per_class_precision = last.precision;
    s.per_class_recall = last.recall;
    s.per_class_fscore = last.fscore;
    s.per_class_test_accuracy = last.class_test_accuracy;
    s.per_class_selected = last.class_selected;
    return s;
}

std::string summary_json(const RunSummary& s) {
    JsonObject o;
    o.field("schema_version", static_cast<long long>(1));
    o.field("mode", s.mode);
    o.field("criterion", s.criterion);
    o.field("seed", s.seed);
    o.field("epochs", static_cast<long long>(s.epochs));
    o.field("warmup_epochs", static_cast<long long>(s.warmup_epochs));
    o.field("class_count", static_cast<long long>(s.class_count));
    o.field("dataset_hash", hash_hex(s.dataset_hash));
    o.field("final_test_accuracy", s.final_test_accuracy);
    o.field("best_test_accuracy", s.best_test_accuracy);
    o.field("best_epoch", static_cast<long long>(s.best_epoch));
    o.field("final_train_loss", s.final_train_loss);
    o.field("final_selected_count", static_cast<long long>(s.final_selected_count));
    o.field("final_macro_f", s.final_macro_f);
    o.field("final_min_f", s.final_min_f);
    o.field("final_imbalance", s.final_imbalance);
    o.field("final_imbalance_degenerate", s.final_imbalance_degenerate);
    o.field_raw("per_class_precision", json_array(s.per_class_precision));
    o.field_raw("per_class_recall", json_array(s.per_class_recall));
    o.field_raw("per_class_fscore", json_array(s.per_class_fscore));
    o.field_raw("per_class_test_accuracy", json_array(s.per_class_test_accuracy));
    o.field_raw("per_class_selected", json_array(s.per_class_selected));
    o.field_raw("head_draws", json_array(s.head_draws));
    return o.str() + "\n";
}

RunSummary run_train_command(const RunConfig& config, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const RunResult result = run_training(config);
    const RunSummary summary = summarize_run(config, result);
    write_metrics_csv(result.log, (fs::path(out_dir) / "metrics.csv").string());
    write_text_file((fs::path(out_dir) / "summary.json").string(), summary_json(summary));
    save_checkpoint(result.net, result.opt, (fs::path(out_dir) / "checkpoint.bin").string());
    log::info("wrote " + out_dir + "/{metrics.csv,summary.json,checkpoint.bin}");
    return summary;
}

void run_gen_data_command(const RunConfig& config, const std::string& out_path) {
    config.validate();
    BlobSpec blob;
    blob.class_count = config.blob_classes;
    blob.sizes = config.blob_sizes;
    blob.dim = config.blob_dim;
    blob.separation = config.blob_separation;
    blob.stddev = config.blob_stddev;
    blob.seed = split_seed(config.seed, "data");
    const LabeledDataset ds = generate_blobs(blob);
    if (const fs::path dir = fs::path(out_path).parent_path(); !dir.empty())
        fs::create_directories(dir);
    save_csv(ds, out_path);
    log::info("wrote " + std::to_string(ds.size()) + " rows to " + out_path);
}

void run_inject_noise_command(const RunConfig& config, const std::string& in_path,
                              const std::string& out_path) {
    config.validate();
    const LabeledDataset clean = load_csv(in_path, config.blob_classes);
    NoiseSpec spec;
    spec.kind = config.noise_kind;
    spec.ratio = config.noise_ratio;
    spec.seed = split_seed(config.seed, "noise");
    const LabeledDataset noisy = inject_noise(clean, spec);
    long flipped = 0;
    for (int i = 0; i < noisy.size(); ++i)
        if (noisy.noisy_labels[static_cast<size_t>(i)] != noisy.true_labels[static_cast<size_t>(i)])
            ++flipped;
    if (const fs::path dir = fs::path(out_path).parent_path(); !dir.empty())
        fs::create_directories(dir);
    save_csv(noisy, out_path);
    log::info("flipped " + std::to_string(flipped) + "/" + std::to_string(noisy.size()) +
              " labels (" + noise_kind_name(spec.kind) + ")");
}

AblateOutcome run_ablate_command(const AblateManifest& manifest, const std::string& out_dir) {
    manifest.validate();
    const RunConfig base = load_run_config(manifest.config_path);
    fs::create_directories(fs::path(out_dir) / "runs");

    AblateOutcome outcome;
    std::map<uint64_t, uint64_t> seed_hash;
    for (Mode arm : manifest.arms) {
        for (uint64_t seed : manifest.seeds) {
            RunConfig cfg = base;
            cfg.mode = arm;
            cfg.seed = seed;
            log::info("ablate arm=" + mode_name(arm) + " seed=" + std::to_string(seed));
            const RunResult result = run_training(cfg);
            const RunSummary summary = summarize_run(cfg, result);
            const auto [it, fresh] = seed_hash.emplace(seed, summary.dataset_hash);
            if (!fresh && it->second != summary.dataset_hash)
                throw std::runtime_error("ablation arms disagree on the seed " +
                                         std::to_string(seed) + " dataset");
            const std::string name = summary.mode + "_seed" + std::to_string(seed) + ".summary.json";
            write_text_file((fs::path(out_dir) / "runs" / name).string(), summary_json(summary));
            outcome.runs.push_back(summary);
        }
    }

    std::string csv =
        "mode,runs,accuracy_mean,accuracy_std,macro_f_mean,macro_f_std,"
        "min_f_mean,min_f_std,imbalance_mean,imbalance_std\n";
    std::string arms_json;
    for (Mode arm : manifest.arms) {
        std::vector<double> acc, macro, minf, imb;
        for (const RunSummary& r : outcome.runs) {
            if (r.mode != mode_name(arm)) continue;
            acc.push_back(r.final_test_accuracy);
            macro.push_back(r.final_macro_f);
            minf.push_back(r.final_min_f);
            imb.push_back(r.final_imbalance);
        }
        const MeanStd a = mean_std(acc), m = mean_std(macro), f = mean_std(minf), i = mean_std(imb);
        csv += mode_name(arm) + "," + std::to_string(acc.size()) + "," + format_g17(a.mean) + "," +
               format_g17(a.std) + "," + format_g17(m.mean) + "," + format_g17(m.std) + "," +
               format_g17(f.mean) + "," + format_g17(f.std) + "," + format_g17(i.mean) + "," +
               format_g17(i.std) + "\n";
        JsonObject o;
        o.field("mode", mode_name(arm));
        o.field("runs", static_cast<long long>(acc.size()));
        o.field("accuracy_mean", a.mean);
        o.field("accuracy_std", a.std);
        o.field("macro_f_mean", m.mean);
        o.field("macro_f_std", m.std);
        o.field("min_f_mean", f.mean);
        o.field("min_f_std", f.std);
        o.field("imbalance_mean", i.mean);
        o.field("imbalance_std", i.std);
        o.field_raw("accuracy", json_array(acc));
        o.field_raw("macro_f", json_array(macro));
        if (!arms_json.empty()) arms_json += ",";
        arms_json += o.str();
    }
    JsonObject table;
    table.field("schema_version", static_cast<long long>(1));
    table.field_raw("arms", "[" + arms_json + "]");
    outcome.table_csv = csv;
    outcome.table_json = table.str() + "\n";
    write_text_file((fs::path(out_dir) / "ablation_table.csv").string(), outcome.table_csv);
    write_text_file((fs::path(out_dir) / "ablation_table.json").string(), outcome.table_json);
    return outcome;
}

std::string run_report_command(const std::vector<std::string>& metrics_paths,
                               const std::string& out_path) {
    std::string out = "run_id,epoch,metric,class,value\n";
    for (const std::string& path : metrics_paths) {
        const std::string text = read_text_file(path);
        const std::string run_id = fs::path(path).stem().string();
        size_t pos = 0;
        long line_no = 0;
        std::vector<std::string> header;
        int epoch_col = -1, class_col = -1;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const auto cells = split_cells(line);
            if (header.empty()) {
                header = cells;
                for (size_t c = 0; c < header.size(); ++c) {
                    if (header[c] == "epoch") epoch_col = static_cast<int>(c);
                    if (header[c] == "class") class_col = static_cast<int>(c);
                }
                if (epoch_col < 0 || class_col < 0)
                    throw ParseError(path, line_no, "metrics header needs epoch and class columns");
                continue;
            }
            if (cells.size() != header.size())
                throw ParseError(path, line_no, "expected " + std::to_string(header.size()) +
                                                    " cells, got " + std::to_string(cells.size()));
            const std::string& epoch = cells[static_cast<size_t>(epoch_col)];
            const std::string& klass = cells[static_cast<size_t>(class_col)];
            for (size_t c = 0; c < cells.size(); ++c) {
                if (static_cast<int>(c) == epoch_col || static_cast<int>(c) == class_col) continue;
                const std::string& cell = cells[c];
                if (cell.empty()) continue;
                if (header[c] == "head_draws") {
                    const auto counts = [&] {
                        std::vector<std::string> parts;
                        size_t s = 0;
                        while (true) {
                            const size_t sep = cell.find(';', s);
                            if (sep == std::string::npos) {
                                parts.push_back(cell.substr(s));
                                break;
                            }
                            parts.push_back(cell.substr(s, sep - s));
                            s = sep + 1;
                        }
                        return parts;
                    }();
                    for (size_t h = 0; h < counts.size(); ++h)
                        out += run_id + "," + epoch + ",head_draws," + std::to_string(h) + "," +
                               counts[h] + "\n";
                } else {
                    out += run_id + "," + epoch + "," + header[c] + "," + klass + "," + cell + "\n";
                }
            }
        }
        if (header.empty())
            throw ParseError(path, 0, "empty metrics file");
    }
    if (const fs::path dir = fs::path(out_path).parent_path(); !dir.empty())
        fs::create_directories(dir);
    write_text_file(out_path, out);
    return out;
}

} // namespace item
