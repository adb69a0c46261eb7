#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "item/dataset.hpp"

namespace item {

enum class Mode {
    item,
    item_ssl,
    baseline_ce,
    baseline_single_head,
    no_mixed_sampling,
    no_mixup,
};

enum class Criterion { small_loss, gmm, fluctuation };

enum class DataSource { blob, csv };

std::string mode_name(Mode mode);
std::string criterion_name(Criterion criterion);
std::string noise_kind_name(NoiseKind kind);
Mode parse_mode(const std::string& text, const std::string& key);
Criterion parse_criterion(const std::string& text, const std::string& key);
NoiseKind parse_noise_kind(const std::string& text, const std::string& key);

// Everything one training run needs. Parsed from a flat key = value file
// with dotted keys, '#' comments, and a mandatory schema_version = 1 line;
// unknown keys are rejected by name.
struct RunConfig {
    Mode mode = Mode::item;
    uint64_t seed = 1;
    int epochs = 60;
    int warmup_epochs = 10;
    int batch_size = 64;

    DataSource source = DataSource::blob;
    std::string csv_path;              // data.csv_path, required for source=csv
    int blob_classes = 8;              // data.classes
    std::vector<int> blob_sizes{400, 310, 240, 185, 143, 111, 86, 50};
    int blob_dim = 16;                 // data.dim
    double blob_separation = 0.75;     // data.separation
    double blob_stddev = 0.5;          // data.stddev
    int test_per_class = 200;          // data.test_per_class

    NoiseKind noise_kind = NoiseKind::symmetric;
    double noise_ratio = 0.0;          // ignored for source=csv (labels arrive corrupted)

    std::vector<int> trunk_widths{64, 32}; // net.trunk, hidden widths after the input
    int experts = 4;                       // net.experts, the m in m+1 heads

    double lr = 0.08;
    double momentum = 0.9;
    double weight_decay = 2e-3;
    std::vector<int> lr_milestones{56, 58}; // global epoch indices, warmup included
    double lr_decay = 0.1;

    Criterion criterion = Criterion::gmm;
    double assumed_noise_rate = -1.0; // small-loss schedule rate; -1 falls back to noise_ratio
    int ramp_epochs = 10;             // select.ramp_epochs
    double gmm_threshold = 0.5;       // select.gmm_threshold
    int fluctuation_window = 3;       // select.window

    double beta = 3.0;  // sample.beta, weight reversal strength
    double alpha = 1.0; // mixup.alpha
    bool mixup_per_batch = false;

    double ssl_threshold = 0.0; // pseudo-label confidence cut; 0 keeps everything
    double ssl_jitter = 0.0;    // gaussian feature jitter sd on unlabeled rows

    // test hooks
    double force_gamma = -1.0;         // >= 0 pins the mixup coefficient
    bool force_vtilde_equal_v = false; // reversed sampler reuses the forward weights

    double effective_noise_rate() const {
        return assumed_noise_rate >= 0.0 ? assumed_noise_rate : noise_ratio;
    }

    // throws ConfigError naming the offending key
    void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& path);
RunConfig load_run_config(const std::string& path);

// Ablation sweep: every arm (mode) runs once per seed on top of a shared
// base config. ablate.config is resolved relative to the manifest file.
struct AblateManifest {
    std::vector<Mode> arms;
    std::vector<uint64_t> seeds;
    std::string config_path;

    void validate() const;
};

AblateManifest parse_ablate_manifest(const std::string& text, const std::string& path);
AblateManifest load_ablate_manifest(const std::string& path);

// Shared low-level parser: key = value lines, '#' comments, duplicate and
// unknown keys rejected. Typed takes throw ConfigError naming the key.
class KeyValues {
public:
    static KeyValues parse_text(const std::string& text, const std::string& path);
    static KeyValues parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string take(const std::string& key);                                  // required key
    std::string take_or(const std::string& key, const std::string& fallback);
    // throws ConfigError on the first (lowest-line) key nobody consumed
    void finish() const;

    const std::string& path() const { return path_; }

private:
    struct Entry {
        std::string value;
        long line = 0;
    };
    std::string path_;
    std::map<std::string, Entry> entries_;
};

// value parsers used by the config loaders; key is for error messages
uint64_t parse_u64_value(const std::string& text, const std::string& key);
int parse_int_value(const std::string& text, const std::string& key);
double parse_double_value(const std::string& text, const std::string& key);
bool parse_bool_value(const std::string& text, const std::string& key);
std::vector<int> parse_int_list(const std::string& text, const std::string& key);
std::vector<uint64_t> parse_u64_list(const std::string& text, const std::string& key);

} // namespace item
