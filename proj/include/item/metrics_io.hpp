#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace item {

// One main-loop epoch of diagnostics. Per-class vectors all have length K;
// head_draws has one slot per head and counts classifier draws made by this
// epoch's training iterations.
struct EpochMetrics {
    int epoch = 0; // global index (warmup epochs are not logged)
    double train_loss = 0.0;
    double test_accuracy = 0.0;
    std::vector<double> class_test_accuracy;
    long selected_count = 0;
    std::vector<long> class_selected;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> fscore;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f = 0.0;
    double imbalance = 0.0;
    bool imbalance_degenerate = false;
    bool selection_fallback = false; // empty selection, trained on everything
    std::vector<long> head_draws;
    std::vector<double> v;      // forward class weights
    std::vector<double> s;      // raw reversed values
    std::vector<double> vtilde; // reversed sampling distribution
};

struct MetricsLog {
    int class_count = 0;
    int head_count = 0;
    std::vector<EpochMetrics> epochs;
    // chronological trace of phase events ("epoch 12 select head=3", ...);
    // not serialized, exists so tests can assert per-epoch ordering
    std::vector<std::string> events;
};

// CSV layout: one row per (epoch, class) followed by one summary row with
// class = -1. Per-class rows carry the class-scoped columns; run-scoped
// columns (train_loss, imbalance, head_draws) live on the summary row and
// are empty elsewhere, and vice versa. Floats use 17 significant digits.
std::string metrics_csv(const MetricsLog& log);
void write_metrics_csv(const MetricsLog& log, const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// Minimal JSON emission with caller-controlled key order, enough for the
// summary and ablation outputs. Numbers use 17 significant digits.
std::string json_escape(const std::string& s);
std::string json_number(double v);
std::string json_array(const std::vector<double>& v);
std::string json_array(const std::vector<long>& v);

class JsonObject {
public:
    JsonObject& field(const std::string& name, const std::string& text); // quoted + escaped
    JsonObject& field(const std::string& name, double v);
    JsonObject& field(const std::string& name, long long v);
    JsonObject& field(const std::string& name, uint64_t v);
    JsonObject& field(const std::string& name, bool v);
    JsonObject& field_raw(const std::string& name, const std::string& json); // verbatim
    std::string str() const; // the complete object, no trailing newline

private:
    std::string body_;
};

} // namespace item
