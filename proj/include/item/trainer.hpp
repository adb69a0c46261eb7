#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "item/config.hpp"
#include "item/dataset.hpp"
#include "item/metrics_io.hpp"
#include "item/net.hpp"
#include "item/rng.hpp"

namespace item {

// The slice of a dataset the training loops are allowed to touch: features
// and observed labels only. Ground truth stays outside and is consulted
// solely when metrics are computed.
struct TrainView {
    const Matrix& features;
    const std::vector<int>& noisy_labels;
    int class_count = 0;

    int size() const { return features.rows; }
};

struct EvalResult {
    double accuracy = 0.0;
    std::vector<double> per_class; // 0 for classes absent from the label set
};

// Ensemble prediction scored against the given labels.
EvalResult evaluate(const MultiHeadNet& net, const Matrix& features,
                    const std::vector<int>& labels, int class_count);

// Plain-CE warmup: each epoch draws one head uniformly and trains it over
// the full (noisy) set in shuffled mini-batches. Returns the per-head draw
// tally; optionally appends "warmup <t> head=<h>" events.
std::vector<long> warmup(MultiHeadNet& net, SgdOptimizer& opt, const TrainView& view,
                         int warmup_epochs, int batch_size, int first_epoch,
                         RandomStream& head_rng, RandomStream& shuffle_rng,
                         std::vector<std::string>* events = nullptr);

struct RunResult {
    MetricsLog log;
    MultiHeadNet net;
    SgdOptimizer opt;
    LabeledDataset train_set;
    LabeledDataset test_set;
    uint64_t train_dataset_hash = 0;
    std::vector<long> head_tally; // classifier draws across warmup + training
};

// The full pipeline for one RunConfig: build data, warm up, then run
// (select -> weight -> train) epochs in the configured mode, logging metrics
// every main-loop epoch. Pure function of the config; byte-identical
// MetricsLog on repeat.
RunResult run_training(const RunConfig& config);

} // namespace item
