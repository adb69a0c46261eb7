#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "item/matrix.hpp"
#include "item/net.hpp"

namespace item {

// Per-sample selection bookkeeping for one training run: the current
// selected flags v_i, the expert-loss cache refreshed once per epoch, and a
// bounded history of ensemble predictions for the fluctuation criterion.
struct SelectionState {
    int sample_count = 0;
    int window = 3;
    std::vector<uint8_t> selected;                    // v_i in {0,1}
    std::vector<double> expert_loss;                  // ensemble CE over experts
    std::deque<std::vector<int>> prediction_history;  // oldest first, <= window

    SelectionState() = default;
    SelectionState(int n, int w)
        : sample_count(n), window(w), selected(static_cast<size_t>(n), 1),
          expert_loss(static_cast<size_t>(n), 0.0) {}
};

// CE of the head ensemble per sample: softmax probabilities are averaged
// over every head except excluded_head (the head currently acting as
// classifier), then scored with -log p[label]. excluded_head = -1 ensembles
// all heads; that is the single-head baseline scoring its own training data.
std::vector<double> compute_expert_losses(const MultiHeadNet& net, const Matrix& features,
                                          const std::vector<int>& noisy_labels, int excluded_head);

// Ramp for the small-loss keep fraction: starts at 1 and settles at
// 1 - assumed_noise_rate after ramp_epochs selection epochs.
double keep_fraction_schedule(int epoch, double assumed_noise_rate, int ramp_epochs = 10);

// Keep the ceil(keep_fraction * N) smallest losses; ties broken by lower
// index. Purely rank-based, so any positive affine loss rescaling picks the
// same set.
std::vector<uint8_t> select_small_loss(const std::vector<double>& losses, double keep_fraction);

// Two-component 1-D Gaussian mixture over min-max-normalized losses.
// norm_min/norm_max record the affine map the fit applied, so scoring new
// values reuses it; defaults leave inputs untouched.
struct Gmm2 {
    double pi1 = 0.5, pi2 = 0.5;
    double mu1 = 0.0, mu2 = 1.0;    // sorted: mu1 <= mu2 (low = clean)
    double sigma1 = 0.1, sigma2 = 0.1;
    double norm_min = 0.0, norm_max = 1.0;
    bool degenerate = false;        // all-equal input fallback
    std::vector<double> ll_trace;   // log-likelihood after every EM step
};

Gmm2 fit_gmm2(const std::vector<double>& values, int max_iter = 100, double tol = 1e-6);

// Selected iff the posterior of the low-mean component >= threshold.
std::vector<uint8_t> select_gmm(const std::vector<double>& losses, const Gmm2& gmm,
                                double clean_posterior_threshold = 0.5);

// Append one epoch of predictions, evicting beyond the window.
void append_history(SelectionState& state, std::vector<int> predictions);

// append_history with the net's current ensemble predictions.
void update_history(SelectionState& state, const MultiHeadNet& net, const Matrix& features);

// A sample is noisy iff somewhere in the recorded window its prediction
// matched the noisy label at one epoch and contradicted it at a later one.
// With fewer than 2 recorded epochs everything is selected and
// *warmup_fallback (if given) is set.
std::vector<uint8_t> select_fluctuation(const SelectionState& state,
                                        const std::vector<int>& noisy_labels,
                                        bool* warmup_fallback = nullptr);

// Selection quality against ground truth, per class: precision over the
// selected members labeled k, recall over the genuinely clean members of k,
// and their harmonic mean. 0/0 counts as 0 throughout.
struct ClassSelectionMetrics {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> fscore;
    double macro_f = 0.0;
};

ClassSelectionMetrics selection_metrics(const std::vector<uint8_t>& selected,
                                        const std::vector<int>& noisy_labels,
                                        const std::vector<int>& true_labels, int class_count);

// Max over min per-class count among selected samples, by noisy class.
// degenerate marks an empty class (ratio then spans the nonzero classes
// only; 0.0 when nothing is selected at all).
struct ImbalanceResult {
    double ratio = 0.0;
    bool degenerate = false;
};

ImbalanceResult imbalance_ratio(const std::vector<uint8_t>& selected,
                                const std::vector<int>& noisy_labels, int class_count);

} // namespace item
