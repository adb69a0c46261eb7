#pragma once

#include <cstdint>
#include <vector>

#include "item/matrix.hpp"
#include "item/net.hpp"
#include "item/rng.hpp"

namespace item {

// Forward class weights v plus their Beta(1, beta) reversal: s holds the raw
// density values, reversed the renormalized sampling distribution vtilde.
// High-frequency classes get small reversed mass and vice versa.
struct ClassWeights {
    std::vector<double> forward;      // v, sums to 1
    std::vector<double> reversed_raw; // s_k = beta * (1 - w_k)^(beta - 1)
    std::vector<double> reversed;     // vtilde = s / sum(s)
    double beta = 1.0;
};

// w_k = u_k / sum(u), counting selected samples by noisy label.
std::vector<double> class_weights(const std::vector<uint8_t>& selected,
                                  const std::vector<int>& noisy_labels, int class_count);

// The Beta(1, beta) density at w; integrates to 1 over [0,1] for beta >= 1.
double beta_density(double w, double beta);

ClassWeights reverse_weights(const std::vector<double>& v, double beta);

// Spread a class distribution uniformly inside each class: selected sample
// of class k gets dist_k / count_k, unselected samples get 0, so the class
// marginal of categorical draws equals dist. A positive-mass class with no
// selected members has its mass shared proportionally among the nonempty
// classes (redistributed flag).
struct DrawWeights {
    std::vector<double> weights;
    bool redistributed = false;
};

DrawWeights per_sample_draw_weights(const std::vector<uint8_t>& selected,
                                    const std::vector<int>& noisy_labels,
                                    const std::vector<double>& class_dist);

// b i.i.d. categorical draws (with replacement) proportional to weights.
std::vector<int> weighted_batch(RandomStream& rng, const std::vector<double>& weights, int b);

// b uniform draws (with replacement) from an index pool.
std::vector<int> uniform_batch(RandomStream& rng, const std::vector<int>& pool, int b);

struct MixupBatch {
    Matrix rows;                      // gamma * a + (1 - gamma) * b, per row
    std::vector<MixedTarget> targets; // (label_a, label_b, gamma)
};

struct MixupOptions {
    double alpha = 1.0;
    bool per_batch = false;     // share one gamma across the batch
    double forced_gamma = -1.0; // >= 0 pins gamma instead of drawing (test hook)
};

// Positional pairing: row j of a mixes with row j of b, one Beta(alpha,
// alpha) draw per row (or per batch).
MixupBatch mixup_batch(const Matrix& features_a, const std::vector<int>& labels_a,
                       const Matrix& features_b, const std::vector<int>& labels_b,
                       const MixupOptions& opts, RandomStream& rng);

} // namespace item
