#include "item/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "item/errors.hpp"

namespace item {

std::vector<double> class_weights(const std::vector<uint8_t>& selected,
                                  const std::vector<int>& noisy_labels, int class_count) {
    if (selected.size() != noisy_labels.size())
        throw ValidationError("selected", "input lengths differ");
    if (class_count < 1) throw ValidationError("class_count", "need at least one class");
    std::vector<double> counts(static_cast<size_t>(class_count), 0.0);
    double total = 0.0;
    for (size_t i = 0; i < selected.size(); ++i) {
        if (!selected[i]) continue;
        counts[static_cast<size_t>(noisy_labels[i])] += 1.0;
        total += 1.0;
    }
    if (total == 0.0) throw ValidationError("selected", "empty selection");
    for (double& c : counts) c /= total;
    return counts;
}

double beta_density(double w, double beta) {
    if (!(beta >= 1.0)) throw ValidationError("beta", "beta must be at least 1");
    if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("w", "weight must lie in [0,1]");
    // Beta(1, beta) pdf; 1/B(1, beta) = beta
    return beta * std::pow(1.0 - w, beta - 1.0);
}

ClassWeights reverse_weights(const std::vector<double>& v, double beta) {
    ClassWeights cw;
    cw.beta = beta;
    cw.forward = v;
    cw.reversed_raw.resize(v.size());
    double total = 0.0;
    for (size_t k = 0; k < v.size(); ++k) {
        cw.reversed_raw[k] = beta_density(v[k], beta);
        total += cw.reversed_raw[k];
    }
    if (!(total > 0.0))
        throw ValidationError("v", "reversed mass vanished; cannot form a distribution");
    cw.reversed.resize(v.size());
    for (size_t k = 0; k < v.size(); ++k) cw.reversed[k] = cw.reversed_raw[k] / total;
    return cw;
}

DrawWeights per_sample_draw_weights(const std::vector<uint8_t>& selected,
                                    const std::vector<int>& noisy_labels,
                                    const std::vector<double>& class_dist) {
    if (selected.size() != noisy_labels.size())
        throw ValidationError("selected", "input lengths differ");
    const int k = static_cast<int>(class_dist.size());
    double dist_sum = 0.0;
    for (double d : class_dist) {
        if (!(d >= 0.0)) throw ValidationError("class_dist", "negative class mass");
        dist_sum += d;
    }
    if (std::abs(dist_sum - 1.0) > 1e-9)
        throw ValidationError("class_dist", "distribution must sum to 1");

    std::vector<long> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < selected.size(); ++i)
        if (selected[i]) ++counts[static_cast<size_t>(noisy_labels[i])];

    DrawWeights out;
    // mass aimed at empty classes gets shared among the populated ones
    double populated_mass = 0.0;
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] > 0) {
            populated_mass += class_dist[static_cast<size_t>(c)];
        } else if (class_dist[static_cast<size_t>(c)] > 0.0) {
            out.redistributed = true;
        }
    }
    long selected_total = 0;
    for (long c : counts) selected_total += c;
    if (selected_total == 0) throw ValidationError("selected", "empty selection");

    std::vector<double> effective(static_cast<size_t>(k), 0.0);
    if (populated_mass > 0.0) {
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0)
                effective[static_cast<size_t>(c)] =
                    out.redistributed ? class_dist[static_cast<size_t>(c)] / populated_mass
                                      : class_dist[static_cast<size_t>(c)];
        }
    } else {
        // every populated class was assigned zero mass (e.g. one class holds
        // the whole selection and the reversed weights zero it out); fall
        // back to spreading the distribution uniformly over populated classes
        out.redistributed = true;
        long populated = 0;
        for (long c : counts)
            if (c > 0) ++populated;
        for (int c = 0; c < k; ++c)
            if (counts[static_cast<size_t>(c)] > 0)
                effective[static_cast<size_t>(c)] = 1.0 / static_cast<double>(populated);
    }

    out.weights.assign(selected.size(), 0.0);
    for (size_t i = 0; i < selected.size(); ++i) {
        if (!selected[i]) continue;
        const size_t c = static_cast<size_t>(noisy_labels[i]);
        if (counts[c] > 0) out.weights[i] = effective[c] / static_cast<double>(counts[c]);
    }
    return out;
}

std::vector<int> weighted_batch(RandomStream& rng, const std::vector<double>& weights, int b) {
    if (b < 1) throw ValidationError("b", "batch size must be positive");
    std::vector<double> cum(weights.size());
    double total = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw ValidationError("weights", "negative weight");
        total += weights[i];
        cum[i] = total;
    }
    if (!(total > 0.0)) throw ValidationError("weights", "all weights are zero");

    std::vector<int> idx(static_cast<size_t>(b));
    for (int j = 0; j < b; ++j) {
        const double u = rng.uniform01() * total;
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        size_t pick = static_cast<size_t>(it - cum.begin());
        if (pick >= weights.size()) pick = weights.size() - 1;
        // never land on a zero-weight slot (possible via duplicate cumsums)
        while (weights[pick] == 0.0 && pick + 1 < weights.size()) ++pick;
        while (weights[pick] == 0.0 && pick > 0) --pick;
        idx[static_cast<size_t>(j)] = static_cast<int>(pick);
    }
    return idx;
}

std::vector<int> uniform_batch(RandomStream& rng, const std::vector<int>& pool, int b) {
    if (pool.empty()) throw ValidationError("pool", "empty index pool");
    if (b < 1) throw ValidationError("b", "batch size must be positive");
    std::vector<int> idx(static_cast<size_t>(b));
    for (int j = 0; j < b; ++j)
        idx[static_cast<size_t>(j)] = pool[static_cast<size_t>(rng.uniform_below(pool.size()))];
    return idx;
}

MixupBatch mixup_batch(const Matrix& features_a, const std::vector<int>& labels_a,
                       const Matrix& features_b, const std::vector<int>& labels_b,
                       const MixupOptions& opts, RandomStream& rng) {
    const int n = features_a.rows;
    if (features_b.rows != n || static_cast<int>(labels_a.size()) != n ||
        static_cast<int>(labels_b.size()) != n)
        throw ValidationError("batch", "batch sizes differ");
    if (features_b.cols != features_a.cols)
        throw ValidationError("batch", "feature dimensions differ");
    if (!(opts.alpha > 0.0)) throw ValidationError("alpha", "alpha must be positive");
    if (opts.forced_gamma >= 0.0 && opts.forced_gamma > 1.0)
        throw ValidationError("forced_gamma", "must lie in [0,1]");

    MixupBatch out;
    out.rows = Matrix(n, features_a.cols);
    out.targets.resize(static_cast<size_t>(n));
    double shared = -1.0;
    if (opts.forced_gamma >= 0.0) {
        shared = opts.forced_gamma;
    } else if (opts.per_batch) {
        shared = rng.beta(opts.alpha, opts.alpha);
    }
    for (int r = 0; r < n; ++r) {
        const double g = shared >= 0.0 ? shared : rng.beta(opts.alpha, opts.alpha);
        const double* a = features_a.row(r);
        const double* b = features_b.row(r);
        double* m = out.rows.row(r);
        for (int j = 0; j < features_a.cols; ++j) m[j] = g * a[j] + (1.0 - g) * b[j];
        out.targets[static_cast<size_t>(r)] = {labels_a[static_cast<size_t>(r)],
                                               labels_b[static_cast<size_t>(r)], g};
    }
    return out;
}

} // namespace item
