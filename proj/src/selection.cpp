#include "item/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "item/errors.hpp"
#include "item/kernels.hpp"

namespace item {

std::vector<double> compute_expert_losses(const MultiHeadNet& net, const Matrix& features,
                                          const std::vector<int>& noisy_labels, int excluded_head) {
    const int n = features.rows;
    if (static_cast<int>(noisy_labels.size()) != n)
        throw ValidationError("noisy_labels", "label count does not match feature rows");
    if (excluded_head < -1 || excluded_head >= net.head_count())
        throw ValidationError("excluded_head", "head index out of range");
    const int used = net.head_count() - (excluded_head >= 0 ? 1 : 0);
    if (used < 1) throw ValidationError("excluded_head", "no heads left to score with");

    const int k = net.class_count;
    const auto logits = forward_all_heads(net, features);
    Matrix mean_p(n, k);
    Matrix tmp(n, k);
    for (int h = 0; h < net.head_count(); ++h) {
        if (h == excluded_head) continue;
        const Matrix& lg = logits[static_cast<size_t>(h)];
        kernels::softmax_rows(lg.data.data(), n, k, tmp.data.data());
        for (size_t i = 0; i < mean_p.data.size(); ++i) mean_p.data[i] += tmp.data[i];
    }
    const double inv = 1.0 / used;
    // loss of the head ensemble, not the mean of per-head losses: undertrained
    // individual heads must not mask rows the combined expert already explains
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double p = mean_p.row(i)[noisy_labels[static_cast<size_t>(i)]] * inv;
        out[static_cast<size_t>(i)] = -std::log(std::max(p, 1e-300));
    }
    return out;
}

double keep_fraction_schedule(int epoch, double assumed_noise_rate, int ramp_epochs) {
    if (epoch < 0) throw ValidationError("epoch", "epoch must be nonnegative");
    if (!(assumed_noise_rate >= 0.0) || assumed_noise_rate >= 1.0)
        throw ValidationError("assumed_noise_rate", "rate must lie in [0, 1)");
    if (ramp_epochs < 1) throw ValidationError("ramp_epochs", "ramp must be at least 1 epoch");
    const double t = std::min(static_cast<double>(epoch) / ramp_epochs, 1.0);
    return 1.0 - assumed_noise_rate * t;
}

std::vector<uint8_t> select_small_loss(const std::vector<double>& losses, double keep_fraction) {
    if (losses.empty()) throw ValidationError("losses", "empty loss vector");
    if (!(keep_fraction > 0.0) || keep_fraction > 1.0)
        throw ValidationError("keep_fraction", "must lie in (0, 1]");
    const size_t n = losses.size();
    const size_t keep = std::min(
        n, static_cast<size_t>(std::ceil(keep_fraction * static_cast<double>(n))));
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&losses](size_t a, size_t b) {
        if (losses[a] != losses[b]) return losses[a] < losses[b];
        return a < b;
    });
    std::vector<uint8_t> selected(n, 0);
    for (size_t i = 0; i < keep; ++i) selected[order[i]] = 1;
    return selected;
}

namespace {

double log_norm_pdf(double x, double mu, double sigma) {
    static const double log_sqrt_2pi = 0.5 * std::log(2.0 * 3.14159265358979323846);
    const double z = (x - mu) / sigma;
    return -log_sqrt_2pi - std::log(sigma) - 0.5 * z * z;
}

// posterior of component 1 given log joint densities
double posterior1(double lp1, double lp2) {
    return 1.0 / (1.0 + std::exp(lp2 - lp1));
}

constexpr double kSigmaFloor = 1e-4;

} // namespace

Gmm2 fit_gmm2(const std::vector<double>& values, int max_iter, double tol) {
    if (values.size() < 4) throw ValidationError("values", "need at least 4 values to fit");
    const size_t n = values.size();
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    const double mn = *mn_it, mx = *mx_it;

    Gmm2 g;
    if (mx - mn < 1e-12) {
        // all values identical: nothing to separate
        g.degenerate = true;
        g.norm_min = mn;
        g.norm_max = mn + 1.0;
        g.mu1 = g.mu2 = 0.0;
        g.sigma1 = g.sigma2 = kSigmaFloor;
        return g;
    }
    g.norm_min = mn;
    g.norm_max = mx;

    std::vector<double> x(n);
    const double span = mx - mn;
    for (size_t i = 0; i < n; ++i) x[i] = (values[i] - mn) / span;

    // median-split init
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const size_t half = n / 2;
    auto moments = [](const double* v, size_t count) {
        double mean = 0.0;
        for (size_t i = 0; i < count; ++i) mean += v[i];
        mean /= static_cast<double>(count);
        double var = 0.0;
        for (size_t i = 0; i < count; ++i) var += (v[i] - mean) * (v[i] - mean);
        var /= static_cast<double>(count);
        return std::pair<double, double>(mean, std::max(std::sqrt(var), kSigmaFloor));
    };
    auto [m1, s1] = moments(sorted.data(), half);
    auto [m2, s2] = moments(sorted.data() + half, n - half);
    g.mu1 = m1;
    g.sigma1 = s1;
    g.mu2 = m2;
    g.sigma2 = s2;
    g.pi1 = g.pi2 = 0.5;

    std::vector<double> r1(n);
    for (int iter = 0; iter < max_iter; ++iter) {
        // E step + log-likelihood under the current parameters
        double ll = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double lp1 = std::log(g.pi1) + log_norm_pdf(x[i], g.mu1, g.sigma1);
            const double lp2 = std::log(g.pi2) + log_norm_pdf(x[i], g.mu2, g.sigma2);
            const double m = std::max(lp1, lp2);
            ll += m + std::log(std::exp(lp1 - m) + std::exp(lp2 - m));
            r1[i] = posterior1(lp1, lp2);
        }
        g.ll_trace.push_back(ll);
        if (g.ll_trace.size() >= 2 && ll - g.ll_trace[g.ll_trace.size() - 2] < tol) break;

        // M step
        double w1 = 0.0, mu1 = 0.0, mu2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            w1 += r1[i];
            mu1 += r1[i] * x[i];
            mu2 += (1.0 - r1[i]) * x[i];
        }
        const double w2 = static_cast<double>(n) - w1;
        const double eps = 1e-9;
        mu1 /= std::max(w1, eps);
        mu2 /= std::max(w2, eps);
        double v1 = 0.0, v2 = 0.0;
        for (size_t i = 0; i < n; ++i) {
            v1 += r1[i] * (x[i] - mu1) * (x[i] - mu1);
            v2 += (1.0 - r1[i]) * (x[i] - mu2) * (x[i] - mu2);
        }
        g.pi1 = std::clamp(w1 / static_cast<double>(n), eps, 1.0 - eps);
        g.pi2 = 1.0 - g.pi1;
        g.mu1 = mu1;
        g.mu2 = mu2;
        g.sigma1 = std::max(std::sqrt(v1 / std::max(w1, eps)), kSigmaFloor);
        g.sigma2 = std::max(std::sqrt(v2 / std::max(w2, eps)), kSigmaFloor);
    }

    if (g.mu1 > g.mu2) {
        std::swap(g.mu1, g.mu2);
        std::swap(g.sigma1, g.sigma2);
        std::swap(g.pi1, g.pi2);
    }
    return g;
}

std::vector<uint8_t> select_gmm(const std::vector<double>& losses, const Gmm2& gmm,
                                double clean_posterior_threshold) {
    if (!(clean_posterior_threshold > 0.0) || clean_posterior_threshold >= 1.0)
        throw ValidationError("clean_posterior_threshold", "must lie in (0, 1)");
    const double span = gmm.norm_max - gmm.norm_min;
    if (!(span > 0.0)) throw ValidationError("gmm", "norm_max must exceed norm_min");
    std::vector<uint8_t> selected(losses.size(), 0);
    for (size_t i = 0; i < losses.size(); ++i) {
        const double z = (losses[i] - gmm.norm_min) / span;
        const double lp1 = std::log(gmm.pi1) + log_norm_pdf(z, gmm.mu1, gmm.sigma1);
        const double lp2 = std::log(gmm.pi2) + log_norm_pdf(z, gmm.mu2, gmm.sigma2);
        selected[i] = posterior1(lp1, lp2) >= clean_posterior_threshold ? 1 : 0;
    }
    return selected;
}

void append_history(SelectionState& state, std::vector<int> predictions) {
    if (static_cast<int>(predictions.size()) != state.sample_count)
        throw ValidationError("predictions", "prediction count does not match sample count");
    state.prediction_history.push_back(std::move(predictions));
    while (static_cast<int>(state.prediction_history.size()) > state.window)
        state.prediction_history.pop_front();
}

void update_history(SelectionState& state, const MultiHeadNet& net, const Matrix& features) {
    append_history(state, ensemble_predict(net, features));
}

std::vector<uint8_t> select_fluctuation(const SelectionState& state,
                                        const std::vector<int>& noisy_labels,
                                        bool* warmup_fallback) {
    const size_t n = noisy_labels.size();
    if (static_cast<int>(n) != state.sample_count)
        throw ValidationError("noisy_labels", "label count does not match sample count");
    std::vector<uint8_t> selected(n, 1);
    const bool warm = state.prediction_history.size() < 2;
    if (warmup_fallback) *warmup_fallback = warm;
    if (warm) return selected;

    for (size_t i = 0; i < n; ++i) {
        bool matched = false;
        for (const auto& epoch_preds : state.prediction_history) {
            if (epoch_preds[i] == noisy_labels[i]) {
                matched = true;
            } else if (matched) {
                selected[i] = 0; // matched earlier, contradicts now: fluctuation
                break;
            }
        }
    }
    return selected;
}

ClassSelectionMetrics selection_metrics(const std::vector<uint8_t>& selected,
                                        const std::vector<int>& noisy_labels,
                                        const std::vector<int>& true_labels, int class_count) {
    const size_t n = selected.size();
    if (noisy_labels.size() != n || true_labels.size() != n)
        throw ValidationError("selected", "input lengths differ");
    if (class_count < 1) throw ValidationError("class_count", "need at least one class");

    std::vector<long> sel_clean(static_cast<size_t>(class_count), 0);
    std::vector<long> sel_labeled(static_cast<size_t>(class_count), 0);
    std::vector<long> clean_total(static_cast<size_t>(class_count), 0);
    for (size_t i = 0; i < n; ++i) {
        const int yt = true_labels[i];
        const int yn = noisy_labels[i];
        const bool clean = yt == yn;
        if (clean) ++clean_total[static_cast<size_t>(yt)];
        if (selected[i]) {
            ++sel_labeled[static_cast<size_t>(yn)];
            if (clean) ++sel_clean[static_cast<size_t>(yn)];
        }
    }

    ClassSelectionMetrics m;
    m.precision.resize(static_cast<size_t>(class_count), 0.0);
    m.recall.resize(static_cast<size_t>(class_count), 0.0);
    m.fscore.resize(static_cast<size_t>(class_count), 0.0);
    double fsum = 0.0;
    for (int c = 0; c < class_count; ++c) {
        const size_t k = static_cast<size_t>(c);
        const double p = sel_labeled[k] > 0 ? static_cast<double>(sel_clean[k]) / sel_labeled[k] : 0.0;
        const double r = clean_total[k] > 0 ? static_cast<double>(sel_clean[k]) / clean_total[k] : 0.0;
        m.precision[k] = p;
        m.recall[k] = r;
        m.fscore[k] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        fsum += m.fscore[k];
    }
    m.macro_f = fsum / class_count;
    return m;
}

ImbalanceResult imbalance_ratio(const std::vector<uint8_t>& selected,
                                const std::vector<int>& noisy_labels, int class_count) {
    if (noisy_labels.size() != selected.size())
        throw ValidationError("noisy_labels", "input lengths differ");
    std::vector<long> counts(static_cast<size_t>(class_count), 0);
    for (size_t i = 0; i < selected.size(); ++i)
        if (selected[i]) ++counts[static_cast<size_t>(noisy_labels[i])];

    long mx = 0;
    long mn_nonzero = 0;
    bool any_zero = false;
    for (long c : counts) {
        mx = std::max(mx, c);
        if (c == 0) {
            any_zero = true;
        } else if (mn_nonzero == 0 || c < mn_nonzero) {
            mn_nonzero = c;
        }
    }
    ImbalanceResult r;
    r.degenerate = any_zero;
    r.ratio = mn_nonzero > 0 ? static_cast<double>(mx) / mn_nonzero : 0.0;
    return r;
}

} // namespace item
