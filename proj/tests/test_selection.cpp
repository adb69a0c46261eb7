#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "item/errors.hpp"
#include "item/net.hpp"
#include "item/rng.hpp"
#include "item/selection.hpp"

using namespace item;

namespace {

// counting oracle written from the definitions, one full scan per class
ClassSelectionMetrics brute_metrics(const std::vector<uint8_t>& sel, const std::vector<int>& ny,
                                    const std::vector<int>& ty, int class_count) {
    ClassSelectionMetrics m;
    m.precision.assign(static_cast<size_t>(class_count), 0.0);
    m.recall.assign(static_cast<size_t>(class_count), 0.0);
    m.fscore.assign(static_cast<size_t>(class_count), 0.0);
    for (int c = 0; c < class_count; ++c) {
        long sel_c = 0, sel_clean_c = 0, clean_c = 0;
        for (size_t i = 0; i < sel.size(); ++i) {
            if (sel[i] && ny[i] == c) {
                ++sel_c;
                if (ty[i] == c) ++sel_clean_c;
            }
            if (ny[i] == c && ty[i] == c) ++clean_c;
        }
        const double p = sel_c ? static_cast<double>(sel_clean_c) / sel_c : 0.0;
        const double r = clean_c ? static_cast<double>(sel_clean_c) / clean_c : 0.0;
        m.precision[static_cast<size_t>(c)] = p;
        m.recall[static_cast<size_t>(c)] = r;
        m.fscore[static_cast<size_t>(c)] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        m.macro_f += m.fscore[static_cast<size_t>(c)] / class_count;
    }
    return m;
}

MultiHeadNet bias_only_net(int class_count, const std::vector<std::vector<double>>& head_biases) {
    MultiHeadNet net = make_net(2, {4}, class_count,
                                static_cast<int>(head_biases.size()) - 1, 5);
    for (DenseLayer& l : net.trunk) std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
    for (size_t h = 0; h < head_biases.size(); ++h) {
        std::fill(net.heads[h].w.data.begin(), net.heads[h].w.data.end(), 0.0);
        net.heads[h].b = head_biases[h];
    }
    return net;
}

} // namespace

TEST_SUITE("selection") {

TEST_CASE("expert losses score the ensemble of non-excluded heads") {
    const double l3 = std::log(3.0);
    // logits reduce to head biases; per-head softmax for label 0 is then
    // 1/2, 3/4, 1/4 respectively, and the loss is -log of their mean
    const MultiHeadNet net = bias_only_net(2, {{0.0, 0.0}, {l3, 0.0}, {0.0, l3}});
    const Matrix x(1, 2);
    const std::vector<int> y{0};

    CHECK(compute_expert_losses(net, x, y, -1)[0] ==
          doctest::Approx(-std::log((0.5 + 0.75 + 0.25) / 3)).epsilon(1e-12));
    CHECK(compute_expert_losses(net, x, y, 0)[0] ==
          doctest::Approx(-std::log((0.75 + 0.25) / 2)).epsilon(1e-12));
    CHECK(compute_expert_losses(net, x, y, 1)[0] ==
          doctest::Approx(-std::log((0.5 + 0.25) / 2)).epsilon(1e-12));
    CHECK(compute_expert_losses(net, x, y, 2)[0] ==
          doctest::Approx(-std::log((0.5 + 0.75) / 2)).epsilon(1e-12));
}

TEST_CASE("expert losses match a per-head forward pass") {
    const MultiHeadNet net = make_net(6, {12, 8}, 4, 3, 31);
    RandomStream rng(77);
    Matrix x(9, 6);
    for (double& v : x.data) v = rng.normal();
    std::vector<int> y(9);
    for (int& v : y) v = static_cast<int>(rng.uniform_below(4));

    const int exclude = 2;
    const auto got = compute_expert_losses(net, x, y, exclude);
    for (int i = 0; i < 9; ++i) {
        double mean_p = 0.0;
        for (int h = 0; h < net.head_count(); ++h) {
            if (h == exclude) continue;
            const Matrix logits = forward(net, x, h);
            double mx = logits.at(i, 0);
            for (int c = 1; c < 4; ++c) mx = std::max(mx, logits.at(i, c));
            double z = 0.0;
            for (int c = 0; c < 4; ++c) z += std::exp(logits.at(i, c) - mx);
            mean_p += std::exp(logits.at(i, y[static_cast<size_t>(i)]) - mx) / z;
        }
        mean_p /= net.head_count() - 1;
        CHECK(got[static_cast<size_t>(i)] == doctest::Approx(-std::log(mean_p)).epsilon(1e-10));
    }
}

TEST_CASE("expert loss guard rails") {
    const MultiHeadNet net = make_net(2, {4}, 2, 0, 1); // single head
    const Matrix x(1, 2);
    CHECK_THROWS_AS(compute_expert_losses(net, x, {0}, 0), ValidationError);
    CHECK_THROWS_AS(compute_expert_losses(net, x, {0}, 5), ValidationError);
    CHECK_THROWS_AS(compute_expert_losses(net, x, {0, 1}, -1), ValidationError);
    CHECK(compute_expert_losses(net, x, {0}, -1).size() == 1);
}

TEST_CASE("keep fraction ramps from 1 down to 1 - rate") {
    CHECK(keep_fraction_schedule(0, 0.4, 10) == doctest::Approx(1.0));
    CHECK(keep_fraction_schedule(5, 0.4, 10) == doctest::Approx(0.8));
    CHECK(keep_fraction_schedule(10, 0.4, 10) == doctest::Approx(0.6));
    CHECK(keep_fraction_schedule(200, 0.4, 10) == doctest::Approx(0.6));
    CHECK(keep_fraction_schedule(3, 0.0, 10) == doctest::Approx(1.0));
    CHECK_THROWS_AS(keep_fraction_schedule(-1, 0.4, 10), ValidationError);
    CHECK_THROWS_AS(keep_fraction_schedule(0, 1.0, 10), ValidationError);
    CHECK_THROWS_AS(keep_fraction_schedule(0, 0.4, 0), ValidationError);
}

TEST_CASE("small-loss keeps the smallest and rounds up") {
    CHECK(select_small_loss({0.1, 5.0, 0.2, 4.0}, 0.5) == std::vector<uint8_t>{1, 0, 1, 0});
    CHECK(select_small_loss({0.1, 5.0, 0.2, 4.0}, 1.0) == std::vector<uint8_t>{1, 1, 1, 1});
    // ceil(0.3 * 4) = 2
    CHECK(select_small_loss({4.0, 1.0, 2.0, 3.0}, 0.3) == std::vector<uint8_t>{0, 1, 1, 0});
    // ties break toward the lower index
    CHECK(select_small_loss({1.0, 1.0, 1.0}, 1.0 / 3.0) == std::vector<uint8_t>{1, 0, 0});
    CHECK_THROWS_AS(select_small_loss({}, 0.5), ValidationError);
    CHECK_THROWS_AS(select_small_loss({1.0}, 0.0), ValidationError);
    CHECK_THROWS_AS(select_small_loss({1.0}, 1.5), ValidationError);
}

TEST_CASE("small-loss is rank-based with the advertised count") {
    RandomStream rng(5150);
    std::vector<double> losses(1525);
    for (double& v : losses) v = rng.uniform01() * 9.0;
    const auto sel = select_small_loss(losses, 0.6);
    long count = 0;
    double max_kept = -1.0, min_dropped = 1e300;
    for (size_t i = 0; i < losses.size(); ++i) {
        if (sel[i]) {
            ++count;
            max_kept = std::max(max_kept, losses[i]);
        } else {
            min_dropped = std::min(min_dropped, losses[i]);
        }
    }
    CHECK(count == 915); // ceil(0.6 * 1525)
    CHECK(max_kept <= min_dropped);

    std::vector<double> scaled(losses.size());
    for (size_t i = 0; i < losses.size(); ++i) scaled[i] = 3.0 * losses[i] + 7.0;
    CHECK(select_small_loss(scaled, 0.6) == sel);
}

TEST_CASE("gmm separates two delta clusters") {
    std::vector<double> losses(100, 0.0);
    std::fill(losses.begin() + 50, losses.end(), 1.0);
    const Gmm2 g = fit_gmm2(losses);
    CHECK(!g.degenerate);
    CHECK(g.pi1 == doctest::Approx(0.5).epsilon(0.02));
    CHECK(g.mu1 == doctest::Approx(0.0).epsilon(0.02));
    CHECK(g.mu2 == doctest::Approx(1.0).epsilon(0.02));
    const auto sel = select_gmm(losses, g, 0.5);
    for (size_t i = 0; i < 50; ++i) CHECK(sel[i] == 1);
    for (size_t i = 50; i < 100; ++i) CHECK(sel[i] == 0);
}

TEST_CASE("gmm recovers two well-separated normal clusters") {
    RandomStream rng(808);
    std::vector<double> losses;
    for (int i = 0; i < 300; ++i) losses.push_back(0.1 + 0.02 * rng.normal());
    for (int i = 0; i < 300; ++i) losses.push_back(0.9 + 0.02 * rng.normal());
    const Gmm2 g = fit_gmm2(losses);
    const double span = g.norm_max - g.norm_min;
    CHECK(g.norm_min + g.mu1 * span == doctest::Approx(0.1).epsilon(0.02));
    CHECK(g.norm_min + g.mu2 * span == doctest::Approx(0.9).epsilon(0.02));
    CHECK(g.pi1 == doctest::Approx(0.5).epsilon(0.02));
    const auto sel = select_gmm(losses, g, 0.5);
    long wrong = 0;
    for (size_t i = 0; i < losses.size(); ++i) wrong += sel[i] != (i < 300 ? 1 : 0);
    CHECK(wrong == 0);
}

TEST_CASE("em log-likelihood never decreases") {
    RandomStream rng(4242);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> values;
        const int n1 = 20 + static_cast<int>(rng.uniform_below(200));
        const int n2 = 20 + static_cast<int>(rng.uniform_below(200));
        const double mu1 = rng.uniform01() * 4.0;
        const double mu2 = rng.uniform01() * 4.0;
        const double s1 = 0.05 + rng.uniform01();
        const double s2 = 0.05 + rng.uniform01();
        for (int i = 0; i < n1; ++i) values.push_back(mu1 + s1 * rng.normal());
        for (int i = 0; i < n2; ++i) values.push_back(mu2 + s2 * rng.normal());
        const Gmm2 g = fit_gmm2(values);
        REQUIRE(g.ll_trace.size() >= 1);
        for (size_t i = 1; i < g.ll_trace.size(); ++i)
            CHECK(g.ll_trace[i] >= g.ll_trace[i - 1] - 1e-9);
        CHECK(g.mu1 <= g.mu2);
    }
}

TEST_CASE("gmm degenerate and error handling") {
    const std::vector<double> flat(10, 0.7);
    const Gmm2 g = fit_gmm2(flat);
    CHECK(g.degenerate);
    const auto sel = select_gmm(flat, g, 0.5);
    CHECK(std::count(sel.begin(), sel.end(), 1) == 10);
    CHECK_THROWS_AS(fit_gmm2({1.0, 2.0, 3.0}), ValidationError);
    CHECK_THROWS_AS(select_gmm(flat, g, 0.0), ValidationError);
    CHECK_THROWS_AS(select_gmm(flat, g, 1.0), ValidationError);
}

TEST_CASE("fluctuation flags match-then-contradict samples") {
    SelectionState state(4, 3);
    const std::vector<int> labels{0, 0, 0, 0};
    // A: match then mismatch, B: stable match, C: never matched,
    // D: mismatch then match (no fluctuation)
    append_history(state, {0, 0, 1, 1});
    append_history(state, {1, 0, 1, 0});
    CHECK(select_fluctuation(state, labels) == std::vector<uint8_t>{0, 1, 1, 1});
}

TEST_CASE("fluctuation looks across the whole window") {
    SelectionState state(1, 3);
    append_history(state, {0});
    append_history(state, {0});
    append_history(state, {1}); // match at the start, contradiction two epochs later
    CHECK(select_fluctuation(state, {0}) == std::vector<uint8_t>{0});
}

TEST_CASE("window eviction forgives old fluctuations") {
    SelectionState state(1, 2);
    append_history(state, {0});
    append_history(state, {1});
    append_history(state, {1}); // the matching epoch has been evicted
    CHECK(state.prediction_history.size() == 2);
    CHECK(select_fluctuation(state, {0}) == std::vector<uint8_t>{1});
}

TEST_CASE("fluctuation needs two recorded epochs") {
    SelectionState state(3, 3);
    bool fallback = false;
    CHECK(select_fluctuation(state, {0, 1, 2}, &fallback) == std::vector<uint8_t>{1, 1, 1});
    CHECK(fallback);
    append_history(state, {0, 1, 2});
    CHECK(select_fluctuation(state, {0, 1, 2}, &fallback) == std::vector<uint8_t>{1, 1, 1});
    CHECK(fallback);
    append_history(state, {0, 1, 2});
    select_fluctuation(state, {0, 1, 2}, &fallback);
    CHECK(!fallback);
    CHECK_THROWS_AS(select_fluctuation(state, {0, 1}), ValidationError);
    CHECK_THROWS_AS(append_history(state, {0, 1}), ValidationError);
}

TEST_CASE("selection metrics hand case") {
    const std::vector<uint8_t> sel{1, 1, 0, 1, 0, 0};
    const std::vector<int> ny{0, 0, 0, 1, 1, 1};
    const std::vector<int> ty{0, 1, 0, 1, 1, 0};
    const ClassSelectionMetrics m = selection_metrics(sel, ny, ty, 2);
    CHECK(m.precision[0] == doctest::Approx(0.5));
    CHECK(m.recall[0] == doctest::Approx(0.5));
    CHECK(m.fscore[0] == doctest::Approx(0.5));
    CHECK(m.precision[1] == doctest::Approx(1.0));
    CHECK(m.recall[1] == doctest::Approx(0.5));
    CHECK(m.fscore[1] == doctest::Approx(2.0 / 3.0));
    CHECK(m.macro_f == doctest::Approx(7.0 / 12.0));
}

TEST_CASE("selection metrics extremes") {
    const std::vector<int> ny{0, 1, 0, 1};
    const std::vector<int> ty{0, 1, 1, 0};
    // selecting exactly the clean rows scores 1 everywhere
    ClassSelectionMetrics m = selection_metrics({1, 1, 0, 0}, ny, ty, 2);
    CHECK(m.macro_f == doctest::Approx(1.0));
    // empty selection scores 0 everywhere
    m = selection_metrics({0, 0, 0, 0}, ny, ty, 2);
    CHECK(m.macro_f == doctest::Approx(0.0));
    CHECK(m.precision[0] == 0.0);
    CHECK(m.recall[1] == 0.0);
    CHECK_THROWS_AS(selection_metrics({1}, ny, ty, 2), ValidationError);
    CHECK_THROWS_AS(selection_metrics({1, 1, 1, 1}, ny, ty, 0), ValidationError);
}

TEST_CASE("selection metrics agree with the counting oracle") {
    RandomStream rng(60601);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + static_cast<int>(rng.uniform_below(6));
        const int n = 1 + static_cast<int>(rng.uniform_below(60));
        std::vector<uint8_t> sel(static_cast<size_t>(n));
        std::vector<int> ny(static_cast<size_t>(n)), ty(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            sel[static_cast<size_t>(i)] = rng.uniform01() < 0.5;
            ny[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(k)));
            ty[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_below(static_cast<uint64_t>(k)));
        }
        const ClassSelectionMetrics got = selection_metrics(sel, ny, ty, k);
        const ClassSelectionMetrics want = brute_metrics(sel, ny, ty, k);
        for (int c = 0; c < k; ++c) {
            CHECK(got.precision[static_cast<size_t>(c)] == doctest::Approx(want.precision[static_cast<size_t>(c)]).epsilon(1e-12));
            CHECK(got.recall[static_cast<size_t>(c)] == doctest::Approx(want.recall[static_cast<size_t>(c)]).epsilon(1e-12));
            CHECK(got.fscore[static_cast<size_t>(c)] == doctest::Approx(want.fscore[static_cast<size_t>(c)]).epsilon(1e-12));
        }
        CHECK(got.macro_f == doctest::Approx(want.macro_f).epsilon(1e-12));
    }
}

TEST_CASE("imbalance ratio") {
    const std::vector<int> ny{0, 0, 0, 0, 1};
    ImbalanceResult r = imbalance_ratio({1, 1, 1, 1, 1}, ny, 2);
    CHECK(r.ratio == doctest::Approx(4.0));
    CHECK(!r.degenerate);
    r = imbalance_ratio({1, 1, 0, 0, 1}, ny, 2);
    CHECK(r.ratio == doctest::Approx(2.0));
    r = imbalance_ratio({1, 1, 1, 1, 0}, ny, 2); // class 1 empties out
    CHECK(r.degenerate);
    CHECK(r.ratio == doctest::Approx(1.0)); // spans the nonzero classes only
    r = imbalance_ratio({0, 0, 0, 0, 0}, ny, 2);
    CHECK(r.degenerate);
    CHECK(r.ratio == doctest::Approx(0.0));
    CHECK_THROWS_AS(imbalance_ratio({1}, ny, 2), ValidationError);
}

}
