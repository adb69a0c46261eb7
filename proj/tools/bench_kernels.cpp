#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "item/kernels.hpp"
#include "item/rng.hpp"

// Times the OpenMP kernels against the serial references on training-shaped
// workloads and checks they agree bit for bit while at it.

namespace {

double time_best_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

std::vector<double> random_vec(item::RandomStream& rng, size_t count) {
    std::vector<double> v(count);
    for (double& x : v) x = rng.normal();
    return v;
}

bool report(const char* name, double serial_ms, double parallel_ms, bool same) {
    std::printf("%-24s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, same ? "bitwise-equal" : "MISMATCH");
    return same;
}

} // namespace

int main() {
    using namespace item;
    const int n = 4096, in_dim = 64, out_dim = 64;
    RandomStream rng(42);
    const auto x = random_vec(rng, static_cast<size_t>(n) * in_dim);
    const auto w = random_vec(rng, static_cast<size_t>(out_dim) * in_dim);
    const auto b = random_vec(rng, out_dim);
    const auto dy = random_vec(rng, static_cast<size_t>(n) * out_dim);
    std::vector<int> ta(n), tb(n);
    std::vector<double> gamma(n);
    for (int i = 0; i < n; ++i) {
        ta[i] = static_cast<int>(rng.uniform_below(out_dim));
        tb[i] = static_cast<int>(rng.uniform_below(out_dim));
        gamma[i] = rng.uniform01();
    }
    const int reps = 20;

#ifdef _OPENMP
    std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp\n");
#endif

    bool ok = true;
    {
        std::vector<double> ys(static_cast<size_t>(n) * out_dim), yp(ys.size());
        const double ts = time_best_ms(
            [&] { kernels::serial::linear_forward(x.data(), n, in_dim, w.data(), b.data(), out_dim, ys.data()); }, reps);
        const double tp = time_best_ms(
            [&] { kernels::linear_forward(x.data(), n, in_dim, w.data(), b.data(), out_dim, yp.data()); }, reps);
        ok &= report("linear_forward", ts, tp, ys == yp);
    }
    {
        std::vector<double> ds(static_cast<size_t>(n) * in_dim), dp(ds.size());
        const double ts = time_best_ms(
            [&] { kernels::serial::linear_backward_input(dy.data(), n, out_dim, w.data(), in_dim, ds.data()); }, reps);
        const double tp = time_best_ms(
            [&] { kernels::linear_backward_input(dy.data(), n, out_dim, w.data(), in_dim, dp.data()); }, reps);
        ok &= report("linear_backward_input", ts, tp, ds == dp);
    }
    {
        std::vector<double> dws(static_cast<size_t>(out_dim) * in_dim), dbs(out_dim);
        std::vector<double> dwp(dws.size()), dbp(out_dim);
        const double ts = time_best_ms(
            [&] { kernels::serial::linear_backward_params(x.data(), dy.data(), n, in_dim, out_dim, dws.data(), dbs.data()); }, reps);
        const double tp = time_best_ms(
            [&] { kernels::linear_backward_params(x.data(), dy.data(), n, in_dim, out_dim, dwp.data(), dbp.data()); }, reps);
        ok &= report("linear_backward_params", ts, tp, dws == dwp && dbs == dbp);
    }
    {
        std::vector<double> as(x.size()), ap(x.size());
        const double ts = time_best_ms([&] { kernels::serial::relu_forward(x.data(), x.size(), as.data()); }, reps);
        const double tp = time_best_ms([&] { kernels::relu_forward(x.data(), x.size(), ap.data()); }, reps);
        ok &= report("relu_forward", ts, tp, as == ap);
    }
    {
        std::vector<double> ps(static_cast<size_t>(n) * out_dim), pp(ps.size());
        const double ts = time_best_ms([&] { kernels::serial::softmax_rows(dy.data(), n, out_dim, ps.data()); }, reps);
        const double tp = time_best_ms([&] { kernels::softmax_rows(dy.data(), n, out_dim, pp.data()); }, reps);
        ok &= report("softmax_rows", ts, tp, ps == pp);
    }
    {
        std::vector<double> ls(n), lp(n);
        const double ts = time_best_ms(
            [&] { kernels::serial::mixed_ce_loss_rows(dy.data(), n, out_dim, ta.data(), tb.data(), gamma.data(), ls.data()); }, reps);
        const double tp = time_best_ms(
            [&] { kernels::mixed_ce_loss_rows(dy.data(), n, out_dim, ta.data(), tb.data(), gamma.data(), lp.data()); }, reps);
        ok &= report("mixed_ce_loss_rows", ts, tp, ls == lp);
    }
    if (!ok) {
        std::fprintf(stderr, "kernel outputs disagree\n");
        return 1;
    }
    return 0;
}
