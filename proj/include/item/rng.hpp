#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace item {

// All randomness in a run derives from one master seed. Named sub-streams
// keep the draw order of one phase independent of every other phase, so
// e.g. adding an extra sampler draw never shifts the noise injection.
//
// Stream names used across the project:
//   blob.centers, blob.points, noise, init, head_draw, sampler_v,
//   sampler_vtilde, mixup, warmup_shuffle, ssl_draw, ssl_jitter
uint64_t split_seed(uint64_t master, std::string_view stream);

uint64_t fnv1a64(std::string_view s);

// splitmix64 finalizer
uint64_t mix64(uint64_t x);

// Deterministic random stream. Every distribution is implemented on top of
// raw mt19937_64 output so the bitstream is stable for a given seed on any
// platform this builds on (no reliance on libstdc++ distribution internals).
class RandomStream {
public:
    explicit RandomStream(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // uniform on [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), unbiased; n must be > 0
    uint64_t uniform_below(uint64_t n);

    // standard normal via Box-Muller, two fresh uniforms per call
    double normal();

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma(shape, 1), Marsaglia-Tsang squeeze; shape > 0
    double gamma(double shape);

    double beta(double a, double b);

    // rejection-sampled normal restricted to [lo, hi]
    double truncated_normal(double mean, double sd, double lo, double hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

} // namespace item
