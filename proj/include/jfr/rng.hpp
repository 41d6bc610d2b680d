#pragma once

#include <cstdint>
#include <vector>

#include "jfr/tensor.hpp"

namespace jfr {

/// Counter-based deterministic random source.
///
/// The raw stream is splitmix64 applied to (seed, counter): draw i of seed s
/// is mix(s + (i+1) * 0x9E3779B97F4A7C15). The integer sequence is therefore
/// identical across runs and platforms for a given seed; it depends only on
/// 64-bit integer arithmetic. Gaussian draws use Box-Muller on top of the
/// stream (two raw words per draw, no cached spare).
///
/// split() derives an independent stream from (seed, stream id) without
/// advancing this one, which keeps per-image and per-worker randomness
/// reproducible regardless of evaluation order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_uniform();
    /// Uniform in [lo, hi).
    double next_uniform(double lo, double hi);

    /// Standard normal via Box-Muller.
    double next_normal();
    double next_normal(double mean, double stddev);

    /// Uniform integer in [0, n), unbiased (rejection sampling). n must be > 0.
    std::uint64_t next_below(std::uint64_t n);

    bool next_bool() { return (next_u64() >> 63) != 0; }

    /// Tensor of iid normal draws. stddev must be >= 0.
    Tensor normal_tensor(std::vector<std::size_t> shape, double mean, double stddev);
    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi);

    /// Independent stream keyed by (seed, stream). Does not advance this Rng.
    Rng split(std::uint64_t stream) const;

    /// Deterministic Fisher-Yates shuffle.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

}  // namespace jfr
