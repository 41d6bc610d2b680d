#include "jfr/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jfr {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGolden);
}

double Rng::next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_uniform();
}

double Rng::next_normal() {
    // u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::next_normal(double mean, double stddev) {
    return mean + stddev * next_normal();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::next_below: n must be > 0");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Tensor Rng::normal_tensor(std::vector<std::size_t> shape, double mean, double stddev) {
    if (stddev < 0.0) throw std::invalid_argument("normal_tensor: stddev must be >= 0");
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = next_normal(mean, stddev);
    return t;
}

Tensor Rng::uniform_tensor(std::vector<std::size_t> shape, double lo, double hi) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = next_uniform(lo, hi);
    return t;
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix64(seed_ ^ mix64(stream + kGolden)));
}

}  // namespace jfr
