#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace sortlab {

// splitmix64 finalizer; used to derive independent stream seeds from a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Portable random source. std::mt19937_64 output is fixed by the standard, the
// std distributions are not, so every draw below is implemented by hand.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p) { return uniform() < p; }
    int binomial(int trials, double p);

    // Index drawn proportionally to non-negative weights.
    std::size_t categorical(const std::vector<double>& weights);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sortlab
