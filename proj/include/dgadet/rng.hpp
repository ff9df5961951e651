#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dgadet {

// Deterministic RNG used everywhere. Wraps std::mt19937_64 (whose output
// sequence is fixed by the standard) and implements its own int/real/normal
// sampling so streams are reproducible across platforms and library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, n), n > 0. Rejection sampling keeps the draw unbiased.
    uint64_t uniform_u64(uint64_t n);

    int64_t uniform_int(int64_t lo, int64_t hi_inclusive);

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Box-Muller with cached spare.
    double normal(double mu = 0.0, double sigma = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_u64(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Weighted index draw; weights need not be normalized.
    size_t weighted_index(const std::vector<double>& weights);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64; used to derive independent sub-seeds from (seed, stream tags).
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t hash_str(const std::string& s);

}  // namespace dgadet
