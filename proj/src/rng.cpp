#include "dgadet/rng.hpp"

#include <cmath>
#include <string>

#include "dgadet/errors.hpp"

namespace dgadet {

uint64_t Rng::uniform_u64(uint64_t n) {
    require(n > 0, "uniform_u64: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi_inclusive) {
    require(lo <= hi_inclusive, "uniform_int: empty range");
    return lo + static_cast<int64_t>(uniform_u64(static_cast<uint64_t>(hi_inclusive - lo + 1)));
}

double Rng::normal(double mu, double sigma) {
    if (has_spare_) {
        has_spare_ = false;
        return mu + spare_ * sigma;
    }
    double u1 = uniform_real();
    double u2 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mu + r * std::cos(theta) * sigma;
}

size_t Rng::weighted_index(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    require(total > 0.0, "weighted_index: weights sum to zero");
    double x = uniform_real() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
        x -= weights[i];
        if (x < 0.0) return i;
    }
    return weights.size() - 1;
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL + b * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t hash_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace dgadet
