#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace deblur {

// All randomness in the project flows through mt19937_64 plus the explicit
// transforms below, so a given seed produces the same stream on every
// standard library. std::shuffle and std::normal_distribution are
// implementation-defined and are deliberately not used.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Uniform double in (0, 1], from the top 53 bits of the engine.
inline double uniform_unit(std::mt19937_64& eng) {
    return static_cast<double>((eng() >> 11) + 1) * 0x1p-53;
}

/// Standard normal samples via Box-Muller. Pinned algorithm, one engine
/// draw pattern, so sequences are reproducible from the seed alone.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_unit(eng_);
        const double u2 = uniform_unit(eng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Fisher-Yates with explicit index draws (modulo bias is irrelevant at
/// the dataset sizes involved; what matters is the pinned sequence).
template <typename T>
void deterministic_shuffle(std::vector<T>& items, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(eng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace deblur
