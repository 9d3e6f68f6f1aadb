#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace binsight {

/// Seeded generator with hand-rolled draws. std::shuffle and the standard
/// distributions are implementation-defined, so everything that must be
/// reproducible across toolchains goes through this.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return gen_() % n; }

    std::uint8_t byte() { return static_cast<std::uint8_t>(gen_() & 0xff); }

    template <typename T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 gen_;
};

} // namespace binsight
