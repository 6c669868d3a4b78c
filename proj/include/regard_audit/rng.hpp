#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace regard_audit {

/// Seeded generator whose derived draws are identical on every standard
/// library: std::mt19937_64 output is fully specified, the distributions in
/// <random> are not, so index and real draws are derived here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform integer in [0, bound), bound > 0, by rejection sampling.
    std::size_t uniform_index(std::size_t bound) {
        const auto n = static_cast<std::uint64_t>(bound);
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    /// Uniform real in [0, 1) with 53 random bits.
    double uniform_real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

    /// Moves a uniformly chosen k-subset to the front (partial Fisher-Yates).
    template <typename T>
    void choose_front(std::span<T> items, std::size_t k) {
        for (std::size_t i = 0; i < k && i < items.size(); ++i) {
            std::swap(items[i], items[i + uniform_index(items.size() - i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace regard_audit
