#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "glformer/tensor.hpp"

namespace glformer {

// Splittable deterministic RNG. Every random quantity in the project flows
// from one 64-bit root seed through labelled child streams:
//
//   child state = splitmix(root ^ fnv1a64(label))
//
// so a stream depends only on (root seed, label path), never on how many
// draws other streams have made. Within a stream, draws advance a splitmix64
// sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : root_(seed), state_(mix(seed)) {}

    // Child stream for a named component, e.g. derive("params/blender/w_alpha").
    Rng derive(std::string_view label) const { return Rng(mix(root_ ^ fnv1a64(label))); }

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    static std::uint64_t fnv1a64(std::string_view s) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t root_;
    std::uint64_t state_;
};

// Seeded uniform init on [-1/sqrt(fan_in), +1/sqrt(fan_in)], row-major order.
inline Tensor init_uniform(std::vector<std::size_t> shape, std::size_t fan_in, Rng rng) {
    Tensor t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

} // namespace glformer
