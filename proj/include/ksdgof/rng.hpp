#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ksdgof {

using Engine = std::mt19937_64;

/// Derives an independent generator from a root seed and a path of indices,
/// e.g. make_stream(seed, {replicate, attempt}). The same (root, path) always
/// yields the same stream, so replicate k never depends on scheduling.
inline Engine make_stream(std::uint64_t root, std::initializer_list<std::uint64_t> path = {}) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * (path.size() + 1) + 1);
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffULL));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(root);
    words.push_back(static_cast<std::uint32_t>(path.size()));
    for (auto v : path) push(v);
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

/// Uniform variate in [0, 1).
inline double uniform01(Engine& rng) {
    const double u = std::generate_canonical<double, 53>(rng);
    // older libstdc++ can round up to exactly 1
    return u < 1.0 ? u : std::nextafter(1.0, 0.0);
}

}  // namespace ksdgof
