#pragma once

#include <cstdint>
#include <random>

#include "invcorr/envs.hpp"

namespace invcorr {

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (seed, task index) so parallel work is schedule-independent.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

    /// -1 with probability delta, +1 otherwise.
    double rademacher(double delta) { return unit_(engine_) < delta ? -1.0 : 1.0; }
    double uniform01() { return unit_(engine_); }
    double normal() { return normal_(engine_); }
    double noise(const NoiseSpec& spec);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace invcorr
