#pragma once

#include "dparafac/tensor.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dparafac {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random>, whose algorithms are implementation-defined:
///   uniform()  top 53 bits of one draw, scaled into [0, 1)
///   normal()   Box-Muller on two uniforms, second variate cached
///   sign()     +1 / -1 from the top bit of one draw
///
/// Substreams are seeded by folding (seed, tag...) through SplitMix64, so a
/// stream depends only on its tags and never on how much another stream
/// consumed.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

    double uniform();
    double normal();
    double sign();

    Matrix normal_matrix(Index rows, Index cols);
    Matrix sign_matrix(Index rows, Index cols);

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Purpose tags used when deriving substreams.
namespace stream {
inline constexpr std::uint64_t scenario = 1;
inline constexpr std::uint64_t observation_noise = 2;
inline constexpr std::uint64_t init_shared = 3;
inline constexpr std::uint64_t init_node = 4;
inline constexpr std::uint64_t link_noise = 5;
} // namespace stream

} // namespace dparafac
