#include "dparafac/random.hpp"

#include <cmath>
#include <numbers>

namespace dparafac {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags)
{
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t t : tags)
        h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    return Rng(h);
}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 == 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_normal_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
}

double Rng::sign()
{
    return (engine_() >> 63) != 0 ? 1.0 : -1.0;
}

Matrix Rng::normal_matrix(Index rows, Index cols)
{
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            M(i, j) = normal();
    return M;
}

Matrix Rng::sign_matrix(Index rows, Index cols)
{
    Matrix M(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            M(i, j) = sign();
    return M;
}

} // namespace dparafac
