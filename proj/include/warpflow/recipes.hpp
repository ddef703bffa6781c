#pragma once

#include <cstdint>
#include <random>

#include "warpflow/grid.hpp"

namespace warpflow::recipes {

/// Uniform double in [0,1) from the top 53 bits, identical on every platform
/// (the standard distributions are not).
double unit_uniform(std::mt19937_64& rng);
/// Uniform in [-1, 1).
double signed_uniform(std::mt19937_64& rng);

/// scale * identity.
SymTensorField flat(const GridSpec& grid, double scale = 1.0);

/// e^{2 phi} delta with phi = amplitude * sum_i sin(2 pi mode x_i / L_i + i).
/// The phase shift keeps the axes distinguishable.
SymTensorField conformal_bump(const GridSpec& grid, double amplitude, int mode);

/// identity + amplitude * P(x), P a smooth symmetric field built from
/// wavenumbers 0..2 with seeded coefficients, normalised to max spectral norm
/// 1. Requires amplitude < 1, which keeps it positive definite.
SymTensorField random_spd(const GridSpec& grid, std::uint64_t seed, double amplitude);

/// amplitude * sin(2 pi mode sum_i x_i / L_i). Depends on every axis, so mixed
/// derivatives are nonzero.
ScalarField dilaton_sine(const GridSpec& grid, double amplitude, int mode);

/// Smooth symmetric 2-tensor with seeded low-mode coefficients, each component
/// bounded by `amplitude`. Used as a variation direction.
SymTensorField random_direction(const GridSpec& grid, std::uint64_t seed, double amplitude);

/// dilaton_sine plus seeded noise confined to wavenumbers above half the
/// Nyquist limit on axis 0; max noise amplitude `noise`.
ScalarField under_resolved_dilaton(const GridSpec& grid, double amplitude, int mode, std::uint64_t seed,
                                   double noise);

}  // namespace warpflow::recipes
