#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "warpflow/grid.hpp"
#include "warpflow/recipes.hpp"

using namespace warpflow;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

double derivative_error(int n, StencilOrder order) {
  const double L = 3.0;
  const GridSpec g = GridSpec::cube(1, n, L);
  const auto f = ScalarField::from_function(g, [&](std::size_t p) { return std::sin(two_pi * g.coordinate(p, 0) / L); });
  const ScalarField d = partial_derivative(f, 0, order);
  double err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    err = std::max(err, std::abs(d[p] - two_pi / L * std::cos(two_pi * g.coordinate(p, 0) / L)));
  return err;
}
}  // namespace

TEST_CASE("grid layout and periodic neighbours") {
  const GridSpec g({8, 10}, {1.0, 2.0});
  CHECK(g.size() == 80);
  CHECK(g.stride(1) == 1);
  CHECK(g.stride(0) == 10);
  const std::size_t p = g.flat_index(std::vector<int>{7, 9});
  CHECK(g.index(g.neighbor(p, 0, 1), 0) == 0);
  CHECK(g.index(g.neighbor(p, 1, 2), 1) == 1);
  CHECK(g.volume() == doctest::Approx(2.0));
  CHECK_THROWS_AS(GridSpec({4}, {1.0}), GridError);
  CHECK_THROWS_AS(GridSpec({8}, {-1.0}), GridError);
  CHECK_THROWS_AS(parse_stencil_order(3), GridError);
}

TEST_CASE("partial derivative of a constant vanishes") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0);
  const ScalarField c(g, 4.25);
  for (auto order : {StencilOrder::second, StencilOrder::fourth})
    for (int a = 0; a < 2; ++a) CHECK(partial_derivative(c, a, order).max_abs() == 0.0);
  CHECK_THROWS_AS(partial_derivative(c, 2), GridError);
}

TEST_CASE("derivative convergence orders") {
  const double e32 = derivative_error(32, StencilOrder::second);
  const double e64 = derivative_error(64, StencilOrder::second);
  CHECK(std::log2(e32 / e64) >= 1.8);
  // Leading truncation term of the central difference on sin(kx): k^3 h^2 / 6.
  const double k = two_pi / 3.0, h = 3.0 / 64;
  CHECK(e64 == doctest::Approx(k * k * k * h * h / 6.0).epsilon(0.01));
  const double f32 = derivative_error(32, StencilOrder::fourth);
  const double f64 = derivative_error(64, StencilOrder::fourth);
  const double f128 = derivative_error(128, StencilOrder::fourth);
  CHECK(std::log2(f32 / f64) >= 3.8);
  CHECK(std::log2(f64 / f128) >= 3.8);
}

TEST_CASE("second derivatives: compact pure stencils, composed mixed") {
  const GridSpec g = GridSpec::cube(2, 64, two_pi);
  const auto f = ScalarField::from_function(g, [&](std::size_t p) {
    return std::sin(g.coordinate(p, 0)) * std::cos(2.0 * g.coordinate(p, 1));
  });
  const ScalarField fxx = second_partial(f, 0, 0);
  const ScalarField fxy = second_partial(f, 0, 1);
  // Discrete symbols on Fourier modes: compact (2 - 2cos kh)/h^2, composed sin(kh)/h per axis.
  const double h = g.spacing(0);
  const double sxx = (2.0 - 2.0 * std::cos(h)) / (h * h);
  const double sxy = std::sin(h) * std::sin(2.0 * h) / (h * h);
  double exx = 0.0, exy = 0.0, dxx = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coordinate(p, 0), y = g.coordinate(p, 1);
    exx = std::max(exx, std::abs(fxx[p] + sxx * std::sin(x) * std::cos(2 * y)));
    exy = std::max(exy, std::abs(fxy[p] + sxy * std::cos(x) * std::sin(2 * y)));
    dxx = std::max(dxx, std::abs(fxx[p] + std::sin(x) * std::cos(2 * y)));
  }
  CHECK(exx < 1e-13);
  CHECK(exy < 1e-13);
  CHECK(dxx < 1e-3);
}

TEST_CASE("integrate examples") {
  for (int n : {8, 17, 64}) {
    const GridSpec g = GridSpec::cube(2, n, 1.5);
    CHECK(integrate(ScalarField(g, 1.0)) == doctest::Approx(2.25).epsilon(1e-15));
  }
  const double L = 2.5;
  const GridSpec g = GridSpec::cube(1, 64, L);
  const auto s = ScalarField::from_function(g, [&](std::size_t p) { return std::sin(two_pi * g.coordinate(p, 0) / L); });
  CHECK(std::abs(integrate(s)) < 1e-15);
  const auto s2 = ScalarField::from_function(g, [&](std::size_t p) {
    const double v = std::sin(two_pi * g.coordinate(p, 0) / L);
    return v * v;
  });
  CHECK(std::abs(integrate(s2) - L / 2) <= 1e-12);
  CHECK_THROWS_AS(integrate(s, ScalarField(GridSpec::cube(1, 32, L), 1.0)), GridError);
}

TEST_CASE("integrate is linear") {
  const GridSpec g = GridSpec::cube(2, 16, 1.0);
  std::mt19937_64 rng(11);
  const auto a = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const auto b = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const double s = 0.37, t = -1.9;
  ScalarField c(g);
  for (std::size_t p = 0; p < g.size(); ++p) c[p] = s * a[p] + t * b[p];
  CHECK(integrate(c) == doctest::Approx(s * integrate(a) + t * integrate(b)).epsilon(1e-13));
}

TEST_CASE("integrate is deterministic") {
  const GridSpec g = GridSpec::cube(3, 16, 1.0);
  std::mt19937_64 rng(5);
  const auto a = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const double first = integrate(a);
  for (int i = 0; i < 3; ++i) CHECK(integrate(a) == first);
}

TEST_CASE("spectral filter examples") {
  const double L = 1.0;
  const GridSpec g = GridSpec::cube(1, 64, L);
  std::mt19937_64 rng(3);
  const auto noise = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const ScalarField same = spectral_filter(noise, 1.0);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(same[p] == doctest::Approx(noise[p]).epsilon(1e-13));

  const auto low = ScalarField::from_function(g, [&](std::size_t p) { return std::sin(two_pi * g.coordinate(p, 0) / L); });
  const ScalarField kept = spectral_filter(low, 0.5);
  for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(kept[p] - low[p]) <= 1e-12);

  const auto high = ScalarField::from_function(g, [&](std::size_t p) { return std::cos(two_pi * 31 * g.coordinate(p, 0) / L); });
  CHECK(spectral_filter(high, 0.25).max_abs() <= 1e-12);

  // 2-D: a mode is removed when any axis wavenumber exceeds the cutoff.
  const GridSpec g2 = GridSpec::cube(2, 16, L);
  const auto mixed = ScalarField::from_function(g2, [&](std::size_t p) {
    return std::sin(two_pi * g2.coordinate(p, 0)) * std::cos(two_pi * 6 * g2.coordinate(p, 1));
  });
  CHECK(spectral_filter(mixed, 0.5).max_abs() <= 1e-12);
  CHECK(spectral_filter(mixed, 0.75).max_abs() == doctest::Approx(mixed.max_abs()));
}

TEST_CASE("symmetric tensor storage") {
  const GridSpec g = GridSpec::cube(1, 8, 1.0);
  SymTensorField t(g, 3);
  t.at(2, 0, 2) = 5.0;
  CHECK(t(2, 2, 0) == 5.0);
  CHECK(t.components() == 6);
  const SymTensorField id = SymTensorField::identity(GridSpec::cube(3, 8, 1.0), 2.0);
  CHECK(id(0, 1, 1) == 2.0);
  CHECK(id(0, 0, 1) == 0.0);
}
