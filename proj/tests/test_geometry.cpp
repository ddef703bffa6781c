#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "warpflow/geometry.hpp"
#include "warpflow/recipes.hpp"

using namespace warpflow;

namespace {
constexpr double two_pi = 2.0 * std::numbers::pi;

// g = e^{2 phi} delta on T^2 with phi = a sin x cos y.
struct Conformal2D {
  double a = 0.2;
  double phi(double x, double y) const { return a * std::sin(x) * std::cos(y); }
  double flat_laplacian(double x, double y) const { return -2.0 * phi(x, y); }
  // R = -2 e^{-2 phi} Lap_0 phi for a 2-D conformal metric.
  double scalar(double x, double y) const { return -2.0 * std::exp(-2.0 * phi(x, y)) * flat_laplacian(x, y); }
  SymTensorField metric(const GridSpec& g) const {
    SymTensorField m(g);
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double e = std::exp(2.0 * phi(g.coordinate(p, 0), g.coordinate(p, 1)));
      m.at(p, 0, 0) = e;
      m.at(p, 1, 1) = e;
    }
    return m;
  }
};

double scalar_error(int n, StencilOrder order) {
  const Conformal2D c;
  const GridSpec g = GridSpec::cube(2, n, two_pi);
  const ScalarField R = scalar_curvature(c.metric(g), order);
  double err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    err = std::max(err, std::abs(R[p] - c.scalar(g.coordinate(p, 0), g.coordinate(p, 1))));
  return err;
}

// 3-D conformal metric e^{2 phi} delta: R = -e^{-2 phi}(4 Lap_0 phi + 2 |grad_0 phi|^2).
double scalar_error_3d(int n) {
  const double a = 0.15;
  const GridSpec g = GridSpec::cube(3, n, two_pi);
  SymTensorField m(g);
  ScalarField exact(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double x = g.coordinate(p, 0), y = g.coordinate(p, 1), z = g.coordinate(p, 2);
    const double phi = a * (std::sin(x) + std::cos(y) * std::sin(z));
    const double lap = -a * (std::sin(x) + 2.0 * std::cos(y) * std::sin(z));
    const double gx = a * std::cos(x), gy = -a * std::sin(y) * std::sin(z), gz = a * std::cos(y) * std::cos(z);
    exact[p] = -std::exp(-2.0 * phi) * (4.0 * lap + 2.0 * (gx * gx + gy * gy + gz * gz));
    for (int i = 0; i < 3; ++i) m.at(p, i, i) = std::exp(2.0 * phi);
  }
  const ScalarField R = scalar_curvature(m);
  double err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) err = std::max(err, std::abs(R[p] - exact[p]));
  return err;
}
}  // namespace

TEST_CASE("flat metric has vanishing curvature") {
  const GridSpec g = GridSpec::cube(3, 8, 1.0);
  const CurvatureBundle b = curvature(SymTensorField::identity(g, 2.5));
  CHECK(b.ricci.max_abs() == 0.0);
  CHECK(b.scalar.max_abs() == 0.0);
  CHECK(b.source == CurvatureSource::generic_oracle);
}

TEST_CASE("scalar curvature of conformal metrics against analytic values") {
  const double e32 = scalar_error(32, StencilOrder::second);
  const double e64 = scalar_error(64, StencilOrder::second);
  CHECK(std::log2(e32 / e64) >= 1.8);
  const double f32 = scalar_error(32, StencilOrder::fourth);
  const double f64 = scalar_error(64, StencilOrder::fourth);
  CHECK(std::log2(f32 / f64) >= 3.6);
  const double t16 = scalar_error_3d(16);
  const double t32 = scalar_error_3d(32);
  CHECK(std::log2(t16 / t32) >= 1.8);
}

TEST_CASE("2-D Ricci is half the scalar times the metric") {
  const Conformal2D c;
  const GridSpec g = GridSpec::cube(2, 48, two_pi);
  const SymTensorField m = c.metric(g);
  const CurvatureBundle b = curvature(m, StencilOrder::fourth);
  double err = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    for (int i = 0; i < 2; ++i)
      for (int j = i; j < 2; ++j) err = std::max(err, std::abs(b.ricci(p, i, j) - 0.5 * b.scalar[p] * m(p, i, j)));
  CHECK(err < 1e-4);
  CHECK_FALSE(b.asymmetry_flagged);
}

TEST_CASE("Christoffel symbols are symmetric in the lower pair") {
  const GridSpec g = GridSpec::cube(3, 8, 1.0);
  const Christoffel3Field G = christoffel(recipes::random_spd(g, 9, 0.4));
  for (std::size_t p = 0; p < g.size(); p += 7)
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(G(p, k, i, j) == G(p, k, j, i));
}

TEST_CASE("pointwise oracle matches the field operators") {
  const GridSpec g = GridSpec::cube(3, 8, 2.0);
  const SymTensorField m = recipes::random_spd(g, 21, 0.3);
  const CurvatureBundle b = curvature(m);
  PointwiseCurvature pc(g, [&](std::size_t node, std::span<double> out) {
    for (int c = 0; c < m.components(); ++c) out[c] = m.component(node, c);
  }, StencilOrder::second);
  std::vector<double> ric(6);
  for (std::size_t p = 0; p < g.size(); p += 13) {
    pc.ricci_at(p, ric);
    for (int c = 0; c < 6; ++c) CHECK(ric[c] == doctest::Approx(b.ricci.component(p, c)).epsilon(1e-12));
    CHECK(pc.scalar_at(p) == doctest::Approx(b.scalar[p]).epsilon(1e-12));
  }
}

TEST_CASE("Laplace-Beltrami summation by parts holds to roundoff") {
  const GridSpec g = GridSpec::cube(2, 24, two_pi);
  const SymTensorField m = recipes::random_spd(g, 4, 0.5);
  std::mt19937_64 rng(8);
  const auto u = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const auto v = ScalarField::from_function(g, [&](std::size_t) { return recipes::signed_uniform(rng); });
  const ScalarField sqrt_g = volume_density(m);
  for (auto order : {StencilOrder::second, StencilOrder::fourth}) {
    const ScalarField lap = laplace_beltrami(u, m, order);
    ScalarField lhs(g);
    for (std::size_t p = 0; p < g.size(); ++p) lhs[p] = lap[p] * v[p];
    const double a = integrate(lhs, sqrt_g);
    const double b = -integrate(grad_inner(u, v, m, order), sqrt_g);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("Laplace-Beltrami agrees with the Hessian trace for smooth data") {
  const Conformal2D c;
  std::vector<double> e_div, e_tr;
  for (int n : {32, 64}) {
    const GridSpec g = GridSpec::cube(2, n, two_pi);
    const SymTensorField m = c.metric(g);
    const auto f =
        ScalarField::from_function(g, [&](std::size_t p) { return std::cos(g.coordinate(p, 0) + g.coordinate(p, 1)); });
    const ScalarField div = laplace_beltrami(f, m);
    const ScalarField tr = metric_trace(hessian(f, christoffel(m)), m);
    double ed = 0.0, et = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      // Conformal 2-D: Lap_g u = e^{-2 phi} Lap_0 u.
      const double exact = -2.0 * std::exp(-2.0 * c.phi(g.coordinate(p, 0), g.coordinate(p, 1))) * f[p];
      ed = std::max(ed, std::abs(div[p] - exact));
      et = std::max(et, std::abs(tr[p] - exact));
    }
    e_div.push_back(ed);
    e_tr.push_back(et);
  }
  CHECK(std::log2(e_div[0] / e_div[1]) >= 1.8);
  CHECK(std::log2(e_tr[0] / e_tr[1]) >= 1.8);
  CHECK(e_div[1] < 1e-2);
  CHECK(e_tr[1] < 1e-2);
}

TEST_CASE("metric inversion rejects degenerate metrics") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0);
  SymTensorField m = SymTensorField::identity(g);
  m.at(5, 1, 1) = -0.5;
  CHECK_THROWS_AS(invert_metric(m), MetricError);
  try {
    invert_metric(m);
  } catch (const MetricError& e) {
    CHECK(e.node() == 5);
    CHECK(e.min_eigenvalue() == doctest::Approx(-0.5));
  }
  m.at(5, 1, 1) = 1e-14;
  CHECK_THROWS_AS(invert_metric(m), MetricError);
  CHECK(min_eigenvalue(m).node == 5);
}

TEST_CASE("full tensor contraction") {
  const GridSpec g = GridSpec::cube(2, 8, 1.0);
  const SymTensorField m = SymTensorField::identity(g, 2.0);
  SymTensorField t(g);
  for (std::size_t p = 0; p < g.size(); ++p) {
    t.at(p, 0, 0) = 1.0;
    t.at(p, 0, 1) = 3.0;
  }
  // g^ik g^jl T_ij T_kl = (1 + 2*9) / 4
  CHECK(metric_inner(t, t, m)[0] == doctest::Approx(19.0 / 4.0));
  CHECK(metric_trace(t, m)[0] == doctest::Approx(0.5));
}
