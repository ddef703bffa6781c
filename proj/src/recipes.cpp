#include "warpflow/recipes.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace warpflow::recipes {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr int max_wavenumber = 2;

// Every integer wavevector with entries in [-kmax, kmax], first nonzero entry
// positive (half of the lattice, plus zero).
std::vector<std::vector<int>> half_lattice(int dim, int kmax) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(dim, -kmax);
  while (true) {
    int lead = 0;
    for (int v : k) {
      if (v != 0) {
        lead = v;
        break;
      }
    }
    if (lead >= 0) out.push_back(k);
    int a = dim - 1;
    while (a >= 0 && k[a] == kmax) k[a--] = -kmax;
    if (a < 0) break;
    ++k[a];
  }
  return out;
}

// Random smooth periodic field, spectrum decaying like 1/(1+|k|^2).
ScalarField smooth_random(const GridSpec& grid, std::mt19937_64& rng) {
  const auto modes = half_lattice(grid.dim(), max_wavenumber);
  std::vector<double> ca(modes.size()), cb(modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    double k2 = 0.0;
    for (int v : modes[j]) k2 += v * v;
    const double w = 1.0 / (1.0 + k2);
    ca[j] = w * signed_uniform(rng);
    cb[j] = k2 > 0.0 ? w * signed_uniform(rng) : 0.0;
  }
  return ScalarField::from_function(grid, [&](std::size_t p) {
    double s = 0.0;
    for (std::size_t j = 0; j < modes.size(); ++j) {
      double phase = 0.0;
      for (int i = 0; i < grid.dim(); ++i) phase += modes[j][i] * grid.coordinate(p, i) / grid.period(i);
      phase *= two_pi;
      s += ca[j] * std::cos(phase) + cb[j] * std::sin(phase);
    }
    return s;
  });
}

}  // namespace

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double signed_uniform(std::mt19937_64& rng) { return 2.0 * unit_uniform(rng) - 1.0; }

SymTensorField flat(const GridSpec& grid, double scale) { return SymTensorField::identity(grid, scale); }

SymTensorField conformal_bump(const GridSpec& grid, double amplitude, int mode) {
  SymTensorField g(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double phi = 0.0;
    for (int i = 0; i < grid.dim(); ++i) phi += std::sin(two_pi * mode * grid.coordinate(p, i) / grid.period(i) + i);
    const double factor = std::exp(2.0 * amplitude * phi);
    for (int i = 0; i < grid.dim(); ++i) g.at(p, i, i) = factor;
  }
  return g;
}

SymTensorField random_spd(const GridSpec& grid, std::uint64_t seed, double amplitude) {
  if (!(amplitude >= 0.0 && amplitude < 1.0)) throw std::invalid_argument("random-spd amplitude must be in [0,1)");
  std::mt19937_64 rng(seed);
  const int d = grid.dim();
  SymTensorField pert(grid);
  for (int c = 0; c < pert.components(); ++c) pert.assign(c, smooth_random(grid, rng));
  // Frobenius norm bounds the spectral norm.
  double worst = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double fro = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) fro += pert(p, i, j) * pert(p, i, j);
    worst = std::max(worst, std::sqrt(fro));
  }
  SymTensorField g = SymTensorField::identity(grid);
  const double s = worst > 0.0 ? amplitude / worst : 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int c = 0; c < g.components(); ++c) g.component(p, c) += s * pert.component(p, c);
  return g;
}

ScalarField dilaton_sine(const GridSpec& grid, double amplitude, int mode) {
  return ScalarField::from_function(grid, [&](std::size_t p) {
    double phase = 0.0;
    for (int i = 0; i < grid.dim(); ++i) phase += grid.coordinate(p, i) / grid.period(i);
    return amplitude * std::sin(two_pi * mode * phase);
  });
}

SymTensorField random_direction(const GridSpec& grid, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  SymTensorField dg(grid);
  for (int c = 0; c < dg.components(); ++c) {
    ScalarField comp = smooth_random(grid, rng);
    const double m = comp.max_abs();
    const double s = m > 0.0 ? amplitude / m : 0.0;
    for (std::size_t p = 0; p < grid.size(); ++p) comp[p] *= s;
    dg.assign(c, comp);
  }
  return dg;
}

ScalarField under_resolved_dilaton(const GridSpec& grid, double amplitude, int mode, std::uint64_t seed,
                                   double noise) {
  std::mt19937_64 rng(seed);
  const int n = grid.points(0);
  const int lo = n / 4 + 1;
  const int hi = n / 2;
  std::vector<double> ca, cb;
  for (int k = lo; k <= hi; ++k) {
    ca.push_back(signed_uniform(rng));
    cb.push_back(k == hi ? 0.0 : signed_uniform(rng));
  }
  ScalarField bump(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = two_pi * grid.coordinate(p, 0) / grid.period(0);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += ca[k - lo] * std::cos(k * x) + cb[k - lo] * std::sin(k * x);
    bump[p] = s;
  }
  const double m = bump.max_abs();
  ScalarField f = dilaton_sine(grid, amplitude, mode);
  for (std::size_t p = 0; p < grid.size(); ++p) f[p] += (m > 0.0 ? noise / m : 0.0) * bump[p];
  return f;
}

}  // namespace warpflow::recipes
