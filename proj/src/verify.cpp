#include "warpflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "warpflow/geometry.hpp"

namespace warpflow {

namespace {

constexpr int max_product_dim = 6;
constexpr int max_packed = max_product_dim * (max_product_dim + 1) / 2;
constexpr int max_gamma = max_product_dim * max_product_dim * max_product_dim;

// Nodes of `grid` whose index on every axis is a multiple of points/sample.
std::vector<std::size_t> lattice(const GridSpec& grid, int sample) {
  const int d = grid.dim();
  std::vector<int> stride(d);
  for (int a = 0; a < d; ++a) {
    if (grid.points(a) % sample != 0) throw GridError("resolution must be a multiple of the sample count");
    stride[a] = grid.points(a) / sample;
  }
  std::vector<std::size_t> out;
  std::vector<int> idx(d, 0);
  while (true) {
    std::vector<int> full(d);
    for (int a = 0; a < d; ++a) full[a] = idx[a] * stride[a];
    out.push_back(grid.flat_index(full));
    int a = d - 1;
    while (a >= 0 && idx[a] == sample - 1) idx[a--] = 0;
    if (a < 0) break;
    ++idx[a];
  }
  return out;
}

struct NodeErrors {
  std::array<double, christoffel_family_count> gamma{};
  double ricci_m = 0.0, ricci_n = 0.0, ricci_mixed = 0.0;
  double scalar_general = 0.0, ricci_ansatz_m = 0.0, ricci_ansatz_n = 0.0, scalar_ansatz = 0.0;
  double scalar = 0.0;
};

}  // namespace

const char* family_name(ChristoffelFamily family) {
  switch (family) {
    case ChristoffelFamily::real_block: return "real_block";
    case ChristoffelFamily::zero_mixed: return "zero_mixed";
    case ChristoffelFamily::fibre_to_real: return "fibre_to_real";
    case ChristoffelFamily::real_to_fibre: return "real_to_fibre";
    case ChristoffelFamily::fibre_block: return "fibre_block";
  }
  return "unknown";
}

ChristoffelFamily classify(int k, int i, int j, int m) {
  const bool up_real = k < m;
  const int lower_fibre = (i >= m) + (j >= m);
  if (up_real) {
    if (lower_fibre == 0) return ChristoffelFamily::real_block;
    if (lower_fibre == 2) return ChristoffelFamily::fibre_to_real;
    return ChristoffelFamily::zero_mixed;
  }
  if (lower_fibre == 0) return ChristoffelFamily::zero_mixed;
  if (lower_fibre == 1) return ChristoffelFamily::real_to_fibre;
  return ChristoffelFamily::fibre_block;
}

CurvatureErrors compare_curvature(const ProductGeometry& pg, int sample_m, int sample_n, StencilOrder order) {
  pg.validate();
  const int m = pg.m();
  const int d = m + pg.n();
  if (d > max_product_dim) throw GridError("product dimension above 6");
  const WarpedFactors closed(pg, order);
  const GridSpec product = closed.product_grid();
  const PointwiseCurvature oracle(
      product, [&pg](std::size_t node, std::span<double> packed) { product_metric_at(pg, node, packed); }, order);
  const bool ansatz = pg.constants.satisfies_ansatz();

  const auto nodes_m = lattice(pg.grid_m(), sample_m);
  const auto nodes_n = lattice(pg.grid_n(), sample_n);
  const std::size_t count = nodes_m.size() * nodes_n.size();
  std::vector<NodeErrors> per(count);
  const int nc = d * (d + 1) / 2;

  parallel_for(count, [&](std::size_t begin, std::size_t end) {
    std::array<double, max_gamma> go{}, gc{};
    std::array<double, max_packed> ro{}, rc{}, ra{};
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t node = nodes_m[s / nodes_n.size()] * pg.grid_n().size() + nodes_n[s % nodes_n.size()];
      NodeErrors& e = per[s];
      const std::span<double> gos(go.data(), d * d * d), gcs(gc.data(), d * d * d);
      oracle.christoffel_at(node, gos);
      closed.christoffel_at(node, gcs);
      for (int k = 0; k < d; ++k)
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            const int fam = static_cast<int>(classify(k, i, j, m));
            const std::size_t at = (static_cast<std::size_t>(k) * d + i) * d + j;
            e.gamma[fam] = std::max(e.gamma[fam], std::abs(gos[at] - gcs[at]));
          }
      const std::span<double> ros(ro.data(), nc), rcs(rc.data(), nc), ras(ra.data(), nc);
      oracle.ricci_at(node, ros);
      closed.ricci_general_at(node, rcs);
      if (ansatz) closed.ricci_ansatz_at(node, ras);
      for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
          const int c = SymTensorField::packed(i, j, d);
          const double diff = std::abs(ros[c] - rcs[c]);
          const double diff_a = ansatz ? std::abs(ros[c] - ras[c]) : 0.0;
          if (j < m) {
            e.ricci_m = std::max(e.ricci_m, diff);
            e.ricci_ansatz_m = std::max(e.ricci_ansatz_m, diff_a);
          } else if (i >= m) {
            e.ricci_n = std::max(e.ricci_n, diff);
            e.ricci_ansatz_n = std::max(e.ricci_ansatz_n, diff_a);
          } else {
            e.ricci_mixed = std::max(e.ricci_mixed, std::abs(ros[c]));
          }
        }
      e.scalar = oracle.scalar_at(node);
      e.scalar_general = std::abs(e.scalar - closed.scalar_general_at(node));
      if (ansatz) e.scalar_ansatz = std::abs(e.scalar - closed.scalar_ansatz_at(node));
    }
  });

  CurvatureErrors out;
  out.points_m = pg.grid_m().points(0);
  out.points_n = pg.grid_n().points(0);
  out.sampled_nodes = count;
  double ram = 0.0, ran = 0.0, sa = 0.0;
  for (const NodeErrors& e : per) {
    for (int f = 0; f < christoffel_family_count; ++f) out.christoffel[f] = std::max(out.christoffel[f], e.gamma[f]);
    out.ricci_m = std::max(out.ricci_m, e.ricci_m);
    out.ricci_n = std::max(out.ricci_n, e.ricci_n);
    out.ricci_mixed = std::max(out.ricci_mixed, e.ricci_mixed);
    out.scalar_general = std::max(out.scalar_general, e.scalar_general);
    out.scalar_magnitude = std::max(out.scalar_magnitude, std::abs(e.scalar));
    ram = std::max(ram, e.ricci_ansatz_m);
    ran = std::max(ran, e.ricci_ansatz_n);
    sa = std::max(sa, e.scalar_ansatz);
  }
  if (ansatz) {
    out.ricci_ansatz_m = ram;
    out.ricci_ansatz_n = ran;
    out.scalar_ansatz = sa;
  }
  return out;
}

double convergence_order(double coarse, double fine) {
  if (!(coarse > 0.0) || !(fine > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(coarse / fine);
}

OrderVerdict judge_order(const std::vector<double>& errors, double min_order, double floor) {
  OrderVerdict v;
  if (errors.size() < 2) return v;
  const double coarse = errors[errors.size() - 2];
  const double fine = errors.back();
  v.exact = fine <= floor;
  v.order = convergence_order(coarse, fine);
  v.pass = v.exact || (std::isfinite(v.order) && v.order >= min_order);
  return v;
}

}  // namespace warpflow
