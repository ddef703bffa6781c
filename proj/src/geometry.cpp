#include "warpflow/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <vector>

namespace warpflow {

namespace {

constexpr int max_dim = 6;
constexpr int max_comp = max_dim * (max_dim + 1) / 2;
constexpr int max_gamma = max_dim * max_dim * max_dim;

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, max_dim, max_dim>;

struct Tap {
  int offset;
  double weight;
};

constexpr std::array<Tap, 2> taps2{{{1, 0.5}, {-1, -0.5}}};
constexpr std::array<Tap, 4> taps4{{{1, 2.0 / 3.0}, {-1, -2.0 / 3.0}, {2, -1.0 / 12.0}, {-2, 1.0 / 12.0}}};

std::span<const Tap> taps(StencilOrder order) {
  if (order == StencilOrder::second) return taps2;
  return taps4;
}

int packed_size(int d) { return d * (d + 1) / 2; }

void check_dim(int d) {
  if (d < 1 || d > max_dim) {
    throw GridError("tensor dimension " + std::to_string(d) + " outside supported range 1.." +
                    std::to_string(max_dim));
  }
}

SmallMatrix unpack(std::span<const double> packed, int d) {
  SmallMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) m(i, j) = m(j, i) = packed[SymTensorField::packed(i, j, d)];
  return m;
}

// Fetch(q, span<double>) fills the packed metric at node q.
template <class Fetch>
void christoffel_kernel(const GridSpec& grid, std::size_t p, StencilOrder order, int d,
                        std::span<const double> inv, Fetch&& fetch, std::span<double> out) {
  const int nc = packed_size(d);
  std::array<double, max_dim * max_comp> dg{};
  std::array<double, max_comp> buf{};
  for (int a = 0; a < d; ++a) {
    const double inv_h = 1.0 / grid.spacing(a);
    for (const Tap& t : taps(order)) {
      fetch(grid.neighbor(p, a, t.offset), std::span<double>(buf.data(), nc));
      const double w = t.weight * inv_h;
      for (int c = 0; c < nc; ++c) dg[a * nc + c] += w * buf[c];
    }
  }
  auto dgc = [&](int a, int i, int j) { return dg[a * nc + SymTensorField::packed(i, j, d)]; };
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        double s = 0.0;
        for (int l = 0; l < d; ++l) {
          s += inv[SymTensorField::packed(k, l, d)] * (dgc(i, j, l) + dgc(j, i, l) - dgc(l, i, j));
        }
        out[(k * d + i) * d + j] = out[(k * d + j) * d + i] = 0.5 * s;
      }
    }
  }
}

// GammaAt(q) returns a pointer to d^3 Christoffel values at q; the pointer
// only has to stay valid until the next call.
template <class GammaAt>
double ricci_kernel(const GridSpec& grid, std::size_t p, StencilOrder order, int d,
                    GammaAt&& gamma_at, std::span<double> packed_out) {
  std::array<double, max_gamma> gp{};
  {
    const double* g0 = gamma_at(p);
    std::copy(g0, g0 + d * d * d, gp.begin());
  }
  auto G = [&](const double* g, int k, int i, int j) { return g[(k * d + i) * d + j]; };

  std::array<double, max_dim * max_dim> r{};
  for (int e = 0; e < d; ++e) {
    const double inv_h = 1.0 / grid.spacing(e);
    for (const Tap& t : taps(order)) {
      const double* gq = gamma_at(grid.neighbor(p, e, t.offset));
      const double w = t.weight * inv_h;
      for (int b = 0; b < d; ++b)
        for (int c = 0; c < d; ++c) r[b * d + c] += w * G(gq, e, b, c);
      for (int c = 0; c < d; ++c) {
        double trace = 0.0;
        for (int a = 0; a < d; ++a) trace += G(gq, a, a, c);
        r[e * d + c] -= w * trace;
      }
    }
  }
  for (int b = 0; b < d; ++b) {
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int q = 0; q < d; ++q) {
        double contracted = 0.0;
        for (int a = 0; a < d; ++a) contracted += G(gp.data(), a, a, q);
        s += G(gp.data(), q, b, c) * contracted;
        for (int a = 0; a < d; ++a) s -= G(gp.data(), q, a, c) * G(gp.data(), a, b, q);
      }
      r[b * d + c] += s;
    }
  }
  double asym = 0.0;
  for (int b = 0; b < d; ++b) {
    for (int c = b; c < d; ++c) {
      asym = std::max(asym, std::abs(r[b * d + c] - r[c * d + b]));
      packed_out[SymTensorField::packed(b, c, d)] = 0.5 * (r[b * d + c] + r[c * d + b]);
    }
  }
  return asym;
}

double contract_packed(std::span<const double> inv, std::span<const double> t, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      s += inv[SymTensorField::packed(i, j, d)] * t[SymTensorField::packed(i, j, d)];
    }
  }
  return s;
}

std::span<const double> node_span(const SymTensorField& t, std::size_t p) { return t.node_values(p); }

}  // namespace

MetricError::MetricError(std::size_t node, double min_eigenvalue, double condition,
                         const std::string& why)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << why << " at node " << node << " (smallest eigenvalue " << min_eigenvalue
           << ", condition number " << condition << ")";
        return os.str();
      }()),
      node_(node),
      min_eigenvalue_(min_eigenvalue),
      condition_(condition) {}

double invert_packed(std::span<const double> packed, int d, std::span<double> inverse_packed,
                     std::size_t node) {
  check_dim(d);
  const SmallMatrix m = unpack(packed, d);
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(m);
  const auto& ev = es.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0)) throw MetricError(node, lo, lo > 0.0 ? hi / lo : INFINITY, "metric not positive definite");
  const double cond = hi / lo;
  if (cond > max_metric_condition) throw MetricError(node, lo, cond, "metric ill-conditioned");
  const SmallMatrix inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) inverse_packed[SymTensorField::packed(i, j, d)] = 0.5 * (inv(i, j) + inv(j, i));
  return std::sqrt(ev.prod());
}

double min_eigenvalue_packed(std::span<const double> packed, int d) {
  check_dim(d);
  Eigen::SelfAdjointEigenSolver<SmallMatrix> es(unpack(packed, d), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

InverseMetric invert_metric(const SymTensorField& g) {
  const int d = g.tensor_dim();
  InverseMetric out{SymTensorField(g.grid(), d), ScalarField(g.grid())};
  for (std::size_t p = 0; p < g.size(); ++p) {
    out.sqrt_det[p] = invert_packed(node_span(g, p), d, out.inverse.node_values(p), p);
  }
  return out;
}

DefinitenessReport min_eigenvalue(const SymTensorField& g) {
  DefinitenessReport rep{INFINITY, 0};
  for (std::size_t p = 0; p < g.size(); ++p) {
    const double lo = min_eigenvalue_packed(node_span(g, p), g.tensor_dim());
    if (!(lo >= rep.min_eigenvalue)) rep = {lo, p};
  }
  return rep;
}

std::string to_string(CurvatureSource source) {
  switch (source) {
    case CurvatureSource::generic_oracle: return "generic_oracle";
    case CurvatureSource::closed_form_general: return "closed_form_general";
    case CurvatureSource::closed_form_ansatz: return "closed_form_ansatz";
  }
  return "unknown";
}

namespace {

Christoffel3Field christoffel_with(const SymTensorField& g, const InverseMetric& inv, StencilOrder order) {
  const auto& grid = g.grid();
  const int d = g.tensor_dim();
  check_dim(d);
  if (d != grid.dim()) throw GridError("metric dimension must match grid dimension");
  Christoffel3Field out(grid);
  auto fetch = [&](std::size_t q, std::span<double> buf) {
    const auto src = node_span(g, q);
    std::copy(src.begin(), src.end(), buf.begin());
  };
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      christoffel_kernel(grid, p, order, d, node_span(inv.inverse, p), fetch, out.node_values(p));
    }
  });
  return out;
}

}  // namespace

Christoffel3Field christoffel(const SymTensorField& g, StencilOrder order) {
  return christoffel_with(g, invert_metric(g), order);
}

CurvatureBundle curvature(const SymTensorField& g, StencilOrder order) {
  const auto& grid = g.grid();
  const int d = g.tensor_dim();
  const InverseMetric inv = invert_metric(g);
  Christoffel3Field gamma = christoffel_with(g, inv, order);
  SymTensorField ric(grid);
  ScalarField scal(grid);
  std::vector<double> asym(grid.size(), 0.0);
  auto gamma_at = [&](std::size_t q) { return gamma.node_values(q).data(); };
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      std::span<double> dst = ric.node_values(p);
      asym[p] = ricci_kernel(grid, p, order, d, gamma_at, dst);
      scal[p] = contract_packed(node_span(inv.inverse, p), dst, d);
    }
  });
  const double max_asym = *std::max_element(asym.begin(), asym.end());
  double h2 = 0.0;
  for (int a = 0; a < d; ++a) h2 = std::max(h2, grid.spacing(a) * grid.spacing(a));
  const double scale = std::max(1.0, ric.max_abs());
  CurvatureBundle out{std::move(gamma), std::move(ric), std::move(scal), CurvatureSource::generic_oracle};
  out.ricci_asymmetry = max_asym;
  out.asymmetry_flagged = max_asym > 10.0 * h2 * scale;
  return out;
}

SymTensorField ricci(const SymTensorField& g, StencilOrder order) { return curvature(g, order).ricci; }

ScalarField scalar_curvature(const SymTensorField& g, StencilOrder order) {
  return curvature(g, order).scalar;
}

SymTensorField hessian(const ScalarField& f, const Christoffel3Field& gamma, StencilOrder order) {
  const auto& grid = f.grid();
  require_same_grid(grid, gamma.grid(), "hessian");
  const int d = grid.dim();
  std::vector<ScalarField> df;
  for (int k = 0; k < d; ++k) df.push_back(partial_derivative(f, k, order));
  SymTensorField out(grid);
  for (int j = 0; j < d; ++j) {
    for (int l = j; l < d; ++l) {
      const ScalarField dd = second_partial(f, j, l, order);
      for (std::size_t p = 0; p < grid.size(); ++p) {
        double v = dd[p];
        for (int k = 0; k < d; ++k) v -= gamma(p, k, j, l) * df[k][p];
        out.at(p, j, l) = v;
      }
    }
  }
  return out;
}

ScalarField laplace_beltrami(const ScalarField& f, const SymTensorField& g, StencilOrder order) {
  const auto& grid = f.grid();
  require_same_grid(grid, g.grid(), "laplace_beltrami");
  const int d = grid.dim();
  const InverseMetric inv = invert_metric(g);
  std::vector<ScalarField> df;
  for (int j = 0; j < d; ++j) df.push_back(partial_derivative(f, j, order));
  ScalarField out(grid);
  for (int i = 0; i < d; ++i) {
    ScalarField flux(grid);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += inv.inverse(p, i, j) * df[j][p];
      flux[p] = inv.sqrt_det[p] * s;
    }
    const ScalarField div = partial_derivative(flux, i, order);
    for (std::size_t p = 0; p < grid.size(); ++p) out[p] += div[p];
  }
  for (std::size_t p = 0; p < grid.size(); ++p) out[p] /= inv.sqrt_det[p];
  return out;
}

ScalarField grad_inner(const ScalarField& u, const ScalarField& v, const SymTensorField& g,
                       StencilOrder order) {
  const auto& grid = u.grid();
  require_same_grid(grid, v.grid(), "grad_inner");
  require_same_grid(grid, g.grid(), "grad_inner");
  const int d = grid.dim();
  const InverseMetric inv = invert_metric(g);
  std::vector<ScalarField> du, dv;
  for (int i = 0; i < d; ++i) {
    du.push_back(partial_derivative(u, i, order));
    dv.push_back(&u == &v ? du.back() : partial_derivative(v, i, order));
  }
  ScalarField out(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double s = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) s += inv.inverse(p, i, j) * du[i][p] * dv[j][p];
    out[p] = s;
  }
  return out;
}

ScalarField grad_norm_sq(const ScalarField& f, const SymTensorField& g, StencilOrder order) {
  return grad_inner(f, f, g, order);
}

ScalarField volume_density(const SymTensorField& g) { return invert_metric(g).sqrt_det; }

ScalarField metric_trace(const SymTensorField& t, const SymTensorField& g) {
  require_same_grid(t.grid(), g.grid(), "metric_trace");
  const InverseMetric inv = invert_metric(g);
  ScalarField out(g.grid());
  for (std::size_t p = 0; p < g.size(); ++p) {
    out[p] = contract_packed(node_span(inv.inverse, p), node_span(t, p), g.tensor_dim());
  }
  return out;
}

ScalarField metric_inner(const SymTensorField& s, const SymTensorField& t, const SymTensorField& g) {
  require_same_grid(s.grid(), g.grid(), "metric_inner");
  require_same_grid(t.grid(), g.grid(), "metric_inner");
  const int d = g.tensor_dim();
  const InverseMetric inv = invert_metric(g);
  ScalarField out(g.grid());
  for (std::size_t p = 0; p < g.size(); ++p) {
    double v = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l)
            v += inv.inverse(p, i, k) * inv.inverse(p, j, l) * s(p, i, j) * t(p, k, l);
    out[p] = v;
  }
  return out;
}

PointwiseCurvature::PointwiseCurvature(GridSpec grid, MetricFn metric, StencilOrder order)
    : grid_(std::move(grid)), metric_(std::move(metric)), order_(order) {
  check_dim(grid_.dim());
}

void PointwiseCurvature::christoffel_at(std::size_t node, std::span<double> out) const {
  const int d = dim();
  std::array<double, max_comp> g{};
  std::array<double, max_comp> inv{};
  metric_(node, std::span<double>(g.data(), packed_size(d)));
  invert_packed(std::span<const double>(g.data(), packed_size(d)), d,
                std::span<double>(inv.data(), packed_size(d)), node);
  christoffel_kernel(grid_, node, order_, d, std::span<const double>(inv.data(), packed_size(d)), metric_, out);
}

double PointwiseCurvature::ricci_at(std::size_t node, std::span<double> packed_out) const {
  std::array<double, max_gamma> buf{};
  auto gamma_at = [&](std::size_t q) {
    christoffel_at(q, std::span<double>(buf.data(), static_cast<std::size_t>(dim() * dim() * dim())));
    return static_cast<const double*>(buf.data());
  };
  return ricci_kernel(grid_, node, order_, dim(), gamma_at, packed_out);
}

double PointwiseCurvature::scalar_at(std::size_t node) const {
  const int d = dim();
  std::array<double, max_comp> ric{};
  std::array<double, max_comp> g{};
  std::array<double, max_comp> inv{};
  ricci_at(node, std::span<double>(ric.data(), packed_size(d)));
  metric_(node, std::span<double>(g.data(), packed_size(d)));
  invert_packed(std::span<const double>(g.data(), packed_size(d)), d,
                std::span<double>(inv.data(), packed_size(d)), node);
  return contract_packed(std::span<const double>(inv.data(), packed_size(d)),
                         std::span<const double>(ric.data(), packed_size(d)), d);
}

}  // namespace warpflow
