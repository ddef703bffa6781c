#include "warpflow/functionals.hpp"

#include <cmath>
#include <string>

namespace warpflow {

namespace {

ScalarField exp_minus(const ScalarField& f) {
  ScalarField out(f.grid());
  for (std::size_t p = 0; p < f.size(); ++p) out[p] = std::exp(-f[p]);
  return out;
}

SymTensorField add_scaled(SymTensorField base, const SymTensorField& t, double s) {
  for (std::size_t p = 0; p < base.size(); ++p)
    for (int c = 0; c < base.components(); ++c) base.component(p, c) += s * t.component(p, c);
  return base;
}

}  // namespace

SymTensorField modified_ricci(const SymTensorField& g, const ScalarField& f, double lambda, StencilOrder order) {
  require_same_grid(g.grid(), f.grid(), "modified_ricci");
  const CurvatureBundle curv = curvature(g, order);
  SymTensorField out = hessian(f, curv.christoffel, order);
  const int d = g.tensor_dim();
  std::vector<ScalarField> df;
  for (int i = 0; i < d; ++i) df.push_back(partial_derivative(f, i, order));
  for (std::size_t p = 0; p < g.size(); ++p) {
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) out.at(p, i, j) += curv.ricci(p, i, j) + lambda * df[i][p] * df[j][p];
    }
  }
  return out;
}

double F_lambda(const SymTensorField& g, const ScalarField& f, double lambda, StencilOrder order) {
  require_same_grid(g.grid(), f.grid(), "F_lambda");
  const ScalarField R = scalar_curvature(g, order);
  const ScalarField grad2 = grad_norm_sq(f, g, order);
  const ScalarField sqrt_g = volume_density(g);
  ScalarField integrand(g.grid());
  for (std::size_t p = 0; p < g.size(); ++p) integrand[p] = (R[p] + (lambda + 1.0) * grad2[p]) * std::exp(-f[p]);
  return integrate(integrand, sqrt_g);
}

double perelman_F(const SymTensorField& g, const ScalarField& f, StencilOrder order) {
  return F_lambda(g, f, 0.0, order);
}

double einstein_hilbert_S(const ProductGeometry& pg, StencilOrder order, CurvatureRoute route) {
  if (route == CurvatureRoute::generic_oracle) {
    const SymTensorField gt = assemble_product_metric(pg);
    return integrate(scalar_curvature(gt, order), volume_density(gt));
  }
  const WarpedFactors w(pg, order);
  const GridSpec& grid = w.product_grid();
  const double s = pairwise_sum(grid.size(), [&](std::size_t p) {
    return w.scalar_general_at(p) * w.volume_density_at(p);
  });
  return s * grid.cell_volume();
}

ProductGeometry normalize_fiber_volume(ProductGeometry pg) {
  const double vol = integrate(volume_density(pg.h));
  const double scale = std::pow(vol, -2.0 / pg.n());
  for (std::size_t p = 0; p < pg.h.size(); ++p)
    for (int c = 0; c < pg.h.components(); ++c) pg.h.component(p, c) *= scale;
  return pg;
}

FunctionalReport theorem_identity_residual(const ProductGeometry& pg, StencilOrder order) {
  pg.validate();
  const auto& c = pg.constants;
  if (!c.on_c2()) {
    throw ConstantsError("identity needs A(m-2)+Bn=2; residual " + std::to_string(c.c2_residual()));
  }
  FunctionalReport rep;
  rep.lambda = c.lambda;
  rep.S_tilde = einstein_hilbert_S(pg, order, CurvatureRoute::closed_form);
  const ScalarField sqrt_h = volume_density(pg.h);
  rep.vol_N = integrate(sqrt_h);
  rep.total_scalar_N = integrate(scalar_curvature(pg.h, order), sqrt_h);
  rep.F = perelman_F(pg.g, pg.f, order);
  rep.F_lambda = F_lambda(pg.g, pg.f, c.lambda, order);
  ScalarField weight(pg.grid_m());
  for (std::size_t p = 0; p < weight.size(); ++p) weight[p] = std::exp((c.B - c.A - 1.0) * pg.f[p]);
  rep.fiber_weight = integrate(weight, volume_density(pg.g));
  rep.theorem_residual = rep.S_tilde - rep.vol_N * rep.F_lambda - rep.fiber_weight * rep.total_scalar_N;
  return rep;
}

VariationCheck first_variation_check(const ProductGeometry& pg, const SymTensorField& dg, double lambda,
                                     StencilOrder order, double step) {
  pg.validate();
  require_same_grid(pg.grid_m(), dg.grid(), "first_variation_check");
  const auto& c = pg.constants;
  if (!c.on_c2() || std::abs(c.lambda - lambda) > 1e-10 * std::max(1.0, std::abs(lambda))) {
    throw ConstantsError("constants do not match lambda=" + std::to_string(lambda) + " (Z=" +
                         std::to_string(c.lambda) + ", C2 residual " + std::to_string(c.c2_residual()) + ")");
  }
  if (!(step > 0.0)) throw std::invalid_argument("variation step must be positive");

  const ScalarField tr = metric_trace(dg, pg.g);
  auto action = [&](double e) {
    ProductGeometry moved = pg;
    moved.g = add_scaled(pg.g, dg, e);
    for (std::size_t p = 0; p < moved.f.size(); ++p) moved.f[p] += 0.5 * e * tr[p];
    return 2.0 * einstein_hilbert_S(moved, order, CurvatureRoute::closed_form);
  };
  auto central = [&](double e) { return (action(e) - action(-e)) / (2.0 * e); };
  const double coarse = central(step);
  const double fine = central(0.5 * step);

  VariationCheck out;
  out.numeric_derivative = (4.0 * fine - coarse) / 3.0;
  out.richardson_gap = std::abs(fine - coarse);

  const double vol_n = integrate(volume_density(pg.h));
  const ScalarField sqrt_g = volume_density(pg.g);
  const ScalarField weight = exp_minus(pg.f);
  const ScalarField pairing = metric_inner(modified_ricci(pg.g, pg.f, lambda, order), dg, pg.g);
  ScalarField integrand(pg.grid_m());
  for (std::size_t p = 0; p < integrand.size(); ++p) integrand[p] = pairing[p] * weight[p];
  out.closed_form = -2.0 * vol_n * integrate(integrand, sqrt_g);

  const ScalarField lap = laplace_beltrami(pg.f, pg.g, order);
  const ScalarField grad2 = grad_norm_sq(pg.f, pg.g, order);
  for (std::size_t p = 0; p < integrand.size(); ++p) integrand[p] = (lap[p] - grad2[p]) * tr[p] * weight[p];
  out.trace_term = -2.0 * lambda * vol_n * integrate(integrand, sqrt_g);
  return out;
}

double dissipation_integral(const SymTensorField& g, const ScalarField& f, double lambda, StencilOrder order) {
  const SymTensorField t = modified_ricci(g, f, lambda, order);
  const ScalarField norm2 = metric_inner(t, t, g);
  ScalarField integrand(g.grid());
  for (std::size_t p = 0; p < g.size(); ++p) integrand[p] = norm2[p] * std::exp(-f[p]);
  return 2.0 * integrate(integrand, volume_density(g));
}

}  // namespace warpflow
