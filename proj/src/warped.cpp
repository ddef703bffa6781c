#include "warpflow/warped.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace warpflow {

namespace {

void require_dims(int m, int n) {
  if (m < 1 || n < 1) throw ConstantsError("dimensions m, n must be at least 1");
}

void require_lemma_dims(int m, int n) {
  require_dims(m, n);
  if (m + n <= 2) {
    throw ConstantsError("no admissible constants: requires m+n>2, got m=" + std::to_string(m) +
                         ", n=" + std::to_string(n));
  }
}

WarpedConstants derive(int m, int n, double A, double B) {
  WarpedConstants c;
  c.m = m;
  c.n = n;
  c.A = A;
  c.B = B;
  if (B != 0.0) c.theta = A / B;
  c.lambda = z_value(m, n, A, B);
  return c;
}

}  // namespace

WarpedConstants WarpedConstants::on_c2_line(int m, int n, double A, double B) {
  require_lemma_dims(m, n);
  WarpedConstants c = derive(m, n, A, B);
  if (!(std::abs(c.c2_residual()) <= algebraic_tolerance)) {
    throw ConstantsError("A(m-2)+Bn=2 violated: residual " + std::to_string(c.c2_residual()));
  }
  return c;
}

WarpedConstants WarpedConstants::arbitrary(int m, int n, double A, double B) {
  require_dims(m, n);
  return derive(m, n, A, B);
}

double WarpedConstants::c1_residual() const { return 2.0 * A * B * n + (m - 2) * A * A - B * B * n; }
double WarpedConstants::c2_residual() const { return A * (m - 2) + B * n - 2.0; }
bool WarpedConstants::on_c2() const { return std::abs(c2_residual()) <= algebraic_tolerance; }
bool WarpedConstants::satisfies_ansatz() const {
  return on_c2() && std::abs(c1_residual()) <= algebraic_tolerance;
}

std::vector<double> solve_theta(int m, int n) {
  require_lemma_dims(m, n);
  if (m == 2) return {0.5};
  const double a = m - 2;
  const double root = std::sqrt(static_cast<double>(n) * (n + m - 2));
  // Roots (-n +- root)/a; pair the cancelling one with the product c/a = -n/a.
  const double q = -(n + root);  // -(b/2 + sqrt(disc)/2) with b/2 = n
  const double r1 = q / a;
  const double r2 = -static_cast<double>(n) / q;
  return {std::max(r1, r2), std::min(r1, r2)};
}

WarpedConstants solve_perelman_constants(int m, int n, Branch branch) {
  const auto thetas = solve_theta(m, n);
  const double theta = (thetas.size() == 1 || branch == Branch::plus) ? thetas.front() : thetas.back();
  const double denom = theta * (m - 2) + n;
  if (denom == 0.0) throw ConstantsError("theta(m-2)+n vanished; impossible for m+n>2");
  const double B = 2.0 / denom;
  const double A = theta * B;
  WarpedConstants c = WarpedConstants::on_c2_line(m, n, A, B);
  if (!(std::abs(c.c1_residual()) <= algebraic_tolerance) || A == 0.0 || B == 0.0) {
    throw ConstantsError("constructed constants fail 2ABn+(m-2)A^2-B^2n=0");
  }
  return c;
}

double z_value(int m, int n, double A, double B) {
  return (2.0 * A * B * n + (m - 2) * A * A - B * B * n) / 4.0;
}

std::optional<double> lambda_max(int m) {
  if (m > 2) return 1.0 / (m - 2);
  return std::nullopt;
}

std::vector<WarpedConstants> lambda_to_constants(int m, int n, double lambda) {
  require_lemma_dims(m, n);
  // Z along A(m-2) + Bn = 2 as a polynomial in A.
  const double k = m + n - 2;
  const double qa = -k * (m - 2) / (4.0 * n);
  const double qb = k / n;
  const double qc = -1.0 / n - lambda;
  auto make = [&](double A) { return WarpedConstants::on_c2_line(m, n, A, (2.0 - A * (m - 2)) / n); };

  std::vector<WarpedConstants> out;
  if (qa == 0.0) {
    out.push_back(make(-qc / qb));
  } else {
    double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0.0 && disc > -1e-12 * qb * qb) disc = 0.0;
    if (disc < 0.0) {
      std::string msg = "no real constants for lambda=" + std::to_string(lambda);
      if (auto top = lambda_max(m)) msg += "; requires lambda <= 1/(m-2) = " + std::to_string(*top);
      throw ConstantsError(msg);
    }
    if (disc == 0.0) {
      out.push_back(make(-qb / (2.0 * qa)));
    } else {
      const double q = -0.5 * (qb + std::copysign(std::sqrt(disc), qb));
      out.push_back(make(q / qa));
      out.push_back(make(qc / q));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.A < y.A; });
  for (auto& c : out) {
    // Polish the root so that Z hits lambda to working precision.
    const double slope = 2.0 * qa * c.A + qb;
    if (slope != 0.0) {
      const double A = c.A - (c.lambda - lambda) / slope;
      c = make(A);
    }
  }
  return out;
}

void ProductGeometry::validate() const {
  if (constants.m != m() || constants.n != n()) {
    throw ConstantsError("constants (m,n)=(" + std::to_string(constants.m) + "," +
                         std::to_string(constants.n) + ") do not match grid dimensions (" +
                         std::to_string(m()) + "," + std::to_string(n()) + ")");
  }
  require_same_grid(grid_m(), f.grid(), "ProductGeometry: f must live on the M grid");
  if (g.tensor_dim() != m() || h.tensor_dim() != n()) throw GridError("metric dimensions inconsistent");
}

void product_metric_at(const ProductGeometry& pg, std::size_t node, std::span<double> packed) {
  const int m = pg.m();
  const int n = pg.n();
  const int d = m + n;
  const std::size_t x = node / pg.grid_n().size();
  const std::size_t y = node % pg.grid_n().size();
  const double fx = pg.f[x];
  const double em = std::exp(-pg.constants.A * fx);
  const double en = std::exp(-pg.constants.B * fx);
  std::fill(packed.begin(), packed.begin() + d * (d + 1) / 2, 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = i; j < m; ++j) packed[SymTensorField::packed(i, j, d)] = em * pg.g(x, i, j);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) packed[SymTensorField::packed(m + a, m + b, d)] = en * pg.h(y, a, b);
}

SymTensorField assemble_product_metric(const ProductGeometry& pg) {
  pg.validate();
  const GridSpec grid = pg.product_grid();
  SymTensorField out(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) product_metric_at(pg, p, out.node_values(p));
  return out;
}

WarpedFactors::WarpedFactors(const ProductGeometry& pg, StencilOrder order)
    : pg_((pg.validate(), pg)),
      product_(pg.product_grid()),
      curv_m_(curvature(pg.g, order)),
      curv_n_(curvature(pg.h, order)),
      inv_g_(invert_metric(pg.g)),
      hess_f_(hessian(pg.f, curv_m_.christoffel, order)),
      lap_f_(laplace_beltrami(pg.f, pg.g, order)),
      grad_sq_(grad_norm_sq(pg.f, pg.g, order)),
      sqrt_g_(inv_g_.sqrt_det),
      sqrt_h_(volume_density(pg.h)) {
  for (int i = 0; i < pg.m(); ++i) df_.push_back(partial_derivative(pg.f, i, order));
  const double A = pg.constants.A;
  const double B = pg.constants.B;
  for (std::size_t x = 0; x < pg.grid_m().size(); ++x) {
    const double fx = pg.f[x];
    exp_a_.push_back(std::exp(A * fx));
    exp_b_.push_back(std::exp(B * fx));
    // det(e^{-Af} g) = e^{-mAf} det g, likewise for the fibre block.
    weight_m_.push_back(std::exp(-0.5 * pg.m() * A * fx) * std::exp(-0.5 * pg.n() * B * fx) * sqrt_g_[x]);
  }
}

void WarpedFactors::christoffel_at(std::size_t node, std::span<double> out) const {
  const int m = pg_.m();
  const int n = pg_.n();
  const int d = m + n;
  const std::size_t x = m_node(node);
  const std::size_t y = n_node(node);
  const double A = pg_.constants.A;
  const double B = pg_.constants.B;
  auto G = [&](int k, int i, int j) -> double& { return out[(k * d + i) * d + j]; };
  std::fill(out.begin(), out.begin() + d * d * d, 0.0);

  std::array<double, 8> grad_up{};  // g^{kl} d_l f
  for (int k = 0; k < m; ++k) {
    double s = 0.0;
    for (int l = 0; l < m; ++l) s += inv_g_.inverse(x, k, l) * df_[l][x];
    grad_up[k] = s;
  }
  // Real block: Gamma^k_ij - (A/2)(d_i f delta^k_j + d_j f delta^k_i - g^kl d_l f g_ij).
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        double corr = -grad_up[k] * pg_.g(x, i, j);
        if (k == j) corr += df_[i][x];
        if (k == i) corr += df_[j][x];
        G(k, i, j) = curv_m_.christoffel(x, k, i, j) - 0.5 * A * corr;
      }
    }
  }
  // Gamma^k_{ab} = (B/2) e^{(A-B)f} g^kl d_l f h_ab.
  const double warp = 0.5 * B * std::exp((A - B) * pg_.f[x]);
  for (int k = 0; k < m; ++k)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) G(k, m + a, m + b) = warp * grad_up[k] * pg_.h(y, a, b);
  // Gamma^c_{ib} = -(B/2) d_i f delta^c_b.
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < m; ++i) {
      const double v = -0.5 * B * df_[i][x];
      G(m + c, i, m + c) = v;
      G(m + c, m + c, i) = v;
    }
  }
  // Fibre block is the Christoffel symbol of h.
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) G(m + c, m + a, m + b) = curv_n_.christoffel(y, c, a, b);
}

void WarpedFactors::ricci_blocks(std::size_t node, double hess_coeff, double grad_coeff,
                                 double dfdf_coeff, std::span<double> packed) const {
  const int m = pg_.m();
  const int n = pg_.n();
  const int d = m + n;
  const std::size_t x = m_node(node);
  const std::size_t y = n_node(node);
  const double A = pg_.constants.A;
  const double B = pg_.constants.B;
  std::fill(packed.begin(), packed.begin() + d * (d + 1) / 2, 0.0);
  const double bracket = lap_f_[x] - grad_sq_[x] * grad_coeff;
  for (int j = 0; j < m; ++j) {
    for (int l = j; l < m; ++l) {
      packed[SymTensorField::packed(j, l, d)] = curv_m_.ricci(x, j, l) + hess_coeff * hess_f_(x, j, l) +
                                                0.5 * A * pg_.g(x, j, l) * bracket +
                                                dfdf_coeff * df_[j][x] * df_[l][x];
    }
  }
  const double warp = 0.5 * B * std::exp((A - B) * pg_.f[x]);
  for (int b = 0; b < n; ++b) {
    for (int c = b; c < n; ++c) {
      packed[SymTensorField::packed(m + b, m + c, d)] = curv_n_.ricci(y, b, c) + warp * pg_.h(y, b, c) * bracket;
    }
  }
}

void WarpedFactors::ricci_general_at(std::size_t node, std::span<double> packed) const {
  const auto& c = pg_.constants;
  const double coeff = c.hessian_coefficient();
  ricci_blocks(node, coeff, coeff, 0.25 * c.c1_residual(), packed);
}

double WarpedFactors::scalar_general_at(std::size_t node) const {
  const auto& c = pg_.constants;
  const double A = c.A;
  const double B = c.B;
  const double m = c.m;
  const double n = c.n;
  const std::size_t x = m_node(node);
  const double eA = exp_a_[x];
  const double eB = exp_b_[x];
  const double grad_poly = 4 * A * B * n - 2 * A * B * m * n + 3 * m * A * A - 2 * A * A - m * m * A * A -
                           B * B * n - B * B * n * n;
  return eA * curv_m_.scalar[x] + eB * curv_n_.scalar[n_node(node)] + eA * lap_f_[x] * (A * m + B * n - A) +
         0.25 * eA * grad_sq_[x] * grad_poly;
}

void WarpedFactors::ricci_ansatz_at(std::size_t node, std::span<double> packed) const {
  ricci_blocks(node, 1.0, 1.0, 0.0, packed);
}

double WarpedFactors::scalar_ansatz_at(std::size_t node) const {
  const double A = pg_.constants.A;
  const std::size_t x = m_node(node);
  const double eA = exp_a_[x];
  return eA * curv_m_.scalar[x] + exp_b_[x] * curv_n_.scalar[n_node(node)] +
         eA * (lap_f_[x] * (A + 2.0) - grad_sq_[x] * (A + 1.0));
}

double WarpedFactors::volume_density_at(std::size_t node) const {
  return weight_m_[m_node(node)] * sqrt_h_[n_node(node)];
}

Christoffel3Field christoffel_closed_form(const ProductGeometry& pg, StencilOrder order) {
  const WarpedFactors w(pg, order);
  Christoffel3Field out(w.product_grid());
  for (std::size_t p = 0; p < out.grid().size(); ++p) w.christoffel_at(p, out.node_values(p));
  return out;
}

namespace {

CurvatureBundle closed_bundle(const ProductGeometry& pg, StencilOrder order, bool ansatz) {
  const WarpedFactors w(pg, order);
  const GridSpec& grid = w.product_grid();
  Christoffel3Field gamma(grid);
  SymTensorField ric(grid);
  ScalarField scal(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    w.christoffel_at(p, gamma.node_values(p));
    if (ansatz) {
      w.ricci_ansatz_at(p, ric.node_values(p));
      scal[p] = w.scalar_ansatz_at(p);
    } else {
      w.ricci_general_at(p, ric.node_values(p));
      scal[p] = w.scalar_general_at(p);
    }
  }
  return CurvatureBundle{std::move(gamma), std::move(ric), std::move(scal),
                         ansatz ? CurvatureSource::closed_form_ansatz : CurvatureSource::closed_form_general};
}

}  // namespace

CurvatureBundle ricci_closed_general(const ProductGeometry& pg, StencilOrder order) {
  return closed_bundle(pg, order, false);
}

CurvatureBundle ricci_closed_ansatz(const ProductGeometry& pg, StencilOrder order) {
  if (!pg.constants.satisfies_ansatz()) {
    throw ConstantsError("simplified curvature formulas need 2ABn+(m-2)A^2-B^2n=0 and A(m-2)+Bn=2 (residuals " +
                         std::to_string(pg.constants.c1_residual()) + ", " +
                         std::to_string(pg.constants.c2_residual()) + ")");
  }
  return closed_bundle(pg, order, true);
}

}  // namespace warpflow
