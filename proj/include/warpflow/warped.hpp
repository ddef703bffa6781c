#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "warpflow/geometry.hpp"
#include "warpflow/grid.hpp"

namespace warpflow {

class ConstantsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Residual bound for the purely algebraic constant conditions.
inline constexpr double algebraic_tolerance = 1e-12;

enum class Branch { plus, minus };

/// Warping exponents (A, B) for g~ = e^{-Af} g (+) e^{-Bf} h on M^m x N^n.
///
/// `lambda` is always Z_{m,n}(A,B) = (2ABn + (m-2)A^2 - B^2 n)/4, and `theta`
/// is A/B whenever B != 0. Factories recompute every derived value and check
/// the residuals they promise instead of trusting the caller.
struct WarpedConstants {
  int m = 0;
  int n = 0;
  double A = 0.0;
  double B = 0.0;
  std::optional<double> theta;
  double lambda = 0.0;

  /// Requires m + n > 2 and |A(m-2) + Bn - 2| <= 1e-12.
  static WarpedConstants on_c2_line(int m, int n, double A, double B);
  /// Any (A, B); only m, n >= 1 is enforced. For the off-ansatz formulas.
  static WarpedConstants arbitrary(int m, int n, double A, double B);

  /// 2ABn + (m-2)A^2 - B^2 n.
  double c1_residual() const;
  /// A(m-2) + Bn - 2.
  double c2_residual() const;
  bool on_c2() const;
  bool satisfies_ansatz() const;

  /// (Am + Bn)/2 - A, the Hessian coefficient in the real Ricci block.
  double hessian_coefficient() const { return 0.5 * (A * m + B * n) - A; }
};

/// Roots of (m-2) theta^2 + 2 n theta - n = 0, larger first. For m = 2 the
/// single root 1/2.
std::vector<double> solve_theta(int m, int n);

/// (A, B) with both conditions: B = 2/(theta(m-2)+n), A = theta B.
/// The branch picks the larger (plus) or smaller (minus) theta; ignored for m = 2.
WarpedConstants solve_perelman_constants(int m, int n, Branch branch);

double z_value(int m, int n, double A, double B);

/// Supremum of Z along the C2 line: 1/(m-2) for m > 2, none for m <= 2.
std::optional<double> lambda_max(int m);

/// Every (A, B) on the C2 line with Z = lambda, sorted by A. Along the line Z
/// is a quadratic in A (linear for m = 2); throws ConstantsError when it has no
/// real root, i.e. lambda > 1/(m-2) for m > 2.
std::vector<WarpedConstants> lambda_to_constants(int m, int n, double lambda);

/// Data defining g~ on M x N. The product grid lists the M axes first.
struct ProductGeometry {
  SymTensorField g;
  SymTensorField h;
  ScalarField f;
  WarpedConstants constants;

  const GridSpec& grid_m() const { return g.grid(); }
  const GridSpec& grid_n() const { return h.grid(); }
  GridSpec product_grid() const { return GridSpec::product(grid_m(), grid_n()); }
  int m() const { return grid_m().dim(); }
  int n() const { return grid_n().dim(); }

  /// Throws ConstantsError / GridError when dimensions or grids disagree.
  void validate() const;
};

/// Packed g~ at a product node.
void product_metric_at(const ProductGeometry& pg, std::size_t node, std::span<double> packed);
SymTensorField assemble_product_metric(const ProductGeometry& pg);

/// Factor-space quantities (Gamma, Ricci and R of g and h; df, Hessian,
/// Laplacian and |grad f|^2 on M) from which the closed forms are evaluated at
/// any product node. All derivatives use the generic geometry operators.
class WarpedFactors {
 public:
  WarpedFactors(const ProductGeometry& pg, StencilOrder order);

  const ProductGeometry& geometry() const { return pg_; }
  const GridSpec& product_grid() const { return product_; }
  const CurvatureBundle& curvature_m() const { return curv_m_; }
  const CurvatureBundle& curvature_n() const { return curv_n_; }
  const ScalarField& laplacian_f() const { return lap_f_; }
  const ScalarField& grad_f_sq() const { return grad_sq_; }
  const SymTensorField& hessian_f() const { return hess_f_; }
  const ScalarField& sqrt_det_g() const { return sqrt_g_; }
  const ScalarField& sqrt_det_h() const { return sqrt_h_; }

  /// Christoffel families of g~ at a product node, out[(k*d+i)*d+j].
  void christoffel_at(std::size_t node, std::span<double> out) const;
  /// Pre-ansatz Ricci blocks (mixed block zero), packed in product dimension.
  void ricci_general_at(std::size_t node, std::span<double> packed) const;
  /// Pre-ansatz scalar curvature formula.
  double scalar_general_at(std::size_t node) const;
  void ricci_ansatz_at(std::size_t node, std::span<double> packed) const;
  double scalar_ansatz_at(std::size_t node) const;

  /// sqrt det g~ from the two diagonal blocks of the assembled metric.
  double volume_density_at(std::size_t node) const;

 private:
  std::size_t m_node(std::size_t node) const { return node / pg_.grid_n().size(); }
  std::size_t n_node(std::size_t node) const { return node % pg_.grid_n().size(); }
  void ricci_blocks(std::size_t node, double hess_coeff, double grad_coeff, double dfdf_coeff,
                    std::span<double> packed) const;

  ProductGeometry pg_;
  GridSpec product_;
  CurvatureBundle curv_m_;
  CurvatureBundle curv_n_;
  InverseMetric inv_g_;
  std::vector<ScalarField> df_;
  SymTensorField hess_f_;
  ScalarField lap_f_;
  ScalarField grad_sq_;
  ScalarField sqrt_g_;
  ScalarField sqrt_h_;
  // Per-M-node e^{Af}, e^{Bf}, and the M part of sqrt det g~.
  std::vector<double> exp_a_;
  std::vector<double> exp_b_;
  std::vector<double> weight_m_;
};

Christoffel3Field christoffel_closed_form(const ProductGeometry& pg,
                                          StencilOrder order = StencilOrder::second);

/// Ricci and scalar curvature of g~ for arbitrary (A, B).
CurvatureBundle ricci_closed_general(const ProductGeometry& pg,
                                     StencilOrder order = StencilOrder::second);

/// Simplified formulas; throws ConstantsError unless both conditions hold.
CurvatureBundle ricci_closed_ansatz(const ProductGeometry& pg,
                                    StencilOrder order = StencilOrder::second);

}  // namespace warpflow
