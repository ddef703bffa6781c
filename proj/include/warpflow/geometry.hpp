#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "warpflow/grid.hpp"

namespace warpflow {

/// Raised when a metric is not positive definite or too ill-conditioned to
/// invert at some node.
class MetricError : public std::runtime_error {
 public:
  MetricError(std::size_t node, double min_eigenvalue, double condition, const std::string& why);

  std::size_t node() const { return node_; }
  double min_eigenvalue() const { return min_eigenvalue_; }
  double condition() const { return condition_; }

 private:
  std::size_t node_;
  double min_eigenvalue_;
  double condition_;
};

inline constexpr double max_metric_condition = 1e12;

/// Per-node inverse of a packed symmetric matrix. Throws MetricError if any
/// eigenvalue is <= 0 or the condition number exceeds 1e12. Returns sqrt(det).
double invert_packed(std::span<const double> packed, int dim, std::span<double> inverse_packed,
                     std::size_t node);

/// Smallest eigenvalue of a packed symmetric matrix.
double min_eigenvalue_packed(std::span<const double> packed, int dim);

struct InverseMetric {
  SymTensorField inverse;
  ScalarField sqrt_det;
};

InverseMetric invert_metric(const SymTensorField& g);

/// Smallest eigenvalue over all nodes, and the node where it occurs.
struct DefinitenessReport {
  double min_eigenvalue;
  std::size_t node;
};
DefinitenessReport min_eigenvalue(const SymTensorField& g);

enum class CurvatureSource { generic_oracle, closed_form_general, closed_form_ansatz };

std::string to_string(CurvatureSource source);

struct CurvatureBundle {
  Christoffel3Field christoffel;
  SymTensorField ricci;
  ScalarField scalar;
  CurvatureSource source;
  /// max |R_bd - R_db| before symmetrisation (0 for closed forms).
  double ricci_asymmetry = 0.0;
  /// True when the asymmetry exceeds 10 h^2 times the Ricci magnitude.
  bool asymmetry_flagged = false;
};

Christoffel3Field christoffel(const SymTensorField& g, StencilOrder order = StencilOrder::second);

/// R_bd = d_a G^a_bd - d_b G^a_ad + G^p_bd G^a_ap - G^p_ad G^a_bp, symmetrised.
SymTensorField ricci(const SymTensorField& g, StencilOrder order = StencilOrder::second);
ScalarField scalar_curvature(const SymTensorField& g, StencilOrder order = StencilOrder::second);
CurvatureBundle curvature(const SymTensorField& g, StencilOrder order = StencilOrder::second);

/// nabla^2_jl f = d_j d_l f - G^k_jl d_k f.
SymTensorField hessian(const ScalarField& f, const Christoffel3Field& gamma,
                       StencilOrder order = StencilOrder::second);

/// Divergence form (1/sqrt g) d_i (sqrt g g^ij d_j f) built from composed
/// central differences. Because the central difference is skew-adjoint on a
/// periodic grid, integrate(laplace_beltrami(u) * v, sqrt g) equals
/// -integrate(grad_inner(u, v), sqrt g) to roundoff.
ScalarField laplace_beltrami(const ScalarField& f, const SymTensorField& g,
                             StencilOrder order = StencilOrder::second);

/// g^ij d_i u d_j v.
ScalarField grad_inner(const ScalarField& u, const ScalarField& v, const SymTensorField& g,
                       StencilOrder order = StencilOrder::second);
ScalarField grad_norm_sq(const ScalarField& f, const SymTensorField& g,
                         StencilOrder order = StencilOrder::second);
ScalarField volume_density(const SymTensorField& g);

/// g^ij T_ij.
ScalarField metric_trace(const SymTensorField& t, const SymTensorField& g);
/// g^ik g^jl S_ij T_kl.
ScalarField metric_inner(const SymTensorField& s, const SymTensorField& t, const SymTensorField& g);

/// Generic curvature evaluated node by node from a metric callback, without
/// storing any field. Used as the oracle on product grids too large to hold
/// Christoffel fields in memory; the stencils are identical to the field
/// versions above.
class PointwiseCurvature {
 public:
  using MetricFn = std::function<void(std::size_t node, std::span<double> packed)>;

  PointwiseCurvature(GridSpec grid, MetricFn metric, StencilOrder order);

  const GridSpec& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }

  void metric_at(std::size_t node, std::span<double> packed) const { metric_(node, packed); }
  /// Gamma^k_ij into out[(k*d + i)*d + j].
  void christoffel_at(std::size_t node, std::span<double> out) const;
  /// Symmetrised packed Ricci; returns the pre-symmetrisation asymmetry.
  double ricci_at(std::size_t node, std::span<double> packed_out) const;
  double scalar_at(std::size_t node) const;

 private:
  GridSpec grid_;
  MetricFn metric_;
  StencilOrder order_;
};

}  // namespace warpflow
