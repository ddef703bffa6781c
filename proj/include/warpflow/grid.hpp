#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace warpflow {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class StencilOrder { second = 2, fourth = 4 };

StencilOrder parse_stencil_order(int order);

/// Uniform periodic lattice on the flat torus [0,L_0) x ... x [0,L_{d-1}).
///
/// Nodes are numbered lexicographically with the last axis fastest, so a
/// product grid (axes of `a` followed by axes of `b`) has flat index
/// `ia * b.size() + ib`.
class GridSpec {
 public:
  static constexpr int min_points = 8;

  GridSpec(std::vector<int> points, std::vector<double> periods);

  static GridSpec cube(int dim, int points, double period);
  static GridSpec product(const GridSpec& a, const GridSpec& b);

  int dim() const { return static_cast<int>(points_.size()); }
  int points(int axis) const { return points_[axis]; }
  double period(int axis) const { return periods_[axis]; }
  double spacing(int axis) const { return periods_[axis] / points_[axis]; }
  std::size_t stride(int axis) const { return strides_[axis]; }
  std::size_t size() const { return size_; }

  /// Product of spacings; the quadrature weight of one node.
  double cell_volume() const;
  double volume() const;

  int index(std::size_t node, int axis) const {
    return static_cast<int>((node / strides_[axis]) % static_cast<std::size_t>(points_[axis]));
  }
  double coordinate(std::size_t node, int axis) const { return index(node, axis) * spacing(axis); }

  /// Periodic neighbour `offset` steps along `axis`.
  std::size_t neighbor(std::size_t node, int axis, int offset) const {
    const int n = points_[axis];
    const int i = index(node, axis);
    const int j = ((i + offset) % n + n) % n;
    return node + static_cast<std::size_t>(j) * strides_[axis] -
           static_cast<std::size_t>(i) * strides_[axis];
  }

  std::size_t flat_index(std::span<const int> idx) const;

  const std::vector<int>& points() const { return points_; }
  const std::vector<double>& periods() const { return periods_; }

  bool operator==(const GridSpec& other) const = default;

 private:
  std::vector<int> points_;
  std::vector<double> periods_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

class ScalarField {
 public:
  explicit ScalarField(GridSpec grid, double value = 0.0);
  ScalarField(GridSpec grid, std::vector<double> values);

  /// Samples `fn(node)` at every node.
  static ScalarField from_function(const GridSpec& grid,
                                   const std::function<double(std::size_t)>& fn);

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t node) const { return values_[node]; }
  double& operator[](std::size_t node) { return values_[node]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  double max_abs() const;
  bool all_finite() const;

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

/// Symmetric 2-tensor field, upper triangle packed per node (node-major).
class SymTensorField {
 public:
  explicit SymTensorField(GridSpec grid, int tensor_dim = -1);

  /// Constant multiple of the identity at every node.
  static SymTensorField identity(const GridSpec& grid, double scale = 1.0);

  const GridSpec& grid() const { return grid_; }
  int tensor_dim() const { return dim_; }
  int components() const { return ncomp_; }
  std::size_t size() const { return grid_.size(); }

  static int packed(int i, int j, int dim) {
    if (i > j) std::swap(i, j);
    return i * dim - i * (i - 1) / 2 + (j - i);
  }

  double operator()(std::size_t node, int i, int j) const {
    return data_[node * ncomp_ + packed(i, j, dim_)];
  }
  double& at(std::size_t node, int i, int j) { return data_[node * ncomp_ + packed(i, j, dim_)]; }

  double component(std::size_t node, int c) const { return data_[node * ncomp_ + c]; }
  std::span<const double> node_values(std::size_t node) const {
    return {data_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)};
  }
  std::span<double> node_values(std::size_t node) {
    return {data_.data() + node * ncomp_, static_cast<std::size_t>(ncomp_)};
  }
  double& component(std::size_t node, int c) { return data_[node * ncomp_ + c]; }

  /// Single packed component as a scalar field.
  ScalarField extract(int c) const;
  void assign(int c, const ScalarField& values);

  double max_abs() const;

 private:
  GridSpec grid_;
  int dim_;
  int ncomp_;
  std::vector<double> data_;
};

/// Christoffel symbols Gamma^k_{ij}, stored as dim^3 values per node.
class Christoffel3Field {
 public:
  explicit Christoffel3Field(GridSpec grid, int tensor_dim = -1);

  const GridSpec& grid() const { return grid_; }
  int tensor_dim() const { return dim_; }

  double operator()(std::size_t node, int k, int i, int j) const {
    return data_[offset(node) + (k * dim_ + i) * dim_ + j];
  }
  double& at(std::size_t node, int k, int i, int j) {
    return data_[offset(node) + (k * dim_ + i) * dim_ + j];
  }
  std::span<const double> node_values(std::size_t node) const {
    return {data_.data() + offset(node), static_cast<std::size_t>(dim_ * dim_ * dim_)};
  }
  std::span<double> node_values(std::size_t node) {
    return {data_.data() + offset(node), static_cast<std::size_t>(dim_ * dim_ * dim_)};
  }

 private:
  std::size_t offset(std::size_t node) const { return node * dim_ * dim_ * dim_; }

  GridSpec grid_;
  int dim_;
  std::vector<double> data_;
};

/// Central first difference of `value(node)` along `axis`.
template <class Getter>
double central_difference(const GridSpec& grid, std::size_t node, int axis, StencilOrder order,
                          Getter&& value) {
  const double h = grid.spacing(axis);
  if (order == StencilOrder::second) {
    return (value(grid.neighbor(node, axis, 1)) - value(grid.neighbor(node, axis, -1))) / (2.0 * h);
  }
  return (8.0 * (value(grid.neighbor(node, axis, 1)) - value(grid.neighbor(node, axis, -1))) -
          (value(grid.neighbor(node, axis, 2)) - value(grid.neighbor(node, axis, -2)))) /
         (12.0 * h);
}

/// Dedicated compact second difference along one axis.
template <class Getter>
double second_difference(const GridSpec& grid, std::size_t node, int axis, StencilOrder order,
                         Getter&& value) {
  const double h2 = grid.spacing(axis) * grid.spacing(axis);
  const double c = value(node);
  if (order == StencilOrder::second) {
    return (value(grid.neighbor(node, axis, 1)) - 2.0 * c + value(grid.neighbor(node, axis, -1))) / h2;
  }
  return (16.0 * (value(grid.neighbor(node, axis, 1)) + value(grid.neighbor(node, axis, -1))) -
          (value(grid.neighbor(node, axis, 2)) + value(grid.neighbor(node, axis, -2))) - 30.0 * c) /
         (12.0 * h2);
}

/// Largest stencil offset used by `order`.
inline int stencil_reach(StencilOrder order) { return order == StencilOrder::second ? 1 : 2; }

ScalarField partial_derivative(const ScalarField& field, int axis,
                               StencilOrder order = StencilOrder::second);

/// d^2 f / dx_a dx_b. Pure second derivatives (a == b) use the compact
/// 3-point (order 2) or 5-point (order 4) stencil; mixed derivatives compose
/// the central first differences.
ScalarField second_partial(const ScalarField& field, int axis_a, int axis_b,
                           StencilOrder order = StencilOrder::second);

/// Pairwise (binary tree) sum of term(0..n-1) with sequential leaves of 64
/// terms. The tree shape depends only on n, so results are bit-reproducible.
double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& term);

/// Periodic trapezoid rule: sum_nodes field * weight * cell_volume, reduced
/// with `pairwise_sum` in node order.
double integrate(const ScalarField& field, const ScalarField& weight);
double integrate(const ScalarField& field);

/// Zeroes every discrete Fourier mode whose wavenumber on some axis exceeds
/// cutoff_fraction * (points/2). A cutoff of 1 returns the input unchanged.
ScalarField spectral_filter(const ScalarField& field, double cutoff_fraction);

/// Node-parallel loop over [0, n). Worker count comes from WARPFLOW_THREADS
/// (default 1). Bodies must only write per-node state.
void parallel_for(std::size_t n, const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace warpflow
