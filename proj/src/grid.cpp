#include "warpflow/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace warpflow {

StencilOrder parse_stencil_order(int order) {
  if (order == 2) return StencilOrder::second;
  if (order == 4) return StencilOrder::fourth;
  throw GridError("stencil order must be 2 or 4, got " + std::to_string(order));
}

GridSpec::GridSpec(std::vector<int> points, std::vector<double> periods)
    : points_(std::move(points)), periods_(std::move(periods)) {
  if (points_.empty()) throw GridError("grid needs at least one axis");
  if (points_.size() != periods_.size()) throw GridError("points/periods length mismatch");
  for (std::size_t a = 0; a < points_.size(); ++a) {
    if (points_[a] < min_points) {
      throw GridError("axis " + std::to_string(a) + " has " + std::to_string(points_[a]) +
                      " points; at least " + std::to_string(min_points) + " required");
    }
    if (!(periods_[a] > 0.0) || !std::isfinite(periods_[a])) {
      throw GridError("axis " + std::to_string(a) + " period must be positive");
    }
  }
  strides_.assign(points_.size(), 1);
  for (int a = dim() - 2; a >= 0; --a) strides_[a] = strides_[a + 1] * points_[a + 1];
  size_ = strides_[0] * points_[0];
}

GridSpec GridSpec::cube(int dim, int points, double period) {
  return GridSpec(std::vector<int>(dim, points), std::vector<double>(dim, period));
}

GridSpec GridSpec::product(const GridSpec& a, const GridSpec& b) {
  auto pts = a.points_;
  pts.insert(pts.end(), b.points_.begin(), b.points_.end());
  auto per = a.periods_;
  per.insert(per.end(), b.periods_.begin(), b.periods_.end());
  return GridSpec(std::move(pts), std::move(per));
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

double GridSpec::volume() const {
  double v = 1.0;
  for (double p : periods_) v *= p;
  return v;
}

std::size_t GridSpec::flat_index(std::span<const int> idx) const {
  std::size_t node = 0;
  for (int a = 0; a < dim(); ++a) {
    const int n = points_[a];
    node += static_cast<std::size_t>(((idx[a] % n) + n) % n) * strides_[a];
  }
  return node;
}

void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw GridError(std::string(what) + ": fields live on different grids");
}

ScalarField::ScalarField(GridSpec grid, double value)
    : grid_(std::move(grid)), values_(grid_.size(), value) {}

ScalarField::ScalarField(GridSpec grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw GridError("scalar field size does not match grid");
}

ScalarField ScalarField::from_function(const GridSpec& grid,
                                       const std::function<double(std::size_t)>& fn) {
  ScalarField out(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) out[p] = fn(p);
  return out;
}

double ScalarField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

SymTensorField::SymTensorField(GridSpec grid, int tensor_dim)
    : grid_(std::move(grid)),
      dim_(tensor_dim < 0 ? grid_.dim() : tensor_dim),
      ncomp_(dim_ * (dim_ + 1) / 2),
      data_(grid_.size() * ncomp_, 0.0) {}

SymTensorField SymTensorField::identity(const GridSpec& grid, double scale) {
  SymTensorField g(grid);
  for (std::size_t p = 0; p < grid.size(); ++p)
    for (int i = 0; i < g.dim_; ++i) g.at(p, i, i) = scale;
  return g;
}

ScalarField SymTensorField::extract(int c) const {
  ScalarField out(grid_);
  for (std::size_t p = 0; p < grid_.size(); ++p) out[p] = component(p, c);
  return out;
}

void SymTensorField::assign(int c, const ScalarField& values) {
  require_same_grid(grid_, values.grid(), "SymTensorField::assign");
  for (std::size_t p = 0; p < grid_.size(); ++p) component(p, c) = values[p];
}

double SymTensorField::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Christoffel3Field::Christoffel3Field(GridSpec grid, int tensor_dim)
    : grid_(std::move(grid)),
      dim_(tensor_dim < 0 ? grid_.dim() : tensor_dim),
      data_(grid_.size() * dim_ * dim_ * dim_, 0.0) {}

ScalarField partial_derivative(const ScalarField& field, int axis, StencilOrder order) {
  const auto& grid = field.grid();
  if (axis < 0 || axis >= grid.dim()) {
    throw GridError("axis " + std::to_string(axis) + " out of range for " +
                    std::to_string(grid.dim()) + "-dimensional grid");
  }
  ScalarField out(grid);
  auto get = [&](std::size_t q) { return field[q]; };
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) out[p] = central_difference(grid, p, axis, order, get);
  });
  return out;
}

ScalarField second_partial(const ScalarField& field, int axis_a, int axis_b, StencilOrder order) {
  const auto& grid = field.grid();
  if (axis_a < 0 || axis_a >= grid.dim() || axis_b < 0 || axis_b >= grid.dim()) {
    throw GridError("second_partial: axis out of range");
  }
  if (axis_a != axis_b) {
    return partial_derivative(partial_derivative(field, axis_b, order), axis_a, order);
  }
  ScalarField out(grid);
  auto get = [&](std::size_t q) { return field[q]; };
  for (std::size_t p = 0; p < grid.size(); ++p) out[p] = second_difference(grid, p, axis_a, order, get);
  return out;
}

namespace {

constexpr std::size_t leaf_terms = 64;

double pairwise_range(std::size_t begin, std::size_t end,
                      const std::function<double(std::size_t)>& term) {
  if (end - begin <= leaf_terms) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += term(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_range(begin, mid, term) + pairwise_range(mid, end, term);
}

}  // namespace

double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& term) {
  return n == 0 ? 0.0 : pairwise_range(0, n, term);
}

double integrate(const ScalarField& field, const ScalarField& weight) {
  require_same_grid(field.grid(), weight.grid(), "integrate");
  const double s = pairwise_sum(field.size(), [&](std::size_t p) { return field[p] * weight[p]; });
  return s * field.grid().cell_volume();
}

double integrate(const ScalarField& field) {
  const double s = pairwise_sum(field.size(), [&](std::size_t p) { return field[p]; });
  return s * field.grid().cell_volume();
}

namespace {
// FFTW's planner is not thread-safe.
std::mutex fftw_planner_mutex;
}  // namespace

ScalarField spectral_filter(const ScalarField& field, double cutoff_fraction) {
  if (!(cutoff_fraction > 0.0) || cutoff_fraction > 1.0) {
    throw GridError("spectral_filter: cutoff_fraction must lie in (0,1]");
  }
  if (cutoff_fraction == 1.0) return field;

  const auto& grid = field.grid();
  const int d = grid.dim();
  const auto& n = grid.points();
  const std::size_t last_half = static_cast<std::size_t>(n[d - 1] / 2 + 1);
  const std::size_t ncomplex = grid.size() / n[d - 1] * last_half;

  std::vector<double> real(field.values().begin(), field.values().end());
  auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * ncomplex));
  fftw_plan forward;
  fftw_plan backward;
  {
    std::lock_guard lock(fftw_planner_mutex);
    forward = fftw_plan_dft_r2c(d, n.data(), real.data(), spec, FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r(d, n.data(), spec, real.data(), FFTW_ESTIMATE);
  }
  fftw_execute(forward);

  // Complex layout: row-major over n[0] x ... x n[d-2] x (n[d-1]/2+1).
  std::vector<std::size_t> cstride(d, 1);
  for (int a = d - 2; a >= 0; --a) {
    cstride[a] = cstride[a + 1] * (a + 1 == d - 1 ? last_half : static_cast<std::size_t>(n[a + 1]));
  }
  for (std::size_t c = 0; c < ncomplex; ++c) {
    bool keep = true;
    for (int a = 0; a < d && keep; ++a) {
      const std::size_t extent = (a == d - 1) ? last_half : static_cast<std::size_t>(n[a]);
      const int j = static_cast<int>((c / cstride[a]) % extent);
      const int k = (a == d - 1) ? j : (j <= n[a] / 2 ? j : j - n[a]);
      keep = std::abs(k) <= cutoff_fraction * (n[a] / 2.0) + 1e-12;
    }
    if (!keep) {
      spec[c][0] = 0.0;
      spec[c][1] = 0.0;
    }
  }
  fftw_execute(backward);
  {
    std::lock_guard lock(fftw_planner_mutex);
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  fftw_free(spec);

  const double scale = 1.0 / static_cast<double>(grid.size());
  for (double& v : real) v *= scale;
  return ScalarField(grid, std::move(real));
}

namespace {

unsigned configured_threads() {
  static const unsigned count = [] {
    if (const char* env = std::getenv("WARPFLOW_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return static_cast<unsigned>(v);
    }
    return 1u;
  }();
  return count;
}

}  // namespace

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const unsigned workers = configured_threads();
  if (workers <= 1 || n < 4096) {
    body(0, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
}

}  // namespace warpflow
