#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "warpflow/grid.hpp"
#include "warpflow/warped.hpp"

namespace warpflow {

/// Christoffel families of g~, split by which factor each index lives on.
enum class ChristoffelFamily {
  real_block,   // Gamma^k_ij
  zero_mixed,   // Gamma^a_ij and Gamma^k_ia (both vanish)
  fibre_to_real,  // Gamma^k_ab
  real_to_fibre,  // Gamma^c_ib and Gamma^c_bi
  fibre_block,  // Gamma^c_ab
};
inline constexpr int christoffel_family_count = 5;
const char* family_name(ChristoffelFamily family);
/// Family of Gamma^k_ij with product indices, m the dimension of M.
ChristoffelFamily classify(int k, int i, int j, int m);

/// Max absolute differences, closed form minus generic oracle, over the sampled nodes.
struct CurvatureErrors {
  int points_m = 0;
  int points_n = 0;
  std::size_t sampled_nodes = 0;
  std::array<double, christoffel_family_count> christoffel{};
  double ricci_m = 0.0;
  double ricci_n = 0.0;
  /// max |R~_ia| of the oracle; the closed form is exactly zero there.
  double ricci_mixed = 0.0;
  double scalar_general = 0.0;
  /// Only when both ansatz conditions hold.
  std::optional<double> ricci_ansatz_m;
  std::optional<double> ricci_ansatz_n;
  std::optional<double> scalar_ansatz;
  /// max |R~| of the oracle, for scale.
  double scalar_magnitude = 0.0;
};

/// Compares closed forms with the generic operators applied to the assembled
/// product metric, at the nodes of a coarse lattice with `sample_m` points per
/// M axis and `sample_n` per N axis. Those nodes are physically the same for
/// every resolution that is a multiple of the sample counts, so errors from
/// different resolutions are directly comparable.
CurvatureErrors compare_curvature(const ProductGeometry& pg, int sample_m, int sample_n,
                                  StencilOrder order = StencilOrder::second);

/// log2(coarse / fine) for a refinement by 2.
double convergence_order(double coarse, double fine);

/// An error sequence passes when its observed order between the last two
/// entries is at least `min_order`, or when the finest error is already below
/// `floor` (the two sides agree to roundoff and no order is defined).
struct OrderVerdict {
  double order = 0.0;
  bool exact = false;
  bool pass = false;
};
OrderVerdict judge_order(const std::vector<double>& errors, double min_order, double floor);

}  // namespace warpflow
