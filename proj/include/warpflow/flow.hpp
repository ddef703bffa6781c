#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "warpflow/grid.hpp"

namespace warpflow {

/// Raised when a step produces a metric that is no longer positive definite.
class FlowError : public std::runtime_error {
 public:
  FlowError(std::size_t node, double eigenvalue, double t);
  std::size_t node() const { return node_; }
  double eigenvalue() const { return eigenvalue_; }
  double time() const { return t_; }

 private:
  std::size_t node_;
  double eigenvalue_;
  double t_;
};

struct FlowState {
  double t = 0.0;
  SymTensorField g;
  ScalarField f;
  /// e^{-f} sqrt det g at t = 0.
  ScalarField rho0;

  FlowState(SymTensorField metric, ScalarField dilaton, double time = 0.0);
};

enum class Integrator { euler, rk4 };
enum class FlowMode { coupled, decoupled };

Integrator parse_integrator(const std::string& name);
FlowMode parse_flow_mode(const std::string& name);
std::string to_string(Integrator integrator);
std::string to_string(FlowMode mode);

struct FlowConfig {
  double lambda = 0.0;
  double dt = 0.0;
  double t_end = 0.0;
  Integrator integrator = Integrator::rk4;
  FlowMode mode = FlowMode::coupled;
  double filter_cutoff = 1.0;
  int snapshot_stride = 1;
  StencilOrder order = StencilOrder::second;
  /// Coupled runs stop as diverged once max|f| or max|g_ij| exceeds this
  /// multiple of its initial value (floored at 1).
  double growth_limit = 1e3;

  /// Throws std::invalid_argument for non-positive dt, negative t_end,
  /// cutoff outside (0,1], stride < 1, or lambda != 0 in decoupled mode.
  void validate() const;
};

/// h^2 / (2 dim max g^ii), the explicit-scheme bound for the parabolic parts.
double stability_bound(const SymTensorField& g);
/// Default step 0.1 h_min^2.
double default_time_step(const GridSpec& grid);

struct FlowRates {
  SymTensorField dg;
  ScalarField df;
};

/// dg = -2(Ric + Hess f + lambda df(x)df), df = -Lap f - R - lambda |grad f|^2.
/// The Laplacian here is the Hessian trace and R the trace of the same Ricci,
/// so df = tr_g(dg)/2 holds node by node.
FlowRates coupled_rhs(const FlowState& state, double lambda, StencilOrder order = StencilOrder::second);

/// One time step of the configured system (dt may be negative). In decoupled
/// mode only g moves, under dg = -2 Ric. The filter, when active, is applied
/// to f and every g component afterwards. Throws FlowError on a non-SPD node.
FlowState step(const FlowState& state, const FlowConfig& config);

enum class RunStatus { completed, diverged, degenerate };
std::string to_string(RunStatus status);

struct FlowRun {
  std::vector<FlowState> snapshots;
  RunStatus status = RunStatus::completed;
  std::string diagnostic;
  int steps = 0;
};

/// Coupled flow from `initial` to t_end. Snapshots every stride steps plus the
/// last completed state. Divergence (growth or non-finite values) and
/// degeneracy end the run early and are reported, not thrown.
FlowRun run_coupled(const FlowState& initial, const FlowConfig& config);

/// Ricci flow of g0 forward on [0, t_end], then u = e^{-f} from u(t_end) =
/// e^{-fT} forward in s = t_end - t under du/ds = Lap u - R u on the stored
/// metrics. Returns states ordered by t with f = -log u. Lambda must be 0.
/// Throws FlowError on degeneracy and std::runtime_error if u <= 0.
std::vector<FlowState> run_decoupled(const SymTensorField& g0, const ScalarField& fT, const FlowConfig& config);

/// max over nodes and snapshots of |e^{-f} sqrt det g - rho0| / rho0.
double conserved_measure_check(const std::vector<FlowState>& trajectory);

struct MonotonicityRow {
  double t = 0.0;
  double F = 0.0;
  /// Centered difference of F over neighbouring snapshots; NaN at the ends.
  double dFdt = 0.0;
  double D = 0.0;
  double ratio = 0.0;
  int sign = 0;
};

struct MonotonicityReport {
  std::vector<MonotonicityRow> rows;
  /// Common sign of dF/dt over interior rows, 0 if mixed or all zero.
  int sign = 0;
  bool consistent = false;
  bool nondecreasing = false;
};

MonotonicityReport monotonicity_report(const std::vector<FlowState>& trajectory, double lambda,
                                       StencilOrder order = StencilOrder::second);

struct DissipationCheck {
  double dFdt = 0.0;
  double D = 0.0;
  double ratio = 0.0;
};

/// (F_lambda(step +dt) - F_lambda(step -dt)) / (2 dt) of the coupled system
/// against D at the state itself.
DissipationCheck instantaneous_dissipation(const FlowState& state, const FlowConfig& config);

}  // namespace warpflow
