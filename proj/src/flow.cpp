#include "warpflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "warpflow/functionals.hpp"
#include "warpflow/geometry.hpp"

namespace warpflow {

namespace {

std::string flow_error_message(std::size_t node, double eigenvalue, double t) {
  std::ostringstream os;
  os.precision(6);
  os << "metric lost positive definiteness at node " << node << " (eigenvalue " << eigenvalue << ", t = " << t
     << ")";
  return os.str();
}

ScalarField density(const SymTensorField& g, const ScalarField& f) {
  ScalarField rho = volume_density(g);
  for (std::size_t p = 0; p < rho.size(); ++p) rho[p] *= std::exp(-f[p]);
  return rho;
}

// y + s k, component-wise.
SymTensorField axpy(const SymTensorField& y, double s, const SymTensorField& k) {
  SymTensorField out = y;
  for (std::size_t p = 0; p < y.size(); ++p)
    for (int c = 0; c < y.components(); ++c) out.component(p, c) += s * k.component(p, c);
  return out;
}

ScalarField axpy(const ScalarField& y, double s, const ScalarField& k) {
  ScalarField out = y;
  for (std::size_t p = 0; p < y.size(); ++p) out[p] += s * k[p];
  return out;
}

SymTensorField rk4_combine(const SymTensorField& y, double dt, const SymTensorField& k1, const SymTensorField& k2,
                           const SymTensorField& k3, const SymTensorField& k4) {
  SymTensorField out = y;
  for (std::size_t p = 0; p < y.size(); ++p)
    for (int c = 0; c < y.components(); ++c)
      out.component(p, c) += dt / 6.0 *
                              (k1.component(p, c) + 2.0 * k2.component(p, c) + 2.0 * k3.component(p, c) +
                               k4.component(p, c));
  return out;
}

ScalarField rk4_combine(const ScalarField& y, double dt, const ScalarField& k1, const ScalarField& k2,
                        const ScalarField& k3, const ScalarField& k4) {
  ScalarField out = y;
  for (std::size_t p = 0; p < y.size(); ++p) out[p] += dt / 6.0 * (k1[p] + 2.0 * k2[p] + 2.0 * k3[p] + k4[p]);
  return out;
}

void filter_all(SymTensorField& g, ScalarField& f, double cutoff) {
  if (cutoff >= 1.0) return;
  f = spectral_filter(f, cutoff);
  for (int c = 0; c < g.components(); ++c) g.assign(c, spectral_filter(g.extract(c), cutoff));
}

void require_spd(const SymTensorField& g, double t) {
  const DefinitenessReport rep = min_eigenvalue(g);
  if (!(rep.min_eigenvalue > 0.0)) throw FlowError(rep.node, rep.min_eigenvalue, t);
}

FlowRates rates(const SymTensorField& g, const ScalarField& f, const FlowConfig& config, double t) {
  try {
    if (config.mode == FlowMode::decoupled) {
      SymTensorField dg = ricci(g, config.order);
      for (std::size_t p = 0; p < dg.size(); ++p)
        for (int c = 0; c < dg.components(); ++c) dg.component(p, c) *= -2.0;
      return {std::move(dg), ScalarField(f.grid())};
    }
    FlowState tmp(g, f, t);
    return coupled_rhs(tmp, config.lambda, config.order);
  } catch (const MetricError& e) {
    throw FlowError(e.node(), e.min_eigenvalue(), t);
  }
}

double max_component(const SymTensorField& g) { return g.max_abs(); }

bool tensor_finite(const SymTensorField& g) {
  for (std::size_t p = 0; p < g.size(); ++p)
    for (int c = 0; c < g.components(); ++c)
      if (!std::isfinite(g.component(p, c))) return false;
  return true;
}

}  // namespace

FlowError::FlowError(std::size_t node, double eigenvalue, double t)
    : std::runtime_error(flow_error_message(node, eigenvalue, t)), node_(node), eigenvalue_(eigenvalue), t_(t) {}

FlowState::FlowState(SymTensorField metric, ScalarField dilaton, double time)
    : t(time), g(std::move(metric)), f(std::move(dilaton)), rho0(f.grid()) {
  require_same_grid(g.grid(), f.grid(), "FlowState");
  rho0 = density(g, f);
}

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::euler;
  if (name == "rk4") return Integrator::rk4;
  throw std::invalid_argument("unknown integrator '" + name + "' (euler | rk4)");
}

FlowMode parse_flow_mode(const std::string& name) {
  if (name == "coupled") return FlowMode::coupled;
  if (name == "decoupled") return FlowMode::decoupled;
  throw std::invalid_argument("unknown flow mode '" + name + "' (coupled | decoupled)");
}

std::string to_string(Integrator integrator) { return integrator == Integrator::euler ? "euler" : "rk4"; }
std::string to_string(FlowMode mode) { return mode == FlowMode::coupled ? "coupled" : "decoupled"; }

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::completed: return "completed";
    case RunStatus::diverged: return "diverged";
    case RunStatus::degenerate: return "degenerate";
  }
  return "unknown";
}

void FlowConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("flow dt must be positive");
  if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("flow t_end must be non-negative");
  if (!(filter_cutoff > 0.0 && filter_cutoff <= 1.0)) throw std::invalid_argument("filter_cutoff must be in (0,1]");
  if (snapshot_stride < 1) throw std::invalid_argument("snapshot_stride must be >= 1");
  if (!(growth_limit > 1.0)) throw std::invalid_argument("growth_limit must exceed 1");
  if (mode == FlowMode::decoupled && lambda != 0.0)
    throw std::invalid_argument("decoupled mode is defined for lambda = 0 only");
}

double stability_bound(const SymTensorField& g) {
  const GridSpec& grid = g.grid();
  const InverseMetric inv = invert_metric(g);
  double gmax = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    for (int i = 0; i < grid.dim(); ++i) gmax = std::max(gmax, inv.inverse(p, i, i));
  double h = grid.spacing(0);
  for (int i = 1; i < grid.dim(); ++i) h = std::min(h, grid.spacing(i));
  return h * h / (2.0 * grid.dim() * gmax);
}

double default_time_step(const GridSpec& grid) {
  double h = grid.spacing(0);
  for (int i = 1; i < grid.dim(); ++i) h = std::min(h, grid.spacing(i));
  return 0.1 * h * h;
}

FlowRates coupled_rhs(const FlowState& state, double lambda, StencilOrder order) {
  SymTensorField dg = modified_ricci(state.g, state.f, lambda, order);
  for (std::size_t p = 0; p < dg.size(); ++p)
    for (int c = 0; c < dg.components(); ++c) dg.component(p, c) *= -2.0;
  ScalarField df = metric_trace(dg, state.g);
  for (std::size_t p = 0; p < df.size(); ++p) df[p] *= 0.5;
  return {std::move(dg), std::move(df)};
}

FlowState step(const FlowState& state, const FlowConfig& config) {
  const double dt = config.dt;
  const double t = state.t;
  SymTensorField g(state.g.grid());
  ScalarField f(state.f.grid());
  if (config.integrator == Integrator::euler) {
    const FlowRates k = rates(state.g, state.f, config, t);
    g = axpy(state.g, dt, k.dg);
    f = axpy(state.f, dt, k.df);
  } else {
    const FlowRates k1 = rates(state.g, state.f, config, t);
    const FlowRates k2 =
        rates(axpy(state.g, 0.5 * dt, k1.dg), axpy(state.f, 0.5 * dt, k1.df), config, t + 0.5 * dt);
    const FlowRates k3 =
        rates(axpy(state.g, 0.5 * dt, k2.dg), axpy(state.f, 0.5 * dt, k2.df), config, t + 0.5 * dt);
    const FlowRates k4 = rates(axpy(state.g, dt, k3.dg), axpy(state.f, dt, k3.df), config, t + dt);
    g = rk4_combine(state.g, dt, k1.dg, k2.dg, k3.dg, k4.dg);
    f = rk4_combine(state.f, dt, k1.df, k2.df, k3.df, k4.df);
  }
  filter_all(g, f, config.filter_cutoff);
  require_spd(g, t + dt);
  FlowState next = state;
  next.t = t + dt;
  next.g = std::move(g);
  next.f = std::move(f);
  return next;
}

FlowRun run_coupled(const FlowState& initial, const FlowConfig& config) {
  config.validate();
  if (config.mode != FlowMode::coupled) throw std::invalid_argument("run_coupled needs mode = coupled");
  FlowRun run;
  run.snapshots.push_back(initial);
  const double f0 = std::max(1.0, initial.f.max_abs());
  const double g0 = std::max(1.0, max_component(initial.g));
  const int total = static_cast<int>(std::llround(config.t_end / config.dt));
  FlowState state = initial;
  for (int s = 1; s <= total; ++s) {
    try {
      state = step(state, config);
    } catch (const FlowError& e) {
      run.status = RunStatus::degenerate;
      run.diagnostic = e.what();
      break;
    }
    run.steps = s;
    const bool finite = state.f.all_finite() && tensor_finite(state.g);
    const double gf = state.f.max_abs() / f0;
    const double gg = max_component(state.g) / g0;
    if (!finite || gf > config.growth_limit || gg > config.growth_limit) {
      std::ostringstream os;
      os.precision(6);
      os << "growth detected at t = " << state.t << " (step " << s << "): max|f| grew by " << gf
         << ", max|g| by " << gg;
      run.status = RunStatus::diverged;
      run.diagnostic = os.str();
      run.snapshots.push_back(state);
      break;
    }
    if (s % config.snapshot_stride == 0 || s == total) run.snapshots.push_back(state);
  }
  return run;
}

std::vector<FlowState> run_decoupled(const SymTensorField& g0, const ScalarField& fT, const FlowConfig& config) {
  config.validate();
  if (config.mode != FlowMode::decoupled) throw std::invalid_argument("run_decoupled needs mode = decoupled");
  require_same_grid(g0.grid(), fT.grid(), "run_decoupled");
  const int total = static_cast<int>(std::llround(config.t_end / config.dt));
  const double dt = config.dt;

  // Forward Ricci flow, every step kept for the backward pass.
  std::vector<SymTensorField> metrics;
  metrics.reserve(total + 1);
  metrics.push_back(g0);
  {
    FlowState state(g0, fT);
    for (int s = 1; s <= total; ++s) {
      state = step(state, config);
      metrics.push_back(state.g);
    }
  }

  auto heat_rate = [&](const SymTensorField& g, const ScalarField& u) {
    ScalarField out = laplace_beltrami(u, g, config.order);
    const ScalarField R = scalar_curvature(g, config.order);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] -= R[p] * u[p];
    return out;
  };
  auto midpoint = [](const SymTensorField& a, const SymTensorField& b) {
    SymTensorField out = a;
    for (std::size_t p = 0; p < a.size(); ++p)
      for (int c = 0; c < a.components(); ++c) out.component(p, c) = 0.5 * (a.component(p, c) + b.component(p, c));
    return out;
  };

  // u at t-index k, k = total .. 0.
  std::vector<ScalarField> u(total + 1, ScalarField(fT.grid()));
  for (std::size_t p = 0; p < fT.size(); ++p) u[total][p] = std::exp(-fT[p]);
  for (int k = total; k > 0; --k) {
    const SymTensorField& g_start = metrics[k];
    const SymTensorField& g_end = metrics[k - 1];
    const ScalarField& y = u[k];
    if (config.integrator == Integrator::euler) {
      u[k - 1] = axpy(y, dt, heat_rate(g_start, y));
    } else {
      const SymTensorField g_mid = midpoint(g_start, g_end);
      const ScalarField k1 = heat_rate(g_start, y);
      const ScalarField k2 = heat_rate(g_mid, axpy(y, 0.5 * dt, k1));
      const ScalarField k3 = heat_rate(g_mid, axpy(y, 0.5 * dt, k2));
      const ScalarField k4 = heat_rate(g_end, axpy(y, dt, k3));
      u[k - 1] = rk4_combine(y, dt, k1, k2, k3, k4);
    }
    if (config.filter_cutoff < 1.0) u[k - 1] = spectral_filter(u[k - 1], config.filter_cutoff);
    for (std::size_t p = 0; p < u[k - 1].size(); ++p) {
      if (!(u[k - 1][p] > 0.0)) {
        std::ostringstream os;
        os << "conjugate heat solution non-positive at node " << p << ", t = " << (k - 1) * dt;
        throw std::runtime_error(os.str());
      }
    }
  }

  std::vector<FlowState> out;
  for (int k = 0; k <= total; ++k) {
    if (k % config.snapshot_stride != 0 && k != total) continue;
    ScalarField f(fT.grid());
    for (std::size_t p = 0; p < f.size(); ++p) f[p] = -std::log(u[k][p]);
    out.emplace_back(metrics[k], std::move(f), k * dt);
  }
  return out;
}

double conserved_measure_check(const std::vector<FlowState>& trajectory) {
  double worst = 0.0;
  for (const FlowState& s : trajectory) {
    const ScalarField rho = density(s.g, s.f);
    for (std::size_t p = 0; p < rho.size(); ++p)
      worst = std::max(worst, std::abs(rho[p] - s.rho0[p]) / s.rho0[p]);
  }
  return worst;
}

MonotonicityReport monotonicity_report(const std::vector<FlowState>& trajectory, double lambda, StencilOrder order) {
  MonotonicityReport rep;
  const std::size_t n = trajectory.size();
  for (const FlowState& s : trajectory) {
    MonotonicityRow row;
    row.t = s.t;
    row.F = F_lambda(s.g, s.f, lambda, order);
    row.D = dissipation_integral(s.g, s.f, lambda, order);
    row.dFdt = std::numeric_limits<double>::quiet_NaN();
    row.ratio = std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(row);
  }
  double scale = 1.0;
  for (const auto& r : rep.rows) scale = std::max(scale, std::abs(r.F));
  for (std::size_t i = 1; i + 1 < n; ++i) {
    auto& r = rep.rows[i];
    const double span = rep.rows[i + 1].t - rep.rows[i - 1].t;
    const double diff = rep.rows[i + 1].F - rep.rows[i - 1].F;
    r.dFdt = diff / span;
    r.ratio = r.D > 0.0 ? r.dFdt / r.D : std::numeric_limits<double>::quiet_NaN();
    // Differences at roundoff level carry no sign.
    r.sign = std::abs(diff) <= 1e-13 * scale ? 0 : (diff > 0.0 ? 1 : -1);
  }
  rep.consistent = true;
  bool first = true;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (first) {
      rep.sign = rep.rows[i].sign;
      first = false;
    } else if (rep.rows[i].sign != rep.sign) {
      rep.consistent = false;
    }
  }
  if (!rep.consistent) rep.sign = 0;
  rep.nondecreasing = true;
  for (std::size_t i = 1; i < n; ++i)
    if (rep.rows[i].F < rep.rows[i - 1].F - 1e-13 * scale) rep.nondecreasing = false;
  return rep;
}

DissipationCheck instantaneous_dissipation(const FlowState& state, const FlowConfig& config) {
  FlowConfig fwd = config;
  fwd.mode = FlowMode::coupled;
  FlowConfig back = fwd;
  back.dt = -config.dt;
  const FlowState plus = step(state, fwd);
  const FlowState minus = step(state, back);
  DissipationCheck out;
  out.dFdt = (F_lambda(plus.g, plus.f, config.lambda, config.order) -
              F_lambda(minus.g, minus.f, config.lambda, config.order)) /
             (2.0 * config.dt);
  out.D = dissipation_integral(state.g, state.f, config.lambda, config.order);
  out.ratio = out.dFdt / out.D;
  return out;
}

}  // namespace warpflow
