// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
#include <boost/math/tools/minima.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "warpflow/cli.hpp"
#include "warpflow/flow.hpp"
#include "warpflow/functionals.hpp"
#include "warpflow/recipes.hpp"
#include "warpflow/verify.hpp"
#include "warpflow/warped.hpp"

using namespace warpflow;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
}

struct Verdict {
  bool pass = true;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail("failed: %s", what.c_str());
    }
  }
};

// Least-squares slope of log(err) against log(dt).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// ---------------------------------------------------------------- 1
bool constants_algebra() {
  Verdict v;
  for (auto [m, n] : {std::pair{2, 1}, {2, 3}, {3, 1}, {3, 2}, {4, 1}}) {
    for (Branch b : {Branch::plus, Branch::minus}) {
      const WarpedConstants k = solve_perelman_constants(m, n, b);
      detail("m=%d n=%d %s: A=%.15g B=%.15g c1=%.2e c2=%.2e", m, n, b == Branch::plus ? "plus " : "minus", k.A, k.B,
             k.c1_residual(), k.c2_residual());
      v.require(std::abs(k.c1_residual()) <= 1e-12 && std::abs(k.c2_residual()) <= 1e-12, "C1/C2 residual");
    }
  }
  const double r2 = std::sqrt(2.0);
  const double tp = solve_perelman_constants(3, 1, Branch::plus).theta.value();
  const double tm = solve_perelman_constants(3, 1, Branch::minus).theta.value();
  detail("(3,1) theta: %.17g (expect %.17g), %.17g (expect %.17g)", tp, -1 + r2, tm, -1 - r2);
  v.require(std::abs(tp - (-1 + r2)) <= 1e-12 && std::abs(tm - (-1 - r2)) <= 1e-12, "theta for (3,1)");
  // Oracle for the top of the lambda range: maximise Z along the C2 line
  // B = (2 - A(m-2))/n by a coarse scan followed by Brent's method.
  for (int m : {3, 4}) {
    const int n = 1;
    auto negZ = [&](double A) { return -z_value(m, n, A, (2.0 - A * (m - 2)) / n); };
    double best = -50.0;
    for (double A = -50.0; A <= 50.0; A += 0.01)
      if (negZ(A) < negZ(best)) best = A;
    const auto [A_star, neg] = boost::math::tools::brent_find_minima(negZ, best - 0.02, best + 0.02, 52);
    const double zmax = -neg;
    detail("m=%d: max Z = %.15g at A=%.12g, 1/(m-2) = %.15g, library lambda_max = %.15g", m, zmax, A_star,
           1.0 / (m - 2), lambda_max(m).value());
    v.require(std::abs(zmax - 1.0 / (m - 2)) <= 1e-10, "lambda_max oracle");
    v.require(std::abs(lambda_max(m).value() - zmax) <= 1e-10, "library lambda_max");
  }
  return v.pass;
}

// ---------------------------------------------------------------- 2
bool curvature_against_oracle() {
  Verdict v;
  const StencilOrder order = StencilOrder::fourth;
  const char* labels[] = {"gamma_real_block", "gamma_zero_mixed", "gamma_fibre_to_real", "gamma_real_to_fibre",
                          "gamma_fibre_block", "ricci_m", "ricci_n", "ricci_mixed_zero", "scalar_general",
                          "ricci_ansatz_m", "ricci_ansatz_n", "scalar_ansatz"};
  constexpr int columns = 12;
  for (auto [m, n] : {std::pair{2, 1}, {3, 1}, {2, 2}}) {
    const WarpedConstants k = solve_perelman_constants(m, n, Branch::plus);
    for (bool bumpy : {false, true}) {
      std::vector<std::vector<double>> series(columns);
      for (int pts : {16, 32, 64}) {
        const GridSpec gm = GridSpec::cube(m, pts, two_pi), gn = GridSpec::cube(n, pts, two_pi);
        const ProductGeometry pg{recipes::conformal_bump(gm, 0.2, 1),
                                 bumpy ? recipes::conformal_bump(gn, 0.2, 1) : recipes::flat(gn),
                                 recipes::dilaton_sine(gm, 0.2, 1), k};
        const CurvatureErrors e = compare_curvature(pg, 16, 16, order);
        for (int f = 0; f < christoffel_family_count; ++f) series[f].push_back(e.christoffel[f]);
        series[5].push_back(e.ricci_m);
        series[6].push_back(e.ricci_n);
        series[7].push_back(e.ricci_mixed);
        series[8].push_back(e.scalar_general);
        series[9].push_back(e.ricci_ansatz_m.value());
        series[10].push_back(e.ricci_ansatz_n.value());
        series[11].push_back(e.scalar_ansatz.value());
      }
      detail("(m,n)=(%d,%d) h=%s, errors at 16/32/64 and observed order:", m, n, bumpy ? "conformal" : "flat");
      for (int c = 0; c < columns; ++c) {
        const OrderVerdict o = judge_order(series[c], 1.8, 1e-10);
        detail("  %-20s %.3e %.3e %.3e  %s", labels[c], series[c][0], series[c][1], series[c][2],
               o.exact ? "exact" : std::to_string(o.order).c_str());
        v.require(o.pass && series[c][2] < 1e-3, labels[c]);
      }
    }
  }
  return v.pass;
}

// ---------------------------------------------------------------- 3
ProductGeometry identity_geometry(int m, int n, int pm, int pn, const WarpedConstants& k, bool random_m,
                                  bool bumpy_n) {
  const GridSpec gm = GridSpec::cube(m, pm, two_pi), gn = GridSpec::cube(n, pn, two_pi);
  ProductGeometry pg{random_m ? recipes::random_spd(gm, 11, 0.3) : recipes::conformal_bump(gm, 0.2, 1),
                     bumpy_n ? recipes::conformal_bump(gn, 0.15, 1) : recipes::flat(gn),
                     recipes::dilaton_sine(gm, 0.2, 1), k};
  return normalize_fiber_volume(std::move(pg));
}

bool integral_identity() {
  Verdict v;
  for (double lam : {0.0, 0.5, 1.0}) {
    const WarpedConstants k = lambda_to_constants(3, 1, lam).back();
    std::vector<double> res;
    double S = 0.0;
    for (int pm : {16, 32, 64}) {
      const FunctionalReport r = theorem_identity_residual(identity_geometry(3, 1, pm, 8, k, false, false));
      res.push_back(std::abs(r.theorem_residual));
      S = r.S_tilde;
    }
    const double bound = 5.0 * res[1] / 4.0;
    detail("M=T^3, flat unit N=S^1, lambda=%g (A=%.6g B=%.3g): |S - F_lambda| = %.3e %.3e %.3e, bound %.3e, S=%.6g",
           lam, k.A, k.B, res[0], res[1], res[2], bound, S);
    v.require(res[2] <= bound || res[2] <= 1e-12 * std::abs(S), "flat fibre residual bound");
  }
  const WarpedConstants k = solve_perelman_constants(2, 3, Branch::plus);
  std::vector<double> res;
  for (int pm : {16, 32, 64}) {
    const FunctionalReport r = theorem_identity_residual(identity_geometry(2, 3, pm, 8, k, true, true));
    res.push_back(std::abs(r.theorem_residual));
    if (pm == 64)
      detail("M=T^2 random metric, N=T^3 conformal (unit volume, int R_N = %.4g): residual %.3e %.3e %.3e, order %.3f",
             r.total_scalar_N, res[0], res[1], res[2], convergence_order(res[1], res[2]));
  }
  v.require(judge_order(res, 1.8, 1e-12).pass, "nonflat fibre residual order");
  return v.pass;
}

// ---------------------------------------------------------------- 4
bool first_variation() {
  Verdict v;
  const int pts = 128;
  for (double lam : {0.0, 0.5}) {
    const WarpedConstants k = lambda_to_constants(2, 1, lam).back();
    const GridSpec gm = GridSpec::cube(2, pts, two_pi), gn = GridSpec::cube(1, 8, two_pi);
    const ProductGeometry pg{recipes::random_spd(gm, 2024, 0.3), recipes::flat(gn), recipes::dilaton_sine(gm, 0.3, 1),
                             k};
    double worst = 0.0, worst_with_trace = 0.0;
    for (std::uint64_t dir = 0; dir < 20; ++dir) {
      const SymTensorField dg = recipes::random_direction(gm, 1000 + dir, 0.1);
      const VariationCheck c = first_variation_check(pg, dg, lam, StencilOrder::fourth);
      worst = std::max(worst, std::abs(c.numeric_derivative - c.closed_form) / std::abs(c.numeric_derivative));
      worst_with_trace = std::max(worst_with_trace, std::abs(c.numeric_derivative - c.closed_form - c.trace_term) /
                                                        std::abs(c.numeric_derivative));
    }
    detail("lambda=%g, M=T^2 N=%d order 4, 20 directions: max relative mismatch %.3e "
           "(with the lambda trace term added: %.3e)",
           lam, pts, worst, worst_with_trace);
    v.require(worst <= 1e-4, "relative mismatch at lambda=" + std::to_string(lam));
  }
  return v.pass;
}

// ---------------------------------------------------------------- 5
bool flow_invariants() {
  Verdict v;
  {
    const GridSpec g = GridSpec::cube(2, 16, two_pi);
    const FlowState s(recipes::random_spd(g, 9, 0.3), recipes::dilaton_sine(g, 0.2, 1));
    for (auto [integ, expect, tol] : {std::tuple{Integrator::euler, 1.0, 0.1}, {Integrator::rk4, 4.0, 0.3}}) {
      std::vector<double> dts{0.01, 0.005, 0.0025}, dev;
      for (double dt : dts) {
        FlowConfig c;
        c.dt = dt;
        c.t_end = 0.04;
        c.integrator = integ;
        const FlowRun run = run_coupled(s, c);
        dev.push_back(conserved_measure_check(run.snapshots));
      }
      const double slope = loglog_slope(dts, dev);
      detail("%s constraint drift at dt 0.01/0.005/0.0025: %.3e %.3e %.3e, slope %.3f", to_string(integ).c_str(),
             dev[0], dev[1], dev[2], slope);
      v.require(std::abs(slope - expect) <= tol, "drift slope");
    }
  }
  {
    const GridSpec g = GridSpec::cube(2, 32, two_pi);
    for (double lam : {0.0, 0.5}) {
      FlowConfig c;
      c.dt = 1e-4;
      c.lambda = lam;
      c.order = StencilOrder::fourth;
      c.filter_cutoff = 0.5;
      const DissipationCheck d =
          instantaneous_dissipation(FlowState(recipes::random_spd(g, 3, 0.3), recipes::dilaton_sine(g, 0.2, 1)), c);
      detail("t=0, lambda=%g: dF/dt=%.6g D=%.6g ratio=%.6f%s", lam, d.dFdt, d.D, d.ratio,
             lam == 0.0 ? "" : " (recorded only)");
      if (lam == 0.0) v.require(std::abs(std::abs(d.ratio) - 1.0) <= 1e-3, "instantaneous dissipation ratio");
    }
  }
  {
    const GridSpec g = GridSpec::cube(2, 24, two_pi);
    FlowConfig c;
    c.mode = FlowMode::decoupled;
    c.dt = default_time_step(g);
    c.t_end = 60 * c.dt;
    const auto traj = run_decoupled(recipes::flat(g), recipes::dilaton_sine(g, 0.3, 1), c);
    const MonotonicityReport rep = monotonicity_report(traj, 0.0);
    detail("decoupled, flat g0: %zu snapshots, F from %.8g to %.8g, nondecreasing=%s", traj.size(), rep.rows.front().F,
           rep.rows.back().F, rep.nondecreasing ? "yes" : "no");
    v.require(traj.size() >= 50 && rep.nondecreasing, "decoupled monotonicity");
    detail("empirical dF/dt sign along the decoupled run: %+d (%s)", rep.sign,
           rep.consistent ? "consistent" : "inconsistent");
    v.require(rep.consistent, "decoupled sign consistency");
  }
  {
    const GridSpec g = GridSpec::cube(2, 32, two_pi);
    FlowConfig c;
    c.dt = default_time_step(g);
    c.t_end = 20 * c.dt;
    c.snapshot_stride = 2;
    c.filter_cutoff = 0.5;
    const FlowRun run = run_coupled(FlowState(recipes::random_spd(g, 5, 0.3), recipes::dilaton_sine(g, 0.2, 1)), c);
    const MonotonicityReport rep = monotonicity_report(run.snapshots, 0.0);
    detail("coupled lambda=0 run: empirical dF/dt sign %+d (%s); the displayed formula has the opposite sign", rep.sign,
           rep.consistent ? "consistent" : "inconsistent");
    if (run.status != RunStatus::completed) detail("run stopped: %s", run.diagnostic.c_str());
    v.require(run.status == RunStatus::completed && rep.consistent, "coupled sign consistency");
  }
  return v.pass;
}

// ---------------------------------------------------------------- 6
bool reproducibility() {
  Verdict v;
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"constants", ""},
      {"verify-curvature", "[geometry]\nm = 2\nn = 1\nresolutions = 8, 16\nsample = 8\n"},
      {"verify-identity", "[geometry]\nm = 3\nn = 1\nlambda = 0.5\nresolutions = 8, 16\nfiber_resolutions = 8, 8\n"
                          "sample = 8\n"},
      {"verify-variation", "[run]\nseed = 99\n[geometry]\nm = 2\nn = 1\nlambda = 0\nresolutions = 16\n"
                           "fiber_resolutions = 8\nsample = 8\n[metric_m]\nrecipe = random-spd\n"
                           "[variation]\ndirections = 3\n"},
      {"flow", "[run]\nseed = 5\n[metric_m]\nrecipe = random-spd\n[dilaton]\nrecipe = under-resolved\n"
               "[flow]\ndim = 1\npoints = 32\nt_end = 0.05\nfilter_cutoff = 0.5\n"},
      {"flow", "[metric_m]\nrecipe = conformal-bump\n[flow]\nmode = decoupled\ndim = 2\npoints = 16\nt_end = 0.02\n"},
  };
  for (const auto& [command, text] : runs) {
    cli::ExperimentConfig cfg = cli::parse_config(text, command);
    if (command == "constants") {
      cfg.m = 3;
      cfg.n = 2;
    }
    const cli::CommandResult a = cli::run_command(command, cfg);
    const cli::CommandResult b = cli::run_command(command, cfg);
    const bool same = a.csv == b.csv && !a.csv.empty();
    detail("%-17s exit %d, %zu bytes, identical=%s", command.c_str(), a.exit_code, a.csv.size(), same ? "yes" : "no");
    v.require(same, command + " rerun");
  }
  return v.pass;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    bool (*run)();
  };
  const Criterion criteria[] = {
      {1, "constants algebra", constants_algebra},
      {2, "closed-form curvature vs generic oracle", curvature_against_oracle},
      {3, "integral identity S = vol_N F_lambda + fibre term", integral_identity},
      {4, "first variation along 20 seeded directions", first_variation},
      {5, "flow invariants", flow_invariants},
      {6, "byte-identical reruns", reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    std::string error;
    std::printf("criterion %d (%s)\n", c.id, c.name);
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!error.empty()) detail("exception: %s", error.c_str());
    std::printf("%s criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.name, secs);
    std::fflush(stdout);
    failed += ok ? 0 : 1;
  }
  std::printf("%d of 6 criteria passed\n", 6 - failed);
  return failed == 0 ? 0 : 1;
}
