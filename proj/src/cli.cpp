#include "warpflow/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "warpflow/functionals.hpp"
#include "warpflow/geometry.hpp"
#include "warpflow/recipes.hpp"
#include "warpflow/verify.hpp"

namespace warpflow::cli {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"run", {"seed", "order", "period"}},
      {"geometry",
       {"m", "n", "branch", "lambda", "A", "B", "resolutions", "fiber_resolutions", "sample", "fiber_sample",
        "normalize_fiber"}},
      {"metric_m", {"recipe", "amplitude", "mode", "scale"}},
      {"metric_n", {"recipe", "amplitude", "mode", "scale"}},
      {"dilaton", {"recipe", "amplitude", "mode", "noise"}},
      {"variation", {"directions", "amplitude", "step"}},
      {"flow",
       {"mode", "integrator", "lambda", "dt", "t_end", "filter_cutoff", "snapshot_stride", "growth_limit", "dim",
        "points"}},
      {"tolerances",
       {"min_order", "curvature_abs", "identity_factor", "variation_rel", "constraint", "roundoff_floor"}},
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double to_double(const std::string& text, const std::string& at) {
  const std::string s = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v))
    throw ConfigError(at + ": expected a number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& text, const std::string& at) {
  const std::string s = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(at + ": expected an integer, got '" + text + "'");
  return v;
}

int to_int(const std::string& text, const std::string& at) {
  const long long v = to_integer(text, at);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(at + ": integer out of range");
  return static_cast<int>(v);
}

std::uint64_t to_seed(const std::string& text, const std::string& at) {
  const std::string s = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(at + ": expected a non-negative integer seed, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& text, const std::string& at) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError(at + ": expected true or false, got '" + text + "'");
}

std::vector<int> to_int_list(const std::string& text, const std::string& at) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(item, at));
  if (out.empty()) throw ConfigError(at + ": empty list");
  return out;
}

void read_metric(const pt::ptree& sec, const std::string& name, MetricRecipe& r) {
  for (const auto& [key, node] : sec) {
    const std::string v = node.get_value<std::string>();
    const std::string at = where(name, key);
    if (key == "recipe") {
      r.name = trim(v);
      if (r.name != "flat" && r.name != "conformal-bump" && r.name != "random-spd")
        throw ConfigError(at + ": unknown recipe '" + r.name + "' (flat | conformal-bump | random-spd)");
    } else if (key == "amplitude") {
      r.amplitude = to_double(v, at);
    } else if (key == "mode") {
      r.mode = to_int(v, at);
    } else if (key == "scale") {
      r.scale = to_double(v, at);
      if (!(r.scale > 0.0)) throw ConfigError(at + ": must be positive");
    }
  }
}

StencilOrder to_order(const std::string& v, const std::string& at) {
  try {
    return parse_stencil_order(to_int(v, at));
  } catch (const GridError& e) {
    throw ConfigError(at + ": " + e.what());
  }
}

void apply_tree(ExperimentConfig& c, const pt::ptree& tree) {
  for (const auto& [section, sec] : tree) {
    const auto found = schema().find(section);
    if (found == schema().end()) {
      if (sec.empty()) throw ConfigError("key '" + section + "' outside any section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, node] : sec) {
      if (!found->second.count(key)) throw ConfigError("unknown key " + where(section, key));
      if (!node.empty()) throw ConfigError(where(section, key) + ": nested values are not allowed");
    }
    auto get = [&](const char* key) -> std::optional<std::string> {
      const auto v = sec.get_optional<std::string>(key);
      if (v) return *v;
      return std::nullopt;
    };
    if (section == "run") {
      if (auto v = get("seed")) c.seed = to_seed(*v, where(section, "seed"));
      if (auto v = get("order")) c.order = to_order(*v, where(section, "order"));
      if (auto v = get("period")) c.period = to_double(*v, where(section, "period"));
    } else if (section == "geometry") {
      if (auto v = get("m")) c.m = to_int(*v, where(section, "m"));
      if (auto v = get("n")) c.n = to_int(*v, where(section, "n"));
      if (auto v = get("branch")) {
        const std::string b = trim(*v);
        if (b == "plus") c.branch = Branch::plus;
        else if (b == "minus") c.branch = Branch::minus;
        else throw ConfigError(where(section, "branch") + ": expected plus or minus");
      }
      if (auto v = get("lambda")) c.lambda = to_double(*v, where(section, "lambda"));
      if (auto v = get("A")) c.A = to_double(*v, where(section, "A"));
      if (auto v = get("B")) c.B = to_double(*v, where(section, "B"));
      if (auto v = get("resolutions")) c.resolutions = to_int_list(*v, where(section, "resolutions"));
      if (auto v = get("fiber_resolutions"))
        c.fiber_resolutions = to_int_list(*v, where(section, "fiber_resolutions"));
      if (auto v = get("sample")) c.sample = to_int(*v, where(section, "sample"));
      if (auto v = get("fiber_sample")) c.fiber_sample = to_int(*v, where(section, "fiber_sample"));
      if (auto v = get("normalize_fiber")) c.normalize_fiber = to_bool(*v, where(section, "normalize_fiber"));
    } else if (section == "metric_m") {
      read_metric(sec, section, c.metric_m);
    } else if (section == "metric_n") {
      read_metric(sec, section, c.metric_n);
    } else if (section == "dilaton") {
      if (auto v = get("recipe")) {
        c.dilaton.name = trim(*v);
        if (c.dilaton.name != "sine" && c.dilaton.name != "under-resolved")
          throw ConfigError(where(section, "recipe") + ": unknown recipe '" + c.dilaton.name +
                            "' (sine | under-resolved)");
      }
      if (auto v = get("amplitude")) c.dilaton.amplitude = to_double(*v, where(section, "amplitude"));
      if (auto v = get("mode")) c.dilaton.mode = to_int(*v, where(section, "mode"));
      if (auto v = get("noise")) c.dilaton.noise = to_double(*v, where(section, "noise"));
    } else if (section == "variation") {
      if (auto v = get("directions")) c.directions = to_int(*v, where(section, "directions"));
      if (auto v = get("amplitude")) c.direction_amplitude = to_double(*v, where(section, "amplitude"));
      if (auto v = get("step")) c.variation_step = to_double(*v, where(section, "step"));
    } else if (section == "flow") {
      try {
        if (auto v = get("mode")) c.flow.mode = parse_flow_mode(trim(*v));
        if (auto v = get("integrator")) c.flow.integrator = parse_integrator(trim(*v));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("[flow] ") + e.what());
      }
      if (auto v = get("lambda")) c.flow.lambda = to_double(*v, where(section, "lambda"));
      if (auto v = get("dt")) c.flow.dt = to_double(*v, where(section, "dt"));
      if (auto v = get("t_end")) c.flow.t_end = to_double(*v, where(section, "t_end"));
      if (auto v = get("filter_cutoff")) c.flow.filter_cutoff = to_double(*v, where(section, "filter_cutoff"));
      if (auto v = get("snapshot_stride")) c.flow.snapshot_stride = to_int(*v, where(section, "snapshot_stride"));
      if (auto v = get("growth_limit")) c.flow.growth_limit = to_double(*v, where(section, "growth_limit"));
      if (auto v = get("dim")) c.flow_dim = to_int(*v, where(section, "dim"));
      if (auto v = get("points")) c.flow_points = to_int(*v, where(section, "points"));
    } else if (section == "tolerances") {
      if (auto v = get("min_order")) c.tol.min_order = to_double(*v, where(section, "min_order"));
      if (auto v = get("curvature_abs")) c.tol.curvature_abs = to_double(*v, where(section, "curvature_abs"));
      if (auto v = get("identity_factor")) c.tol.identity_factor = to_double(*v, where(section, "identity_factor"));
      if (auto v = get("variation_rel")) c.tol.variation_rel = to_double(*v, where(section, "variation_rel"));
      if (auto v = get("constraint")) c.tol.constraint = to_double(*v, where(section, "constraint"));
      if (auto v = get("roundoff_floor")) c.tol.roundoff_floor = to_double(*v, where(section, "roundoff_floor"));
    }
  }
}

void check_ranges(const ExperimentConfig& c) {
  if (c.m < 1 || c.n < 1 || c.m + c.n > 6) throw ConfigError("[geometry] need m, n >= 1 and m + n <= 6");
  for (int r : c.resolutions)
    if (r < 8) throw ConfigError("[geometry] resolutions must be >= 8");
  for (int r : c.fiber_resolutions)
    if (r < 8) throw ConfigError("[geometry] fiber_resolutions must be >= 8");
  if (!c.fiber_resolutions.empty() && c.fiber_resolutions.size() != c.resolutions.size())
    throw ConfigError("[geometry] fiber_resolutions must list as many entries as resolutions");
  if (c.A.has_value() != c.B.has_value()) throw ConfigError("[geometry] A and B must be given together");
  if (c.A && (c.lambda || c.branch)) throw ConfigError("[geometry] give either A/B, lambda, or branch");
  if (c.period < 0.0) throw ConfigError("[run] period must be positive");
  if (c.directions < 1) throw ConfigError("[variation] directions must be >= 1");
  if (!(c.variation_step > 0.0)) throw ConfigError("[variation] step must be positive");
  if (c.flow_dim < 1 || c.flow_dim > 6) throw ConfigError("[flow] dim must be in 1..6");
  if (c.flow_points < 8) throw ConfigError("[flow] points must be >= 8");
  if (c.sample < 1 || c.fiber_sample < 0) throw ConfigError("[geometry] sample counts must be positive");
  for (const MetricRecipe* r : {&c.metric_m, &c.metric_n})
    if (r->name == "random-spd" && !(r->amplitude >= 0.0 && r->amplitude < 1.0))
      throw ConfigError("random-spd amplitude must be in [0,1)");
}

// ---- shared helpers for the commands ----

struct Csv {
  std::ostringstream out;
  void comment(const std::string& line) { out << "# " << line << '\n'; }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << '\n';
  }
};

std::string describe(const MetricRecipe& r) {
  if (r.name == "flat") return "flat(scale=" + format_number(r.scale) + ")";
  if (r.name == "conformal-bump")
    return "conformal-bump(amplitude=" + format_number(r.amplitude) + ",mode=" + std::to_string(r.mode) + ")";
  return "random-spd(amplitude=" + format_number(r.amplitude) + ")";
}

std::string describe(const DilatonRecipe& r) {
  std::string s = r.name + "(amplitude=" + format_number(r.amplitude) + ",mode=" + std::to_string(r.mode);
  if (r.name == "under-resolved") s += ",noise=" + format_number(r.noise);
  return s + ")";
}

// Seeds for the two factor metrics and the dilaton noise are split off the run
// seed so that each recipe draws an independent stream.
std::uint64_t sub_seed(const ExperimentConfig& c, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(*c.seed), static_cast<std::uint32_t>(*c.seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

SymTensorField make_metric(const MetricRecipe& r, const GridSpec& grid, const ExperimentConfig& c,
                           std::uint64_t salt) {
  if (r.name == "flat") return recipes::flat(grid, r.scale);
  if (r.name == "conformal-bump") return recipes::conformal_bump(grid, r.amplitude, r.mode);
  return recipes::random_spd(grid, sub_seed(c, salt), r.amplitude);
}

ScalarField make_dilaton(const DilatonRecipe& r, const GridSpec& grid, const ExperimentConfig& c) {
  if (r.name == "sine") return recipes::dilaton_sine(grid, r.amplitude, r.mode);
  return recipes::under_resolved_dilaton(grid, r.amplitude, r.mode, sub_seed(c, 3), r.noise);
}

WarpedConstants make_constants(const ExperimentConfig& c) {
  if (c.A) {
    const WarpedConstants probe = WarpedConstants::arbitrary(c.m, c.n, *c.A, *c.B);
    if (probe.on_c2() && c.m + c.n > 2) return WarpedConstants::on_c2_line(c.m, c.n, *c.A, *c.B);
    return probe;
  }
  if (c.lambda) {
    const auto roots = lambda_to_constants(c.m, c.n, *c.lambda);
    return c.branch == Branch::minus ? roots.front() : roots.back();
  }
  return solve_perelman_constants(c.m, c.n, c.branch.value_or(Branch::plus));
}

ProductGeometry make_geometry(const ExperimentConfig& c, int points_m, int points_n) {
  const double L = c.effective_period();
  const GridSpec gm = GridSpec::cube(c.m, points_m, L);
  const GridSpec gn = GridSpec::cube(c.n, points_n, L);
  ProductGeometry pg{make_metric(c.metric_m, gm, c, 1), make_metric(c.metric_n, gn, c, 2),
                     make_dilaton(c.dilaton, gm, c), make_constants(c)};
  const DefinitenessReport gm_def = min_eigenvalue(pg.g);
  const DefinitenessReport gn_def = min_eigenvalue(pg.h);
  if (!(gm_def.min_eigenvalue > 0.0) || !(gn_def.min_eigenvalue > 0.0))
    throw ConfigError("recipe produced a metric that is not positive definite");
  return pg;
}

int fiber_points(const ExperimentConfig& c, std::size_t i) {
  return c.fiber_resolutions.empty() ? c.resolutions[i] : c.fiber_resolutions[i];
}

void header(Csv& csv, const std::string& command, const ExperimentConfig& c, const WarpedConstants* k) {
  csv.comment("warpflow " + command);
  std::ostringstream os;
  os << "m=" << c.m << " n=" << c.n << " order=" << static_cast<int>(c.order)
     << " period=" << format_number(c.effective_period());
  if (c.seed) os << " seed=" << *c.seed;
  csv.comment(os.str());
  if (k) {
    csv.comment("constants: A=" + format_number(k->A) + " B=" + format_number(k->B) +
                " lambda=" + format_number(k->lambda) + " C1=" + format_number(k->c1_residual()) +
                " C2=" + format_number(k->c2_residual()));
  }
  csv.comment("recipes: metric_m=" + describe(c.metric_m) + " metric_n=" + describe(c.metric_n) +
              " dilaton=" + describe(c.dilaton));
}

std::string order_cell(const OrderVerdict& v) { return v.exact ? "exact" : format_number(v.order); }

}  // namespace

double ExperimentConfig::effective_period() const { return period > 0.0 ? period : 2.0 * std::numbers::pi; }

bool ExperimentConfig::needs_seed(const std::string& command) const {
  if (command == "constants") return false;
  if (command == "verify-variation") return true;
  const bool geometry_cmd = command != "flow";
  if (metric_m.name == "random-spd") return true;
  if (geometry_cmd && metric_n.name == "random-spd") return true;
  return dilaton.name == "under-resolved";
}

ExperimentConfig parse_config(const std::string& text, const std::string& command,
                              std::optional<std::uint64_t> seed_override) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ExperimentConfig c;
  apply_tree(c, tree);
  if (seed_override) c.seed = seed_override;
  check_ranges(c);
  if (c.needs_seed(command) && !c.seed)
    throw ConfigError("this run uses randomized data; a seed is mandatory ([run] seed or --seed)");
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::string& command,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), command, seed_override);
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

CommandResult cmd_constants(int m, int n) {
  if (m < 1 || n < 1) throw ConfigError("dimensions must be positive");
  if (m + n <= 2) throw ConstantsError("nonzero constants need m+n>2 (got m=" + std::to_string(m) +
                                       ", n=" + std::to_string(n) + ")");
  Csv csv;
  csv.comment("warpflow constants");
  csv.comment("m=" + std::to_string(m) + " n=" + std::to_string(n));
  csv.comment("tolerances: algebraic=" + format_number(algebraic_tolerance));
  const auto lmax = lambda_max(m);
  csv.comment("lambda_max=" + (lmax ? format_number(*lmax) : std::string("none")));
  csv.comment("columns: branch, theta = A/B, A, B, c1 = 2ABn+(m-2)A^2-B^2n, c2 = A(m-2)+Bn-2, Z (zero on both "
              "conditions)");
  csv.row({"branch", "theta", "A", "B", "c1", "c2", "Z"});
  bool ok = true;
  std::vector<Branch> branches{Branch::plus};
  if (m != 2) branches.push_back(Branch::minus);
  for (Branch b : branches) {
    const WarpedConstants k = solve_perelman_constants(m, n, b);
    ok = ok && std::abs(k.c1_residual()) <= algebraic_tolerance && std::abs(k.c2_residual()) <= algebraic_tolerance;
    csv.row({m == 2 ? "single" : (b == Branch::plus ? "plus" : "minus"), format_number(k.theta.value_or(NAN)),
             format_number(k.A), format_number(k.B), format_number(k.c1_residual()), format_number(k.c2_residual()),
             format_number(k.lambda)});
  }
  csv.comment(std::string("verdict: ") + (ok ? "pass" : "fail"));
  return {ok ? exit_pass : exit_tolerance, csv.out.str(), ok ? "residuals within tolerance" : "residual too large"};
}

CommandResult cmd_verify_curvature(const ExperimentConfig& c) {
  const WarpedConstants k = make_constants(c);
  Csv csv;
  header(csv, "verify-curvature", c, &k);
  csv.comment("tolerances: min_order=" + format_number(c.tol.min_order) +
              " curvature_abs=" + format_number(c.tol.curvature_abs) +
              " roundoff_floor=" + format_number(c.tol.roundoff_floor));
  csv.comment("each column: max |closed form - generic operators on the assembled product metric| over a common "
              "coarse lattice; ricci_mixed is max |oracle R_ia| (closed form is zero)");
  csv.comment("gamma_real_block=Gamma^k_ij gamma_zero_mixed=Gamma^a_ij,Gamma^k_ia gamma_fibre_to_real=Gamma^k_ab "
              "gamma_real_to_fibre=Gamma^c_ib gamma_fibre_block=Gamma^c_ab");
  csv.comment("ricci_m/ricci_n/scalar_general: formulas valid for any A,B; *_ansatz: simplified formulas (empty "
              "unless both conditions hold)");
  const std::vector<std::string> names{"gamma_real_block", "gamma_zero_mixed", "gamma_fibre_to_real",
                                       "gamma_real_to_fibre", "gamma_fibre_block", "ricci_m", "ricci_n",
                                       "ricci_mixed", "scalar_general", "ricci_ansatz_m", "ricci_ansatz_n",
                                       "scalar_ansatz"};
  std::vector<std::string> head{"row", "points_m", "points_n"};
  head.insert(head.end(), names.begin(), names.end());
  csv.row(head);
  std::vector<std::vector<double>> series(names.size());
  bool ansatz = false;
  const int fs = c.fiber_sample > 0 ? c.fiber_sample : c.sample;
  for (std::size_t i = 0; i < c.resolutions.size(); ++i) {
    const ProductGeometry pg = make_geometry(c, c.resolutions[i], fiber_points(c, i));
    const CurvatureErrors e = compare_curvature(pg, c.sample, fs, c.order);
    std::vector<double> vals(e.christoffel.begin(), e.christoffel.end());
    vals.insert(vals.end(), {e.ricci_m, e.ricci_n, e.ricci_mixed, e.scalar_general});
    ansatz = e.scalar_ansatz.has_value();
    vals.insert(vals.end(), {e.ricci_ansatz_m.value_or(NAN), e.ricci_ansatz_n.value_or(NAN),
                             e.scalar_ansatz.value_or(NAN)});
    std::vector<std::string> row{"error", std::to_string(c.resolutions[i]), std::to_string(fiber_points(c, i))};
    for (std::size_t j = 0; j < vals.size(); ++j) {
      series[j].push_back(vals[j]);
      row.push_back(std::isnan(vals[j]) ? "" : format_number(vals[j]));
    }
    csv.row(row);
  }
  bool ok = true;
  std::vector<std::string> order_row{"order", "", ""};
  std::vector<std::string> failures;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j >= 9 && !ansatz) {
      order_row.push_back("");
      continue;
    }
    const OrderVerdict v = judge_order(series[j], c.tol.min_order, c.tol.roundoff_floor);
    order_row.push_back(c.resolutions.size() > 1 ? order_cell(v) : "");
    const bool within = series[j].back() <= c.tol.curvature_abs;
    const bool pass = within && (c.resolutions.size() < 2 || v.pass);
    if (!pass) failures.push_back(names[j]);
    ok = ok && pass;
  }
  csv.row(order_row);
  std::string msg = ok ? "all families converge" : "failed:";
  for (const auto& f : failures) msg += " " + f;
  csv.comment("verdict: " + std::string(ok ? "pass" : "fail"));
  return {ok ? exit_pass : exit_tolerance, csv.out.str(), msg};
}

CommandResult cmd_verify_identity(const ExperimentConfig& c) {
  const WarpedConstants k = make_constants(c);
  if (!k.on_c2()) throw ConstantsError("the identity needs constants with A(m-2)+Bn=2");
  Csv csv;
  header(csv, "verify-identity", c, &k);
  csv.comment("tolerances: min_order=" + format_number(c.tol.min_order) +
              " identity_factor=" + format_number(c.tol.identity_factor) +
              " roundoff_floor=" + format_number(c.tol.roundoff_floor));
  csv.comment("residual = S - vol_N * F_lambda - fiber_weight * total_scalar_N, with S = integral of the warped "
              "scalar curvature over M x N, fiber_weight = integral over M of e^{(B-A-1)f}");
  csv.comment(std::string("fiber normalised to unit volume: ") + (c.normalize_fiber ? "yes" : "no"));
  csv.row({"row", "points_m", "points_n", "S", "vol_N", "F", "F_lambda", "fiber_weight", "total_scalar_N",
           "residual"});
  std::vector<double> res;
  for (std::size_t i = 0; i < c.resolutions.size(); ++i) {
    ProductGeometry pg = make_geometry(c, c.resolutions[i], fiber_points(c, i));
    if (c.normalize_fiber) pg = normalize_fiber_volume(std::move(pg));
    const FunctionalReport r = theorem_identity_residual(pg, c.order);
    res.push_back(std::abs(r.theorem_residual));
    csv.row({"value", std::to_string(c.resolutions[i]), std::to_string(fiber_points(c, i)), format_number(r.S_tilde),
             format_number(r.vol_N), format_number(r.F), format_number(r.F_lambda), format_number(r.fiber_weight),
             format_number(r.total_scalar_N), format_number(r.theorem_residual)});
  }
  const OrderVerdict v = judge_order(res, c.tol.min_order, c.tol.roundoff_floor);
  bool ok = res.size() < 2 || v.pass;
  if (res.size() >= 2 && !v.exact) ok = ok && res.back() <= c.tol.identity_factor * res[res.size() - 2] / 4.0;
  csv.row({"order", "", "", "", "", "", "", "", "", res.size() > 1 ? order_cell(v) : ""});
  csv.comment("verdict: " + std::string(ok ? "pass" : "fail"));
  return {ok ? exit_pass : exit_tolerance, csv.out.str(),
          ok ? "identity residual converges" : "identity residual does not converge as required"};
}

CommandResult cmd_verify_variation(const ExperimentConfig& c) {
  const WarpedConstants k = make_constants(c);
  Csv csv;
  header(csv, "verify-variation", c, &k);
  csv.comment("tolerances: variation_rel=" + format_number(c.tol.variation_rel) +
              " min_order=" + format_number(c.tol.min_order) + " roundoff_floor=" +
              format_number(c.tol.roundoff_floor) + " step=" + format_number(c.variation_step));
  csv.comment("numeric = d/de of 2S along (dg, tr_g(dg)/2), Richardson-extrapolated central differences; closed = "
              "-2 vol_N integral <Ric+Hess f+lambda df(x)df, dg> e^{-f} dmu");
  csv.comment("trace_term = -2 lambda vol_N integral (Lap f - |grad f|^2) tr_g(dg) e^{-f} dmu (diagnostic, not "
              "part of the closed form)");
  csv.row({"row", "points_m", "direction", "numeric", "closed", "rel_mismatch", "trace_term",
           "rel_mismatch_with_trace", "richardson_gap"});
  std::mt19937_64 rng(*c.seed);
  std::vector<std::uint64_t> seeds(c.directions);
  for (auto& s : seeds) s = rng();
  std::vector<double> worst;
  for (std::size_t i = 0; i < c.resolutions.size(); ++i) {
    const ProductGeometry pg = make_geometry(c, c.resolutions[i], fiber_points(c, i));
    double w = 0.0;
    for (int j = 0; j < c.directions; ++j) {
      const SymTensorField dg = recipes::random_direction(pg.grid_m(), seeds[j], c.direction_amplitude);
      const VariationCheck v = first_variation_check(pg, dg, k.lambda, c.order, c.variation_step);
      const double rel = std::abs(v.numeric_derivative - v.closed_form) / std::abs(v.numeric_derivative);
      const double rel_t =
          std::abs(v.numeric_derivative - v.closed_form - v.trace_term) / std::abs(v.numeric_derivative);
      w = std::max(w, rel);
      csv.row({"direction", std::to_string(c.resolutions[i]), std::to_string(j), format_number(v.numeric_derivative),
               format_number(v.closed_form), format_number(rel), format_number(v.trace_term), format_number(rel_t),
               format_number(v.richardson_gap)});
    }
    worst.push_back(w);
    csv.row({"max", std::to_string(c.resolutions[i]), "", "", "", format_number(w), "", "", ""});
  }
  const OrderVerdict v = judge_order(worst, c.tol.min_order, c.tol.roundoff_floor);
  csv.row({"order", "", "", "", "", worst.size() > 1 ? order_cell(v) : "", "", "", ""});
  const bool ok = worst.back() <= c.tol.variation_rel && (worst.size() < 2 || v.pass);
  csv.comment("verdict: " + std::string(ok ? "pass" : "fail"));
  std::ostringstream msg;
  msg << "max relative mismatch " << format_number(worst.back()) << (ok ? " within " : " exceeds ")
      << format_number(c.tol.variation_rel);
  return {ok ? exit_pass : exit_tolerance, csv.out.str(), msg.str()};
}

CommandResult cmd_flow(const ExperimentConfig& c) {
  const double L = c.effective_period();
  const GridSpec grid = GridSpec::cube(c.flow_dim, c.flow_points, L);
  FlowConfig fc = c.flow;
  fc.order = c.order;
  if (fc.dt == 0.0) fc.dt = default_time_step(grid);
  try {
    fc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[flow] ") + e.what());
  }
  const SymTensorField g0 = make_metric(c.metric_m, grid, c, 1);
  const ScalarField f0 = make_dilaton(c.dilaton, grid, c);
  if (!(min_eigenvalue(g0).min_eigenvalue > 0.0))
    throw ConfigError("recipe produced a metric that is not positive definite");

  Csv csv;
  csv.comment("warpflow flow");
  {
    std::ostringstream os;
    os << "mode=" << to_string(fc.mode) << " integrator=" << to_string(fc.integrator)
       << " lambda=" << format_number(fc.lambda) << " dt=" << format_number(fc.dt)
       << " t_end=" << format_number(fc.t_end) << " filter_cutoff=" << format_number(fc.filter_cutoff)
       << " stride=" << fc.snapshot_stride << " dim=" << c.flow_dim << " points=" << c.flow_points
       << " order=" << static_cast<int>(c.order) << " period=" << format_number(L);
    if (c.seed) os << " seed=" << *c.seed;
    csv.comment(os.str());
  }
  csv.comment("recipes: metric=" + describe(c.metric_m) + " dilaton=" + describe(c.dilaton) +
              (fc.mode == FlowMode::decoupled ? " (dilaton is the terminal data at t_end)" : ""));
  csv.comment("tolerances: constraint=" + format_number(c.tol.constraint) +
              " growth_limit=" + format_number(fc.growth_limit));
  const double bound = stability_bound(g0);
  if (fc.dt > bound) csv.comment("warning: dt above the explicit stability estimate " + format_number(bound));
  csv.comment("columns: F_lambda = integral (R + (lambda+1)|grad f|^2) e^{-f} dmu; D = 2 integral "
              "|Ric+Hess f+lambda df(x)df|^2 e^{-f} dmu; dFdt = centered difference of F_lambda; ratio = dFdt/D; "
              "constraint_dev = max |e^{-f} sqrt det g - rho0|/rho0 (coupled mode); min_eigenvalue of g");

  std::vector<FlowState> traj;
  RunStatus status = RunStatus::completed;
  std::string diagnostic;
  if (fc.mode == FlowMode::coupled) {
    FlowRun run = run_coupled(FlowState(g0, f0), fc);
    traj = std::move(run.snapshots);
    status = run.status;
    diagnostic = run.diagnostic;
  } else {
    try {
      traj = run_decoupled(g0, f0, fc);
    } catch (const FlowError& e) {
      status = RunStatus::degenerate;
      diagnostic = e.what();
    } catch (const std::runtime_error& e) {
      status = RunStatus::diverged;
      diagnostic = e.what();
    }
  }

  csv.row({"t", "F_lambda", "D", "dFdt", "ratio", "constraint_dev", "min_eigenvalue"});
  bool finite = true;
  for (const FlowState& s : traj) finite = finite && s.f.all_finite();
  MonotonicityReport rep;
  double worst_dev = 0.0;
  if (!traj.empty() && finite && status == RunStatus::completed) {
    rep = monotonicity_report(traj, fc.lambda, c.order);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const double dev = fc.mode == FlowMode::coupled ? conserved_measure_check({traj[i]}) : NAN;
      if (fc.mode == FlowMode::coupled) worst_dev = std::max(worst_dev, dev);
      const auto& r = rep.rows[i];
      csv.row({format_number(r.t), format_number(r.F), format_number(r.D), format_number(r.dFdt),
               format_number(r.ratio), std::isnan(dev) ? "" : format_number(dev),
               format_number(min_eigenvalue(traj[i].g).min_eigenvalue)});
    }
  }
  bool ok = status == RunStatus::completed;
  std::string msg;
  if (!ok) {
    msg = "run " + to_string(status) + ": " + diagnostic;
  } else if (fc.mode == FlowMode::coupled) {
    ok = worst_dev <= c.tol.constraint && rep.consistent;
    msg = "constraint deviation " + format_number(worst_dev) + (rep.consistent ? "" : ", inconsistent dF/dt sign");
  } else {
    ok = rep.nondecreasing && rep.consistent;
    msg = std::string("F ") + (rep.nondecreasing ? "nondecreasing" : "decreases somewhere") +
          (rep.consistent ? "" : ", inconsistent dF/dt sign");
  }
  csv.comment("status: " + to_string(status) + (diagnostic.empty() ? "" : " (" + diagnostic + ")"));
  csv.comment("observed dF/dt sign: " + std::to_string(rep.sign) + (rep.consistent ? " (consistent)" : ""));
  csv.comment("verdict: " + std::string(ok ? "pass" : "fail"));
  return {ok ? exit_pass : exit_tolerance, csv.out.str(), msg};
}

CommandResult run_command(const std::string& command, const ExperimentConfig& config) {
  try {
    if (command == "constants") return cmd_constants(config.m, config.n);
    if (command == "verify-curvature") return cmd_verify_curvature(config);
    if (command == "verify-identity") return cmd_verify_identity(config);
    if (command == "verify-variation") return cmd_verify_variation(config);
    if (command == "flow") return cmd_flow(config);
    return {exit_invalid, "", "unknown command '" + command + "'"};
  } catch (const ConfigError& e) {
    return {exit_invalid, "", e.what()};
  } catch (const ConstantsError& e) {
    return {exit_invalid, "", e.what()};
  } catch (const GridError& e) {
    return {exit_invalid, "", e.what()};
  } catch (const MetricError& e) {
    return {exit_invalid, "", e.what()};
  }
}

}  // namespace warpflow::cli
