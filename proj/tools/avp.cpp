// avp: American put pricing under Vasicek short rates.
//
// Subcommands: solve-boundary, price, sweep, validate, hedge.
// Exit codes: 0 success, 2 config error, 3 non-convergence, 4 validation failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "avp/hedge.hpp"
#include "avp/io.hpp"
#include "avp/mc.hpp"
#include "avp/model.hpp"
#include "avp/parallel.hpp"
#include "avp/pricer.hpp"
#include "avp/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitValidation = 4;

struct GridSpec {
  std::size_t t_nodes = 50;
  std::size_t r_nodes = 41;
  double r_min = -0.05;
  double r_max = 0.15;
  double t_cluster_ratio = 0.85;

  avp::Grid build(double maturity) const {
    return {avp::make_time_grid(maturity, t_nodes, t_cluster_ratio),
            avp::make_rate_grid(r_min, r_max, r_nodes)};
  }
};

struct RunConfig {
  avp::MarketModel model;          // paper defaults
  avp::OptionContract contract;
  GridSpec grid;
  double eps = 0.01;
  std::size_t max_iter = 200;
  avp::QuadratureConfig quad;
  avp::PathConfig mc{1000000, 500, 1, false};
  std::size_t ls_paths = 150000;
  std::size_t ls_steps = 150;
  std::vector<std::size_t> hedge_steps = {50, 100, 200};
  std::size_t hedge_paths = 2000;
  avp::QuadratureConfig hedge_quad{16, 16, 8.0, 1e-6};
  std::string surface_path;
};

void reject_unknown(const avp::json& j, const std::set<std::string>& allowed,
                    const std::string& scope) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + key + "' in " + scope);
}

template <class T>
void maybe(const avp::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig parse_config(const avp::json& j) {
  RunConfig c;
  reject_unknown(j, {"model", "contract", "grid", "solver", "quadrature", "mc", "ls", "hedge",
                     "surface"},
                 "top level");
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"kappa", "theta", "beta", "sigma", "rho"}, "model");
    maybe(m, "kappa", c.model.rates.kappa);
    maybe(m, "theta", c.model.rates.theta);
    maybe(m, "beta", c.model.rates.beta);
    maybe(m, "sigma", c.model.sigma);
    maybe(m, "rho", c.model.rho);
  }
  if (j.contains("contract")) {
    const auto& m = j.at("contract");
    reject_unknown(m, {"strike", "maturity"}, "contract");
    maybe(m, "strike", c.contract.strike);
    maybe(m, "maturity", c.contract.maturity);
  }
  if (j.contains("grid")) {
    const auto& m = j.at("grid");
    reject_unknown(m, {"t_nodes", "r_nodes", "r_min", "r_max", "t_cluster_ratio"}, "grid");
    maybe(m, "t_nodes", c.grid.t_nodes);
    maybe(m, "r_nodes", c.grid.r_nodes);
    maybe(m, "r_min", c.grid.r_min);
    maybe(m, "r_max", c.grid.r_max);
    maybe(m, "t_cluster_ratio", c.grid.t_cluster_ratio);
  }
  if (j.contains("solver")) {
    const auto& m = j.at("solver");
    reject_unknown(m, {"eps", "max_iter"}, "solver");
    maybe(m, "eps", c.eps);
    maybe(m, "max_iter", c.max_iter);
  }
  if (j.contains("quadrature")) {
    const auto& m = j.at("quadrature");
    reject_unknown(m, {"outer_nodes", "inner_nodes", "inner_truncation", "target_rel_tol"},
                   "quadrature");
    maybe(m, "outer_nodes", c.quad.outer_nodes);
    maybe(m, "inner_nodes", c.quad.inner_nodes);
    maybe(m, "inner_truncation", c.quad.inner_truncation);
    maybe(m, "target_rel_tol", c.quad.target_rel_tol);
  }
  if (j.contains("mc")) {
    const auto& m = j.at("mc");
    reject_unknown(m, {"n_paths", "n_steps", "seed", "antithetic"}, "mc");
    maybe(m, "n_paths", c.mc.n_paths);
    maybe(m, "n_steps", c.mc.n_steps);
    maybe(m, "seed", c.mc.seed);
    maybe(m, "antithetic", c.mc.antithetic);
  }
  if (j.contains("ls")) {
    const auto& m = j.at("ls");
    reject_unknown(m, {"n_paths", "steps_per_year"}, "ls");
    maybe(m, "n_paths", c.ls_paths);
    maybe(m, "steps_per_year", c.ls_steps);
  }
  if (j.contains("hedge")) {
    const auto& m = j.at("hedge");
    reject_unknown(m, {"rebalance_steps", "n_paths", "outer_nodes", "inner_nodes"}, "hedge");
    maybe(m, "rebalance_steps", c.hedge_steps);
    maybe(m, "n_paths", c.hedge_paths);
    maybe(m, "outer_nodes", c.hedge_quad.outer_nodes);
    maybe(m, "inner_nodes", c.hedge_quad.inner_nodes);
  }
  maybe(j, "surface", c.surface_path);
  c.model.validate();
  c.contract.validate();
  c.quad.validate();
  return c;
}

avp::json config_echo(const RunConfig& c) {
  return avp::json{
      {"model", avp::model_to_json(c.model)},
      {"contract", avp::contract_to_json(c.contract)},
      {"grid",
       avp::json{{"t_nodes", c.grid.t_nodes},
                 {"r_nodes", c.grid.r_nodes},
                 {"r_min", c.grid.r_min},
                 {"r_max", c.grid.r_max},
                 {"t_cluster_ratio", c.grid.t_cluster_ratio}}},
      {"solver", avp::json{{"eps", c.eps}, {"max_iter", c.max_iter}}},
      {"quadrature",
       avp::json{{"outer_nodes", c.quad.outer_nodes},
                 {"inner_nodes", c.quad.inner_nodes},
                 {"inner_truncation", c.quad.inner_truncation},
                 {"target_rel_tol", c.quad.target_rel_tol}}},
      {"mc",
       avp::json{{"n_paths", c.mc.n_paths},
                 {"n_steps", c.mc.n_steps},
                 {"seed", c.mc.seed},
                 {"antithetic", c.mc.antithetic}}},
      {"ls", avp::json{{"n_paths", c.ls_paths}, {"steps_per_year", c.ls_steps}}},
      {"hedge",
       avp::json{{"rebalance_steps", c.hedge_steps},
                 {"n_paths", c.hedge_paths},
                 {"outer_nodes", c.hedge_quad.outer_nodes},
                 {"inner_nodes", c.hedge_quad.inner_nodes}}},
      {"surface", c.surface_path}};
}

/// Loads a surface CSV plus its .json sidecar (for the converged flag).
avp::BoundarySurface load_surface(const std::string& csv_path) {
  bool converged = false;
  std::filesystem::path side(csv_path);
  side.replace_extension(".json");
  if (std::filesystem::exists(side)) {
    const avp::json meta = avp::read_json(side.string());
    if (meta.contains("diagnostics") && meta.at("diagnostics").contains("converged"))
      converged = meta.at("diagnostics").at("converged").get<bool>();
  }
  return avp::read_surface_csv(csv_path, converged);
}

struct SurfaceBundle {
  avp::BoundarySurface surface;
  avp::SolveDiagnostics diag;
};

SurfaceBundle obtain_surface(const RunConfig& cfg, const std::string& surface_arg,
                             bool solve_if_missing) {
  const std::string path = !surface_arg.empty() ? surface_arg : cfg.surface_path;
  if (!path.empty()) return {load_surface(path), {}};
  if (!solve_if_missing)
    throw std::invalid_argument("no surface file given; pass --surface or --solve");
  auto [surface, diag] =
      avp::solve(cfg.model, cfg.contract, cfg.grid.build(cfg.contract.maturity), cfg.eps,
                 cfg.max_iter, cfg.quad, /*compute_residual=*/false);
  if (!diag.converged) throw std::runtime_error("on-the-fly boundary solve did not converge");
  return {std::move(surface), diag};
}

int cmd_solve_boundary(const RunConfig& cfg, const std::string& out_dir) {
  const avp::Grid grid = cfg.grid.build(cfg.contract.maturity);
  auto [surface, diag] = avp::solve(cfg.model, cfg.contract, grid, cfg.eps, cfg.max_iter,
                                    cfg.quad);
  const auto csv = std::filesystem::path(out_dir) / "boundary.csv";
  const auto side = std::filesystem::path(out_dir) / "boundary.json";
  avp::write_surface_csv(csv.string(), surface);
  avp::json meta = avp::surface_metadata(cfg.model, cfg.contract, grid, cfg.eps, cfg.quad, diag);
  meta["config"] = config_echo(cfg);
  avp::write_json(side.string(), meta);
  std::cout << "surface: " << csv.string() << "\n"
            << "iterations: " << diag.iterations << " converged: " << std::boolalpha
            << diag.converged << " residual_max: " << diag.residual_max << "\n";
  return diag.converged ? kExitOk : kExitNoConvergence;
}

int cmd_price(const RunConfig& cfg, const std::string& out_dir, const std::string& surface_arg,
              bool solve_if_missing, double t, double r, double x) {
  SurfaceBundle sb = obtain_surface(cfg, surface_arg, solve_if_missing);
  const avp::PricingResult res =
      avp::price(cfg.model, cfg.contract, sb.surface, t, r, x, cfg.quad);
  avp::json out{{"t", t},
                {"r", r},
                {"x", x},
                {"value", res.value},
                {"european", res.european},
                {"premium", res.premium},
                {"exercise_now", res.exercise_now},
                {"boundary_at_point", res.boundary_at_point},
                {"config", config_echo(cfg)}};
  std::cout << out.dump(2) << "\n";
  avp::write_json((std::filesystem::path(out_dir) / "price.json").string(), out);
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, const std::string& out_dir, const std::string& axis,
              const std::vector<double>& values, double t0, double r0, double x0) {
  if (values.empty()) throw std::invalid_argument("sweep: empty values list");
  const std::set<std::string> axes{"kappa", "rho", "sigma", "r", "x", "t"};
  if (!axes.count(axis)) throw std::invalid_argument("sweep: unknown axis " + axis);

  const auto path = std::filesystem::path(out_dir) / ("sweep_" + axis + ".csv");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "axis,value,t,r,x,boundary,price,european,premium\n";
  auto emit = [&](double v, double t, double r, double x, const avp::BoundarySurface& s,
                  const avp::MarketModel& m) {
    const avp::PricingResult res = avp::price(m, cfg.contract, s, t, r, x, cfg.quad);
    out << axis << ',' << avp::format_g12(v) << ',' << avp::format_g12(t) << ','
        << avp::format_g12(r) << ',' << avp::format_g12(x) << ','
        << avp::format_g12(res.boundary_at_point) << ',' << avp::format_g12(res.value) << ','
        << avp::format_g12(res.european) << ',' << avp::format_g12(res.premium) << '\n';
  };

  const bool model_axis = axis == "kappa" || axis == "rho" || axis == "sigma";
  if (model_axis) {
    for (double v : values) {
      avp::MarketModel m = cfg.model;
      if (axis == "kappa") m.rates.kappa = v;
      if (axis == "rho") m.rho = v;
      if (axis == "sigma") m.sigma = v;
      auto [surface, diag] = avp::solve(m, cfg.contract, cfg.grid.build(cfg.contract.maturity),
                                        cfg.eps, cfg.max_iter, cfg.quad,
                                        /*compute_residual=*/false);
      if (!diag.converged) return kExitNoConvergence;
      // one r-section of the boundary plus the price at each section point
      for (double r : surface.grid().r_nodes) emit(v, t0, r, x0, surface, m);
    }
  } else {
    SurfaceBundle sb = obtain_surface(cfg, "", true);
    for (double v : values) {
      const double t = axis == "t" ? v : t0;
      const double r = axis == "r" ? v : r0;
      const double x = axis == "x" ? v : x0;
      emit(v, t, r, x, sb.surface, cfg.model);
    }
  }
  out.close();
  std::cout << "wrote " << path.string() << "\n";
  return kExitOk;
}

int cmd_validate(const RunConfig& cfg, const std::string& out_dir,
                 const std::string& surface_arg, bool solve_if_missing,
                 const std::string& dump_paths) {
  SurfaceBundle sb = obtain_surface(cfg, surface_arg, solve_if_missing);
  const double t = 0.0, r0 = 0.0478, x0 = 82.11;
  const double K = cfg.contract.strike;
  const double T = cfg.contract.maturity;
  avp::json checks = avp::json::array();
  bool all_pass = true;
  auto record = [&](const std::string& name, double a, double b, double tol) {
    const bool pass = std::fabs(a - b) < tol;
    all_pass = all_pass && pass;
    checks.push_back(avp::json{{"check", name},
                               {"value", a},
                               {"reference", b},
                               {"tolerance", tol},
                               {"pass", pass}});
  };

  // bond closed form vs exact-draw Monte Carlo
  avp::PathConfig bond_cfg = cfg.mc;
  bond_cfg.n_steps = 1;
  const avp::PathSet bond_paths(cfg.model, 0.0, r0, x0, T, bond_cfg);
  const auto bond_mc = avp::estimate_discounted(bond_paths, [](double, double, double) {
    return 1.0;
  });
  record("bond_closed_vs_mc", avp::bond_price(cfg.model.rates, t, r0, T), bond_mc.estimate,
         3.0 * bond_mc.std_error);
  if (!dump_paths.empty()) avp::write_path_dump(dump_paths, bond_paths, 1000);

  // European put closed form vs Monte Carlo
  const auto euro_mc = avp::estimate_discounted(bond_paths, [K](double, double, double x) {
    return std::max(K - x, 0.0);
  });
  record("european_closed_vs_mc", avp::european_put(cfg.model, cfg.contract, t, r0, x0),
         euro_mc.estimate, 3.0 * euro_mc.std_error);

  // premium quadrature vs Monte Carlo time-sum (step-doubling bias bound)
  const double vp = avp::premium(cfg.model, cfg.contract, t, r0, x0, sb.surface, cfg.quad);
  const avp::PathSet prem_paths(cfg.model, t, r0, x0, T, cfg.mc);
  avp::PathConfig half_cfg = cfg.mc;
  half_cfg.n_steps = std::max<std::size_t>(1, cfg.mc.n_steps / 2);
  const avp::PathSet prem_paths_half(cfg.model, t, r0, x0, T, half_cfg);
  const auto prem_mc = avp::mc_premium(prem_paths, sb.surface, cfg.contract);
  const auto prem_mc_half = avp::mc_premium(prem_paths_half, sb.surface, cfg.contract);
  const double bias_bound = 2.0 * std::fabs(prem_mc.estimate - prem_mc_half.estimate);
  record("premium_quadrature_vs_mc", vp, prem_mc.estimate,
         std::max(3.0 * prem_mc.std_error, bias_bound));

  // decomposition price vs Longstaff-Schwartz policy value
  const avp::PricingResult dec =
      avp::price(cfg.model, cfg.contract, sb.surface, t, r0, x0, cfg.quad);
  avp::PathConfig ls_cfg{cfg.ls_paths, cfg.ls_steps, cfg.mc.seed + 7, false};
  const auto ls = avp::ls_american(cfg.model, cfg.contract, r0, x0, ls_cfg);
  const bool ls_lb = dec.value >= ls.estimate - 3.0 * ls.std_error;
  const bool ls_eur = dec.value >= dec.european;
  const bool ls_close = std::fabs(dec.value - ls.estimate) / dec.value < 0.02;
  all_pass = all_pass && ls_lb && ls_eur && ls_close;
  checks.push_back(avp::json{{"check", "american_vs_longstaff_schwartz"},
                             {"decomposition", dec.value},
                             {"ls_estimate", ls.estimate},
                             {"ls_std_error", ls.std_error},
                             {"lower_bound_ok", ls_lb},
                             {"dominates_european", ls_eur},
                             {"relative_gap_ok", ls_close},
                             {"pass", ls_lb && ls_eur && ls_close}});

  // integral-equation residual of the supplied surface
  const double residual =
      avp::integral_equation_residual(cfg.model, cfg.contract, sb.surface, cfg.quad);
  record("integral_equation_residual", residual, 0.0, 5.0 * cfg.eps);

  avp::json out{{"checks", checks}, {"all_pass", all_pass}, {"config", config_echo(cfg)}};
  std::cout << out.dump(2) << "\n";
  avp::write_json((std::filesystem::path(out_dir) / "validate.json").string(), out);
  return all_pass ? kExitOk : kExitValidation;
}

int cmd_hedge(const RunConfig& cfg, const std::string& out_dir, const std::string& surface_arg,
              bool solve_if_missing) {
  SurfaceBundle sb = obtain_surface(cfg, surface_arg, solve_if_missing);
  const double r0 = 0.0478, x0 = 82.11;
  avp::PathConfig hcfg{cfg.hedge_paths, 50, cfg.mc.seed, false};
  avp::json freqs = avp::json::array();
  for (std::size_t steps : cfg.hedge_steps) {
    const avp::HedgeReport rep = avp::hedge_backtest(cfg.model, cfg.contract, sb.surface, r0,
                                                     x0, hcfg, steps, cfg.hedge_quad);
    freqs.push_back(avp::json{{"rebalance_steps_per_year", steps},
                              {"rms_replication_error", rep.rms_replication_error},
                              {"mean_consumption", rep.mean_consumption},
                              {"max_shortfall", rep.max_shortfall},
                              {"min_consumption_increment", rep.min_consumption_increment},
                              {"max_continuation_consumption", rep.max_continuation_consumption},
                              {"n_paths", rep.n_paths},
                              {"n_steps", rep.n_steps},
                              {"per_step_rms", rep.per_step_rms}});
  }
  avp::json out{{"r0", r0}, {"x0", x0}, {"frequencies", freqs}, {"config", config_echo(cfg)}};
  std::cout << out.dump(2) << "\n";
  avp::write_json((std::filesystem::path(out_dir) / "hedge.json").string(), out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"American put on a stock with Vasicek stochastic interest rates"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", surface_arg, dump_paths;
  std::optional<std::uint64_t> seed_override;
  unsigned threads = 0;
  bool solve_if_missing = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed_override, "override mc.seed");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  auto* solve_cmd = app.add_subcommand("solve-boundary", "solve the exercise boundary");
  auto* price_cmd = app.add_subcommand("price", "price an American put at (t, r, x)");
  double t = 0.0, r = 0.0478, x = 82.11;
  price_cmd->add_option("--t", t, "evaluation time");
  price_cmd->add_option("--r", r, "spot rate");
  price_cmd->add_option("--x", x, "stock price");
  price_cmd->add_option("--surface", surface_arg, "boundary CSV (with .json sidecar)");
  price_cmd->add_flag("--solve", solve_if_missing, "solve the boundary on the fly");

  auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep to long-format CSV");
  std::string axis;
  std::vector<double> values;
  sweep_cmd->add_option("--axis", axis, "kappa|rho|sigma|r|x|t")->required();
  sweep_cmd->add_option("--values", values, "axis values")->required()->delimiter(',');
  sweep_cmd->add_option("--t", t, "query time");
  sweep_cmd->add_option("--r", r, "query rate");
  sweep_cmd->add_option("--x", x, "query stock price");

  auto* validate_cmd = app.add_subcommand("validate", "Monte-Carlo-vs-closed-form suite");
  validate_cmd->add_option("--surface", surface_arg, "boundary CSV (with .json sidecar)");
  validate_cmd->add_flag("--solve", solve_if_missing, "solve the boundary on the fly");
  validate_cmd->add_option("--dump-paths", dump_paths, "write binary path dump");

  auto* hedge_cmd = app.add_subcommand("hedge", "delta-hedging backtest");
  hedge_cmd->add_option("--surface", surface_arg, "boundary CSV (with .json sidecar)");
  hedge_cmd->add_flag("--solve", solve_if_missing, "solve the boundary on the fly");

  CLI11_PARSE(app, argc, argv);

  try {
    avp::json raw = avp::json::object();
    if (!config_path.empty()) raw = avp::read_json(config_path);
    RunConfig cfg = parse_config(raw);
    if (seed_override) cfg.mc.seed = *seed_override;
    if (threads > 0) avp::thread_override() = threads;
    std::filesystem::create_directories(out_dir);

    if (solve_cmd->parsed()) return cmd_solve_boundary(cfg, out_dir);
    if (price_cmd->parsed())
      return cmd_price(cfg, out_dir, surface_arg, solve_if_missing, t, r, x);
    if (sweep_cmd->parsed()) return cmd_sweep(cfg, out_dir, axis, values, t, r, x);
    if (validate_cmd->parsed())
      return cmd_validate(cfg, out_dir, surface_arg, solve_if_missing, dump_paths);
    if (hedge_cmd->parsed())
      return cmd_hedge(cfg, out_dir, surface_arg, solve_if_missing);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
