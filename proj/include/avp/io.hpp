#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "avp/boundary.hpp"
#include "avp/mc.hpp"
#include "avp/model.hpp"
#include "avp/quadrature.hpp"
#include "avp/solver.hpp"

namespace avp {

using json = nlohmann::ordered_json;

/// CSV numeric format used everywhere: 12 significant digits, '.' separator.
inline std::string format_g12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

/// Surface CSV: header `t,r,b`, one row per node, row-major by t then r.
inline void write_surface_csv(const std::string& path, const BoundarySurface& surface) {
  std::ofstream out(path, std::ios::binary);  // binary: LF endings everywhere
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "t,r,b\n";
  const Grid& g = surface.grid();
  for (std::size_t i = 0; i < g.n_t(); ++i)
    for (std::size_t j = 0; j < g.n_r(); ++j)
      out << format_g12(g.t_nodes[i]) << ',' << format_g12(g.r_nodes[j]) << ','
          << format_g12(surface.value(i, j)) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline BoundarySurface read_surface_csv(const std::string& path, bool converged = false) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open surface file: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,r,b", 0) != 0)
    throw std::runtime_error("surface file missing t,r,b header: " + path);
  std::vector<double> ts, rs, bs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t, r, b;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &r, &b) != 3)
      throw std::runtime_error("malformed surface row: " + line);
    ts.push_back(t);
    rs.push_back(r);
    bs.push_back(b);
  }
  Grid grid;
  for (double t : ts)
    if (grid.t_nodes.empty() || t > grid.t_nodes.back()) grid.t_nodes.push_back(t);
  const std::size_t nr = ts.size() / grid.t_nodes.size();
  grid.r_nodes.assign(rs.begin(), rs.begin() + nr);
  if (grid.n_t() * grid.n_r() != bs.size())
    throw std::runtime_error("surface file is not a full t x r grid: " + path);
  return BoundarySurface(grid, std::move(bs), converged);
}

inline json model_to_json(const MarketModel& m) {
  return json{{"kappa", m.rates.kappa}, {"theta", m.rates.theta}, {"beta", m.rates.beta},
              {"sigma", m.sigma},       {"rho", m.rho}};
}

inline json contract_to_json(const OptionContract& c) {
  return json{{"strike", c.strike}, {"maturity", c.maturity}};
}

inline json diagnostics_to_json(const SolveDiagnostics& d) {
  return json{{"iterations", d.iterations},
              {"sup_diffs", d.sup_diffs},
              {"residual_max", d.residual_max},
              {"converged", d.converged}};
}

/// Sidecar metadata written next to a surface CSV.
inline json surface_metadata(const MarketModel& model, const OptionContract& contract,
                             const Grid& grid, double eps, const QuadratureConfig& quad,
                             const SolveDiagnostics& diag) {
  return json{{"model", model_to_json(model)},
              {"contract", contract_to_json(contract)},
              {"grid", json{{"t_nodes", grid.t_nodes}, {"r_nodes", grid.r_nodes}}},
              {"eps", eps},
              {"quadrature", json{{"outer_nodes", quad.outer_nodes},
                                  {"inner_nodes", quad.inner_nodes},
                                  {"inner_truncation", quad.inner_truncation},
                                  {"target_rel_tol", quad.target_rel_tol}}},
              {"diagnostics", diagnostics_to_json(diag)}};
}

inline void write_json(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return json::parse(in);
}

// ---------------------------------------------------------------------------
// Binary path dump: magic "AVPPATH1", then u64 n_paths, u64 n_times, the
// time axis as f64[n_times], then three contiguous f64 columns (r, int_r, x)
// each laid out path-major [n_paths x n_times]. Little-endian throughout.
// ---------------------------------------------------------------------------

inline void write_path_dump(const std::string& path, const PathSet& paths,
                            std::size_t max_paths = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const std::uint64_t np =
      max_paths > 0 ? std::min<std::uint64_t>(max_paths, paths.n_paths()) : paths.n_paths();
  const std::uint64_t nt = paths.n_steps() + 1;
  out.write("AVPPATH1", 8);
  out.write(reinterpret_cast<const char*>(&np), 8);
  out.write(reinterpret_cast<const char*>(&nt), 8);
  std::vector<double> times(nt);
  for (std::uint64_t k = 0; k < nt; ++k)
    times[k] = paths.t0() + static_cast<double>(k) * paths.dt();
  out.write(reinterpret_cast<const char*>(times.data()), 8 * nt);

  std::vector<double> col_r(np * nt), col_i(np * nt), col_x(np * nt);
  for (std::uint64_t i = 0; i < np; ++i)
    paths.visit_path(i, [&](std::size_t k, double, double r, double ir, double x) {
      col_r[i * nt + k] = r;
      col_i[i * nt + k] = ir;
      col_x[i * nt + k] = x;
    });
  out.write(reinterpret_cast<const char*>(col_r.data()), 8 * col_r.size());
  out.write(reinterpret_cast<const char*>(col_i.data()), 8 * col_i.size());
  out.write(reinterpret_cast<const char*>(col_x.data()), 8 * col_x.size());
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace avp
