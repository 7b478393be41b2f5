#include "tapeq/report_io.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "tapeq/softmin.hpp"

namespace tapeq {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
  return out;
}

// NaN and infinities are not JSON numbers; they become null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

void write_json(const fs::path& p, const json& j) {
  auto out = open_out(p);
  out << j.dump(2) << '\n';
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

struct CsvRow {
  int line;
  std::vector<std::string> cells;
  double value;
};

// Rows with `width` cells whose last cell is a number.
std::vector<CsvRow> read_numeric_csv(const fs::path& p, std::size_t width) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", p.string()));
  std::vector<CsvRow> rows;
  std::string raw;
  bool first = true;
  for (int line = 1; std::getline(in, raw); ++line) {
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    auto cells = split_csv(s);
    if (cells.size() != width)
      throw ParseError(line, fmt::format("{}: expected {} comma-separated fields, got {}", p.string(), width,
                                         cells.size()));
    double v = 0.0;
    if (!parse_double(cells.back(), v)) {
      if (first) {
        first = false;
        continue;
      }
      throw ParseError(line, fmt::format("{}: '{}' is not a number", p.string(), cells.back()));
    }
    first = false;
    rows.push_back({line, std::move(cells), v});
  }
  return rows;
}

std::pair<Vector, std::vector<std::string>> read_marginals(const fs::path& p) {
  const auto rows = read_numeric_csv(p, 2);
  if (rows.empty()) throw std::runtime_error(fmt::format("{}: no zones", p.string()));
  Vector v(rows.size());
  std::vector<std::string> zones;
  std::map<std::string, int> seen;
  for (const auto& r : rows) {
    if (!seen.emplace(r.cells[0], r.line).second)
      throw ParseError(r.line, fmt::format("{}: zone '{}' listed twice", p.string(), r.cells[0]));
    v[static_cast<Eigen::Index>(zones.size())] = r.value;
    zones.push_back(r.cells[0]);
  }
  return {v, zones};
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x + 0.0);  // -0 prints as 0
}

void write_equilibrium(const fs::path& dir, const Network& net, const EquilibriumReport& r, const RunInfo& info,
                       bool trace) {
  fs::create_directories(dir);
  json levels = json::array();
  for (int k = 0; k < net.num_levels(); ++k) {
    const auto& g = net.level(k);
    auto out = open_out(dir / fmt::format("flows_level{}.csv", k + 1));
    out << "# floats " << kFloatFormat << "; t, gap_e and multiplier are empty on nested edges\n";
    out << "edge,tail,head,t,f,gap_e,multiplier\n";
    for (int e = 0; e < static_cast<int>(g.edges.size()); ++e) {
      const auto& edge = g.edges[e];
      const double f = r.flows.edge_flows[k][e];
      out << e << ',' << edge.tail << ',' << edge.head << ',';
      if (edge.nested) {
        out << ',' << format_double(f) << ",,\n";
      } else {
        const int i = edge.time_index;
        out << format_double(r.t[i]) << ',' << format_double(f) << ',' << format_double(r.edge_gap[i]) << ','
            << format_double(r.multiplier[i]) << '\n';
      }
    }
    levels.push_back({{"level", k + 1}, {"gamma", g.gamma}, {"hops", g.hop_bound()}});
  }

  json j;
  j["instance"] = info.instance;
  j["model"] = to_string(r.model);
  j["seed"] = info.seed;
  j["float_format"] = kFloatFormat;
  j["eps"] = r.eps;
  j["eps_residual"] = r.eps_residual;
  j["certified"] = r.certified;
  j["certificate"] = r.certificate;
  j["total_gap"] = number(r.total_gap);
  j["routing_gap"] = number(r.routing_gap);
  j["dual_value"] = number(r.dual_value);
  j["total_travel_time"] = number(r.total_travel_time);
  j["capacity_violation"] = number(r.capacity_violation);
  j["complementarity"] = number(r.complementarity);
  j["lipschitz_max"] = number(r.lipschitz_max);
  j["iterations"] = r.solver.iterations;
  j["value_calls"] = r.solver.value_calls;
  j["grad_calls"] = r.solver.grad_calls;
  j["termination"] = to_string(r.solver.termination);
  j["levels"] = levels;
  write_json(dir / "report.json", j);

  if (!trace) return;
  {
    const auto& s = r.solver;
    auto out = open_out(dir / "trace.csv");
    out << "# floats " << kFloatFormat << "\n";
    out << "iteration,value,L,alpha,A,batch\n";
    for (std::size_t k = 0; k < s.value_trace.size(); ++k)
      out << k << ',' << format_double(s.value_trace[k]) << ',' << format_double(s.L_trace[k]) << ','
          << format_double(s.alpha_trace[k]) << ',' << format_double(s.A_trace[k]) << ','
          << (k < s.batch_trace.size() ? s.batch_trace[k] : 1) << '\n';
  }
  {
    // Soft-min potentials from each origin at the reported times (hard
    // shortest distances on gamma = 0 levels).
    const auto ev = evaluate_network(net, r.t, {false, Execution::serial});
    auto out = open_out(dir / "potentials.csv");
    out << "# floats " << kFloatFormat << "\n";
    out << "level,origin,vertex,u\n";
    for (int k = 0; k < net.num_levels(); ++k) {
      const auto& g = net.level(k);
      const std::vector<double> none;
      const auto w = level_weights(net, r.t, k, k + 1 < net.num_levels() ? ev.od_values[k + 1] : none);
      std::vector<int> origins;
      for (const auto& od : g.ods)
        if (std::find(origins.begin(), origins.end(), od.origin) == origins.end()) origins.push_back(od.origin);
      std::sort(origins.begin(), origins.end());
      for (int o : origins) {
        const auto u = g.gamma > 0.0 ? softmin_potentials(g, w, o, g.gamma, g.hop_bound())
                                     : ShortestPaths(g, w, o).distances();
        for (int v = 0; v < g.num_vertices; ++v)
          out << k + 1 << ',' << o << ',' << v << ',' << format_double(u[v]) << '\n';
      }
    }
  }
}

OdInstance load_od_instance(const fs::path& costs, const fs::path& rows, const fs::path& cols, double gamma) {
  OdInstance inst;
  auto [L, rz] = read_marginals(rows);
  auto [W, cz] = read_marginals(cols);
  inst.row_zones = std::move(rz);
  inst.col_zones = std::move(cz);
  std::map<std::string, int> ri, ci;
  for (int i = 0; i < static_cast<int>(inst.row_zones.size()); ++i) ri[inst.row_zones[i]] = i;
  for (int j = 0; j < static_cast<int>(inst.col_zones.size()); ++j) ci[inst.col_zones[j]] = j;

  const Eigen::Index n = L.size(), m = W.size();
  Matrix T = Matrix::Constant(n, m, std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : read_numeric_csv(costs, 3)) {
    const auto a = ri.find(r.cells[0]), b = ci.find(r.cells[1]);
    if (a == ri.end()) throw ParseError(r.line, fmt::format("{}: unknown row zone '{}'", costs.string(), r.cells[0]));
    if (b == ci.end())
      throw ParseError(r.line, fmt::format("{}: unknown column zone '{}'", costs.string(), r.cells[1]));
    if (!std::isnan(T(a->second, b->second)))
      throw ParseError(r.line, fmt::format("{}: cost {} -> {} given twice", costs.string(), r.cells[0], r.cells[1]));
    T(a->second, b->second) = r.value;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (std::isnan(T(i, j)))
        throw std::runtime_error(
            fmt::format("{}: missing cost {} -> {}", costs.string(), inst.row_zones[i], inst.col_zones[j]));
  inst.problem.L = L;
  inst.problem.W = W;
  inst.problem.T = T;
  inst.problem.gamma = gamma;
  inst.problem.validate();
  return inst;
}

void write_od(const fs::path& dir, const OdInstance& inst, const ElpSolution& sol, const OdOptions& opts,
              const OdVerification& verify) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "od_matrix.csv");
    out << "# floats " << kFloatFormat << "\n";
    out << "zone_i,zone_j,d_ij\n";
    for (Eigen::Index i = 0; i < sol.d.rows(); ++i)
      for (Eigen::Index j = 0; j < sol.d.cols(); ++j)
        out << inst.row_zones[i] << ',' << inst.col_zones[j] << ',' << format_double(sol.d(i, j)) << '\n';
  }
  json j;
  j["float_format"] = kFloatFormat;
  j["gamma"] = inst.problem.gamma;
  j["eps"] = opts.eps;
  j["eps_residual"] = opts.eps_residual;
  j["certified"] = sol.certified;
  j["gap"] = number(sol.gap);
  j["residual"] = number(sol.residual);
  j["radius"] = number(sol.radius);
  j["radius_doublings"] = sol.radius_doublings;
  j["dropped_constraints"] = sol.dropped;
  j["iterations"] = sol.report.iterations;
  j["termination"] = to_string(sol.report.termination);
  if (verify.run)
    j["verification"] = {{"pass", verify.pass},
                         {"max_abs_diff", number(verify.max_abs_diff)},
                         {"tolerance", verify.tolerance}};
  write_json(dir / "od_certificate.json", j);
}

}  // namespace tapeq
