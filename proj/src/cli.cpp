#include "tapeq/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tapeq/report_io.hpp"

namespace tapeq {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kCertified = 0, kError = 1, kUncertified = 2;

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

int parse_level_key(const std::string& key) {
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(key, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != key.size() || k < 1) throw DomainError(fmt::format("level '{}' must be an integer >= 1", key));
  return k;
}

// "k=v" pairs from repeated flags.
template <class T>
void parse_level_pairs(const std::vector<std::string>& items, std::map<int, T>& out, const char* flag) {
  for (const auto& s : items) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw DomainError(fmt::format("{} expects level=value, got '{}'", flag, s));
    const int k = parse_level_key(s.substr(0, eq));
    std::istringstream in(s.substr(eq + 1));
    T v{};
    if (!(in >> v) || !in.eof()) throw DomainError(fmt::format("{}: bad value in '{}'", flag, s));
    out[k] = v;
  }
}

Network prepare(const std::string& path, const RunConfig& cfg) {
  Network net = [&] {
    try {
      return load_network(path);
    } catch (const ParseError& e) {
      throw std::runtime_error(fmt::format("{}: {}", path, e.what()));
    } catch (const ValidationError& e) {
      throw std::runtime_error(fmt::format("{}: invalid network: {}", path, e.what()));
    }
  }();
  for (const auto& [k, g] : cfg.gamma) {
    if (k > net.num_levels()) throw DomainError(fmt::format("gamma override for level {} of {}", k, net.num_levels()));
    net = net.with_gamma(k - 1, g);
  }
  for (const auto& [k, h] : cfg.hops) {
    if (k > net.num_levels()) throw DomainError(fmt::format("hop override for level {} of {}", k, net.num_levels()));
    net = net.with_hops(k - 1, h);
  }
  return net;
}

EquilibriumReport solve_network(const Network& net, const RunConfig& cfg) {
  SolveOptions o;
  o.eps = cfg.eps;
  o.eps_residual = cfg.eps_residual;
  o.max_iter = cfg.max_iter;
  o.seed = cfg.seed;
  o.sample_origins = cfg.sample_origins;
  o.beckmann_mirror_descent = cfg.mirror_descent;
  if (net.num_levels() > 1) {
    if (cfg.model != "auto" && cfg.model != "stochastic" && cfg.model != "mixed")
      throw DomainError(fmt::format("model '{}' is single-level; multilevel networks use 'auto'", cfg.model));
    return solve_multistage(net, o);
  }
  if (cfg.model != "auto") return solve_assignment(net, parse_model(cfg.model), o);
  bool any_sd = false, all_sd = true;
  for (int i = 0; i < net.num_times(); ++i) {
    const bool sd = net.cost(i).kind == CostKind::sd;
    any_sd |= sd;
    all_sd &= sd;
  }
  const Model m = all_sd ? Model::stable_dynamics
                  : any_sd ? Model::mixed
                  : net.level(0).gamma > 0.0 ? Model::stochastic
                                             : Model::beckmann;
  return solve_assignment(net, m, o);
}

// Runs `body`, mapping exceptions to exit code 1.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kError;
  }
}

void print_report(std::ostream& out, const std::string& name, const EquilibriumReport& r) {
  out << fmt::format("{}: model {} {} gap {} (eps {}) total time {} iterations {}\n", name, to_string(r.model),
                     r.certified ? "certified" : "NOT certified", format_double(r.total_gap), r.eps,
                     format_double(r.total_travel_time), r.solver.iterations);
}

template <class T>
T get(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw DomainError(fmt::format("config key '{}' has the wrong type", key));
  }
}

}  // namespace

RunConfig parse_config(const std::string& text, const fs::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DomainError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  if (!j.is_object()) throw DomainError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    const char* k = key.c_str();
    if (key == "command") c.command = get<std::string>(v, k);
    else if (key == "instances") c.instances = get<std::vector<std::string>>(v, k);
    else if (key == "names") c.names = get<std::vector<std::string>>(v, k);
    else if (key == "rows") c.rows = get<std::string>(v, k);
    else if (key == "cols") c.cols = get<std::string>(v, k);
    else if (key == "model") c.model = get<std::string>(v, k);
    else if (key == "eps") c.eps = get<double>(v, k);
    else if (key == "eps_residual") c.eps_residual = get<double>(v, k);
    else if (key == "gamma")
      for (const auto& [lk, lv] : get<std::map<std::string, double>>(v, k)) c.gamma[parse_level_key(lk)] = lv;
    else if (key == "hops")
      for (const auto& [lk, lv] : get<std::map<std::string, int>>(v, k)) c.hops[parse_level_key(lk)] = lv;
    else if (key == "seed") c.seed = get<std::uint64_t>(v, k);
    else if (key == "max_iter") c.max_iter = get<int>(v, k);
    else if (key == "out") c.out_dir = get<std::string>(v, k);
    else if (key == "trace") c.trace = get<bool>(v, k);
    else if (key == "verify") c.verify = get<bool>(v, k);
    else if (key == "sample_origins") c.sample_origins = get<bool>(v, k);
    else if (key == "mirror_descent") c.mirror_descent = get<bool>(v, k);
    else throw DomainError(fmt::format("unknown config key '{}'", key));
  }
  for (auto& p : c.instances) p = resolve(base, p);
  c.rows = resolve(base, c.rows);
  c.cols = resolve(base, c.cols);
  c.out_dir = resolve(base, c.out_dir);
  if (!(c.eps > 0.0)) throw DomainError("eps must be positive");
  if (!(c.eps_residual > 0.0)) throw DomainError("eps_residual must be positive");
  if (c.max_iter < 1) throw DomainError("max_iter must be >= 1");
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

fs::path output_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("TAPEQ_OUT_DIR"); env && *env) return env;
  return "tapeq_out";
}

int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.instances.size() != 1) throw DomainError("solve takes exactly one network instance");
    const Network net = prepare(cfg.instances[0], cfg);
    const auto r = solve_network(net, cfg);
    const fs::path dir = output_dir(cfg);
    write_equilibrium(dir, net, r, {cfg.instances[0], cfg.seed}, cfg.trace);
    print_report(out, fs::path(cfg.instances[0]).stem().string(), r);
    out << "wrote " << (dir / "report.json").string() << '\n';
    return r.certified ? kCertified : kUncertified;
  });
}

int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::size_t n = cfg.instances.size();
    if (n < 2) throw DomainError("compare needs at least two scenarios");
    if (!cfg.names.empty() && cfg.names.size() != n)
      throw DomainError(fmt::format("{} scenario names for {} instances", cfg.names.size(), n));
    std::vector<std::string> names = cfg.names;
    if (names.empty())
      for (const auto& p : cfg.instances) names.push_back(fs::path(p).stem().string());
    if (std::set<std::string>(names.begin(), names.end()).size() != n)
      throw DomainError("scenario names must be distinct; set them with --name");

    std::vector<Network> nets;
    for (const auto& p : cfg.instances) nets.push_back(prepare(p, cfg));
    auto od_key = [](const Network& net) {
      std::vector<std::tuple<int, int, double>> k;
      for (const auto& od : net.level(0).ods) k.emplace_back(od.origin, od.dest, od.demand);
      std::sort(k.begin(), k.end());
      return k;
    };
    for (std::size_t s = 1; s < n; ++s)
      if (od_key(nets[s]) != od_key(nets[0]))
        throw DomainError(fmt::format("scenarios '{}' and '{}' have different OD sets", names[0], names[s]));

    const fs::path dir = output_dir(cfg);
    std::vector<EquilibriumReport> reports;
    bool all = true;
    for (std::size_t s = 0; s < n; ++s) {
      reports.push_back(solve_network(nets[s], cfg));
      write_equilibrium(dir / names[s], nets[s], reports.back(), {cfg.instances[s], cfg.seed}, cfg.trace);
      all = all && reports.back().certified;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t s = 0; s < n; ++s) order[s] = s;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(reports[a].total_travel_time, names[a]) < std::tie(reports[b].total_travel_time, names[b]);
    });
    fs::create_directories(dir);
    {
      std::ofstream f(dir / "comparison.csv", std::ios::binary);
      f << "# floats " << kFloatFormat << "\n";
      f << "rank,scenario,total_travel_time,total_gap,certified\n";
      for (std::size_t r = 0; r < n; ++r) {
        const auto& rep = reports[order[r]];
        f << r + 1 << ',' << names[order[r]] << ',' << format_double(rep.total_travel_time) << ','
          << format_double(rep.total_gap) << ',' << (rep.certified ? 1 : 0) << '\n';
        out << fmt::format("{}. {} total time {} gap {}{}\n", r + 1, names[order[r]],
                           format_double(rep.total_travel_time), format_double(rep.total_gap),
                           rep.certified ? "" : " (NOT certified)");
      }
    }
    {
      // Level-1 plain edges matched by (tail, head, k-th parallel copy);
      // an edge missing from the baseline counts as zero flow there.
      using Key = std::tuple<int, int, int>;
      auto edge_map = [](const Network& net, const EquilibriumReport& r) {
        std::map<Key, std::pair<double, double>> m;
        std::map<std::pair<int, int>, int> copies;
        const auto& edges = net.level(0).edges;
        for (std::size_t i = 0; i < edges.size(); ++i) {
          const auto& e = edges[i];
          if (e.nested) continue;
          const int c = copies[{e.tail, e.head}]++;
          m[{e.tail, e.head, c}] = {r.flows.edge_flows[0][i], r.t[e.time_index]};
        }
        return m;
      };
      const auto base = edge_map(nets[0], reports[0]);
      std::ofstream f(dir / "edge_diffs.csv", std::ios::binary);
      f << "# floats " << kFloatFormat << "; differences against scenario '" << names[0] << "'\n";
      f << "scenario,tail,head,copy,f,t,df,dt\n";
      for (std::size_t s = 0; s < n; ++s)
        for (const auto& [key, ft] : edge_map(nets[s], reports[s])) {
          const auto it = base.find(key);
          const double f0 = it == base.end() ? 0.0 : it->second.first;
          const double t0 = it == base.end() ? std::numeric_limits<double>::quiet_NaN() : it->second.second;
          f << names[s] << ',' << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
            << format_double(ft.first) << ',' << format_double(ft.second) << ',' << format_double(ft.first - f0)
            << ',' << format_double(ft.second - t0) << '\n';
        }
    }
    out << "wrote " << (dir / "comparison.csv").string() << '\n';
    return all ? kCertified : kUncertified;
  });
}

int cmd_od(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (cfg.instances.size() != 1 || cfg.rows.empty() || cfg.cols.empty())
      throw DomainError("od takes one cost CSV plus --rows and --cols marginal CSVs");
    const double gamma = cfg.gamma.count(1) ? cfg.gamma.at(1) : 1.0;
    const auto inst = load_od_instance(cfg.instances[0], cfg.rows, cfg.cols, gamma);
    OdOptions o;
    o.eps = cfg.eps;
    o.eps_residual = cfg.eps_residual;
    o.max_iter = cfg.max_iter;
    const auto sol = solve_entropy_od(inst.problem, o);
    OdVerification v;
    if (cfg.verify) {
      v.run = true;
      const auto ref = balancing_oracle(inst.problem);
      v.max_abs_diff = (sol.d - ref.d).cwiseAbs().maxCoeff();
      v.pass = ref.converged && v.max_abs_diff <= v.tolerance;
    }
    const fs::path dir = output_dir(cfg);
    write_od(dir, inst, sol, o, v);
    out << fmt::format("od {}x{}: {} gap {} residual {} iterations {}\n", inst.problem.L.size(),
                       inst.problem.W.size(), sol.certified ? "certified" : "NOT certified", format_double(sol.gap),
                       format_double(sol.residual), sol.report.iterations);
    if (v.run)
      out << fmt::format("verification {}: max |d - d_balancing| = {} (tolerance {})\n", v.pass ? "PASS" : "FAIL",
                         format_double(v.max_abs_diff), v.tolerance);
    out << "wrote " << (dir / "od_matrix.csv").string() << '\n';
    return sol.certified && (!v.run || v.pass) ? kCertified : kUncertified;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic assignment and OD matrix solvers with duality-gap certificates", "tapeq"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, out_dir, model, rows, cols;
    std::vector<std::string> instances, names, gamma, hops;
    double eps = 0.0, eps_residual = 0.0;
    std::uint64_t seed = 0;
    int max_iter = 0;
    bool trace = false, verify = false, sample = false, md = false;
  } fl;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", fl.config, "JSON config file (flags override it)");
    sub->add_option("--eps", fl.eps, "duality gap tolerance");
    sub->add_option("--eps-residual", fl.eps_residual, "feasibility tolerance");
    sub->add_option("--gamma", fl.gamma, "level=gamma override (repeatable)");
    sub->add_option("--seed", fl.seed, "random seed (default 0)");
    sub->add_option("--max-iter", fl.max_iter, "iteration budget");
    sub->add_option("--out", fl.out_dir, "output directory");
    sub->add_flag("--trace", fl.trace, "write per-iteration traces");
  };
  auto network_opts = [&](CLI::App* sub) {
    sub->add_option("--model", fl.model, "auto, stochastic, beckmann, stable_dynamics or mixed");
    sub->add_option("--hops", fl.hops, "level=H hop bound override (repeatable)");
    sub->add_flag("--sample-origins", fl.sample, "origin-sampled gradients");
    sub->add_flag("--mirror-descent", fl.md, "beckmann via staged mirror descent");
  };

  auto* solve = app.add_subcommand("solve", "equilibrium of one network");
  common(solve);
  network_opts(solve);
  solve->add_option("instance", fl.instances, "network file");
  auto* compare = app.add_subcommand("compare", "rank scenarios by total travel time");
  common(compare);
  network_opts(compare);
  compare->add_option("instances", fl.instances, "network files");
  compare->add_option("--name", fl.names, "scenario names, in instance order");
  auto* od = app.add_subcommand("od", "entropy model of the correspondence matrix");
  common(od);
  od->add_option("costs", fl.instances, "cost CSV (zone_i,zone_j,T_ij)");
  od->add_option("--rows", fl.rows, "row marginal CSV (zone,value)");
  od->add_option("--cols", fl.cols, "column marginal CSV (zone,value)");
  od->add_flag("--verify", fl.verify, "check against matrix balancing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? 0 : kError;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  return guarded(err, [&] {
    RunConfig cfg = fl.config.empty() ? RunConfig{} : load_config(fl.config);
    if (!cfg.command.empty() && cfg.command != command)
      throw DomainError(fmt::format("config is for '{}', not '{}'", cfg.command, command));
    cfg.command = command;
    auto set = [&](const char* flag) {
      const auto* o = sub->get_option_no_throw(flag);
      return o && o->count() > 0;
    };
    if (!fl.instances.empty()) cfg.instances = fl.instances;
    if (set("--name")) cfg.names = fl.names;
    if (set("--rows")) cfg.rows = fl.rows;
    if (set("--cols")) cfg.cols = fl.cols;
    if (set("--verify")) cfg.verify = true;
    if (set("--eps")) cfg.eps = fl.eps;
    if (set("--eps-residual")) cfg.eps_residual = fl.eps_residual;
    if (set("--gamma")) parse_level_pairs(fl.gamma, cfg.gamma, "--gamma");
    if (set("--hops")) parse_level_pairs(fl.hops, cfg.hops, "--hops");
    if (set("--seed")) cfg.seed = fl.seed;
    if (set("--max-iter")) cfg.max_iter = fl.max_iter;
    if (set("--out")) cfg.out_dir = fl.out_dir;
    if (set("--trace")) cfg.trace = true;
    if (set("--model")) cfg.model = fl.model;
    if (set("--sample-origins")) cfg.sample_origins = true;
    if (set("--mirror-descent")) cfg.mirror_descent = true;
    if (!(cfg.eps > 0.0) || !(cfg.eps_residual > 0.0)) throw DomainError("eps and eps_residual must be positive");
    if (cfg.max_iter < 1) throw DomainError("max_iter must be >= 1");
    if (command == "solve") return cmd_solve(cfg, out, err);
    if (command == "compare") return cmd_compare(cfg, out, err);
    return cmd_od(cfg, out, err);
  });
}

}  // namespace tapeq
