#include "tapeq/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace tapeq {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "network validation failed:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

// Smallest hop count reaching each vertex from origin, -1 if unreachable.
std::vector<int> hop_distances(const LevelGraph& g, int origin) {
  std::vector<int> dist(g.num_vertices, -1);
  std::vector<int> frontier{origin};
  dist[origin] = 0;
  for (int h = 1; !frontier.empty(); ++h) {
    std::vector<int> next;
    for (int v : frontier) {
      for (const auto& e : g.edges) {
        if (e.tail == v && dist[e.head] < 0) {
          dist[e.head] = h;
          next.push_back(e.head);
        }
      }
    }
    frontier = std::move(next);
  }
  return dist;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

ParseError::ParseError(int line, const std::string& message)
    : std::runtime_error(fmt::format("line {}: {}", line, message)), line_(line) {}

Network::Network(std::vector<LevelGraph> levels) : levels_(std::move(levels)) {
  index_and_validate();
}

void Network::index_and_validate() {
  std::vector<std::string> problems;
  if (levels_.empty()) problems.emplace_back("network has no levels");

  const int m = static_cast<int>(levels_.size());
  slots_.clear();
  for (int k = 0; k < m; ++k) {
    auto& g = levels_[k];
    const int level_id = k + 1;
    if (g.num_vertices <= 0) problems.push_back(fmt::format("level {}: no vertices", level_id));
    if (!(g.gamma >= 0.0) || std::isinf(g.gamma))
      problems.push_back(fmt::format("level {}: gamma must be finite and >= 0", level_id));
    if (g.hops < 0) problems.push_back(fmt::format("level {}: negative hop bound", level_id));

    std::vector<int> od_refs(k + 1 < m ? levels_[k + 1].ods.size() : 0, 0);
    for (int i = 0; i < static_cast<int>(g.edges.size()); ++i) {
      auto& e = g.edges[i];
      const auto where = fmt::format("level {} edge {} ({}->{})", level_id, i, e.tail, e.head);
      if (e.tail < 0 || e.tail >= g.num_vertices || e.head < 0 || e.head >= g.num_vertices)
        problems.push_back(where + ": vertex out of range");
      if (e.tail == e.head) problems.push_back(where + ": self-loop");
      if (e.nested) {
        if (k + 1 >= m) {
          problems.push_back(where + ": nested edge on the top level");
        } else if (e.od_ref < 0 || e.od_ref >= static_cast<int>(od_refs.size())) {
          problems.push_back(where + fmt::format(": references unknown level-{} OD {}", level_id + 1, e.od_ref));
        } else {
          ++od_refs[e.od_ref];
        }
        continue;
      }
      e.time_index = static_cast<int>(slots_.size());
      slots_.push_back({k, i});
      const auto& c = e.cost;
      if (!(c.t_free > 0.0) || std::isinf(c.t_free)) problems.push_back(where + ": t_free must be positive");
      if (!(c.capacity > 0.0)) problems.push_back(where + ": capacity must be positive");
      if (c.kind == CostKind::bpr) {
        if (std::isinf(c.capacity)) problems.push_back(where + ": BPR capacity must be finite");
        if (!(c.bpr_gain >= 0.0) || std::isinf(c.bpr_gain)) problems.push_back(where + ": bpr_gain must be >= 0");
        if (!(c.bpr_power > 0.0) || std::isinf(c.bpr_power)) problems.push_back(where + ": bpr_power must be > 0");
      }
    }
    for (std::size_t w = 0; w < od_refs.size(); ++w) {
      if (od_refs[w] == 0)
        problems.push_back(fmt::format("level {} OD {}: not referenced by any nested edge of level {}", level_id + 1, w, level_id));
    }

    if (k == 0 && g.ods.empty()) problems.emplace_back("level 1 has no OD pairs");
    for (std::size_t w = 0; w < g.ods.size(); ++w) {
      const auto& od = g.ods[w];
      const auto where = fmt::format("level {} OD {} ({}->{})", level_id, w, od.origin, od.dest);
      if (od.origin < 0 || od.origin >= g.num_vertices || od.dest < 0 || od.dest >= g.num_vertices) {
        problems.push_back(where + ": vertex out of range");
        continue;
      }
      if (od.origin == od.dest) problems.push_back(where + ": origin equals destination");
      if (k == 0 && !(od.demand > 0.0)) problems.push_back(where + ": demand must be positive");
      if (k > 0 && od.demand != 0.0) problems.push_back(where + ": demand of an upper-level OD is induced, must be 0");
    }
  }

  if (problems.empty()) {
    for (int k = 0; k < m; ++k) {
      const auto& g = levels_[k];
      for (std::size_t w = 0; w < g.ods.size(); ++w) {
        const auto& od = g.ods[w];
        const int hops = hop_distances(g, od.origin)[od.dest];
        if (hops < 0 || hops > g.hop_bound())
          problems.push_back(fmt::format("level {} OD {} ({}->{}): destination not reachable within {} hops",
                                         k + 1, w, od.origin, od.dest, g.hop_bound()));
      }
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
}

const EdgeCostModel& Network::cost(int time_index) const {
  const auto& s = slots_.at(time_index);
  return levels_[s.level].edges[s.edge].cost;
}

TimeVector Network::free_flow_times() const {
  TimeVector t(num_times());
  for (int i = 0; i < num_times(); ++i) t[i] = cost(i).t_free;
  return t;
}

double Network::total_demand() const {
  double total = 0.0;
  for (const auto& od : levels_.front().ods) total += od.demand;
  return total;
}

Network Network::with_gamma(int level, double gamma) const {
  auto copy = levels_;
  copy.at(level).gamma = gamma;
  return Network(std::move(copy));
}

Network Network::with_hops(int level, int hops) const {
  auto copy = levels_;
  copy.at(level).hops = hops;
  return Network(std::move(copy));
}

Network Network::with_demand_scale(double factor) const {
  auto copy = levels_;
  for (auto& od : copy.front().ods) od.demand *= factor;
  return Network(std::move(copy));
}

Vector FlowState::plain(const Network& net) const {
  Vector out(net.num_times());
  for (int i = 0; i < net.num_times(); ++i) {
    const auto& s = net.slot(i);
    out[i] = edge_flows.at(s.level).at(s.edge);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format
//
//   gamma <level> <value>
//   hops <level> <H>
//   <level> <tail> <head> bpr <t_free> <capacity> <gain> <power>
//   <level> <tail> <head> sd <t_free> <capacity> [ignored ignored]
//   <level> <tail> <head> nested <od id in level+1>
//   od <level> <origin> <dest> <demand>
//
// OD ids are 0-based in order of appearance within their level.

namespace {

double parse_number(const std::string& token, int line, const char* what) {
  if (token == "inf" || token == "Inf" || token == "INF") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ParseError(line, fmt::format("cannot parse {} from '{}'", what, token));
  }
}

int parse_int(const std::string& token, int line, const char* what) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError(line, fmt::format("cannot parse {} from '{}'", what, token));
  }
}

int parse_level(const std::string& token, int line) {
  const int level = parse_int(token, line, "level");
  if (level < 1 || level > 64) throw ParseError(line, fmt::format("level {} out of range [1, 64]", level));
  return level;
}

}  // namespace

Network parse_network(std::istream& in) {
  std::vector<LevelGraph> levels;
  auto level_at = [&](int level) -> LevelGraph& {
    if (static_cast<int>(levels.size()) < level) levels.resize(level);
    return levels[level - 1];
  };
  auto touch = [](LevelGraph& g, int v) { g.num_vertices = std::max(g.num_vertices, v + 1); };

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string s; ls >> s;) tok.push_back(s);
    if (tok.empty()) continue;

    if (tok[0] == "od") {
      if (tok.size() != 5) throw ParseError(line_no, "expected 'od level origin dest demand'");
      auto& g = level_at(parse_level(tok[1], line_no));
      OdPair od;
      od.origin = parse_int(tok[2], line_no, "origin");
      od.dest = parse_int(tok[3], line_no, "destination");
      od.demand = tok[4] == "-" ? 0.0 : parse_number(tok[4], line_no, "demand");
      if (od.origin < 0 || od.dest < 0) throw ParseError(line_no, "negative vertex id");
      touch(g, od.origin);
      touch(g, od.dest);
      g.ods.push_back(od);
    } else if (tok[0] == "gamma") {
      if (tok.size() != 3) throw ParseError(line_no, "expected 'gamma level value'");
      level_at(parse_level(tok[1], line_no)).gamma = parse_number(tok[2], line_no, "gamma");
    } else if (tok[0] == "hops") {
      if (tok.size() != 3) throw ParseError(line_no, "expected 'hops level H'");
      level_at(parse_level(tok[1], line_no)).hops = parse_int(tok[2], line_no, "hop bound");
    } else {
      if (tok.size() < 5) throw ParseError(line_no, "expected 'level tail head kind ...'");
      auto& g = level_at(parse_level(tok[0], line_no));
      Edge e;
      e.tail = parse_int(tok[1], line_no, "tail");
      e.head = parse_int(tok[2], line_no, "head");
      if (e.tail < 0 || e.head < 0) throw ParseError(line_no, "negative vertex id");
      const std::string& kind = tok[3];
      if (kind == "nested") {
        if (tok.size() != 5) throw ParseError(line_no, "expected 'level tail head nested od_id'");
        e.nested = true;
        e.od_ref = parse_int(tok[4], line_no, "OD id");
      } else if (kind == "bpr") {
        if (tok.size() != 8) throw ParseError(line_no, "expected 'level tail head bpr t_free capacity gain power'");
        e.cost = EdgeCostModel::bpr(parse_number(tok[4], line_no, "t_free"), parse_number(tok[5], line_no, "capacity"),
                                    parse_number(tok[6], line_no, "bpr_gain"), parse_number(tok[7], line_no, "bpr_power"));
      } else if (kind == "sd") {
        if (tok.size() != 6 && tok.size() != 8) throw ParseError(line_no, "expected 'level tail head sd t_free capacity'");
        e.cost = EdgeCostModel::sd(parse_number(tok[4], line_no, "t_free"), parse_number(tok[5], line_no, "capacity"));
      } else {
        throw ParseError(line_no, fmt::format("unknown edge kind '{}'", kind));
      }
      touch(g, e.tail);
      touch(g, e.head);
      g.edges.push_back(e);
    }
  }
  return Network(std::move(levels));
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open network file '{}'", path.string()));
  return parse_network(in);
}

}  // namespace tapeq
