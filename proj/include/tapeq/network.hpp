#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tapeq/cost_model.hpp"

namespace tapeq {

using Vector = Eigen::VectorXd;

/// Dual variable: one travel time per costed (plain) edge, all levels.
using TimeVector = Vector;

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// An edge of one level. Plain edges carry a cost model and a slot in the
/// TimeVector; nested edges stand for an OD pair of the next level.
struct Edge {
  int tail = 0;
  int head = 0;
  bool nested = false;
  EdgeCostModel cost{};
  int od_ref = -1;      // nested only: OD index in level k+1
  int time_index = -1;  // plain only: position in the TimeVector
};

struct OdPair {
  int origin = 0;
  int dest = 0;
  double demand = 0.0;  // given on level 1, induced by nested flows above
};

struct LevelGraph {
  int num_vertices = 0;
  std::vector<Edge> edges;
  std::vector<OdPair> ods;
  double gamma = 1.0;
  int hops = 0;  // 0 selects num_vertices - 1

  int hop_bound() const { return hops > 0 ? hops : std::max(1, num_vertices - 1); }
};

/// Multilevel transport network. Level 0 here is the first level (the
/// one carrying given demands); level k's nested edges reference OD pairs of
/// level k + 1. Immutable after construction.
class Network {
 public:
  struct TimeSlot {
    int level;
    int edge;
  };

  explicit Network(std::vector<LevelGraph> levels);

  int num_levels() const { return static_cast<int>(levels_.size()); }
  const LevelGraph& level(int k) const { return levels_.at(k); }
  const std::vector<LevelGraph>& levels() const { return levels_; }

  int num_times() const { return static_cast<int>(slots_.size()); }
  const TimeSlot& slot(int time_index) const { return slots_.at(time_index); }
  const EdgeCostModel& cost(int time_index) const;

  TimeVector free_flow_times() const;
  double total_demand() const;
  int num_plain_edges() const { return num_times(); }

  /// Copy with gamma of level k replaced.
  Network with_gamma(int level, double gamma) const;
  Network with_hops(int level, int hops) const;
  /// Copy with every level-1 demand multiplied by factor.
  Network with_demand_scale(double factor) const;

 private:
  void index_and_validate();

  std::vector<LevelGraph> levels_;
  std::vector<TimeSlot> slots_;
};

/// Edge flows of every level (plain and nested edges, in edge order).
struct FlowState {
  std::vector<std::vector<double>> edge_flows;
  /// Optional explicit path flows (tiny instances): level -> path -> flow,
  /// paths given as edge index sequences.
  std::vector<std::map<std::vector<int>, double>> path_flows;

  /// Flows on plain edges gathered into TimeVector order.
  Vector plain(const Network& net) const;
};

Network load_network(const std::filesystem::path& path);
Network parse_network(std::istream& in);

}  // namespace tapeq
