#pragma once

// Per-origin log-domain sweeps shared by the parallel driver and the serial
// reference.

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tapeq/network.hpp"

namespace tapeq::detail {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// CSR incidence of a level graph.
struct Incidence {
  std::vector<int> in_offsets, in_edges;
  std::vector<int> out_offsets, out_edges;

  explicit Incidence(const LevelGraph& g);
};

/// OD pairs of a level grouped by origin, origins ascending.
struct OriginGroups {
  struct Group {
    int origin;
    std::vector<int> ods;
  };
  std::vector<Group> groups;

  explicit OriginGroups(const LevelGraph& g);
};

/// Forward tables ell[h][v] = ln Z_v^(h), Z^(h) summing exp(-len / gamma)
/// over walks from the origin with at most h edges.
class OriginSweep {
 public:
  void forward(const LevelGraph& g, const Incidence& inc, std::span<const double> weights, int origin,
               double gamma, int hops);

  double log_partition(int v) const { return ell_[static_cast<std::size_t>(hops_) * n_ + v]; }

  /// Reverse sweep. seeds[v] is the demand terminating at v (0 if none).
  /// Adds d value / d weight_e into flows.
  void backward(const LevelGraph& g, const Incidence& inc, std::span<const double> weights,
                std::span<const double> seeds, std::span<double> flows);

 private:
  double& ell(int h, int v) { return ell_[static_cast<std::size_t>(h) * n_ + v]; }
  double ell(int h, int v) const { return ell_[static_cast<std::size_t>(h) * n_ + v]; }

  int n_ = 0;
  int hops_ = 0;
  double gamma_ = 1.0;
  std::vector<double> ell_;
  std::vector<double> lam_, lam_next_;
};

std::string unreachable_message(const LevelGraph& g, int w, int hops);
void check_inputs(const LevelGraph& g, std::span<const double> weights, std::span<const double> demands);

}  // namespace tapeq::detail
