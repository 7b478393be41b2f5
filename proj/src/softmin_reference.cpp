#include "tapeq/softmin.hpp"

#include "softmin_sweep.hpp"

namespace tapeq {

namespace reference {

LevelFlows softmin_flows_serial(const LevelGraph& g, std::span<const double> weights,
                                std::span<const double> demands, double gamma, int hops) {
  if (!(gamma > 0.0)) throw DomainError("softmin_flows needs gamma > 0");
  detail::check_inputs(g, weights, demands);
  detail::Incidence inc(g);
  detail::OriginGroups groups(g);
  detail::OriginSweep sweep;
  LevelFlows out;
  out.od_values.assign(g.ods.size(), 0.0);
  out.edge_flows.assign(g.edges.size(), 0.0);
  for (const auto& grp : groups.groups) {
    sweep.forward(g, inc, weights, grp.origin, gamma, hops);
    std::vector<double> seeds(g.num_vertices, 0.0);
    for (int w : grp.ods) {
      const double lz = sweep.log_partition(g.ods[w].dest);
      if (lz == detail::kNegInf) throw DomainError(detail::unreachable_message(g, w, hops));
      out.od_values[w] = -gamma * lz;
      out.value += demands[w] * out.od_values[w];
      seeds[g.ods[w].dest] += demands[w];
    }
    sweep.backward(g, inc, weights, seeds, out.edge_flows);
  }
  return out;
}

}  // namespace reference

}  // namespace tapeq
