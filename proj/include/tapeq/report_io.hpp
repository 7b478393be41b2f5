#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tapeq/equilibrium.hpp"
#include "tapeq/od_entropy.hpp"

namespace tapeq {

/// Every float in output files goes through this: 17 significant digits.
std::string format_double(double x);
inline constexpr const char* kFloatFormat = "%.17g";

struct RunInfo {
  std::string instance;
  std::uint64_t seed = 0;
};

/// Writes flows_level<k>.csv (edge, tail, head, t, f, gap_e, multiplier),
/// report.json and, with `trace`, trace.csv and potentials.csv.
void write_equilibrium(const std::filesystem::path& dir, const Network& net, const EquilibriumReport& r,
                       const RunInfo& info, bool trace);

/// OD instance with zone labels; rows and columns keep the order of the
/// marginal files.
struct OdInstance {
  ElpProblem problem;
  std::vector<std::string> row_zones;
  std::vector<std::string> col_zones;
};

/// Costs as `zone_i,zone_j,T_ij` lines, marginals as `zone,value` lines.
/// '#' starts a comment; a first line whose number field does not parse is
/// a header. Malformed input throws with the file name and line number.
OdInstance load_od_instance(const std::filesystem::path& costs, const std::filesystem::path& rows,
                            const std::filesystem::path& cols, double gamma);

struct OdVerification {
  bool run = false;
  bool pass = false;
  double max_abs_diff = 0.0;
  double tolerance = 1e-6;
};

/// Writes od_matrix.csv and the od_certificate.json sidecar.
void write_od(const std::filesystem::path& dir, const OdInstance& inst, const ElpSolution& sol,
              const OdOptions& opts, const OdVerification& verify);

}  // namespace tapeq
