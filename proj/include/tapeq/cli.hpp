#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tapeq {

/// One command's settings: a JSON config file, then flags on top.
struct RunConfig {
  std::string command;                 // solve, compare or od
  std::vector<std::string> instances;  // network files; od: the cost CSV
  std::vector<std::string> names;      // compare: scenario names (default: file stems)
  std::string rows, cols;              // od: marginal CSVs
  std::string model = "auto";
  double eps = 1e-6;
  double eps_residual = 1e-6;
  std::map<int, double> gamma;  // level (1-based) -> gamma; od reads level 1
  std::map<int, int> hops;      // level (1-based) -> hop bound H
  std::uint64_t seed = 0;
  int max_iter = 100000;
  std::string out_dir;  // empty: $TAPEQ_OUT_DIR, then ./tapeq_out
  bool trace = false;
  bool verify = false;
  bool sample_origins = false;
  bool mirror_descent = false;
};

/// Parses a JSON config; unknown keys and wrong types are errors. Relative
/// paths are taken against `base`.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

std::filesystem::path output_dir(const RunConfig& cfg);

/// Exit codes: 0 certified, 1 input or validation error, 2 not certified
/// within the budget (files are still written).
int cmd_solve(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_od(const RunConfig& cfg, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tapeq
