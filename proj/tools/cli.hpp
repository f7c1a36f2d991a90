#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pwainv/model_io.hpp"

namespace pwainv::cli {

constexpr int kUsageExit = 2;
constexpr std::uint64_t kDefaultSeed = 1;

struct UsageError : std::runtime_error {
  UsageError(std::string field_name, const std::string& message)
      : std::runtime_error(message), field(std::move(field_name)) {}
  std::string field;
};

struct RunConfig {
  std::string command;  // simulate | invert | stable-invert | ilc | bench-printhead | check
  std::string model_path;
  std::string reference_path;  // reference / output trajectory CSV
  std::string input_path;      // simulate: input CSV
  std::string output_dir;
  std::string config_path;
  std::uint64_t seed = kDefaultSeed;
  std::string seed_source = "default";  // flag | file | env | default

  // invert
  std::string degree = "auto";
  long anchor_k = 0;
  // stable-invert
  StableInversionConfig stable;
  DecouplingTolerances decoupling;
  // check
  AssumptionOptions assumptions;
  // ilc / bench-printhead
  IlcScheme scheme = IlcScheme::Ililc;
  std::optional<double> gain;
  int trials = 9;
  bool dump_trajectories = false;
  BenchConfig bench = default_bench_config();
};

// args excludes the program name. Reads --config when given; flags override file values.
RunConfig parse_config(const std::vector<std::string>& args);
// Runs the command; returns the process exit code. Reports go to `out`, diagnostics to `err`.
int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pwainv::cli
