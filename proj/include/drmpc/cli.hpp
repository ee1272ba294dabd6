#pragma once

#include <drmpc/sim.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace drmpc::cli {

// Parse or schema failure; the message carries "<path>:<line>:" when the
// offending line is known.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A scenario file resolved into runnable objects. The file is a key-value
// format with [table] headers, one "key = value" pair per line, # comments,
// quoted strings, and bracketed numeric arrays ([..] vectors, [[..]]
// matrices). Unknown keys are rejected; every module-level invariant is
// checked before any compute.
struct CliConfig {
  sim::Scenario scenario;
  conic::SolverSettings solver;
  std::string out_dir;  // [run] out, default "out/<name>"
};

CliConfig parse_config(const std::string& text, const std::string& path);
CliConfig load_config(const std::string& path);

// Plant-only view of a config file: consumes the [plant] table, ignores the
// rest (so regulator synthesis does not demand a full scenario).
regulator::Plant plant_from_config(const std::string& text, const std::string& path);
regulator::Plant load_plant(const std::string& path);

// Whitespace- or comma-separated numeric rows, # comments. A polytope file
// is a matrix whose last column is the offset: C w <= d.
Mat read_matrix(const std::string& path);
poly::HPolytope read_polytope(const std::string& path);
std::vector<Vec> read_samples(const std::string& path);

std::string mixture_to_json(const dpmm::MixtureEstimate& est);
dpmm::MixtureEstimate mixture_from_json(const std::string& text,
                                        const std::string& path);

// Subcommand dispatch; returns the process exit code (0 success,
// 1 bad config/arguments, 2 initial state infeasible).
int cli_run(int argc, const char* const* argv);
int cli_run(const std::vector<std::string>& args);

}  // namespace drmpc::cli
