#pragma once

// Command layer behind the conelab executable. Each command turns a
// validated RunConfig into a set of text files; run_cli adds the overrides,
// writes the files and maps errors to exit codes.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "conelab/cone.hpp"
#include "conelab/config.hpp"
#include "conelab/fem.hpp"
#include "conelab/regularity.hpp"
#include "conelab/wos.hpp"

namespace conelab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct OutputFile {
  std::string name;
  std::string content;
};

struct CommandResult {
  std::vector<OutputFile> files;  // the manifest is always last
  std::vector<std::string> messages;
  // Every result was flagged or low-confidence; exit code 3 after writing.
  bool all_flagged = false;
};

struct CommandRequest {
  std::string command;
  std::string config_path;
  std::vector<Vec3> points;  // replaces the configured points when non-empty
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

const std::vector<std::string>& command_names();

// Module options as the commands derive them from a config.
std::shared_ptr<const TriMesh> config_mesh(const RunConfig& c);
SolutionField config_fem_solution(const RunConfig& c);
WosConfig config_wos(const RunConfig& c);
LinkOptions config_link_options(const RunConfig& c);
ProfileOptions config_profile_options(const RunConfig& c);
SliceSpec config_slice_spec(const RunConfig& c);

// Loads the config and applies the request overrides.
RunConfig effective_config(const CommandRequest& req);

CommandResult check_cone_command(const RunConfig& c);
CommandResult solve_command(const RunConfig& c);
CommandResult estimate_p_command(const RunConfig& c);
CommandResult slice_poincare_command(const RunConfig& c);
CommandResult mesh_export_command(const RunConfig& c);
CommandResult run_command(const std::string& name, const RunConfig& c);

// Creates the directory if needed; IoError on failure.
void write_outputs(const std::string& dir, const CommandResult& r);

// Full command execution with error reporting on err; returns the exit code.
int run_cli(const CommandRequest& req, std::ostream& out, std::ostream& err);

}  // namespace conelab
