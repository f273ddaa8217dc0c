// Run-directory layout and helpers shared by the subcommands.
#pragma once

#include "vptrap/io.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace vptrap::cli {

namespace fs = std::filesystem;

/// Missing or unreadable inputs (exit code 4).
struct MissingInput : Error {
    using Error::Error;
};

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "VPTRAP_OUTPUT_ROOT";

struct GlobalOptions {
    std::string out;
    bool reproducible = false;
    int threads = 1;
};

/// "t8", "t0.5": shortest round-trip spelling of a sample time.
std::string time_tag(double t);

/// --out if given, else $VPTRAP_OUTPUT_ROOT/<stem>, else ./vptrap_runs/<stem>.
fs::path resolve_output(const GlobalOptions& opt, const fs::path& input);

std::vector<std::string> diagnostics_header();

/// Manifest skeleton: schema, code version, command, config, file index.
nlohmann::json manifest_base(const std::string& command, const SimConfig* cfg, const GlobalOptions& opt);
void write_manifest(io::OutputDir& out, nlohmann::json manifest);

SimConfig load_run_config(const fs::path& run_dir);
/// Sample times with a file "<dir>/<prefix>_t<T><suffix>" present.
std::vector<double> times_with(const fs::path& dir, const std::string& prefix, const std::string& suffix);
std::string read_input(const fs::path& p);

int cmd_run(const fs::path& config, const GlobalOptions& opt);
int cmd_oracle(const fs::path& config, const GlobalOptions& opt);
int cmd_scatter(const fs::path& run_dir, const GlobalOptions& opt);
int cmd_report(const fs::path& run_dir, const GlobalOptions& opt);

}  // namespace vptrap::cli
