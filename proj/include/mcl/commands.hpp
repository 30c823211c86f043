#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcl/config.hpp"
#include "mcl/engine.hpp"
#include "mcl/metrics.hpp"

namespace mcl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct CommandContext {
  std::ostream& out;
  std::ostream& err;
  unsigned threads = 1;
};

/// MCL_THREADS if set and positive, else the hardware concurrency.
unsigned threads_from_env();

/// Creates <base>/<kind>-<UTC timestamp>-<seed>, adding -2, -3, ... rather
/// than reusing an existing directory.
std::filesystem::path create_run_directory(const std::filesystem::path& base, std::string_view kind,
                                           std::uint64_t seed);

void write_trace_csv(const RunTrace& trace, std::ostream& out);
void write_gaps_csv(const GapReport& gaps, std::ostream& out);
nlohmann::json summarize_run(const ExperimentConfig& config, const RunTrace& trace,
                             const GapReport& gaps);

/// Executes the single-run study for every seed and returns the run directories.
std::vector<std::filesystem::path> execute_single(const ExperimentConfig& config, unsigned threads);

int cmd_run(const std::filesystem::path& config_path, CommandContext& ctx);
int cmd_sweep(const std::filesystem::path& config_path, CommandContext& ctx);
int cmd_medianlab(const std::filesystem::path& config_path, CommandContext& ctx);

struct VerifyOptions {
  std::vector<int> only;
  bool json = false;
  bool corrupt_median = false;
};
int cmd_verify(const VerifyOptions& options, CommandContext& ctx);

}  // namespace mcl
