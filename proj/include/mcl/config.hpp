#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcl/engine.hpp"
#include "mcl/noise.hpp"
#include "mcl/objective.hpp"

namespace mcl {

/// Invalid experiment configuration. path() names the offending key
/// ("algo.aggregation"); parse errors carry nlohmann's line/column text.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class ProblemFamily { Quadratic, Logistic };

struct ProblemSpec {
  ProblemFamily family = ProblemFamily::Quadratic;
  std::vector<Vector> centers;  // Quadratic
  LogisticGenerator logistic;   // Logistic

  bool operator==(const ProblemSpec&) const = default;
};

enum class StudyKind { Single, Sweep, MedianLab, Verify };
std::string_view to_string(StudyKind kind);

struct MedianLabSpec {
  Vector u;
  std::vector<NoiseFamily> families;
  Vector b_grid;
  std::size_t mc_samples = 1'000'000;
  std::uint64_t seed = 1;

  bool operator==(const MedianLabSpec&) const = default;
};

struct ExperimentConfig {
  StudyKind study = StudyKind::Single;
  std::string output_dir = "runs";
  std::optional<ProblemSpec> problem;
  std::optional<AlgoConfig> algo;  // includes the noise block
  std::vector<std::uint64_t> seeds;
  Vector b_grid;  // Sweep
  std::optional<MedianLabSpec> medianlab;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Strict: unknown keys are rejected, and every module precondition that can
/// be checked without running is checked here.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

std::unique_ptr<Objective> build_problem(const ProblemSpec& spec);

}  // namespace mcl
