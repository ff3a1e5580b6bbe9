#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxdebias/debias.hpp"
#include "proxdebias/gipe.hpp"

namespace proxdebias::cli {

namespace fs = std::filesystem;

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,   ///< unreadable input, parse error, I/O failure
  kUsageError = 2,     ///< bad flags or configuration values
  kPartialFailure = 3  ///< stage finished but some words failed to optimize
};

/// Invalid configuration detected before any work starts.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PipelineConfig {
  // embeddings and outputs
  fs::path embedding;
  fs::path reference_embedding;
  fs::path out;
  fs::path trace;
  fs::path report;
  fs::path neighbour_cache;
  int precision = 6;

  // classification inputs
  fs::path classification;
  fs::path stop_words;
  fs::path names;
  fs::path seed;
  std::vector<fs::path> dictionaries;
  fs::path gold;

  fs::path gender_pairs;
  fs::path words;

  // evaluation datasets
  fs::path sembias;
  std::vector<fs::path> analogy;
  std::vector<fs::path> similarity;

  // numeric settings
  std::vector<double> lambda{1.0 / 8.0, 6.0 / 8.0, 1.0 / 8.0};
  double theta_r = kDefaultRepulsionThreshold;
  std::vector<double> theta_s{0.03, 0.05, 0.07};
  std::size_t k = kDefaultNeighbours;
  double epsilon = kDefaultGipeEpsilon;
  double direct_bias_c = 1.0;
  OptimizerConfig optimizer;
  std::size_t workers = 1;

  ObjectiveWeights weights() const;
  /// Throws ConfigError for out-of-range numeric settings.
  void validate_numeric() const;
};

/// Parses `key = value` lines ('#' and ';' comments). Keys use the long
/// flag names; '_' and '-' are interchangeable.
std::map<std::string, std::string> read_config_file(const fs::path& path);

/// Loads the classification from `classification`, or computes it from the
/// word lists and dictionaries when no provenance file is given.
kbc::Classification load_or_classify(const PipelineConfig& cfg, const EmbeddingSet& set);

/// Reuses `cache` when it exists and covers `queries`, else computes the
/// table and writes the cache (when a path is given).
NeighbourTable load_or_compute_neighbours(const EmbeddingSet& set, const std::vector<std::string>& queries,
                                          std::size_t k, const fs::path& cache, std::size_t workers);

int cmd_classify(const PipelineConfig& cfg, std::ostream& out);
int cmd_debias(const PipelineConfig& cfg, std::ostream& out);
int cmd_audit(const PipelineConfig& cfg, std::ostream& out);
int cmd_eval(const PipelineConfig& cfg, std::ostream& out);
int cmd_neighbors(const PipelineConfig& cfg, std::ostream& out);

/// Full command line entry point; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace proxdebias::cli
