#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "proxdebias/bias_geometry.hpp"
#include "proxdebias/embedding_io.hpp"
#include "proxdebias/kbc.hpp"
#include "proxdebias/neighbourhood.hpp"

namespace proxdebias {

inline constexpr double kDefaultRepulsionThreshold = 0.05;

/// Scalarization weights for the repulsion, attraction and neutralization
/// terms. Each lies in [0, 1] and they sum to 1.
struct ObjectiveWeights {
  double repulsion = 1.0 / 8.0;
  double attraction = 6.0 / 8.0;
  double neutralization = 1.0 / 8.0;

  /// Throws std::invalid_argument when a weight is out of range or the sum
  /// differs from 1 by more than 1e-12.
  void validate() const;
};

struct RepulsionMember {
  std::string token;
  Vector vector;  ///< original (reference) vector
  double beta = 0.0;
};

/// Neighbours of `word` whose indirect bias with it exceeds `theta_r`.
struct RepulsionSet {
  std::string word;
  std::vector<RepulsionMember> members;
  double theta_r = kDefaultRepulsionThreshold;
};

/// Filters the word's neighbour list by beta > theta_r, with beta taken
/// from `reference_set`. Pairs with undefined beta are left out; repeated
/// tokens are kept once. Throws MissingTokenError if the word has no entry.
RepulsionSet repulsion_set(std::string_view word, const NeighbourTable& neighbours, const EmbeddingSet& reference_set,
                           const GenderDirection& g, double theta_r = kDefaultRepulsionThreshold);

/// Mean |cos(w_d, n_i)| over the repulsion set; 0 for an empty set.
double f_r(const Vector& w_d, const RepulsionSet& s);
/// |cos(w_d, w) - 1| / 2.
double f_a(const Vector& w_d, const Vector& w);
/// |cos(w_d, g)|.
double f_n(const Vector& w_d, const GenderDirection& g);

/// Weighted sum of the three terms. Zero vectors throw std::invalid_argument.
double objective(const Vector& w_d, const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                 const ObjectiveWeights& weights);

/// Analytic gradient of objective() in w_d. |u| is differentiated as
/// sign(u) with sign(0) = 0.
Vector objective_gradient(const Vector& w_d, const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                          const ObjectiveWeights& weights);

/// Adam settings. Iteration stops after `max_steps`, when the objective
/// changes by less than `tolerance` between steps, or at a stationary point.
struct OptimizerConfig {
  double learning_rate = 0.01;
  std::size_t max_steps = 300;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tolerance = 1e-8;

  void validate() const;
};

struct TraceEntry {
  double initial_objective = 0.0;
  double final_objective = 0.0;
  std::size_t steps = 0;
};

/// Objective became non-finite or the iterate collapsed to zero.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& message, TraceEntry trace)
      : std::runtime_error(message), trace_(trace) {}

  const TraceEntry& trace() const noexcept { return trace_; }

 private:
  TraceEntry trace_;
};

struct WordDebiasResult {
  Vector debiased;  ///< rescaled to the norm of the input vector
  TraceEntry trace;
};

/// Minimizes the objective from w_d = w with Adam and returns the best
/// iterate seen, so trace.final_objective <= trace.initial_objective.
/// When no iterate improves on the start, the input vector is returned as is.
WordDebiasResult debias_word(const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                             const ObjectiveWeights& weights, const OptimizerConfig& cfg = {});

struct DebiasOptions {
  ObjectiveWeights weights;
  double theta_r = kDefaultRepulsionThreshold;
  std::size_t k = kDefaultNeighbours;
  OptimizerConfig optimizer;
  std::size_t workers = 1;
};

struct DebiasTraceRow {
  std::string token;
  TraceEntry trace;
  std::size_t repulsion_size = 0;
};

struct DebiasFailure {
  std::string token;
  std::string message;
};

struct DebiasResult {
  EmbeddingSet debiased;
  std::vector<DebiasTraceRow> trace;  ///< debias-set words in vocabulary order
  std::vector<DebiasFailure> failures;
  ObjectiveWeights weights;

  const DebiasTraceRow* find_trace(std::string_view token) const;
};

/// Debiases every word of the classification's debias set. Neighbour lists
/// and repulsion sets come from the original `set` and are computed once,
/// or taken from `precomputed` when given (it must cover the debias set).
/// Preserved rows are copied bit-for-bit. A word whose optimization fails
/// keeps its input vector and is listed in `failures`.
DebiasResult debias_all(const EmbeddingSet& set, const kbc::Classification& classification, const GenderDirection& g,
                        const DebiasOptions& options, const NeighbourTable* precomputed = nullptr);

/// Header plus `token initial final steps repulsion_size` rows, then one
/// `# failed` line per failure.
void write_debias_trace(const DebiasResult& result, std::ostream& out);

}  // namespace proxdebias
