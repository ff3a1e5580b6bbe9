#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxdebias/embedding_io.hpp"

namespace proxdebias::eval {

// ---------------------------------------------------------------------------
// Gender relational analogy (SemBias)
// ---------------------------------------------------------------------------

enum class PairLabel { definition, stereotype, none };

struct LabeledPair {
  std::string a;
  std::string b;
  PairLabel label = PairLabel::none;
};

/// One Definition pair, one Stereotype pair and two None pairs.
struct SemBiasInstance {
  std::array<LabeledPair, 4> pairs;

  /// Throws std::invalid_argument unless the label multiset is {D, S, N, N}.
  void validate() const;
};

/// Lines of four tab-separated `a:b` pairs in the fixed order Definition,
/// Stereotype, None, None. Tokens are lowercased.
std::vector<SemBiasInstance> read_sembias(std::istream& in, const std::string& source_name = "<stream>");
std::vector<SemBiasInstance> read_sembias_file(const std::filesystem::path& path);

struct SemBiasReport {
  double definition_pct = 0.0;
  double stereotype_pct = 0.0;
  double none_pct = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  ///< instances with an out-of-vocabulary token
};

/// For each instance, picks the pair maximizing cos(he - she, a - b); the
/// first pair wins ties. A zero difference vector scores cosine 0.
/// Throws MissingTokenError when "he" or "she" is absent and
/// std::invalid_argument when no instance can be evaluated.
SemBiasReport sembias_eval(const EmbeddingSet& set, std::span<const SemBiasInstance> instances);

// ---------------------------------------------------------------------------
// Word analogy with 3CosMul
// ---------------------------------------------------------------------------

inline constexpr double kDefaultCosMulEpsilon = 0.001;

/// "p is to q as r is to expected".
struct AnalogyQuestion {
  std::string p;
  std::string q;
  std::string r;
  std::string expected;
  std::string section;
};

struct AnalogyDataset {
  std::vector<AnalogyQuestion> questions;
  std::size_t dropped = 0;  ///< lines whose four tokens were not distinct
};

/// Google-style files (`: section` headers, four tokens per line) and MSR
/// files (four tokens per line, no headers). Tokens are lowercased.
AnalogyDataset read_analogies(std::istream& in, const std::string& source_name = "<stream>");
AnalogyDataset read_analogies_file(const std::filesystem::path& path);

/// Holds a unit-normalized copy of the embedding for repeated queries.
class AnalogySolver {
 public:
  explicit AnalogySolver(const EmbeddingSet& set, double eps = kDefaultCosMulEpsilon);

  /// argmax over the vocabulary minus {p, q, r} of
  /// s(w,r) * s(w,q) / (s(w,p) + eps), with s = (cos + 1) / 2.
  /// Lowest vocabulary index wins ties. Throws MissingTokenError.
  const std::string& solve(std::string_view p, std::string_view q, std::string_view r) const;

  const EmbeddingSet& set() const noexcept { return *set_; }

 private:
  const EmbeddingSet* set_;
  Matrix unit_;
  double eps_;
};

const std::string& solve_analogy_3cosmul(const EmbeddingSet& set, std::string_view p, std::string_view q,
                                         std::string_view r, double eps = kDefaultCosMulEpsilon);

struct AnalogyScore {
  std::string section;
  std::size_t correct = 0;
  std::size_t answered = 0;
  std::size_t skipped = 0;  ///< out-of-vocabulary questions

  double accuracy() const noexcept {
    return answered == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(answered);
  }
};

struct AnalogyReport {
  AnalogyScore overall;
  std::vector<AnalogyScore> sections;  ///< in order of first appearance
};

/// Throws std::invalid_argument when no question is answerable.
AnalogyReport analogy_accuracy(const EmbeddingSet& set, std::span<const AnalogyQuestion> questions,
                               double eps = kDefaultCosMulEpsilon, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Word similarity
// ---------------------------------------------------------------------------

struct SimilarityPair {
  std::string a;
  std::string b;
  double human_score = 0.0;
};

/// `a b score` per line (spaces or tabs); '#' lines skipped; tokens lowercased.
std::vector<SimilarityPair> read_similarity_pairs(std::istream& in, const std::string& source_name = "<stream>");
std::vector<SimilarityPair> read_similarity_pairs_file(const std::filesystem::path& path);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks. Throws std::invalid_argument for
/// fewer than two values or a constant input.
double spearman(std::span<const double> x, std::span<const double> y);

struct SimilarityReport {
  double rho = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Spearman correlation between model cosines and human scores over the
/// in-vocabulary pairs.
SimilarityReport similarity_spearman(const EmbeddingSet& set, std::span<const SimilarityPair> pairs);

}  // namespace proxdebias::eval
