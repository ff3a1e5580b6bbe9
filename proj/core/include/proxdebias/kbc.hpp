#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "proxdebias/embedding_io.hpp"

namespace proxdebias::kbc {

using TokenSet = std::unordered_set<std::string>;

/// Default gender-specific reference terms used to read dictionary definitions.
std::vector<std::string> default_seed_words();

/// Stop words, seed references and gendered names. All entries are lowercase.
struct WordLists {
  TokenSet stop_words;
  TokenSet seed;
  TokenSet names;

  /// Lowercases every entry; throws std::invalid_argument if `seed` is empty.
  static WordLists make(const std::vector<std::string>& stop_words, const std::vector<std::string>& seed,
                        const std::vector<std::string>& names);
};

/// Headword -> definition text. Repeated headwords (one line per sense)
/// are concatenated. Lookup is case-insensitive on the headword.
class Dictionary {
 public:
  explicit Dictionary(std::string name = {}) : name_(std::move(name)) {}

  void add(std::string_view headword, std::string_view definition);
  const std::string* find(std::string_view token) const;

  const std::string& name() const noexcept { return name_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::string name_;
  std::unordered_map<std::string, std::string> entries_;
};

/// `headword<TAB>definition` per line.
Dictionary read_dictionary(std::istream& in, const std::string& name = "<stream>");
Dictionary read_dictionary_file(const std::filesystem::path& path);

class KnowledgeBase {
 public:
  /// Throws std::invalid_argument when no dictionaries are given.
  explicit KnowledgeBase(std::vector<Dictionary> dictionaries);

  const std::vector<Dictionary>& dictionaries() const noexcept { return dictionaries_; }
  std::size_t size() const noexcept { return dictionaries_.size(); }

 private:
  std::vector<Dictionary> dictionaries_;
};

/// The first classifier stage that fired for a token.
enum class Stage { stop_or_nonalpha, name_or_seed, dictionary_vote, debias };

std::string_view stage_label(Stage stage);
std::optional<Stage> parse_stage_label(std::string_view label);

struct StageCounts {
  std::size_t stop_or_nonalpha = 0;
  std::size_t name_or_seed = 0;
  std::size_t dictionary_vote = 0;
  std::size_t debias = 0;

  std::size_t preserve() const noexcept { return stop_or_nonalpha + name_or_seed + dictionary_vote; }
  std::size_t total() const noexcept { return preserve() + debias; }
};

/// Partition of a vocabulary into a preserve set and a debias set, with the
/// deciding stage kept per token in vocabulary order.
class Classification {
 public:
  Classification() = default;
  /// Throws std::invalid_argument on size mismatch or duplicate tokens.
  Classification(std::vector<std::string> tokens, std::vector<Stage> stages);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<Stage>& stages() const noexcept { return stages_; }

  std::optional<Stage> stage_of(std::string_view token) const;
  /// Throws MissingTokenError if the token was not classified.
  bool is_preserved(std::string_view token) const;

  std::vector<std::string> preserve() const;
  std::vector<std::string> debias() const;
  StageCounts counts() const;

 private:
  std::vector<std::string> tokens_;
  std::vector<Stage> stages_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// `token<TAB>stage_label` rows in classification order.
void write_provenance(const Classification& c, std::ostream& out);
Classification read_provenance(std::istream& in, const std::string& source_name = "<stream>");

/// True iff any code point is outside the letter class (ASCII letters and
/// the Latin-1/Latin Extended letter blocks). Digits, hyphens and
/// apostrophes are non-alphabetic; malformed UTF-8 is non-alphabetic.
bool is_nonalphabetic(std::string_view token);

/// Lowercased letter-runs of a definition.
std::vector<std::string> definition_tokens(std::string_view definition);

/// True iff strictly more than half of the dictionaries define `token`
/// with a definition containing a seed word as a whole token.
bool dictionary_gender_vote(std::string_view token, const KnowledgeBase& kb, const TokenSet& seed);

/// Stages in order with short-circuit: (1) stop word or non-alphabetic,
/// (2) name or seed, (3) dictionary majority; everything else is debiased.
Classification classify_vocabulary(const Vocabulary& vocab, const WordLists& lists, const KnowledgeBase& kb,
                                   std::size_t workers = 1);

enum class GoldLabel { gender_specific, non_gender_specific };

/// `token<TAB>gender_specific|non_gender_specific` per line.
std::map<std::string, GoldLabel> read_gold_labels(std::istream& in, const std::string& source_name = "<stream>");

struct ClassificationMetrics {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
  double precision = 0.0;  ///< 0 when nothing is predicted positive
  double recall = 0.0;     ///< 0 when the gold set has no positives
  double f1 = 0.0;
  double accuracy = 0.0;
};

/// Gender-specific is the positive class; preserved tokens are positive
/// predictions. Throws MissingTokenError for gold tokens absent from the
/// partition and std::invalid_argument for an empty gold set.
ClassificationMetrics score_classification(const Classification& predicted,
                                           const std::map<std::string, GoldLabel>& gold);

}  // namespace proxdebias::kbc
