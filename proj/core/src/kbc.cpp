#include "proxdebias/kbc.hpp"

#include <fstream>
#include <stdexcept>

#include "proxdebias/errors.hpp"
#include "proxdebias/parallel.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias::kbc {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one UTF-8 code point starting at s[i] and advances i. Malformed
// sequences decode to kInvalid and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kInvalid;
  }
  if (i + len > s.size()) {
    ++i;
    return kInvalid;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kInvalid;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

bool is_letter(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  // Latin-1 Supplement, Latin Extended-A and -B letters.
  return cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7;
}

}  // namespace

std::vector<std::string> default_seed_words() {
  return {"man", "woman", "boy", "girl", "male", "female", "he", "she"};
}

WordLists WordLists::make(const std::vector<std::string>& stop_words, const std::vector<std::string>& seed,
                          const std::vector<std::string>& names) {
  if (seed.empty()) throw std::invalid_argument("seed word set must not be empty");
  WordLists lists;
  for (const auto& w : stop_words) lists.stop_words.insert(text::to_lower(w));
  for (const auto& w : seed) lists.seed.insert(text::to_lower(w));
  for (const auto& w : names) lists.names.insert(text::to_lower(w));
  return lists;
}

void Dictionary::add(std::string_view headword, std::string_view definition) {
  auto key = text::to_lower(text::trim(headword));
  if (key.empty()) throw std::invalid_argument("dictionary headword must not be empty");
  auto& entry = entries_[std::move(key)];
  if (!entry.empty()) entry.push_back(' ');
  entry.append(text::trim(definition));
}

const std::string* Dictionary::find(std::string_view token) const {
  const auto it = entries_.find(text::to_lower(token));
  return it == entries_.end() ? nullptr : &it->second;
}

Dictionary read_dictionary(std::istream& in, const std::string& name) {
  Dictionary dict(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(name, line_no, "expected 'headword<TAB>definition'");
    const std::string_view view(line);
    if (text::trim(view.substr(0, tab)).empty()) throw ParseError(name, line_no, "empty headword");
    dict.add(view.substr(0, tab), view.substr(tab + 1));
  }
  return dict;
}

Dictionary read_dictionary_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary: " + path.string());
  return read_dictionary(in, path.string());
}

KnowledgeBase::KnowledgeBase(std::vector<Dictionary> dictionaries) : dictionaries_(std::move(dictionaries)) {
  if (dictionaries_.empty()) throw std::invalid_argument("knowledge base needs at least one dictionary");
}

std::string_view stage_label(Stage stage) {
  switch (stage) {
    case Stage::stop_or_nonalpha:
      return "stop/nonalpha";
    case Stage::name_or_seed:
      return "name_or_seed";
    case Stage::dictionary_vote:
      return "dictionary_vote";
    case Stage::debias:
      return "debias";
  }
  return "debias";
}

std::optional<Stage> parse_stage_label(std::string_view label) {
  for (Stage s : {Stage::stop_or_nonalpha, Stage::name_or_seed, Stage::dictionary_vote, Stage::debias}) {
    if (stage_label(s) == label) return s;
  }
  return std::nullopt;
}

Classification::Classification(std::vector<std::string> tokens, std::vector<Stage> stages)
    : tokens_(std::move(tokens)), stages_(std::move(stages)) {
  if (tokens_.size() != stages_.size()) throw std::invalid_argument("classification: token/stage count mismatch");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw std::invalid_argument("classification: duplicate token '" + tokens_[i] + "'");
    }
  }
}

std::optional<Stage> Classification::stage_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return stages_[it->second];
}

bool Classification::is_preserved(std::string_view token) const {
  const auto stage = stage_of(token);
  if (!stage) throw MissingTokenError(std::string(token));
  return *stage != Stage::debias;
}

std::vector<std::string> Classification::preserve() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (stages_[i] != Stage::debias) out.push_back(tokens_[i]);
  }
  return out;
}

std::vector<std::string> Classification::debias() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (stages_[i] == Stage::debias) out.push_back(tokens_[i]);
  }
  return out;
}

StageCounts Classification::counts() const {
  StageCounts c;
  for (Stage s : stages_) {
    switch (s) {
      case Stage::stop_or_nonalpha: ++c.stop_or_nonalpha; break;
      case Stage::name_or_seed: ++c.name_or_seed; break;
      case Stage::dictionary_vote: ++c.dictionary_vote; break;
      case Stage::debias: ++c.debias; break;
    }
  }
  return c;
}

void write_provenance(const Classification& c, std::ostream& out) {
  for (std::size_t i = 0; i < c.size(); ++i) {
    out << c.tokens()[i] << '\t' << stage_label(c.stages()[i]) << '\n';
  }
  if (!out) throw IoError("write failure while saving classification");
}

Classification read_provenance(std::istream& in, const std::string& source_name) {
  std::vector<std::string> tokens;
  std::vector<Stage> stages;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    const auto fields = text::split(t, '\t');
    if (fields.size() != 2) throw ParseError(source_name, line_no, "expected 'token<TAB>stage'");
    const auto stage = parse_stage_label(text::trim(fields[1]));
    if (!stage) throw ParseError(source_name, line_no, "unknown stage '" + std::string(fields[1]) + "'");
    tokens.emplace_back(text::trim(fields[0]));
    stages.push_back(*stage);
  }
  try {
    return Classification(std::move(tokens), std::move(stages));
  } catch (const std::invalid_argument& e) {
    throw ParseError(source_name, 0, e.what());
  }
}

bool is_nonalphabetic(std::string_view token) {
  std::size_t i = 0;
  while (i < token.size()) {
    if (!is_letter(next_code_point(token, i))) return true;
  }
  return false;
}

std::vector<std::string> definition_tokens(std::string_view definition) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < definition.size()) {
    const std::size_t start = i;
    if (is_letter(next_code_point(definition, i))) {
      current.append(definition.substr(start, i - start));
    } else if (!current.empty()) {
      tokens.push_back(text::to_lower(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(text::to_lower(current));
  return tokens;
}

bool dictionary_gender_vote(std::string_view token, const KnowledgeBase& kb, const TokenSet& seed) {
  std::size_t votes = 0;
  for (const Dictionary& dict : kb.dictionaries()) {
    const std::string* definition = dict.find(token);
    if (definition == nullptr) continue;
    for (const auto& word : definition_tokens(*definition)) {
      if (seed.contains(word)) {
        ++votes;
        break;
      }
    }
  }
  return 2 * votes > kb.size();
}

Classification classify_vocabulary(const Vocabulary& vocab, const WordLists& lists, const KnowledgeBase& kb,
                                   std::size_t workers) {
  std::vector<Stage> stages(vocab.size(), Stage::debias);
  parallel_for(vocab.size(), workers, [&](std::size_t i) {
    const std::string& token = vocab.word(i);
    const std::string lower = text::to_lower(token);
    if (lists.stop_words.contains(lower) || is_nonalphabetic(token)) {
      stages[i] = Stage::stop_or_nonalpha;
    } else if (lists.names.contains(lower) || lists.seed.contains(lower)) {
      stages[i] = Stage::name_or_seed;
    } else if (dictionary_gender_vote(lower, kb, lists.seed)) {
      stages[i] = Stage::dictionary_vote;
    }
  });
  return Classification(vocab.words(), std::move(stages));
}

std::map<std::string, GoldLabel> read_gold_labels(std::istream& in, const std::string& source_name) {
  std::map<std::string, GoldLabel> gold;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_whitespace(t);
    if (fields.size() != 2) throw ParseError(source_name, line_no, "expected 'token<TAB>label'");
    GoldLabel label;
    if (fields[1] == "gender_specific") {
      label = GoldLabel::gender_specific;
    } else if (fields[1] == "non_gender_specific") {
      label = GoldLabel::non_gender_specific;
    } else {
      throw ParseError(source_name, line_no, "unknown label '" + std::string(fields[1]) + "'");
    }
    gold[std::string(fields[0])] = label;
  }
  return gold;
}

ClassificationMetrics score_classification(const Classification& predicted,
                                           const std::map<std::string, GoldLabel>& gold) {
  if (gold.empty()) throw std::invalid_argument("gold label set is empty");
  ClassificationMetrics m;
  for (const auto& [token, label] : gold) {
    const bool positive = predicted.is_preserved(token);
    const bool actual = label == GoldLabel::gender_specific;
    if (positive && actual) ++m.true_positive;
    if (positive && !actual) ++m.false_positive;
    if (!positive && !actual) ++m.true_negative;
    if (!positive && actual) ++m.false_negative;
  }
  const auto tp = static_cast<double>(m.true_positive);
  const double predicted_pos = tp + static_cast<double>(m.false_positive);
  const double actual_pos = tp + static_cast<double>(m.false_negative);
  m.precision = predicted_pos > 0 ? tp / predicted_pos : 0.0;
  m.recall = actual_pos > 0 ? tp / actual_pos : 0.0;
  m.f1 = (m.precision + m.recall) > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = (tp + static_cast<double>(m.true_negative)) / static_cast<double>(gold.size());
  return m;
}

}  // namespace proxdebias::kbc
