#include "proxdebias/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "proxdebias/errors.hpp"
#include "proxdebias/parallel.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias::eval {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + ": " + path.string());
  return in;
}

double safe_cosine(const Vector& a, const Vector& b) {
  const double denom = a.norm() * b.norm();
  return denom == 0.0 ? 0.0 : a.dot(b) / denom;
}

}  // namespace

void SemBiasInstance::validate() const {
  int def = 0, stereo = 0, none = 0;
  for (const auto& p : pairs) {
    switch (p.label) {
      case PairLabel::definition: ++def; break;
      case PairLabel::stereotype: ++stereo; break;
      case PairLabel::none: ++none; break;
    }
  }
  if (def != 1 || stereo != 1 || none != 2) {
    throw std::invalid_argument("SemBias instance needs one definition, one stereotype and two none pairs");
  }
}

std::vector<SemBiasInstance> read_sembias(std::istream& in, const std::string& source_name) {
  constexpr std::array<PairLabel, 4> order{PairLabel::definition, PairLabel::stereotype, PairLabel::none,
                                           PairLabel::none};
  std::vector<SemBiasInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_whitespace(t);
    if (fields.size() != 4) throw ParseError(source_name, line_no, "expected four 'a:b' pairs");
    SemBiasInstance inst;
    for (std::size_t i = 0; i < 4; ++i) {
      const auto parts = text::split(fields[i], ':');
      if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
        throw ParseError(source_name, line_no, "malformed pair '" + std::string(fields[i]) + "'");
      }
      inst.pairs[i] = {text::to_lower(parts[0]), text::to_lower(parts[1]), order[i]};
    }
    out.push_back(std::move(inst));
  }
  return out;
}

std::vector<SemBiasInstance> read_sembias_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path, "SemBias file");
  return read_sembias(in, path.string());
}

SemBiasReport sembias_eval(const EmbeddingSet& set, std::span<const SemBiasInstance> instances) {
  const Vector axis = set.vector("he") - set.vector("she");
  if (axis.norm() == 0.0) throw std::invalid_argument("he - she is the zero vector");

  SemBiasReport report;
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& inst : instances) {
    inst.validate();
    const bool in_vocab = std::all_of(inst.pairs.begin(), inst.pairs.end(), [&](const LabeledPair& p) {
      return set.vocab().contains(p.a) && set.vocab().contains(p.b);
    });
    if (!in_vocab) {
      ++report.skipped;
      continue;
    }
    std::size_t best = 0;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inst.pairs.size(); ++i) {
      const double sim = safe_cosine(axis, set.vector(inst.pairs[i].a) - set.vector(inst.pairs[i].b));
      if (sim > best_sim) {
        best_sim = sim;
        best = i;
      }
    }
    ++counts[static_cast<int>(inst.pairs[best].label)];
    ++report.evaluated;
  }
  if (report.evaluated == 0) throw std::invalid_argument("no SemBias instance is fully in vocabulary");

  const auto total = static_cast<double>(report.evaluated);
  report.definition_pct = 100.0 * static_cast<double>(counts[0]) / total;
  report.stereotype_pct = 100.0 * static_cast<double>(counts[1]) / total;
  report.none_pct = 100.0 * static_cast<double>(counts[2]) / total;
  return report;
}

AnalogyDataset read_analogies(std::istream& in, const std::string& source_name) {
  AnalogyDataset data;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == ':') {
      section = std::string(text::trim(t.substr(1)));
      continue;
    }
    if (t.front() == '#') continue;
    const auto fields = text::split_whitespace(t);
    if (fields.size() != 4) throw ParseError(source_name, line_no, "expected four tokens");
    AnalogyQuestion q{text::to_lower(fields[0]), text::to_lower(fields[1]), text::to_lower(fields[2]),
                      text::to_lower(fields[3]), section};
    const std::array<const std::string*, 4> toks{&q.p, &q.q, &q.r, &q.expected};
    bool distinct = true;
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) distinct = distinct && *toks[i] != *toks[j];
    }
    if (!distinct) {
      ++data.dropped;
      continue;
    }
    data.questions.push_back(std::move(q));
  }
  return data;
}

AnalogyDataset read_analogies_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path, "analogy file");
  return read_analogies(in, path.string());
}

AnalogySolver::AnalogySolver(const EmbeddingSet& set, double eps)
    : set_(&set), unit_(unit_normalize(set).vectors()), eps_(eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("3CosMul epsilon must be positive");
}

const std::string& AnalogySolver::solve(std::string_view p, std::string_view q, std::string_view r) const {
  const auto& vocab = set_->vocab();
  const std::size_t ip = vocab.index_of(p);
  const std::size_t iq = vocab.index_of(q);
  const std::size_t ir = vocab.index_of(r);

  const Vector cos_p = unit_ * unit_.row(static_cast<Eigen::Index>(ip)).transpose();
  const Vector cos_q = unit_ * unit_.row(static_cast<Eigen::Index>(iq)).transpose();
  const Vector cos_r = unit_ * unit_.row(static_cast<Eigen::Index>(ir)).transpose();

  std::size_t best = vocab.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i == ip || i == iq || i == ir) continue;
    const auto e = static_cast<Eigen::Index>(i);
    const double score = ((cos_r[e] + 1.0) / 2.0) * ((cos_q[e] + 1.0) / 2.0) / ((cos_p[e] + 1.0) / 2.0 + eps_);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  if (best == vocab.size()) throw std::invalid_argument("vocabulary has no candidate outside the query words");
  return vocab.word(best);
}

const std::string& solve_analogy_3cosmul(const EmbeddingSet& set, std::string_view p, std::string_view q,
                                         std::string_view r, double eps) {
  return AnalogySolver(set, eps).solve(p, q, r);
}

AnalogyReport analogy_accuracy(const EmbeddingSet& set, std::span<const AnalogyQuestion> questions, double eps,
                               std::size_t workers) {
  const AnalogySolver solver(set, eps);
  const auto& vocab = set.vocab();

  // 1 = correct, 0 = wrong, -1 = out of vocabulary
  std::vector<int> outcome(questions.size(), -1);
  parallel_for(questions.size(), workers, [&](std::size_t i) {
    const auto& q = questions[i];
    if (!vocab.contains(q.p) || !vocab.contains(q.q) || !vocab.contains(q.r) || !vocab.contains(q.expected)) return;
    outcome[i] = text::to_lower(solver.solve(q.p, q.q, q.r)) == text::to_lower(q.expected) ? 1 : 0;
  });

  AnalogyReport report;
  report.overall.section = "all";
  std::unordered_map<std::string, std::size_t> section_pos;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const auto [it, inserted] = section_pos.emplace(questions[i].section, report.sections.size());
    if (inserted) report.sections.push_back({questions[i].section, 0, 0, 0});
    for (AnalogyScore* s : {&report.overall, &report.sections[it->second]}) {
      if (outcome[i] < 0) {
        ++s->skipped;
      } else {
        ++s->answered;
        s->correct += static_cast<std::size_t>(outcome[i]);
      }
    }
  }
  if (report.overall.answered == 0) throw std::invalid_argument("no analogy question is answerable");
  return report;
}

std::vector<SimilarityPair> read_similarity_pairs(std::istream& in, const std::string& source_name) {
  std::vector<SimilarityPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_whitespace(t);
    double score = 0.0;
    if (fields.size() != 3 || !text::parse_double(fields[2], score) || !std::isfinite(score)) {
      throw ParseError(source_name, line_no, "expected 'word word score'");
    }
    out.push_back({text::to_lower(fields[0]), text::to_lower(fields[1]), score});
  }
  return out;
}

std::vector<SimilarityPair> read_similarity_pairs_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path, "similarity file");
  return read_similarity_pairs(in, path.string());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: inputs differ in length");
  if (x.size() < 2) throw std::invalid_argument("spearman: at least two observations are required");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;  // mean of average ranks is always (n+1)/2
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("spearman: constant input has no rank correlation");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

SimilarityReport similarity_spearman(const EmbeddingSet& set, std::span<const SimilarityPair> pairs) {
  std::vector<double> model;
  std::vector<double> human;
  SimilarityReport report;
  for (const auto& p : pairs) {
    const auto ia = set.vocab().find(p.a);
    const auto ib = set.vocab().find(p.b);
    if (!ia || !ib) {
      ++report.skipped;
      continue;
    }
    const Vector a = set.row(*ia).transpose();
    const Vector b = set.row(*ib).transpose();
    model.push_back(safe_cosine(a, b));
    human.push_back(p.human_score);
  }
  report.used = model.size();
  if (report.used < 2) throw std::invalid_argument("fewer than two in-vocabulary similarity pairs");
  report.rho = spearman(model, human);
  return report;
}

}  // namespace proxdebias::eval
