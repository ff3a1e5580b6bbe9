#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "proxdebias/errors.hpp"
#include "proxdebias/evaluation.hpp"
#include "synthetic.hpp"

using namespace proxdebias;
using namespace proxdebias::eval;

namespace {

const std::string kData = PROXDEBIAS_TEST_DATA;

EmbeddingSet make_set(const std::vector<std::string>& words, const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return EmbeddingSet(Vocabulary(words), m);
}

SemBiasInstance instance(std::string d, std::string s, std::string n1, std::string n2) {
  auto split = [](const std::string& p, PairLabel l) {
    const auto c = p.find(':');
    return LabeledPair{p.substr(0, c), p.substr(c + 1), l};
  };
  return {{split(d, PairLabel::definition), split(s, PairLabel::stereotype), split(n1, PairLabel::none),
           split(n2, PairLabel::none)}};
}

}  // namespace

TEST(SemBias, ToyFixture) {
  const auto set = load_embedding_file(kData + "/sembias_toy.vec").set;
  const auto inst = read_sembias_file(kData + "/sembias_toy.txt");
  ASSERT_EQ(inst.size(), 3u);
  EXPECT_EQ(inst[2].pairs[0].a, "xyzzy");
  const auto r = sembias_eval(set, inst);
  EXPECT_EQ(r.evaluated, 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(r.definition_pct, 100.0);
  EXPECT_DOUBLE_EQ(r.stereotype_pct, 0.0);
  EXPECT_DOUBLE_EQ(r.none_pct, 0.0);
}

TEST(SemBias, StereotypeWinsAndTieGoesToFirstPair) {
  const auto set = make_set({"he", "she", "a", "b", "c", "d", "e", "f", "x", "y"},
                            {{1, 0}, {-1, 0}, {0, 1}, {0, 2}, {2, 0}, {0, 0}, {0, 3}, {0, 1}, {1, 1}, {1, 1}});
  // definition pair is orthogonal, stereotype pair aligned
  std::vector<SemBiasInstance> one{instance("a:b", "c:d", "e:f", "x:y")};
  auto r = sembias_eval(set, one);
  EXPECT_DOUBLE_EQ(r.stereotype_pct, 100.0);

  // identical pairs tie: the first listed (definition) wins
  one = {instance("c:d", "c:d", "e:f", "x:y")};
  r = sembias_eval(set, one);
  EXPECT_DOUBLE_EQ(r.definition_pct, 100.0);
  // a zero difference scores 0, so it loses to any positive cosine
  one = {instance("x:y", "a:b", "c:d", "e:f")};
  r = sembias_eval(set, one);
  EXPECT_DOUBLE_EQ(r.none_pct, 100.0);
}

TEST(SemBias, PercentagesSumToHundredAndScaleInvariant) {
  std::mt19937_64 rng(40);
  const auto set = fixtures::random_embedding(30, 6, rng);
  std::vector<SemBiasInstance> inst;
  std::vector<std::string> w(set.vocab().words());
  w[0] = "he";
  w[1] = "she";
  const EmbeddingSet named(Vocabulary(w), set.vectors());
  std::uniform_int_distribution<std::size_t> pick(2, 29);
  for (int i = 0; i < 40; ++i) {
    auto p = [&] { return w[pick(rng)] + ":" + w[pick(rng)]; };
    inst.push_back(instance(p(), p(), p(), p()));
  }
  const auto r = sembias_eval(named, inst);
  EXPECT_NEAR(r.definition_pct + r.stereotype_pct + r.none_pct, 100.0, 1e-9);
  const EmbeddingSet scaled(named.vocab(), named.vectors() * 3.5);
  const auto s = sembias_eval(scaled, inst);
  EXPECT_EQ(s.definition_pct, r.definition_pct);
  EXPECT_EQ(s.stereotype_pct, r.stereotype_pct);
}

TEST(SemBias, Errors) {
  const auto set = make_set({"he", "a", "b"}, {{1, 0}, {0, 1}, {1, 1}});
  std::vector<SemBiasInstance> inst{instance("a:b", "a:b", "a:b", "a:b")};
  EXPECT_THROW(sembias_eval(set, inst), MissingTokenError);
  const auto set2 = make_set({"he", "she"}, {{1, 0}, {0, 1}});
  EXPECT_THROW(sembias_eval(set2, inst), std::invalid_argument);
  std::istringstream bad("a:b\tc:d\te:f\n");
  EXPECT_THROW(read_sembias(bad), ParseError);
  std::istringstream nocolon("ab\tc:d\te:f\tg:h\n");
  EXPECT_THROW(read_sembias(nocolon), ParseError);
}

TEST(Analogy, ParallelogramAndExclusion) {
  const auto set = make_set({"man", "woman", "king", "queen", "apple"},
                            {{1, 0, 0}, {0, 1, 0}, {1, 0, 1}, {0, 1, 1}, {-1, -1, 0.2}});
  EXPECT_EQ(solve_analogy_3cosmul(set, "man", "woman", "king"), "queen");
  // p, q and r are never answers, even when they score best
  const auto twin = make_set({"a", "b", "c", "d"}, {{1, 0}, {1, 0.01}, {1, 0.02}, {-1, 0}});
  EXPECT_EQ(solve_analogy_3cosmul(twin, "a", "b", "c"), "d");
  EXPECT_THROW(solve_analogy_3cosmul(set, "man", "woman", "prince"), MissingTokenError);
}

TEST(Analogy, MatchesOracle) {
  std::mt19937_64 rng(41);
  const auto set = fixtures::random_embedding(60, 8, rng);
  const AnalogySolver solver(set);
  std::uniform_int_distribution<std::size_t> pick(0, 59);
  for (int t = 0; t < 200; ++t) {
    std::size_t p = pick(rng), q = pick(rng), r = pick(rng);
    if (p == q || q == r || p == r) continue;
    const auto& words = set.vocab().words();
    EXPECT_EQ(solver.solve(words[p], words[q], words[r]), words[oracle::cosmul(set, p, q, r, 0.001)]);
  }
}

TEST(Analogy, AccuracyCountsAndOovDenominator) {
  const auto set = make_set({"man", "woman", "king", "queen", "boy", "girl"},
                            {{1, 0, 0, 0}, {0, 1, 0, 0}, {1, 0, 1, 0}, {0, 1, 1, 0}, {1, 0, 0, 1}, {0, 1, 0, 1}});
  std::istringstream in(
      ": family\n"
      "man woman king queen\n"
      "man woman boy girl\n"
      "MAN WOMAN prince princess\n"
      ": other\n"
      "king queen boy girl\n"
      "a a b c\n");
  const auto data = read_analogies(in);
  EXPECT_EQ(data.questions.size(), 4u);
  EXPECT_EQ(data.dropped, 1u);
  const auto r = analogy_accuracy(set, data.questions);
  EXPECT_EQ(r.overall.answered, 3u);
  EXPECT_EQ(r.overall.skipped, 1u);
  EXPECT_EQ(r.overall.correct, 3u);
  EXPECT_DOUBLE_EQ(r.overall.accuracy(), 1.0);
  ASSERT_EQ(r.sections.size(), 2u);
  EXPECT_EQ(r.sections[0].section, "family");
  EXPECT_EQ(r.sections[0].answered, 2u);
  EXPECT_EQ(r.sections[1].section, "other");

  const auto again = analogy_accuracy(set, data.questions, kDefaultCosMulEpsilon, 3);
  EXPECT_EQ(again.overall.correct, r.overall.correct);

  std::vector<AnalogyQuestion> oov{{"x", "y", "z", "w", ""}};
  EXPECT_THROW(analogy_accuracy(set, oov), std::invalid_argument);
}

TEST(Analogy, MsrStyleWithoutHeaders) {
  std::istringstream in("good better bad worse\nbig bigger small smaller\n");
  const auto data = read_analogies(in);
  ASSERT_EQ(data.questions.size(), 2u);
  EXPECT_EQ(data.questions[1].expected, "smaller");
  std::istringstream bad("good better bad\n");
  EXPECT_THROW(read_analogies(bad), ParseError);
}

TEST(Spearman, MonotoneReversedAndTies) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 8, 16, 32};
  const std::vector<double> down{5, 4, 3, 2, 1};
  EXPECT_NEAR(spearman(x, up), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, down), -1.0, 1e-15);
  const std::vector<double> t{1, 2, 2, 3};
  EXPECT_EQ(average_ranks(t), (std::vector<double>{1, 2.5, 2.5, 4}));
  // ranks (1,2.5,2.5,4) vs (1,2,3,4): co-deviation 4.5, squared deviations 4.5 and 5
  const std::vector<double> y{1, 2, 3, 4};
  EXPECT_NEAR(spearman(t, y), 4.5 / std::sqrt(4.5 * 5.0), 1e-15);
  const std::vector<double> c{1, 1, 1};
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(spearman(c, three), std::invalid_argument);
  EXPECT_THROW(spearman(std::vector<double>{1}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Spearman, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(20), y(20), ex(20);
    for (int i = 0; i < 20; ++i) {
      x[i] = n(rng);
      y[i] = n(rng);
      ex[i] = std::exp(x[i]);
    }
    EXPECT_NEAR(spearman(x, y), spearman(ex, y), 1e-12);
    EXPECT_NEAR(spearman(x, y), spearman(y, x), 1e-12);
  }
}

TEST(Similarity, ReaderAndCorrelation) {
  const auto set = make_set({"a", "b", "c", "d"}, {{1, 0}, {1, 0.1}, {0, 1}, {-1, 0}});
  std::istringstream in(
      "# word1 word2 score\n"
      "A b 9.0\n"
      "a\tc 5\n"
      "a d 1\n"
      "a zzz 3\n");
  const auto pairs = read_similarity_pairs(in);
  ASSERT_EQ(pairs.size(), 4u);
  EXPECT_EQ(pairs[0].a, "a");
  const auto r = similarity_spearman(set, pairs);
  EXPECT_EQ(r.used, 3u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_NEAR(r.rho, 1.0, 1e-15);
  const EmbeddingSet scaled(set.vocab(), set.vectors() * 0.2);
  EXPECT_NEAR(similarity_spearman(scaled, pairs).rho, r.rho, 1e-15);
  std::istringstream bad("a b notanumber\n");
  EXPECT_THROW(read_similarity_pairs(bad), ParseError);
}
