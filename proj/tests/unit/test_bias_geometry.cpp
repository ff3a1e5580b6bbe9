#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "proxdebias/bias_geometry.hpp"
#include "proxdebias/errors.hpp"
#include "synthetic.hpp"

using namespace proxdebias;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

EmbeddingSet make_set(const std::vector<std::pair<std::string, Vector>>& rows) {
  std::vector<std::string> tokens;
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().second.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    tokens.push_back(rows[i].first);
    m.row(static_cast<Eigen::Index>(i)) = rows[i].second.transpose();
  }
  return EmbeddingSet(Vocabulary(tokens), std::move(m));
}

}  // namespace

TEST(GenderDirection, IdenticalDifferencesGiveThatDirection) {
  const Vector d = vec({0.3, -0.4, 1.2});
  const EmbeddingSet set = make_set({{"woman", vec({1, 1, 1}) + d},
                                     {"man", vec({1, 1, 1})},
                                     {"she", vec({-2, 0.5, 0}) + d},
                                     {"he", vec({-2, 0.5, 0})},
                                     {"girl", vec({0, 0, 3}) + d},
                                     {"boy", vec({0, 0, 3})}});
  const auto g = compute_gender_direction(set, std::vector<GenderPair>{{"woman", "man"}, {"she", "he"}, {"girl", "boy"}});
  EXPECT_LE((g.vector() - d / d.norm()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(g.vector().norm(), 1.0, 1e-9);
}

TEST(GenderDirection, SignFollowsWomanMinusMan) {
  const Vector d = vec({0.0, -1.0});
  const EmbeddingSet set = make_set({{"woman", d}, {"man", vec({0, 0})}, {"she", 2 * d}, {"he", vec({0, 0})}});
  const auto g = compute_gender_direction(set, std::vector<GenderPair>{{"woman", "man"}, {"she", "he"}});
  EXPECT_GE(g.vector().dot(set.vector("woman") - set.vector("man")), 0.0);
  EXPECT_NEAR(g.vector()[1], -1.0, 1e-12);
}

TEST(GenderDirection, SignFallbackWithoutWomanMan) {
  const EmbeddingSet set = make_set({{"she", vec({0, 3})}, {"he", vec({0, 1})}, {"her", vec({1, 2})}, {"his", vec({1, 1})}});
  const auto g = compute_gender_direction(set, std::vector<GenderPair>{{"she", "he"}, {"her", "his"}});
  EXPECT_GT(g.vector()[1], 0.0);
}

TEST(GenderDirection, MatchesClosedFormTwoByTwoEigenvector) {
  // differences (1,0), (0.9,0.1), (1.1,-0.1)
  const EmbeddingSet set = make_set({{"woman", vec({1, 0})},
                                     {"man", vec({0, 0})},
                                     {"she", vec({1.9, 1.1})},
                                     {"he", vec({1, 1})},
                                     {"girl", vec({1.1, 2.9})},
                                     {"boy", vec({0, 3})}});
  const std::vector<GenderPair> pairs{{"woman", "man"}, {"she", "he"}, {"girl", "boy"}};
  const auto g = compute_gender_direction(set, pairs);

  // Pair-centred samples ±d/2 have scatter matrix (1/2) Σ d dᵀ.
  double a = 0, b = 0, c = 0;
  for (const auto& p : pairs) {
    const Vector d = set.vector(p.female) - set.vector(p.male);
    a += 0.5 * d[0] * d[0];
    b += 0.5 * d[0] * d[1];
    c += 0.5 * d[1] * d[1];
  }
  const double lambda = (a + c) / 2 + std::sqrt((a - c) * (a - c) / 4 + b * b);
  Vector expected = vec({b, lambda - a});
  expected.normalize();
  if (expected[0] < 0) expected = -expected;  // woman - man = (1, 0)
  EXPECT_LE((g.vector() - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GenderDirection, Errors) {
  const EmbeddingSet set = make_set({{"woman", vec({1, 0})}, {"man", vec({0, 0})}, {"she", vec({1, 1})}, {"he", vec({1, 1})}});
  EXPECT_THROW(compute_gender_direction(set, std::vector<GenderPair>{{"woman", "man"}, {"queen", "king"}}),
               MissingTokenError);
  EXPECT_THROW(compute_gender_direction(set, std::vector<GenderPair>{{"woman", "man"}}), std::invalid_argument);
  const EmbeddingSet flat = make_set({{"a", vec({1, 0})}, {"b", vec({1, 0})}, {"c", vec({2, 2})}, {"d", vec({2, 2})}});
  EXPECT_THROW(compute_gender_direction(flat, std::vector<GenderPair>{{"a", "b"}, {"c", "d"}}), std::invalid_argument);
}

TEST(GenderDirection, DeterministicRecompute) {
  const auto s = fixtures::make_biased_embedding({.words = 60, .dim = 12});
  const auto g1 = compute_gender_direction(s.set, default_gender_pairs());
  const auto g2 = compute_gender_direction(s.set, default_gender_pairs());
  EXPECT_EQ(g1.vector(), g2.vector());
  EXPECT_GT(std::abs(g1.vector().dot(s.axis)), 0.99);
}

TEST(GenderDirection, ReadsPairFile) {
  std::istringstream in("# pairs\nShe He\n\nwoman\tman\n");
  const auto pairs = read_gender_pairs(in);
  EXPECT_EQ(pairs, (std::vector<GenderPair>{{"she", "he"}, {"woman", "man"}}));
  std::istringstream bad("she he her\n");
  EXPECT_THROW(read_gender_pairs(bad), ParseError);
}

TEST(DirectBias, OrthogonalAndIdentity) {
  const GenderDirection g(vec({0, 2, 0}));
  EXPECT_EQ(direct_bias(vec({1, 0, 5}), g), 0.0);
  for (double c : {0.5, 1.0, 2.0, 3.0}) EXPECT_NEAR(direct_bias(vec({0, 7, 0}), g, {c}), 1.0, 1e-15);
}

TEST(DirectBias, MatchesFormulaAndIsScaleInvariant) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Vector w = fixtures::random_vector(5, rng);
    const Vector gv = fixtures::random_vector(5, rng);
    const GenderDirection g(gv);
    const double expected = std::pow(std::abs(oracle::cosine(oracle::to_vec(w), oracle::to_vec(gv))), 2.0);
    EXPECT_NEAR(direct_bias(w, g, {2.0}), expected, 1e-12);
    EXPECT_NEAR(direct_bias(3.7 * w, g, {2.0}), direct_bias(w, g, {2.0}), 1e-15);
  }
}

TEST(DirectBias, Errors) {
  const GenderDirection g(vec({1, 0}));
  EXPECT_THROW(direct_bias(vec({0, 0}), g), std::invalid_argument);
  EXPECT_THROW(direct_bias(vec({1, 1}), g, {0.0}), std::invalid_argument);
  EXPECT_THROW(direct_bias(vec({1, 1, 1}), g), std::invalid_argument);
}

TEST(IndirectBias, NoGenderComponentIsZero) {
  const GenderDirection g(vec({0, 0, 1}));
  EXPECT_NEAR(indirect_bias(vec({1, 2, 0}), vec({3, -1, 0}), g), 0.0, 1e-15);
}

TEST(IndirectBias, SelfPairIsZero) {
  std::mt19937_64 rng(4);
  const GenderDirection g(fixtures::random_vector(6, rng));
  for (int i = 0; i < 20; ++i) {
    const Vector w = fixtures::random_vector(6, rng);
    EXPECT_NEAR(indirect_bias(w, w, g), 0.0, 1e-14);
  }
}

TEST(IndirectBias, HandWorkedTriples) {
  // unit w·v = 1/2, perpendicular parts orthogonal: beta = 1
  EXPECT_NEAR(indirect_bias(vec({1, 1, 0}), vec({1, 0, 1}), GenderDirection(vec({1, 0, 0}))), 1.0, 1e-12);
  // w·v = 8/9, cos of perpendicular parts = 4/5: beta = 1/10
  EXPECT_NEAR(indirect_bias(vec({2, 1, 2}), vec({1, 2, 2}), GenderDirection(vec({0, 0, 1}))), 0.1, 1e-12);
}

TEST(IndirectBias, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Vector w = fixtures::random_vector(8, rng), v = fixtures::random_vector(8, rng);
    const Vector gv = fixtures::random_unit(8, rng);
    const GenderDirection g(gv);
    const double b = indirect_bias(w, v, g);
    const double expected = oracle::beta(oracle::to_vec(w), oracle::to_vec(v), oracle::to_vec(gv));
    EXPECT_NEAR(b, expected, 1e-12 * std::max(1.0, std::abs(expected)));
    EXPECT_NEAR(b, indirect_bias(v, w, g), 1e-12 * std::max(1.0, std::abs(b)));
    EXPECT_NEAR(indirect_bias(2.5 * w, 0.1 * v, g), b, 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST(IndirectBias, UndefinedCases) {
  const GenderDirection g(vec({1, 0, 0}));
  EXPECT_THROW(indirect_bias(vec({0, 1, 0}), vec({0, 0, 1}), g), UndefinedBiasError);
  EXPECT_THROW(indirect_bias(vec({2, 0, 0}), vec({1, 1, 0}), g), UndefinedBiasError);
  EXPECT_FALSE(try_indirect_bias(vec({0, 1, 0}), vec({0, 0, 1}), g).has_value());
  EXPECT_FALSE(try_indirect_bias(vec({1, 1, 0}), vec({-3, 0, 0}), g).has_value());
  EXPECT_TRUE(try_indirect_bias(vec({1, 1, 0}), vec({1, 0, 1}), g).has_value());
  EXPECT_THROW(indirect_bias(vec({0, 0, 0}), vec({1, 0, 1}), g), std::invalid_argument);
}
