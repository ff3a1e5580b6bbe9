#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "proxdebias/errors.hpp"
#include "proxdebias/gipe.hpp"
#include "synthetic.hpp"

using namespace proxdebias;

namespace {

constexpr double kEps = kDefaultGipeEpsilon;

BiasNetwork five_node() {
  return BiasNetwork({"a", "b", "c"},
                     {{"a", "b", 0.10}, {"a", "d", 0.02}, {"b", "a", 0.06}, {"b", "e", 0.08}, {"c", "a", 0.04},
                      {"c", "b", 0.20}},
                     2);
}

}  // namespace

TEST(Network, CountsAndNodeOrder) {
  const auto net = five_node();
  EXPECT_EQ(net.node_count(), 5u);
  EXPECT_EQ(net.edge_count(), 6u);
  EXPECT_EQ(net.nodes(), (std::vector<std::string>{"a", "b", "d", "e", "c"}));
  EXPECT_TRUE(net.is_query(*net.node_id("c")));
  EXPECT_FALSE(net.is_query(*net.node_id("d")));
  EXPECT_EQ(net.in_edge_ids(*net.node_id("a")).size(), 2u);
  EXPECT_TRUE(net.out_edges(*net.node_id("d")).empty());
}

TEST(Network, Validation) {
  EXPECT_THROW(BiasNetwork({"a", "a"}, std::vector<BiasEdgeSpec>{}, 0), std::invalid_argument);
  EXPECT_THROW(BiasNetwork({"a"}, {{"a", "a", 0.1}}, 1), std::invalid_argument);
  EXPECT_THROW(BiasNetwork({"a"}, {{"a", "b", 0.1}, {"a", "b", 0.2}}, 2), std::invalid_argument);
  EXPECT_THROW(BiasNetwork({"a"}, {{"a", "b", 0.1}}, 2), std::invalid_argument);
  EXPECT_THROW(BiasNetwork({"a"}, {{"x", "b", 0.1}}, 1), std::invalid_argument);
  EXPECT_THROW(BiasNetwork({"a"}, {{"a", "b", std::nan("")}}, 1), std::invalid_argument);
}

TEST(ProximityBias, HandCounts) {
  const BiasNetwork net({"w"}, {{"w", "p", 0.01}, {"w", "q", 0.06}, {"w", "r", 0.04}, {"w", "s", 0.08}}, 4);
  EXPECT_DOUBLE_EQ(proximity_bias("w", net, 0.05), 0.5);
  EXPECT_DOUBLE_EQ(proximity_bias("w", net, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(proximity_bias("w", net, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(proximity_bias("w", net, 0.06), 0.25);  // strict
  EXPECT_THROW(proximity_bias("p", net, 0.05), std::invalid_argument);
}

TEST(NodeWeight, IsolatedAndSubstitution) {
  const BiasNetwork net({"a", "b", "c", "d"},
                        {{"a", "t", 0.1}, {"b", "t", 0.01}, {"c", "t", 0.2}, {"d", "t", 0.03}}, 1);
  EXPECT_DOUBLE_EQ(node_weight("a", net, 0.05), 1.0);
  EXPECT_DOUBLE_EQ(node_weight("t", net, 0.05, 1e-6), 1.0 + 2.0 / (4.0 + 1e-6));
  EXPECT_THROW(node_weight("zz", net, 0.05), std::invalid_argument);
  EXPECT_THROW(node_weight("t", net, 0.05, 0.0), std::invalid_argument);
}

TEST(Gipe, FiveNodeHandComputation) {
  const auto r = gipe(five_node(), 0.05);
  const double ga = 1 + 1 / (2 + kEps), gb = 1 + 2 / (2 + kEps), gc = 1;
  const double expected = (ga * 0.5 + gb * 1.0 + gc * 0.5) / (ga + gb + gc);
  EXPECT_NEAR(r.gipe, expected, 1e-12);
  ASSERT_EQ(r.per_word.size(), 3u);
  EXPECT_EQ(r.per_word[1].token, "b");
  EXPECT_DOUBLE_EQ(r.per_word[1].eta, 1.0);
  EXPECT_NEAR(r.per_word[1].gamma, gb, 1e-15);
  EXPECT_EQ(r.per_word[0].incoming_biased, 1u);
  EXPECT_EQ(r.per_word[0].incoming_total, 2u);
  EXPECT_EQ(r.per_word[2].incoming_total, 0u);
}

TEST(Gipe, ConstantEta) {
  const BiasNetwork zero({"a", "b"}, {{"a", "b", 0.0}, {"b", "c", 0.01}}, 1);
  EXPECT_EQ(gipe(zero, 0.05).gipe, 0.0);
  const BiasNetwork half({"a", "b", "c"},
                         {{"a", "b", 0.9}, {"a", "x", 0.0}, {"b", "a", 0.9}, {"b", "x", 0.0}, {"c", "a", 0.9},
                          {"c", "y", 0.0}},
                         2);
  EXPECT_NEAR(gipe(half, 0.05).gipe, 0.5, 1e-15);
}

// Each edge kind in a two-node network.
TEST(Gipe, EdgeBelowThresholdCountsNowhere) {
  const auto r = gipe(BiasNetwork({"u", "v"}, {{"u", "v", 0.01}, {"v", "u", 0.02}}, 1), 0.05);
  for (const auto& w : r.per_word) {
    EXPECT_EQ(w.eta, 0.0);
    EXPECT_EQ(w.gamma, 1.0);
  }
}

TEST(Gipe, OutEdgeRaisesSourceEtaOnly) {
  const auto r = gipe(BiasNetwork({"u"}, {{"u", "v", 0.3}}, 1), 0.05);
  EXPECT_EQ(r.per_word[0].eta, 1.0);
  EXPECT_EQ(r.per_word[0].gamma, 1.0);
  EXPECT_EQ(r.gipe, 1.0);
}

TEST(Gipe, InEdgeRaisesTargetGammaOnly) {
  const auto r = gipe(BiasNetwork({"u", "v"}, {{"u", "x", 0.0}, {"v", "u", 0.3}}, 1), 0.05);
  EXPECT_EQ(r.per_word[0].eta, 0.0);
  EXPECT_NEAR(r.per_word[0].gamma, 1 + 1 / (1 + kEps), 1e-15);
  EXPECT_EQ(r.per_word[1].eta, 1.0);
  EXPECT_EQ(r.per_word[1].gamma, 1.0);
}

TEST(Gipe, DualEdgesRaiseBoth) {
  const auto r = gipe(BiasNetwork({"u", "v"}, {{"u", "v", 0.3}, {"v", "u", 0.3}}, 1), 0.05);
  for (const auto& w : r.per_word) {
    EXPECT_EQ(w.eta, 1.0);
    EXPECT_NEAR(w.gamma, 1 + 1 / (1 + kEps), 1e-15);
  }
  EXPECT_NEAR(r.gipe, 1.0, 1e-15);
}

TEST(Gipe, EmptyQuerySetIsError) { EXPECT_THROW(gipe(BiasNetwork({}, std::vector<BiasEdgeSpec>{}, 0), 0.05), std::invalid_argument); }

TEST(BuildBbn, SingleQueryCounts) {
  std::mt19937_64 rng(20);
  const auto set = fixtures::random_embedding(5, 4, rng);
  const GenderDirection g(fixtures::random_unit(4, rng));
  const std::vector<std::string> W{set.vocab().word(2)};
  const auto net = build_bbn(set, set, W, 3, g);
  EXPECT_EQ(net.query_nodes().size(), 1u);
  EXPECT_EQ(net.edge_count(), 3u);
  EXPECT_EQ(net.node_count(), 4u);
}

TEST(BuildBbn, MatchesTwoLoopOracle) {
  std::mt19937_64 rng(21);
  const auto s = fixtures::make_biased_embedding({.words = 50, .dim = 8, .topics = 3});
  const auto g = GenderDirection(s.axis);
  const auto W = s.classification.debias();
  for (std::size_t n : {3u, 10u, 49u}) {
    const auto net = build_bbn(s.set, s.set, W, n, g);
    const auto naive = oracle::gipe(s.set, s.set, W, n, oracle::to_vec(s.axis), 0.05, kEps);
    ASSERT_EQ(net.edge_count(), naive.edges.size());
    for (std::size_t e = 0; e < naive.edges.size(); ++e) {
      EXPECT_EQ(net.nodes()[net.edges()[e].source], naive.edges[e].source);
      EXPECT_EQ(net.nodes()[net.edges()[e].target], naive.edges[e].target);
      EXPECT_NEAR(net.edges()[e].beta, naive.edges[e].beta, 1e-12 * std::max(1.0, std::abs(naive.edges[e].beta)));
    }
    EXPECT_NEAR(gipe(net, 0.05).gipe, naive.gipe, 1e-12);
  }
}

TEST(BuildBbn, ReferenceSetSuppliesBeta) {
  std::mt19937_64 rng(22);
  const auto eval_set = fixtures::random_embedding(40, 6, rng);
  Matrix m = eval_set.vectors();
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) += fixtures::random_vector(6, rng).transpose();
  const EmbeddingSet ref(eval_set.vocab(), m);
  const Vector g = fixtures::random_unit(6, rng);
  const std::vector<std::string> W(eval_set.vocab().words().begin(), eval_set.vocab().words().begin() + 15);
  const auto net = build_bbn(eval_set, ref, W, 5, GenderDirection(g), 2);
  const auto naive = oracle::gipe(eval_set, ref, W, 5, oracle::to_vec(g), 0.03, kEps);
  const auto r = gipe(net, 0.03);
  for (std::size_t i = 0; i < W.size(); ++i) {
    EXPECT_NEAR(r.per_word[i].eta, naive.words[i].eta, 1e-12);
    EXPECT_NEAR(r.per_word[i].gamma, naive.words[i].gamma, 1e-12);
  }
  EXPECT_NEAR(r.gipe, naive.gipe, 1e-12);
}

TEST(BuildBbn, UndefinedBetaIsZeroWeight) {
  Matrix m(3, 3);
  m << 0, 1, 0,  // orthogonal to "b"
      0, 0, 1,   //
      1, 0, 0;   // along g
  const EmbeddingSet set(Vocabulary({"a", "b", "c"}), m);
  const std::vector<std::string> W{"a", "b", "c"};
  const auto net = build_bbn(set, set, W, 2, GenderDirection(Vector::Unit(3, 0)));
  for (const auto& e : net.edges()) EXPECT_EQ(e.beta, 0.0);
}

TEST(BuildBbn, MissingReferenceTokenThrows) {
  std::mt19937_64 rng(24);
  const auto set = fixtures::random_embedding(6, 3, rng);
  const EmbeddingSet ref(Vocabulary({"zz"}), Matrix::Ones(1, 3));
  const std::vector<std::string> W{set.vocab().word(0)};
  EXPECT_THROW(build_bbn(set, ref, W, 2, GenderDirection(Vector::Unit(3, 0))), MissingTokenError);
}

TEST(GipeProperties, BoundsAndMonotoneInThreshold) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t V = 20 + 10 * static_cast<std::size_t>(trial);
    const auto set = fixtures::random_embedding(V, 5, rng);
    const std::vector<std::string> W(set.vocab().words().begin(), set.vocab().words().begin() + V / 2);
    const auto net = build_bbn(set, set, W, 7, GenderDirection(fixtures::random_unit(5, rng)));
    double prev = 2.0;
    for (double theta : {-1.0, 0.0, 0.03, 0.05, 0.07, 0.5, 10.0}) {
      const auto r = gipe(net, theta);
      EXPECT_GE(r.gipe, 0.0);
      EXPECT_LE(r.gipe, 1.0);
      EXPECT_LE(r.gipe, prev);
      prev = r.gipe;
      double num = 0, den = 0;
      for (const auto& w : r.per_word) {
        EXPECT_GE(w.eta, 0.0);
        EXPECT_LE(w.eta, 1.0);
        EXPECT_GE(w.gamma, 1.0);
        EXPECT_LT(w.gamma, 2.0);
        num += w.gamma * w.eta;
        den += w.gamma;
      }
      EXPECT_NEAR(r.gipe, num / den, 1e-12);
    }
  }
}

TEST(Report, WriterFormat) {
  std::ostringstream out;
  write_gipe_report(gipe(BiasNetwork({"u"}, {{"u", "v", 0.3}}, 1), 0.05), out);
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')),
            "token\teta\tgamma\tbiased_neighbours\tneighbours\tincoming_biased\tincoming_total");
  EXPECT_NE(s.find("u\t1\t1\t1\t1\t0\t0\n"), std::string::npos);
  EXPECT_NE(s.find("# gipe\ttheta_s=0.05\tepsilon=1e-06\twords=1\tvalue=1\n"), std::string::npos);
}
