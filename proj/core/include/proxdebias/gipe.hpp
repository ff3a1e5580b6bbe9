#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proxdebias/bias_geometry.hpp"
#include "proxdebias/embedding_io.hpp"
#include "proxdebias/neighbourhood.hpp"

namespace proxdebias {

inline constexpr double kDefaultGipeEpsilon = 1e-6;

/// Edge given by token names, used to assemble a network by hand.
struct BiasEdgeSpec {
  std::string source;
  std::string target;
  double beta = 0.0;
};

struct BiasEdge {
  std::uint32_t source = 0;  ///< node id
  std::uint32_t target = 0;  ///< node id
  double beta = 0.0;
};

/// Directed word graph whose edge weights are indirect-bias values. Only
/// query words have out-edges; each has exactly `neighbours_per_node` of them.
/// Node ids follow first insertion: each query word, then its targets.
class BiasNetwork {
 public:
  /// Throws std::invalid_argument on duplicate query words or edges, self
  /// loops, non-finite weights, edges whose source is not a query word, or
  /// a query word whose out-degree differs from `neighbours_per_node`.
  BiasNetwork(std::vector<std::string> query_set, std::vector<BiasEdgeSpec> edges, std::size_t neighbours_per_node);

  /// Out-edge lists given per query word (same position as `query_set`),
  /// each entry a (target, beta) pair in neighbour-rank order.
  using OutList = std::vector<std::pair<std::string_view, double>>;
  BiasNetwork(std::vector<std::string> query_set, const std::vector<OutList>& out_lists,
              std::size_t neighbours_per_node);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t neighbours_per_node() const noexcept { return n_; }

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<std::uint32_t>& query_nodes() const noexcept { return query_nodes_; }
  const std::vector<BiasEdge>& edges() const noexcept { return edges_; }

  std::optional<std::uint32_t> node_id(std::string_view token) const;
  bool is_query(std::uint32_t node) const { return query_pos_.at(node) >= 0; }

  /// Out-edges of a query node, in neighbour-rank order; empty otherwise.
  std::span<const BiasEdge> out_edges(std::uint32_t node) const;
  /// Ids (into edges()) of every edge pointing at `node`.
  std::span<const std::uint32_t> in_edge_ids(std::uint32_t node) const;

 private:
  void assemble(const std::vector<std::string>& query_set, const std::vector<OutList>& out_lists);
  std::uint32_t intern(std::string_view token);

  std::size_t n_;
  std::vector<std::string> nodes_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::uint32_t> query_nodes_;
  std::vector<std::int64_t> query_pos_;  // node id -> position in query_nodes_, or -1
  std::vector<BiasEdge> edges_;          // grouped by source in query order
  std::vector<std::size_t> out_offsets_;  // per query position, size |W|+1
  std::vector<std::size_t> in_offsets_;   // per node, size |nodes|+1
  std::vector<std::uint32_t> in_ids_;
};

/// Bias network over the query words `W`: neighbours come from `eval_set`,
/// edge weights from `reference_set` (the non-debiased vectors). A pair
/// whose indirect bias is undefined gets weight 0. Throws MissingTokenError
/// when a query or neighbour token is absent from either set.
BiasNetwork build_bbn(const EmbeddingSet& eval_set, const EmbeddingSet& reference_set,
                      std::span<const std::string> W, std::size_t n, const GenderDirection& g,
                      std::size_t workers = 1);

/// Same, reusing neighbour lists already computed on the evaluation set.
BiasNetwork build_bbn(const NeighbourTable& eval_neighbours, const EmbeddingSet& reference_set,
                      std::span<const std::string> W, const GenderDirection& g, std::size_t workers = 1);

/// Fraction of the word's out-edges with beta > theta_s. Throws
/// std::invalid_argument if the word is not a query node.
double proximity_bias(std::string_view word, const BiasNetwork& net, double theta_s);

/// 1 + |in-edges with beta > theta_s| / (epsilon + |in-edges|). Throws
/// std::invalid_argument for unknown nodes or epsilon <= 0.
double node_weight(std::string_view word, const BiasNetwork& net, double theta_s,
                   double epsilon = kDefaultGipeEpsilon);

struct WordProximity {
  std::string token;
  double eta = 0.0;
  double gamma = 1.0;
  std::size_t biased_neighbours = 0;  ///< out-edges above threshold
  std::size_t neighbours = 0;         ///< out-degree
  std::size_t incoming_biased = 0;
  std::size_t incoming_total = 0;
};

struct GipeReport {
  double theta_s = 0.0;
  double epsilon = kDefaultGipeEpsilon;
  std::vector<WordProximity> per_word;  ///< query words in network order
  double gipe = 0.0;
};

/// gamma-weighted mean of eta over the query words.
GipeReport gipe(const BiasNetwork& net, double theta_s, double epsilon = kDefaultGipeEpsilon);

/// Header line, one tab-separated row per word, then a `# gipe ...` summary line.
void write_gipe_report(const GipeReport& report, std::ostream& out);

}  // namespace proxdebias
