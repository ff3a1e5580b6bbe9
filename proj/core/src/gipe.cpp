#include "proxdebias/gipe.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "proxdebias/errors.hpp"
#include "proxdebias/parallel.hpp"

namespace proxdebias {

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct WordCounts {
  std::size_t biased_out = 0;
  std::size_t out = 0;
  std::size_t biased_in = 0;
  std::size_t in = 0;
};

WordCounts count_edges(const BiasNetwork& net, std::uint32_t node, double theta_s) {
  WordCounts c;
  for (const BiasEdge& e : net.out_edges(node)) {
    ++c.out;
    if (e.beta > theta_s) ++c.biased_out;
  }
  for (const std::uint32_t id : net.in_edge_ids(node)) {
    ++c.in;
    if (net.edges()[id].beta > theta_s) ++c.biased_in;
  }
  return c;
}

double eta_of(const WordCounts& c) {
  return c.out == 0 ? 0.0 : static_cast<double>(c.biased_out) / static_cast<double>(c.out);
}

double gamma_of(const WordCounts& c, double epsilon) {
  return 1.0 + static_cast<double>(c.biased_in) / (epsilon + static_cast<double>(c.in));
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be a positive finite value");
}

}  // namespace

BiasNetwork::BiasNetwork(std::vector<std::string> query_set, std::vector<BiasEdgeSpec> edges,
                         std::size_t neighbours_per_node)
    : n_(neighbours_per_node) {
  std::unordered_map<std::string, std::size_t> query_index;
  for (std::size_t i = 0; i < query_set.size(); ++i) {
    if (!query_index.emplace(query_set[i], i).second) {
      throw std::invalid_argument("duplicate query word '" + query_set[i] + "'");
    }
  }
  // Group edges by their source's query position, keeping the given order.
  std::vector<OutList> grouped(query_set.size());
  for (const auto& e : edges) {
    const auto it = query_index.find(e.source);
    if (it == query_index.end()) throw std::invalid_argument("edge source '" + e.source + "' is not a query word");
    grouped[it->second].emplace_back(e.target, e.beta);
  }
  assemble(query_set, grouped);
}

BiasNetwork::BiasNetwork(std::vector<std::string> query_set, const std::vector<OutList>& out_lists,
                         std::size_t neighbours_per_node)
    : n_(neighbours_per_node) {
  if (out_lists.size() != query_set.size()) throw std::invalid_argument("one out-edge list per query word expected");
  assemble(query_set, out_lists);
}

void BiasNetwork::assemble(const std::vector<std::string>& query_set, const std::vector<OutList>& out_lists) {
  std::size_t total_edges = 0;
  for (const auto& list : out_lists) total_edges += list.size();
  if (query_set.size() + total_edges >= std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("bias network too large");
  }

  out_offsets_.reserve(query_set.size() + 1);
  out_offsets_.push_back(0);
  edges_.reserve(total_edges);
  std::unordered_set<std::uint32_t> targets;
  std::unordered_set<std::uint32_t> query_seen;
  for (std::size_t q = 0; q < query_set.size(); ++q) {
    const auto& list = out_lists[q];
    if (list.size() != n_) {
      throw std::invalid_argument("query word '" + query_set[q] + "' has " + std::to_string(list.size()) +
                                  " out-edges, expected " + std::to_string(n_));
    }
    const std::uint32_t src = intern(query_set[q]);
    if (!query_seen.insert(src).second) {
      throw std::invalid_argument("duplicate query word '" + query_set[q] + "'");
    }
    query_nodes_.push_back(src);
    targets.clear();
    for (const auto& [target, beta] : list) {
      if (target == query_set[q]) throw std::invalid_argument("self-loop on '" + query_set[q] + "'");
      if (!std::isfinite(beta)) throw std::invalid_argument("non-finite edge weight on '" + query_set[q] + "'");
      const std::uint32_t dst = intern(target);
      if (!targets.insert(dst).second) {
        throw std::invalid_argument("duplicate edge '" + query_set[q] + "' -> '" + std::string(target) + "'");
      }
      edges_.push_back({src, dst, beta});
    }
    out_offsets_.push_back(edges_.size());
  }

  query_pos_.assign(nodes_.size(), -1);
  for (std::size_t q = 0; q < query_nodes_.size(); ++q) query_pos_[query_nodes_[q]] = static_cast<std::int64_t>(q);

  in_offsets_.assign(nodes_.size() + 1, 0);
  for (const auto& e : edges_) ++in_offsets_[e.target + 1];
  for (std::size_t i = 0; i < nodes_.size(); ++i) in_offsets_[i + 1] += in_offsets_[i];
  in_ids_.resize(edges_.size());
  std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  for (std::size_t id = 0; id < edges_.size(); ++id) {
    in_ids_[cursor[edges_[id].target]++] = static_cast<std::uint32_t>(id);
  }
}

std::uint32_t BiasNetwork::intern(std::string_view token) {
  const auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back(token);
  ids_.emplace(nodes_.back(), id);
  return id;
}

std::optional<std::uint32_t> BiasNetwork::node_id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::span<const BiasEdge> BiasNetwork::out_edges(std::uint32_t node) const {
  const std::int64_t q = query_pos_.at(node);
  if (q < 0) return {};
  const auto begin = out_offsets_[static_cast<std::size_t>(q)];
  const auto end = out_offsets_[static_cast<std::size_t>(q) + 1];
  return {edges_.data() + begin, end - begin};
}

std::span<const std::uint32_t> BiasNetwork::in_edge_ids(std::uint32_t node) const {
  const auto begin = in_offsets_.at(node);
  const auto end = in_offsets_.at(node + 1);
  return {in_ids_.data() + begin, end - begin};
}

BiasNetwork build_bbn(const EmbeddingSet& eval_set, const EmbeddingSet& reference_set,
                      std::span<const std::string> W, std::size_t n, const GenderDirection& g,
                      std::size_t workers) {
  const NeighbourTable table = top_k_neighbours(eval_set, W, n, workers);
  return build_bbn(table, reference_set, W, g, workers);
}

BiasNetwork build_bbn(const NeighbourTable& eval_neighbours, const EmbeddingSet& reference_set,
                      std::span<const std::string> W, const GenderDirection& g, std::size_t workers) {
  std::vector<std::string> query;
  std::unordered_set<std::string> seen;
  for (const auto& w : W) {
    if (seen.insert(w).second) query.push_back(w);
  }

  std::size_t per_node = 0;
  for (std::size_t i = 0; i < query.size(); ++i) {
    const std::size_t len = eval_neighbours.at(query[i]).size();
    if (i == 0) per_node = len;
    if (len != per_node) throw std::invalid_argument("neighbour lists have unequal lengths");
  }

  std::vector<BiasNetwork::OutList> out_lists(query.size());
  parallel_for(query.size(), workers, [&](std::size_t i) {
    const Vector source = reference_set.vector(query[i]);
    auto& out = out_lists[i];
    for (const Neighbour& nb : eval_neighbours.at(query[i])) {
      const Vector target = reference_set.vector(nb.token);
      out.emplace_back(nb.token, try_indirect_bias(source, target, g).value_or(0.0));
    }
  });
  return BiasNetwork(std::move(query), out_lists, per_node);
}

double proximity_bias(std::string_view word, const BiasNetwork& net, double theta_s) {
  const auto id = net.node_id(word);
  if (!id || !net.is_query(*id)) throw std::invalid_argument("'" + std::string(word) + "' is not a query node");
  return eta_of(count_edges(net, *id, theta_s));
}

double node_weight(std::string_view word, const BiasNetwork& net, double theta_s, double epsilon) {
  require_epsilon(epsilon);
  const auto id = net.node_id(word);
  if (!id) throw std::invalid_argument("'" + std::string(word) + "' is not a network node");
  return gamma_of(count_edges(net, *id, theta_s), epsilon);
}

GipeReport gipe(const BiasNetwork& net, double theta_s, double epsilon) {
  require_epsilon(epsilon);
  if (net.query_nodes().empty()) throw std::invalid_argument("bias network has no query words");

  GipeReport report;
  report.theta_s = theta_s;
  report.epsilon = epsilon;
  report.per_word.reserve(net.query_nodes().size());

  double weighted = 0.0;
  double weights = 0.0;
  for (const std::uint32_t node : net.query_nodes()) {
    const WordCounts c = count_edges(net, node, theta_s);
    WordProximity row;
    row.token = net.nodes()[node];
    row.eta = eta_of(c);
    row.gamma = gamma_of(c, epsilon);
    row.biased_neighbours = c.biased_out;
    row.neighbours = c.out;
    row.incoming_biased = c.biased_in;
    row.incoming_total = c.in;
    weighted += row.gamma * row.eta;
    weights += row.gamma;
    report.per_word.push_back(std::move(row));
  }
  report.gipe = weighted / weights;
  return report;
}

void write_gipe_report(const GipeReport& report, std::ostream& out) {
  out << "token\teta\tgamma\tbiased_neighbours\tneighbours\tincoming_biased\tincoming_total\n";
  for (const auto& row : report.per_word) {
    out << row.token << '\t' << format_double(row.eta) << '\t' << format_double(row.gamma) << '\t'
        << row.biased_neighbours << '\t' << row.neighbours << '\t' << row.incoming_biased << '\t'
        << row.incoming_total << '\n';
  }
  out << "# gipe\ttheta_s=" << format_double(report.theta_s) << "\tepsilon=" << format_double(report.epsilon)
      << "\twords=" << report.per_word.size() << "\tvalue=" << format_double(report.gipe) << '\n';
  if (!out) throw IoError("write failure while saving GIPE report");
}

}  // namespace proxdebias
