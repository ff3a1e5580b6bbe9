#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proxdebias/embedding_io.hpp"

namespace proxdebias {

inline constexpr std::size_t kDefaultNeighbours = 100;

struct Neighbour {
  std::string token;
  std::size_t index = 0;  ///< row in the embedding the table was computed from
  double similarity = 0.0;

  bool operator==(const Neighbour&) const = default;
};

/// Per-word top-k cosine neighbours, most similar first. Ties are ordered by
/// ascending vocabulary index and a word never lists itself.
class NeighbourTable {
 public:
  explicit NeighbourTable(std::size_t k = kDefaultNeighbours);

  /// Throws std::invalid_argument if `token` is already present, the list
  /// is longer than k, lists `token` itself, or is not sorted.
  void insert(std::string token, std::vector<Neighbour> neighbours);

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return order_.size(); }
  bool contains(std::string_view token) const { return find(token) != nullptr; }

  /// Query words in insertion order.
  const std::vector<std::string>& queries() const noexcept { return order_; }

  const std::vector<Neighbour>* find(std::string_view token) const;
  /// Throws MissingTokenError.
  const std::vector<Neighbour>& at(std::string_view token) const;

 private:
  std::size_t k_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::vector<Neighbour>> entries_;
};

/// Exact brute-force search: for every query word, the min(k, |V|-1) other
/// vocabulary words with the largest cosine similarity. Duplicate queries
/// are collapsed. Throws MissingTokenError for unknown queries and
/// std::invalid_argument for k == 0 or zero-norm rows.
NeighbourTable top_k_neighbours(const EmbeddingSet& set, std::span<const std::string> query_words, std::size_t k,
                                std::size_t workers = 1);

/// Cache rows: `token<TAB>neighbour:sim,neighbour:sim,...` with similarities
/// printed to round-trip exactly.
void write_neighbour_cache(const NeighbourTable& table, std::ostream& out);

/// Reads a cache written by write_neighbour_cache, resolving neighbour
/// indices against `vocab`. The table's k is the longest list in the file
/// unless `k` is given.
NeighbourTable read_neighbour_cache(std::istream& in, const Vocabulary& vocab, std::size_t k = 0,
                                    const std::string& source_name = "<stream>");

}  // namespace proxdebias
