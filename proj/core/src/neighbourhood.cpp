#include "proxdebias/neighbourhood.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "proxdebias/errors.hpp"
#include "proxdebias/parallel.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias {

namespace {

constexpr Eigen::Index kQueryBlock = 128;

bool ranks_before(const Neighbour& a, const Neighbour& b) {
  return a.similarity > b.similarity || (a.similarity == b.similarity && a.index < b.index);
}

}  // namespace

NeighbourTable::NeighbourTable(std::size_t k) : k_(k) {
  if (k == 0) throw std::invalid_argument("neighbour count k must be positive");
}

void NeighbourTable::insert(std::string token, std::vector<Neighbour> neighbours) {
  if (neighbours.size() > k_) throw std::invalid_argument("neighbour list for '" + token + "' exceeds k");
  for (std::size_t i = 0; i < neighbours.size(); ++i) {
    if (neighbours[i].token == token) throw std::invalid_argument("'" + token + "' lists itself as a neighbour");
    if (i > 0 && ranks_before(neighbours[i], neighbours[i - 1])) {
      throw std::invalid_argument("neighbour list for '" + token + "' is not in ranking order");
    }
  }
  if (entries_.contains(token)) throw std::invalid_argument("duplicate neighbour entry for '" + token + "'");
  order_.push_back(token);
  entries_.emplace(std::move(token), std::move(neighbours));
}

const std::vector<Neighbour>* NeighbourTable::find(std::string_view token) const {
  const auto it = entries_.find(std::string(token));
  return it == entries_.end() ? nullptr : &it->second;
}

const std::vector<Neighbour>& NeighbourTable::at(std::string_view token) const {
  const auto* list = find(token);
  if (list == nullptr) throw MissingTokenError(std::string(token));
  return *list;
}

NeighbourTable top_k_neighbours(const EmbeddingSet& set, std::span<const std::string> query_words, std::size_t k,
                                std::size_t workers) {
  NeighbourTable table(k);

  std::vector<std::size_t> queries;
  std::unordered_set<std::size_t> seen;
  for (const auto& q : query_words) {
    const std::size_t idx = set.vocab().index_of(q);
    if (seen.insert(idx).second) queries.push_back(idx);
  }
  if (queries.empty()) return table;

  const Matrix unit = unit_normalize(set).vectors();
  const std::size_t n = set.size();
  const std::size_t take = std::min(k, n - 1);

  std::vector<std::vector<Neighbour>> results(queries.size());
  const auto q_count = static_cast<Eigen::Index>(queries.size());
  const std::size_t blocks = static_cast<std::size_t>((q_count + kQueryBlock - 1) / kQueryBlock);

  parallel_for(blocks, workers, [&](std::size_t b) {
    const Eigen::Index begin = static_cast<Eigen::Index>(b) * kQueryBlock;
    const Eigen::Index width = std::min(kQueryBlock, q_count - begin);

    Eigen::MatrixXd block(unit.cols(), width);
    for (Eigen::Index j = 0; j < width; ++j) {
      block.col(j) = unit.row(static_cast<Eigen::Index>(queries[static_cast<std::size_t>(begin + j)])).transpose();
    }
    const Eigen::MatrixXd sims = unit * block;  // n x width, column-major

    std::vector<std::size_t> candidates;
    candidates.reserve(n);
    for (Eigen::Index j = 0; j < width; ++j) {
      const std::size_t self = queries[static_cast<std::size_t>(begin + j)];
      const double* col = sims.col(j).data();
      candidates.clear();
      for (std::size_t c = 0; c < n; ++c) {
        if (c != self) candidates.push_back(c);
      }
      auto better = [col](std::size_t a, std::size_t c) {
        return col[a] > col[c] || (col[a] == col[c] && a < c);
      };
      const auto mid = candidates.begin() + static_cast<std::ptrdiff_t>(take);
      if (take < candidates.size()) std::nth_element(candidates.begin(), mid, candidates.end(), better);
      std::sort(candidates.begin(), mid, better);

      auto& out = results[static_cast<std::size_t>(begin + j)];
      out.reserve(take);
      for (auto it = candidates.begin(); it != mid; ++it) {
        out.push_back({set.vocab().word(*it), *it, col[*it]});
      }
    }
  });

  for (std::size_t i = 0; i < queries.size(); ++i) {
    table.insert(set.vocab().word(queries[i]), std::move(results[i]));
  }
  return table;
}

void write_neighbour_cache(const NeighbourTable& table, std::ostream& out) {
  char buf[64];
  std::string line;
  for (const auto& token : table.queries()) {
    line.assign(token);
    line.push_back('\t');
    bool first = true;
    for (const auto& nb : table.at(token)) {
      if (!first) line.push_back(',');
      first = false;
      line.append(nb.token);
      line.push_back(':');
      const auto res = std::to_chars(buf, buf + sizeof buf, nb.similarity);
      line.append(buf, res.ptr);
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("write failure while saving neighbour cache");
}

NeighbourTable read_neighbour_cache(std::istream& in, const Vocabulary& vocab, std::size_t k,
                                    const std::string& source_name) {
  std::vector<std::pair<std::string, std::vector<Neighbour>>> rows;
  std::size_t longest = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw ParseError(source_name, line_no, "expected 'token<TAB>list'");
    const std::string_view view(line);
    std::string token(view.substr(0, tab));
    std::string_view rest = view.substr(tab + 1);

    // An item ends at the first ':' whose suffix up to the next ',' (or the
    // end of the line) parses as a number; tokens may themselves contain ':'.
    std::vector<Neighbour> list;
    while (!rest.empty()) {
      bool parsed = false;
      for (std::size_t colon = rest.find(':'); colon != std::string_view::npos; colon = rest.find(':', colon + 1)) {
        const std::size_t comma = rest.find(',', colon + 1);
        const std::string_view number = rest.substr(colon + 1, comma == std::string_view::npos ? rest.npos : comma - colon - 1);
        double sim = 0.0;
        if (colon == 0 || !text::parse_double(number, sim)) continue;
        const std::string nb_token(rest.substr(0, colon));
        const auto idx = vocab.find(nb_token);
        if (!idx) throw ParseError(source_name, line_no, "neighbour '" + nb_token + "' not in vocabulary");
        list.push_back({nb_token, *idx, sim});
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        parsed = true;
        break;
      }
      if (!parsed) throw ParseError(source_name, line_no, "malformed neighbour item");
    }
    longest = std::max(longest, list.size());
    rows.emplace_back(std::move(token), std::move(list));
  }

  NeighbourTable table(k != 0 ? k : std::max<std::size_t>(longest, 1));
  for (auto& [token, list] : rows) {
    try {
      table.insert(std::move(token), std::move(list));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source_name, 0, e.what());
    }
  }
  return table;
}

}  // namespace proxdebias
