#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "proxdebias/embedding_io.hpp"

namespace proxdebias {

struct GenderPair {
  std::string female;
  std::string male;

  bool operator==(const GenderPair&) const = default;
};

/// The ten definitional pairs commonly used to derive the gender direction.
std::vector<GenderPair> default_gender_pairs();

/// `female male` per line; blank and '#' lines skipped; tokens lowercased.
std::vector<GenderPair> read_gender_pairs(std::istream& in, const std::string& source_name = "<stream>");
std::vector<GenderPair> read_gender_pairs_file(const std::filesystem::path& path);

/// Unit vector spanning the gender axis.
///
/// Sign convention: dot(g, v_woman - v_man) >= 0 whenever both tokens were
/// available when the direction was computed; otherwise g is oriented toward
/// the summed female-minus-male difference of the source pairs.
class GenderDirection {
 public:
  /// Normalizes `direction`; throws std::invalid_argument if it is zero or non-finite.
  explicit GenderDirection(Vector direction, std::vector<GenderPair> source_pairs = {});

  const Vector& vector() const noexcept { return g_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(g_.size()); }
  const std::vector<GenderPair>& source_pairs() const noexcept { return pairs_; }

 private:
  Vector g_;
  std::vector<GenderPair> pairs_;
};

/// First principal component of the pair-centred differences
/// {±(v_female - v_male)/2}. Needs at least two pairs; throws
/// MissingTokenError for absent tokens and std::invalid_argument when every
/// difference is zero.
GenderDirection compute_gender_direction(const EmbeddingSet& set, std::span<const GenderPair> pairs);

struct DirectBiasParams {
  double c = 1.0;  ///< strictness exponent, must be > 0
};

/// |cos(w, g)|^c. Throws std::invalid_argument for a zero w or c <= 0.
double direct_bias(const Vector& w, const GenderDirection& g, DirectBiasParams params = {});

/// Raised when indirect bias is undefined for a pair: the normalized
/// operands are orthogonal, or one of them lies along g.
class UndefinedBiasError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// beta(w, v) = (w.v - cos(w_perp, v_perp)) / (w.v), evaluated on unit
/// copies of w and v, with w_perp = w - (w.g) g. Throws UndefinedBiasError.
double indirect_bias(const Vector& w, const Vector& v, const GenderDirection& g);

/// Non-throwing variant; std::nullopt where indirect_bias would throw.
std::optional<double> try_indirect_bias(const Vector& w, const Vector& v, const GenderDirection& g);

}  // namespace proxdebias
