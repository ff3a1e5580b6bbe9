#include "proxdebias/bias_geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>

#include "proxdebias/errors.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias {

namespace {

// |w.v| below this after normalization is treated as orthogonal.
constexpr double kOrthogonalTolerance = 1e-12;
// A perpendicular component shorter than this means the word lies along g.
constexpr double kCollinearTolerance = 1e-12;

enum class BiasFailure { none, orthogonal, collinear, zero_input };

void require_dim(const Vector& w, const Vector& g) {
  if (w.size() != g.size()) {
    throw std::invalid_argument("dimension mismatch: vector has " + std::to_string(w.size()) +
                                " components, gender direction has " + std::to_string(g.size()));
  }
}

BiasFailure evaluate_indirect_bias(const Vector& w, const Vector& v, const Vector& g, double& beta) {
  require_dim(w, g);
  require_dim(v, g);
  // Raw dot products in extended precision: beta divides by w.v, so any
  // rounding in it is amplified for near-orthogonal pairs.
  long double ww = 0, vv = 0, wv = 0, wg = 0, vg = 0, gg = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const long double wi = w[i], vi = v[i], gi = g[i];
    ww += wi * wi;
    vv += vi * vi;
    wv += wi * vi;
    wg += wi * gi;
    vg += vi * gi;
    gg += gi * gi;
  }
  if (ww == 0 || vv == 0) return BiasFailure::zero_input;

  const long double dot = wv / std::sqrt(ww * vv);
  if (std::abs(dot) <= kOrthogonalTolerance) return BiasFailure::orthogonal;

  const long double pw = wg / gg, pv = vg / gg;
  long double pp = 0, wpp = 0, vpp = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const long double x = w[i] - pw * g[i];
    const long double y = v[i] - pv * g[i];
    pp += x * y;
    wpp += x * x;
    vpp += y * y;
  }
  if (std::sqrt(wpp / ww) <= kCollinearTolerance || std::sqrt(vpp / vv) <= kCollinearTolerance) {
    return BiasFailure::collinear;
  }

  const long double cos_perp = pp / std::sqrt(wpp * vpp);
  beta = static_cast<double>((dot - cos_perp) / dot);
  return BiasFailure::none;
}

}  // namespace

std::vector<GenderPair> default_gender_pairs() {
  return {{"she", "he"},         {"her", "his"},       {"woman", "man"},      {"mary", "john"},
          {"herself", "himself"}, {"daughter", "son"}, {"mother", "father"}, {"gal", "guy"},
          {"girl", "boy"},        {"female", "male"}};
}

std::vector<GenderPair> read_gender_pairs(std::istream& in, const std::string& source_name) {
  std::vector<GenderPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = text::split_whitespace(t);
    if (fields.size() != 2) throw ParseError(source_name, line_no, "expected 'female_token male_token'");
    pairs.push_back({text::to_lower(fields[0]), text::to_lower(fields[1])});
  }
  return pairs;
}

std::vector<GenderPair> read_gender_pairs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gender pair file: " + path.string());
  return read_gender_pairs(in, path.string());
}

GenderDirection::GenderDirection(Vector direction, std::vector<GenderPair> source_pairs)
    : g_(std::move(direction)), pairs_(std::move(source_pairs)) {
  if (g_.size() == 0 || !g_.allFinite()) throw std::invalid_argument("gender direction must be finite and non-empty");
  const double n = g_.norm();
  if (n == 0.0) throw std::invalid_argument("gender direction must be nonzero");
  g_ /= n;
}

GenderDirection compute_gender_direction(const EmbeddingSet& set, std::span<const GenderPair> pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("at least two gender pairs are required");

  const auto m = static_cast<Eigen::Index>(pairs.size());
  const auto h = static_cast<Eigen::Index>(set.dim());
  // Each pair centred on its midpoint yields the two rows ±(a - b)/2, so the
  // sample is mean-zero and its scatter is proportional to D^T D.
  Matrix diffs(m, h);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    diffs.row(i) = (set.vector(p.female) - set.vector(p.male)).transpose() / 2.0;
  }
  if (diffs.squaredNorm() == 0.0) throw std::invalid_argument("all gender pair differences are zero");

  // Dominant eigenvector of D^T D via the m x m Gram matrix D D^T.
  const Eigen::MatrixXd gram = diffs * diffs.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigen-decomposition of gender pairs failed");
  const Eigen::VectorXd top = solver.eigenvectors().col(m - 1);
  Vector g = diffs.transpose() * top;
  g.normalize();

  double orientation = 0.0;
  if (set.vocab().contains("woman") && set.vocab().contains("man")) {
    orientation = g.dot(set.vector("woman") - set.vector("man"));
  }
  if (orientation == 0.0) orientation = g.dot(diffs.colwise().sum().transpose());
  if (orientation < 0.0) g = -g;

  return GenderDirection(std::move(g), {pairs.begin(), pairs.end()});
}

double direct_bias(const Vector& w, const GenderDirection& g, DirectBiasParams params) {
  if (!(params.c > 0.0)) throw std::invalid_argument("direct bias strictness c must be positive");
  require_dim(w, g.vector());
  const double n = w.norm();
  if (n == 0.0) throw std::invalid_argument("direct bias of a zero vector is undefined");
  const double cosine = std::clamp(w.dot(g.vector()) / n, -1.0, 1.0);
  return std::pow(std::abs(cosine), params.c);
}

double indirect_bias(const Vector& w, const Vector& v, const GenderDirection& g) {
  double beta = 0.0;
  switch (evaluate_indirect_bias(w, v, g.vector(), beta)) {
    case BiasFailure::none:
      return beta;
    case BiasFailure::zero_input:
      throw std::invalid_argument("indirect bias of a zero vector is undefined");
    case BiasFailure::orthogonal:
      throw UndefinedBiasError("indirect bias undefined: word vectors are orthogonal");
    case BiasFailure::collinear:
      throw UndefinedBiasError("indirect bias undefined: word vector lies along the gender direction");
  }
  return beta;
}

std::optional<double> try_indirect_bias(const Vector& w, const Vector& v, const GenderDirection& g) {
  double beta = 0.0;
  if (evaluate_indirect_bias(w, v, g.vector(), beta) != BiasFailure::none) return std::nullopt;
  return beta;
}

}  // namespace proxdebias
