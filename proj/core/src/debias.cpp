#include "proxdebias/debias.hpp"

#include <charconv>
#include <cmath>
#include <unordered_set>

#include "proxdebias/errors.hpp"
#include "proxdebias/parallel.hpp"

namespace proxdebias {

namespace {

// Gradients shorter than this are treated as a stationary point.
constexpr double kStationaryGradient = 1e-12;

double sign(double u) { return u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0); }

void require_nonzero(const Vector& v, const char* what) {
  if (v.size() == 0 || v.norm() == 0.0) throw std::invalid_argument(std::string(what) + " must be a nonzero vector");
}

void require_same_dim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vector dimensions differ");
}

double cosine(const Vector& a, const Vector& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Objective over unit-normalized operands. Cosines against a fixed unit
// vector u are x.u / |x|, with gradient (u - cos * x/|x|) / |x|.
class CompiledObjective {
 public:
  CompiledObjective(const Vector& w, const RepulsionSet& s, const GenderDirection& g, const ObjectiveWeights& weights)
      : w_(w.normalized()), g_(g.vector()), weights_(weights) {
    require_nonzero(w, "original vector w");
    require_same_dim(w, g.vector());
    members_.resize(static_cast<Eigen::Index>(s.members.size()), w.size());
    for (std::size_t i = 0; i < s.members.size(); ++i) {
      const Vector& m = s.members[i].vector;
      require_same_dim(m, w);
      require_nonzero(m, "repulsion member");
      members_.row(static_cast<Eigen::Index>(i)) = m.normalized().transpose();
    }
  }

  double value(const Vector& x) const {
    const double nx = checked_norm(x);
    const Vector xu = x / nx;
    double f = 0.0;
    if (members_.rows() > 0) {
      f += weights_.repulsion * (members_ * xu).cwiseAbs().sum() / static_cast<double>(members_.rows());
    }
    f += weights_.attraction * std::abs(xu.dot(w_) - 1.0) / 2.0;
    f += weights_.neutralization * std::abs(xu.dot(g_));
    return f;
  }

  Vector gradient(const Vector& x) const {
    const double nx = checked_norm(x);
    const Vector xu = x / nx;
    // Accumulate sum_j c_j * u_j, then project out the radial part once.
    Vector direction = Vector::Zero(x.size());
    if (members_.rows() > 0 && weights_.repulsion != 0.0) {
      const Vector cos_members = members_ * xu;
      const Vector coef = cos_members.unaryExpr([](double c) { return sign(c); }) *
                          (weights_.repulsion / static_cast<double>(members_.rows()));
      direction += members_.transpose() * coef;
    }
    if (weights_.attraction != 0.0) direction += (weights_.attraction / 2.0) * sign(xu.dot(w_) - 1.0) * w_;
    if (weights_.neutralization != 0.0) direction += weights_.neutralization * sign(xu.dot(g_)) * g_;
    return (direction - direction.dot(xu) * xu) / nx;
  }

 private:
  static double checked_norm(const Vector& x) {
    const double n = x.norm();
    if (n == 0.0) throw std::invalid_argument("debiased vector w_d must be nonzero");
    return n;
  }

  Vector w_;
  Vector g_;
  Matrix members_;
  ObjectiveWeights weights_;
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void ObjectiveWeights::validate() const {
  for (double l : {repulsion, attraction, neutralization}) {
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("objective weights must lie in [0, 1]");
  }
  const double sum = repulsion + attraction + neutralization;
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("objective weights must sum to 1 (got " + format_double(sum) + ")");
  }
}

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("learning rate must be positive");
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("moment decay rates must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("stability constant must be positive");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be nonnegative");
}

RepulsionSet repulsion_set(std::string_view word, const NeighbourTable& neighbours, const EmbeddingSet& reference_set,
                           const GenderDirection& g, double theta_r) {
  RepulsionSet s;
  s.word = std::string(word);
  s.theta_r = theta_r;
  const auto& list = neighbours.at(word);
  const Vector w = reference_set.vector(word);
  std::unordered_set<std::string> seen;
  for (const Neighbour& nb : list) {
    if (!seen.insert(nb.token).second) continue;
    Vector v = reference_set.vector(nb.token);
    const auto beta = try_indirect_bias(w, v, g);
    if (beta && *beta > theta_r) s.members.push_back({nb.token, std::move(v), *beta});
  }
  return s;
}

double f_r(const Vector& w_d, const RepulsionSet& s) {
  require_nonzero(w_d, "w_d");
  if (s.members.empty()) return 0.0;
  double total = 0.0;
  for (const auto& m : s.members) {
    require_same_dim(w_d, m.vector);
    require_nonzero(m.vector, "repulsion member");
    total += std::abs(cosine(w_d, m.vector));
  }
  return total / static_cast<double>(s.members.size());
}

double f_a(const Vector& w_d, const Vector& w) {
  require_nonzero(w_d, "w_d");
  require_nonzero(w, "w");
  require_same_dim(w_d, w);
  return std::abs(cosine(w_d, w) - 1.0) / 2.0;
}

double f_n(const Vector& w_d, const GenderDirection& g) {
  require_nonzero(w_d, "w_d");
  require_same_dim(w_d, g.vector());
  return std::abs(cosine(w_d, g.vector()));
}

double objective(const Vector& w_d, const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                 const ObjectiveWeights& weights) {
  weights.validate();
  return weights.repulsion * f_r(w_d, s) + weights.attraction * f_a(w_d, w) + weights.neutralization * f_n(w_d, g);
}

Vector objective_gradient(const Vector& w_d, const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                          const ObjectiveWeights& weights) {
  weights.validate();
  require_same_dim(w_d, w);
  return CompiledObjective(w, s, g, weights).gradient(w_d);
}

WordDebiasResult debias_word(const Vector& w, const RepulsionSet& s, const GenderDirection& g,
                             const ObjectiveWeights& weights, const OptimizerConfig& cfg) {
  weights.validate();
  cfg.validate();
  const CompiledObjective f(w, s, g, weights);

  // The objective is scale-invariant, so iterate on the unit sphere's scale
  // and restore the original norm at the end.
  const double w_norm = w.norm();
  Vector x = w / w_norm;
  TraceEntry trace;
  trace.initial_objective = f.value(w);

  Vector best = x;
  double best_value = f.value(x);
  bool improved = false;
  double previous = best_value;

  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  for (std::size_t t = 1; t <= cfg.max_steps; ++t) {
    const Vector grad = f.gradient(x);
    if (grad.norm() < kStationaryGradient) break;

    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    beta1_t *= cfg.beta1;
    beta2_t *= cfg.beta2;
    const Vector m_hat = m / (1.0 - beta1_t);
    const Vector v_hat = v / (1.0 - beta2_t);
    x -= cfg.learning_rate * m_hat.cwiseQuotient((v_hat.array().sqrt() + cfg.epsilon).matrix());
    trace.steps = t;

    if (!x.allFinite() || x.norm() == 0.0) {
      trace.final_objective = best_value;
      throw OptimizationError("optimizer iterate became degenerate for '" + s.word + "'", trace);
    }
    const double value = f.value(x);
    if (!std::isfinite(value)) {
      trace.final_objective = best_value;
      throw OptimizationError("objective became non-finite for '" + s.word + "'", trace);
    }
    if (value < best_value) {
      best_value = value;
      best = x;
      improved = true;
    }
    if (std::abs(previous - value) < cfg.tolerance) break;
    previous = value;
  }

  WordDebiasResult result;
  result.trace = trace;
  if (improved) {
    result.debiased = best * (w_norm / best.norm());
    result.trace.final_objective = f.value(result.debiased);
  }
  if (!improved || result.trace.final_objective > trace.initial_objective) {
    result.debiased = w;
    result.trace.final_objective = trace.initial_objective;
  }
  return result;
}

const DebiasTraceRow* DebiasResult::find_trace(std::string_view token) const {
  for (const auto& row : trace) {
    if (row.token == token) return &row;
  }
  return nullptr;
}

DebiasResult debias_all(const EmbeddingSet& set, const kbc::Classification& classification, const GenderDirection& g,
                        const DebiasOptions& options, const NeighbourTable* precomputed) {
  options.weights.validate();
  options.optimizer.validate();
  if (!std::isfinite(options.theta_r)) throw std::invalid_argument("theta_r must be finite");
  if (options.k == 0) throw std::invalid_argument("k must be positive");
  if (g.dim() != set.dim()) throw std::invalid_argument("gender direction dimension does not match the embedding");
  if (classification.size() != set.size()) {
    throw std::invalid_argument("classification covers " + std::to_string(classification.size()) +
                                " tokens, embedding has " + std::to_string(set.size()));
  }

  std::vector<std::string> targets;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::string& token = set.vocab().word(i);
    if (!classification.is_preserved(token)) {
      targets.push_back(token);
      rows.push_back(i);
    }
  }

  DebiasResult result;
  result.weights = options.weights;
  if (targets.empty()) {
    result.debiased = set;
    return result;
  }

  std::optional<NeighbourTable> computed;
  if (precomputed == nullptr) {
    computed = top_k_neighbours(set, targets, options.k, options.workers);
    precomputed = &*computed;
  }

  Matrix out = set.vectors();
  std::vector<DebiasTraceRow> trace(targets.size());
  std::vector<std::optional<std::string>> errors(targets.size());
  parallel_for(targets.size(), options.workers, [&](std::size_t i) {
    trace[i].token = targets[i];
    try {
      const RepulsionSet s = repulsion_set(targets[i], *precomputed, set, g, options.theta_r);
      trace[i].repulsion_size = s.members.size();
      const Vector w = set.row(rows[i]).transpose();
      WordDebiasResult r = debias_word(w, s, g, options.weights, options.optimizer);
      trace[i].trace = r.trace;
      out.row(static_cast<Eigen::Index>(rows[i])) = r.debiased.transpose();
    } catch (const OptimizationError& e) {
      trace[i].trace = e.trace();
      errors[i] = e.what();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (errors[i]) result.failures.push_back({targets[i], *errors[i]});
  }
  result.trace = std::move(trace);
  result.debiased = EmbeddingSet(set.vocab(), std::move(out));
  return result;
}

void write_debias_trace(const DebiasResult& result, std::ostream& out) {
  out << "token\tinitial_objective\tfinal_objective\tsteps\trepulsion_size\n";
  for (const auto& row : result.trace) {
    out << row.token << '\t' << format_double(row.trace.initial_objective) << '\t'
        << format_double(row.trace.final_objective) << '\t' << row.trace.steps << '\t' << row.repulsion_size << '\n';
  }
  for (const auto& f : result.failures) out << "# failed\t" << f.token << '\t' << f.message << '\n';
  if (!out) throw IoError("write failure while saving debias trace");
}

}  // namespace proxdebias
