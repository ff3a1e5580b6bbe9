#include "pipeline.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "proxdebias/bias_geometry.hpp"
#include "proxdebias/errors.hpp"
#include "proxdebias/evaluation.hpp"
#include "proxdebias/kbc.hpp"
#include "proxdebias/text_util.hpp"

namespace proxdebias::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string normalize_key(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return text::to_lower(key);
}

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  return fs::path(prefix.string() + suffix);
}

// Writes through a sibling temporary file so a failed stage never leaves a
// truncated output behind.
void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  const fs::path tmp = with_suffix(path, ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    body(out);
    out.flush();
    if (!out) throw IoError("write failure: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place: " + path.string());
  }
}

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required option ") + flag);
}

void require_readable(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("input file not found: " + p.string());
}

EmbeddingSet load_embedding_logged(const fs::path& path, std::ostream& out, const char* label) {
  require_readable(path);
  auto loaded = load_embedding_file(path);
  out << label << "_words\t" << loaded.set.size() << '\n';
  if (loaded.duplicate_count > 0) out << label << "_duplicates_dropped\t" << loaded.duplicate_count << '\n';
  return std::move(loaded.set);
}

GenderDirection gender_direction_for(const PipelineConfig& cfg, const EmbeddingSet& set) {
  std::vector<GenderPair> pairs = default_gender_pairs();
  if (!cfg.gender_pairs.empty()) {
    require_readable(cfg.gender_pairs);
    pairs = read_gender_pairs_file(cfg.gender_pairs);
  }
  return compute_gender_direction(set, pairs);
}

std::vector<std::string> read_list_or_empty(const fs::path& p) {
  if (p.empty()) return {};
  require_readable(p);
  return text::read_word_list_file(p);
}

// W for audit / neighbour computation: an explicit word file, else the
// debias set of a classification, else the whole vocabulary.
std::vector<std::string> query_words(const PipelineConfig& cfg, const EmbeddingSet& set) {
  if (!cfg.words.empty()) {
    require_readable(cfg.words);
    return text::read_word_list_file(cfg.words, /*lowercase=*/false);
  }
  if (!cfg.classification.empty()) {
    require_readable(cfg.classification);
    std::ifstream in(cfg.classification);
    return kbc::read_provenance(in, cfg.classification.string()).debias();
  }
  return set.vocab().words();
}

}  // namespace

ObjectiveWeights PipelineConfig::weights() const {
  if (lambda.size() != 3) throw ConfigError("--lambda needs exactly three comma-separated weights");
  return {lambda[0], lambda[1], lambda[2]};
}

void PipelineConfig::validate_numeric() const {
  try {
    weights().validate();
    optimizer.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!std::isfinite(theta_r)) throw ConfigError("--theta-r must be finite");
  if (theta_s.empty()) throw ConfigError("--theta-s needs at least one threshold");
  for (double t : theta_s) {
    if (!std::isfinite(t)) throw ConfigError("--theta-s values must be finite");
  }
  if (k == 0) throw ConfigError("--k must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("--epsilon must be positive");
  if (!(direct_bias_c > 0.0)) throw ConfigError("--direct-bias-c must be positive");
  if (precision < 0 || precision > 17) throw ConfigError("--precision must lie in [0, 17]");
}

std::map<std::string, std::string> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::map<std::string, std::string> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(path.string(), line_no, "expected 'key = value'");
    const auto key = text::trim(t.substr(0, eq));
    const auto value = text::trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(path.string(), line_no, "empty key");
    entries[normalize_key(std::string(key))] = std::string(value);
  }
  return entries;
}

kbc::Classification load_or_classify(const PipelineConfig& cfg, const EmbeddingSet& set) {
  if (!cfg.classification.empty()) {
    require_readable(cfg.classification);
    std::ifstream in(cfg.classification);
    return kbc::read_provenance(in, cfg.classification.string());
  }
  if (cfg.dictionaries.empty()) {
    throw ConfigError("a classification needs --classification or at least one --dictionaries file");
  }
  std::vector<kbc::Dictionary> dicts;
  for (const auto& d : cfg.dictionaries) {
    require_readable(d);
    dicts.push_back(kbc::read_dictionary_file(d));
  }
  auto seed = read_list_or_empty(cfg.seed);
  if (seed.empty()) seed = kbc::default_seed_words();
  const auto lists = kbc::WordLists::make(read_list_or_empty(cfg.stop_words), seed, read_list_or_empty(cfg.names));
  return kbc::classify_vocabulary(set.vocab(), lists, kbc::KnowledgeBase(std::move(dicts)), cfg.workers);
}

NeighbourTable load_or_compute_neighbours(const EmbeddingSet& set, const std::vector<std::string>& queries,
                                          std::size_t k, const fs::path& cache, std::size_t workers) {
  const std::size_t needed = std::min(k, set.size() - 1);
  if (!cache.empty() && fs::is_regular_file(cache)) {
    std::ifstream in(cache);
    const NeighbourTable cached = read_neighbour_cache(in, set.vocab(), 0, cache.string());
    NeighbourTable table(k);
    bool usable = true;
    std::set<std::string> seen;
    for (const auto& q : queries) {
      if (!seen.insert(q).second) continue;
      const auto* list = cached.find(q);
      if (list == nullptr || list->size() < needed) {
        usable = false;
        break;
      }
      table.insert(q, std::vector<Neighbour>(list->begin(), list->begin() + static_cast<std::ptrdiff_t>(needed)));
    }
    if (usable) return table;
  }
  NeighbourTable table = top_k_neighbours(set, queries, k, workers);
  if (!cache.empty()) write_atomically(cache, [&](std::ostream& o) { write_neighbour_cache(table, o); });
  return table;
}

int cmd_classify(const PipelineConfig& cfg, std::ostream& out) {
  require_path(cfg.embedding, "--embedding");
  require_path(cfg.out, "--out");
  const EmbeddingSet set = load_embedding_logged(cfg.embedding, out, "embedding");
  const kbc::Classification c = load_or_classify(cfg, set);

  std::optional<kbc::ClassificationMetrics> metrics;
  if (!cfg.gold.empty()) {
    require_readable(cfg.gold);
    std::ifstream in(cfg.gold);
    metrics = kbc::score_classification(c, kbc::read_gold_labels(in, cfg.gold.string()));
  }

  write_atomically(with_suffix(cfg.out, ".preserve.txt"), [&](std::ostream& o) {
    for (const auto& t : c.preserve()) o << t << '\n';
  });
  write_atomically(with_suffix(cfg.out, ".debias.txt"), [&](std::ostream& o) {
    for (const auto& t : c.debias()) o << t << '\n';
  });
  write_atomically(with_suffix(cfg.out, ".provenance.tsv"), [&](std::ostream& o) { kbc::write_provenance(c, o); });

  const auto counts = c.counts();
  out << "stage\tcount\n"
      << kbc::stage_label(kbc::Stage::stop_or_nonalpha) << '\t' << counts.stop_or_nonalpha << '\n'
      << kbc::stage_label(kbc::Stage::name_or_seed) << '\t' << counts.name_or_seed << '\n'
      << kbc::stage_label(kbc::Stage::dictionary_vote) << '\t' << counts.dictionary_vote << '\n'
      << "preserve\t" << counts.preserve() << '\n'
      << "debias\t" << counts.debias << '\n';
  if (metrics) {
    out << "true_positive\t" << metrics->true_positive << '\n'
        << "false_positive\t" << metrics->false_positive << '\n'
        << "true_negative\t" << metrics->true_negative << '\n'
        << "false_negative\t" << metrics->false_negative << '\n'
        << "precision\t" << fmt(metrics->precision) << '\n'
        << "recall\t" << fmt(metrics->recall) << '\n'
        << "f1\t" << fmt(metrics->f1) << '\n'
        << "accuracy\t" << fmt(metrics->accuracy) << '\n';
  }
  return kOk;
}

int cmd_debias(const PipelineConfig& cfg, std::ostream& out) {
  cfg.validate_numeric();
  require_path(cfg.embedding, "--embedding");
  require_path(cfg.out, "--out");
  if (cfg.classification.empty() && cfg.dictionaries.empty()) {
    throw ConfigError("debias needs --classification or --dictionaries");
  }

  const EmbeddingSet set = load_embedding_logged(cfg.embedding, out, "embedding");
  const kbc::Classification c = load_or_classify(cfg, set);
  const GenderDirection g = gender_direction_for(cfg, set);
  const auto targets = c.debias();

  DebiasOptions options;
  options.weights = cfg.weights();
  options.theta_r = cfg.theta_r;
  options.k = cfg.k;
  options.optimizer = cfg.optimizer;
  options.workers = cfg.workers;

  std::optional<NeighbourTable> table;
  if (!targets.empty()) table = load_or_compute_neighbours(set, targets, cfg.k, cfg.neighbour_cache, cfg.workers);
  const DebiasResult result = debias_all(set, c, g, options, table ? &*table : nullptr);

  const fs::path trace_path = cfg.trace.empty() ? with_suffix(cfg.out, ".trace.tsv") : cfg.trace;
  write_atomically(cfg.out, [&](std::ostream& o) { save_embedding(result.debiased, o, cfg.precision); });
  write_atomically(trace_path, [&](std::ostream& o) { write_debias_trace(result, o); });

  double initial = 0.0, final_value = 0.0;
  for (const auto& row : result.trace) {
    initial += row.trace.initial_objective;
    final_value += row.trace.final_objective;
  }
  const double n = result.trace.empty() ? 1.0 : static_cast<double>(result.trace.size());
  out << "debiased_words\t" << result.trace.size() - result.failures.size() << '\n'
      << "failed_words\t" << result.failures.size() << '\n'
      << "mean_initial_objective\t" << fmt(initial / n) << '\n'
      << "mean_final_objective\t" << fmt(final_value / n) << '\n';
  return result.failures.empty() ? kOk : kPartialFailure;
}

int cmd_audit(const PipelineConfig& cfg, std::ostream& out) {
  cfg.validate_numeric();
  require_path(cfg.embedding, "--embedding");

  const EmbeddingSet eval_set = load_embedding_logged(cfg.embedding, out, "embedding");
  std::optional<EmbeddingSet> reference;
  if (!cfg.reference_embedding.empty()) reference = load_embedding_logged(cfg.reference_embedding, out, "reference");
  const EmbeddingSet& ref = reference ? *reference : eval_set;

  const GenderDirection g = gender_direction_for(cfg, ref);
  const auto W = query_words(cfg, eval_set);
  if (W.empty()) throw ConfigError("audit query set is empty");

  const NeighbourTable table = load_or_compute_neighbours(eval_set, W, cfg.k, cfg.neighbour_cache, cfg.workers);
  const BiasNetwork net = build_bbn(table, ref, W, g, cfg.workers);

  double direct = 0.0;
  for (const auto& w : W) direct += direct_bias(eval_set.vector(w), g, {cfg.direct_bias_c});

  std::vector<GipeReport> reports;
  for (double theta : cfg.theta_s) reports.push_back(gipe(net, theta, cfg.epsilon));

  if (!cfg.report.empty()) {
    write_atomically(cfg.report, [&](std::ostream& o) {
      for (const auto& r : reports) write_gipe_report(r, o);
    });
  }
  out << "query_words\t" << net.query_nodes().size() << '\n'
      << "network_nodes\t" << net.node_count() << '\n'
      << "network_edges\t" << net.edge_count() << '\n'
      << "mean_direct_bias\t" << fmt(direct / static_cast<double>(W.size())) << '\n'
      << "theta_s\tgipe\n";
  for (const auto& r : reports) out << fmt(r.theta_s) << '\t' << fmt(r.gipe) << '\n';
  return kOk;
}

int cmd_eval(const PipelineConfig& cfg, std::ostream& out) {
  require_path(cfg.embedding, "--embedding");
  if (cfg.sembias.empty() && cfg.analogy.empty() && cfg.similarity.empty()) {
    throw ConfigError("eval needs at least one of --sembias, --analogy, --similarity");
  }
  for (const auto& p : cfg.analogy) require_readable(p);
  for (const auto& p : cfg.similarity) require_readable(p);
  if (!cfg.sembias.empty()) require_readable(cfg.sembias);

  const EmbeddingSet set = load_embedding_logged(cfg.embedding, out, "embedding");
  std::vector<std::string> rows;
  auto emit = [&](const std::string& task, const fs::path& dataset, const std::string& metric, const std::string& v) {
    rows.push_back(task + '\t' + dataset.filename().string() + '\t' + metric + '\t' + v);
  };

  if (!cfg.sembias.empty()) {
    const auto instances = eval::read_sembias_file(cfg.sembias);
    const auto r = eval::sembias_eval(set, instances);
    emit("sembias", cfg.sembias, "definition_pct", fmt(r.definition_pct));
    emit("sembias", cfg.sembias, "stereotype_pct", fmt(r.stereotype_pct));
    emit("sembias", cfg.sembias, "none_pct", fmt(r.none_pct));
    emit("sembias", cfg.sembias, "evaluated", std::to_string(r.evaluated));
    emit("sembias", cfg.sembias, "skipped", std::to_string(r.skipped));
  }
  for (const auto& path : cfg.analogy) {
    const auto data = eval::read_analogies_file(path);
    const auto r = eval::analogy_accuracy(set, data.questions, eval::kDefaultCosMulEpsilon, cfg.workers);
    emit("analogy", path, "accuracy", fmt(r.overall.accuracy()));
    emit("analogy", path, "answered", std::to_string(r.overall.answered));
    emit("analogy", path, "skipped", std::to_string(r.overall.skipped));
    for (const auto& s : r.sections) {
      if (s.section.empty()) continue;
      emit("analogy", path, "accuracy:" + s.section, fmt(s.accuracy()));
    }
  }
  for (const auto& path : cfg.similarity) {
    const auto pairs = eval::read_similarity_pairs_file(path);
    const auto r = eval::similarity_spearman(set, pairs);
    emit("similarity", path, "spearman", fmt(r.rho));
    emit("similarity", path, "used", std::to_string(r.used));
    emit("similarity", path, "skipped", std::to_string(r.skipped));
  }

  if (!cfg.report.empty()) {
    write_atomically(cfg.report, [&](std::ostream& o) {
      o << "task\tdataset\tmetric\tvalue\n";
      for (const auto& row : rows) o << row << '\n';
    });
  }
  out << "task\tdataset\tmetric\tvalue\n";
  for (const auto& row : rows) out << row << '\n';
  return kOk;
}

int cmd_neighbors(const PipelineConfig& cfg, std::ostream& out) {
  if (cfg.k == 0) throw ConfigError("--k must be positive");
  require_path(cfg.embedding, "--embedding");
  require_path(cfg.out, "--out");
  const EmbeddingSet set = load_embedding_logged(cfg.embedding, out, "embedding");
  const auto queries = query_words(cfg, set);
  const NeighbourTable table = top_k_neighbours(set, queries, cfg.k, cfg.workers);
  write_atomically(cfg.out, [&](std::ostream& o) { write_neighbour_cache(table, o); });
  out << "queries\t" << table.size() << '\n' << "k\t" << table.k() << '\n';
  return kOk;
}

namespace {

enum Opt : unsigned {
  kEmbedding = 1u << 0,
  kReference = 1u << 1,
  kOut = 1u << 2,
  kLists = 1u << 3,
  kGold = 1u << 4,
  kGender = 1u << 5,
  kWords = 1u << 6,
  kCache = 1u << 7,
  kDebiasParams = 1u << 8,
  kAuditParams = 1u << 9,
  kDatasets = 1u << 10,
  kReport = 1u << 11,
  kK = 1u << 12,
  kClassificationFile = 1u << 13,
};

void add_options(CLI::App& sub, PipelineConfig& cfg, unsigned which) {
  sub.add_option("--config", "Config file of 'key = value' lines; flags override it");
  sub.add_option("--workers", cfg.workers, "Worker threads (0 = all cores)")->capture_default_str();
  if (which & kEmbedding) sub.add_option("--embedding", cfg.embedding, "Embedding file (token c1 ... ch)");
  if (which & kReference) {
    sub.add_option("--reference-embedding", cfg.reference_embedding,
                   "Non-debiased embedding used for indirect bias (defaults to --embedding)");
  }
  if (which & kOut) sub.add_option("--out", cfg.out, "Output path (prefix for classify)");
  if (which & kClassificationFile) {
    sub.add_option("--classification", cfg.classification, "Provenance file written by 'classify'");
  }
  if (which & kLists) {
    sub.add_option("--stop-words", cfg.stop_words, "Stop-word list, one token per line");
    sub.add_option("--names", cfg.names, "Gendered name list, one token per line");
    sub.add_option("--seed", cfg.seed, "Seed word list (defaults to the built-in gendered references)");
    sub.add_option("--dictionaries", cfg.dictionaries, "Dictionary files (headword<TAB>definition)")->delimiter(',');
  }
  if (which & kGold) sub.add_option("--gold", cfg.gold, "Gold labels: token<TAB>gender_specific|non_gender_specific");
  if (which & kGender) sub.add_option("--gender-pairs", cfg.gender_pairs, "Gender pair file (female male per line)");
  if (which & kWords) sub.add_option("--words", cfg.words, "Query word list (defaults to the debias set or vocabulary)");
  if (which & kCache) sub.add_option("--neighbour-cache", cfg.neighbour_cache, "Neighbour cache to reuse or create");
  if (which & kK) sub.add_option("--k", cfg.k, "Neighbours per word")->capture_default_str();
  if (which & kReport) sub.add_option("--report", cfg.report, "Write the full report to this file");
  if (which & kDebiasParams) {
    sub.add_option("--lambda", cfg.lambda, "Repulsion,attraction,neutralization weights")->delimiter(',')->expected(3);
    sub.add_option("--theta-r", cfg.theta_r, "Repulsion threshold on indirect bias")->capture_default_str();
    sub.add_option("--trace", cfg.trace, "Trace output (defaults to <out>.trace.tsv)");
    sub.add_option("--precision", cfg.precision, "Decimal places in the written embedding")->capture_default_str();
    sub.add_option("--learning-rate", cfg.optimizer.learning_rate)->capture_default_str();
    sub.add_option("--max-steps", cfg.optimizer.max_steps)->capture_default_str();
    sub.add_option("--beta1", cfg.optimizer.beta1)->capture_default_str();
    sub.add_option("--beta2", cfg.optimizer.beta2)->capture_default_str();
    sub.add_option("--adam-epsilon", cfg.optimizer.epsilon)->capture_default_str();
    sub.add_option("--tolerance", cfg.optimizer.tolerance)->capture_default_str();
  }
  if (which & kAuditParams) {
    sub.add_option("--theta-s", cfg.theta_s, "Comma-separated indirect-bias thresholds")->delimiter(',');
    sub.add_option("--epsilon", cfg.epsilon, "Smoothing constant of the node weight")->capture_default_str();
    sub.add_option("--direct-bias-c", cfg.direct_bias_c, "Strictness exponent of direct bias")->capture_default_str();
  }
  if (which & kDatasets) {
    sub.add_option("--sembias", cfg.sembias, "SemBias file");
    sub.add_option("--analogy", cfg.analogy, "Analogy files (Google or MSR format)")->delimiter(',');
    sub.add_option("--similarity", cfg.similarity, "Word similarity files (a b score)")->delimiter(',');
  }
}

std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

bool flag_given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg;
  CLI::App app{"Gender-bias proximity auditing and debiasing for word embeddings"};
  app.require_subcommand(1);

  const unsigned shared_classify = kEmbedding | kOut | kLists | kClassificationFile;
  std::map<std::string, std::pair<CLI::App*, std::function<int()>>> commands;
  auto* classify = app.add_subcommand("classify", "Split the vocabulary into preserve and debias sets");
  add_options(*classify, cfg, shared_classify | kGold);
  auto* debias = app.add_subcommand("debias", "Debias the words of the debias set");
  add_options(*debias, cfg, shared_classify | kGender | kCache | kK | kDebiasParams);
  auto* audit = app.add_subcommand("audit", "Compute GIPE of an embedding at several thresholds");
  add_options(*audit, cfg, kEmbedding | kReference | kClassificationFile | kGender | kWords | kCache | kK |
                               kAuditParams | kReport);
  auto* evaluate = app.add_subcommand("eval", "Run SemBias, analogy and word-similarity benchmarks");
  add_options(*evaluate, cfg, kEmbedding | kDatasets | kReport);
  auto* neighbors = app.add_subcommand("neighbors", "Compute and cache top-k neighbour lists");
  add_options(*neighbors, cfg, kEmbedding | kOut | kClassificationFile | kWords | kK);

  commands["classify"] = {classify, [&] { return cmd_classify(cfg, out); }};
  commands["debias"] = {debias, [&] { return cmd_debias(cfg, out); }};
  commands["audit"] = {audit, [&] { return cmd_audit(cfg, out); }};
  commands["eval"] = {evaluate, [&] { return cmd_eval(cfg, out); }};
  commands["neighbors"] = {neighbors, [&] { return cmd_neighbors(cfg, out); }};

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // Config entries become trailing flags unless the flag is already on
    // the command line; keys meant for other subcommands are ignored.
    const auto config_path = find_config_arg(args);
    const auto sub_it = args.empty() ? commands.end() : commands.find(args.front());
    if (config_path && sub_it != commands.end()) {
      CLI::App* sub = sub_it->second.first;
      for (const auto& [key, value] : read_config_file(*config_path)) {
        const std::string flag = "--" + key;
        bool known = false;
        for (const auto& [name, entry] : commands) known = known || entry.first->get_option_no_throw(flag) != nullptr;
        if (!known) throw ConfigError("unknown config key '" + key + "'");
        if (sub->get_option_no_throw(flag) == nullptr || flag_given(args, flag)) continue;
        args.push_back(flag);
        args.push_back(value);
      }
    }

    std::vector<const char*> cargs{argv[0]};
    for (const auto& a : args) cargs.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kOk : kUsageError;
    }

    for (auto& [name, entry] : commands) {
      if (entry.first->parsed()) return entry.second();
    }
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace proxdebias::cli
