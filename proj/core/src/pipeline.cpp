#include "kriss/pipeline.hpp"

#include <chrono>
#include <map>
#include <ostream>
#include <sstream>

#include "kriss/checkpoint.hpp"
#include "kriss/error.hpp"
#include "kriss/io.hpp"
#include "kriss/matcher.hpp"

namespace kriss {

namespace {

constexpr std::pair<Stage, const char*> kStageNames[] = {{Stage::generate, "generate"}, {Stage::train, "train"},
                                                         {Stage::index, "index"},       {Stage::link, "link"},
                                                         {Stage::rerank, "rerank"},     {Stage::eval, "eval"}};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return std::string(s.substr(b, s.find_last_not_of(" \t\r") - b + 1));
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw UsageError("bad boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  std::istringstream in{std::string(v)};
  T out{};
  if (v.starts_with('-') && std::is_unsigned_v<T>) throw UsageError("negative value for " + std::string(key));
  if (!(in >> out) || !in.eof()) {
    throw UsageError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

std::string quote_path(const std::filesystem::path& p) { return p.empty() ? std::string() : p.string(); }

}  // namespace

std::string_view to_string(Stage s) {
  for (const auto& [stage, name] : kStageNames) {
    if (stage == s) return name;
  }
  return "?";
}

std::set<Stage> parse_stages(std::string_view list) {
  std::set<Stage> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const auto comma = std::min(list.find(',', pos), list.size());
    const std::string name = trim(list.substr(pos, comma - pos));
    pos = comma + 1;
    if (name.empty()) continue;
    if (name == "all") {
      for (const auto& [stage, _] : kStageNames) out.insert(stage);
      continue;
    }
    bool found = false;
    for (const auto& [stage, n] : kStageNames) {
      if (name == n) {
        out.insert(stage);
        found = true;
      }
    }
    if (!found) throw UsageError("unknown stage '" + name + "'");
  }
  return out;
}

std::filesystem::path PipelineConfig::resolve(const std::filesystem::path& p) const {
  return p.empty() || p.is_absolute() ? p : base / p;
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  train.seed = seed;
  train.encoder.seed = seed;
  link.seed = seed;
  rerank.seed = seed;
  eval.seed = seed;
}

void set_pipeline_key(PipelineConfig& c, std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (key == "seed") {
    c.set_seed(parse_number<std::uint64_t>(key, v));
    return;
  }
  static const std::map<std::string, std::filesystem::path PipelinePaths::*, std::less<>> paths = {
      {"paths.entities", &PipelinePaths::entities},     {"paths.corpus", &PipelinePaths::corpus},
      {"paths.mentions", &PipelinePaths::mentions},     {"paths.checkpoint", &PipelinePaths::checkpoint},
      {"paths.index", &PipelinePaths::index},           {"paths.queries", &PipelinePaths::queries},
      {"paths.domain", &PipelinePaths::domain},         {"paths.results", &PipelinePaths::results},
      {"paths.reranker", &PipelinePaths::reranker},     {"paths.reranked", &PipelinePaths::reranked},
      {"paths.report", &PipelinePaths::report},         {"paths.manifest", &PipelinePaths::manifest}};
  if (auto it = paths.find(key); it != paths.end()) {
    c.paths.*(it->second) = v;
    return;
  }
  if (key.starts_with("train.")) {
    if (!set_train_config_key(c.train, key.substr(6), v)) throw UsageError("unknown config key '" + std::string(key) + "'");
    return;
  }
  if (key == "generate.window") c.generate.window = parse_number<std::size_t>(key, v);
  else if (key == "generate.aliases") c.generate.aliases = parse_bool(key, v);
  else if (key == "link.top_k") c.link.top_k = parse_number<std::size_t>(key, v);
  else if (key == "link.fusion") c.link.fusion = parse_bool(key, v);
  else if (key == "link.k_proto") c.link.k_proto = parse_number<std::size_t>(key, v);
  else if (key == "link.seed") c.link.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "rerank.k") c.rerank.k = parse_number<std::size_t>(key, v);
  else if (key == "rerank.steps") c.rerank.steps = parse_number<std::size_t>(key, v);
  else if (key == "rerank.batch") c.rerank.batch_queries = parse_number<std::size_t>(key, v);
  else if (key == "rerank.lr") c.rerank.lr = parse_number<double>(key, v);
  else if (key == "rerank.seed") c.rerank.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "rerank.train_cap") c.rerank_train_cap = parse_number<std::size_t>(key, v);
  else if (key == "rerank.text") {
    if (v == "prototype") c.rerank.text = CandidateText::prototype;
    else if (v == "reference") c.rerank.text = CandidateText::reference;
    else throw UsageError("rerank.text must be prototype or reference");
  } else if (key == "eval.metrics") c.eval.metrics = parse_metrics(v);
  else if (key == "eval.ks") c.eval.ks = parse_ks(v);
  else if (key == "eval.seed") c.eval.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "eval.reranked") c.eval_reranked = parse_bool(key, v);
  else throw UsageError("unknown config key '" + std::string(key) + "'");
}

PipelineConfig parse_pipeline_config(std::string_view text, const std::filesystem::path& base) {
  PipelineConfig c;
  c.base = base;
  c.set_seed(kDefaultSeed);
  io::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (trim(line).empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      set_pipeline_key(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  });
  c.train.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  return parse_pipeline_config(io::read_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

std::string serialize_pipeline_config(const PipelineConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const auto& p = c.paths;
  o << "paths.entities = " << quote_path(p.entities) << "\n"
    << "paths.corpus = " << quote_path(p.corpus) << "\n"
    << "paths.mentions = " << quote_path(p.mentions) << "\n"
    << "paths.checkpoint = " << quote_path(p.checkpoint) << "\n"
    << "paths.index = " << quote_path(p.index) << "\n"
    << "paths.queries = " << quote_path(p.queries) << "\n";
  if (!p.domain.empty()) o << "paths.domain = " << quote_path(p.domain) << "\n";
  o << "paths.results = " << quote_path(p.results) << "\n"
    << "paths.reranker = " << quote_path(p.reranker) << "\n"
    << "paths.reranked = " << quote_path(p.reranked) << "\n"
    << "paths.report = " << quote_path(p.report) << "\n"
    << "paths.manifest = " << quote_path(p.manifest) << "\n"
    << "generate.window = " << c.generate.window << "\n"
    << "generate.aliases = " << (c.generate.aliases ? "true" : "false") << "\n";
  std::istringstream train(serialize_train_config(c.train));
  for (std::string line; std::getline(train, line);) {
    if (!trim(line).empty() && !line.starts_with("#")) o << "train." << line << "\n";
  }
  o << "link.top_k = " << c.link.top_k << "\n"
    << "link.fusion = " << (c.link.fusion ? "true" : "false") << "\n"
    << "link.k_proto = " << c.link.k_proto << "\n"
    << "link.seed = " << c.link.seed << "\n"
    << "rerank.k = " << c.rerank.k << "\n"
    << "rerank.steps = " << c.rerank.steps << "\n"
    << "rerank.batch = " << c.rerank.batch_queries << "\n"
    << "rerank.lr = " << c.rerank.lr << "\n"
    << "rerank.seed = " << c.rerank.seed << "\n"
    << "rerank.train_cap = " << c.rerank_train_cap << "\n"
    << "rerank.text = " << (c.rerank.text == CandidateText::prototype ? "prototype" : "reference") << "\n";
  static const char* metric_names[] = {"strict", "lenient", "asis", "ambiguity", "topk"};
  std::string metrics, ks;
  for (Metric m : c.eval.metrics) metrics += (metrics.empty() ? "" : ",") + std::string(metric_names[static_cast<int>(m)]);
  for (std::size_t k : c.eval.ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  o << "eval.metrics = " << metrics << "\n"
    << "eval.ks = " << ks << "\n"
    << "eval.seed = " << c.eval.seed << "\n"
    << "eval.reranked = " << (c.eval_reranked ? "true" : "false") << "\n";
  return o.str();
}

GenerationReport generate_mentions(const EntityCatalog& catalog, const std::vector<Document>& corpus,
                                   const GenerateSettings& settings, MentionStore& out) {
  const auto surfaces = unambiguous_surfaces(build_surface_index(catalog, settings.aliases));
  if (surfaces.empty()) throw DataError("catalog has no unambiguous surface forms");
  return generate_corpus(Matcher(surfaces), corpus, settings.window, out);
}

std::vector<LinkRecord> link_queries(const VectorIndex& index, const BiEncoder& model, const MentionStore& queries,
                                     const LinkOptions& options) {
  std::vector<LinkRecord> out;
  out.reserve(queries.size());
  for (const auto& q : queries.examples()) {
    out.push_back({q, link(index, to_float(encode_mention(q, model)), options)});
  }
  return out;
}

std::vector<LinkRecord> rerank_records(const std::vector<LinkRecord>& records, const PairScorer& scorer,
                                       std::size_t depth) {
  std::vector<LinkRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.query, rerank(r.result, r.query, scorer, depth)});
  return out;
}

std::vector<LinkResult> results_of(const std::vector<LinkRecord>& records) {
  std::vector<LinkResult> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.result);
  return out;
}

std::string serialize_manifest(const std::vector<StageRecord>& records) {
  std::string out = "stage\tinputs\toutput\toutput_hash\tseconds\n";
  for (const auto& r : records) {
    std::string inputs;
    for (const auto& [name, hash] : r.inputs) inputs += (inputs.empty() ? "" : ",") + name + "=" + hash;
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.3f", r.seconds);
    out += std::string(to_string(r.stage)) + "\t" + inputs + "\t" + r.output + "\t" + r.output_hash + "\t" + secs + "\n";
  }
  return out;
}

namespace {

class Runner {
 public:
  Runner(const PipelineConfig& c, std::ostream* log) : c_(c), log_(log) {}

  PipelineRun run(const std::set<Stage>& stages) {
    PipelineRun out;
    for (const auto& [stage, name] : kStageNames) {
      if (!stages.contains(stage)) continue;
      if (log_) *log_ << "[" << name << "] start\n";
      const auto t0 = std::chrono::steady_clock::now();
      StageRecord rec;
      rec.stage = stage;
      execute(stage, rec, out);
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log_) *log_ << "[" << name << "] done in " << rec.seconds << " s, " << rec.output << " " << rec.output_hash << "\n";
      out.stages.push_back(std::move(rec));
      io::write_file(c_.resolve(c_.paths.manifest), serialize_manifest(out.stages));
    }
    return out;
  }

 private:
  std::filesystem::path need(Stage stage, const char* name, const std::filesystem::path& p, StageRecord& rec) {
    const auto full = c_.resolve(p);
    if (p.empty() || !std::filesystem::exists(full)) {
      throw DataError("missing dependency for stage " + std::string(to_string(stage)) + ": " + name + " (" +
                      full.string() + ")");
    }
    rec.inputs.emplace_back(name, io::hash_path(full));
    return full;
  }

  void produced(StageRecord& rec, const std::filesystem::path& p) {
    const auto full = c_.resolve(p);
    rec.output = p.string();
    rec.output_hash = io::hash_path(full);
  }

  const EntityCatalog& catalog(const std::filesystem::path& path) {
    if (!catalog_) catalog_ = load_catalog(path);
    return *catalog_;
  }

  void execute(Stage stage, StageRecord& rec, PipelineRun& run) {
    const auto& p = c_.paths;
    switch (stage) {
      case Stage::generate: {
        const auto& cat = catalog(need(stage, "entities", p.entities, rec));
        const auto corpus = load_corpus(need(stage, "corpus", p.corpus, rec));
        MentionStore store;
        const auto report = generate_mentions(cat, corpus, c_.generate, store);
        save_mentions(store, c_.resolve(p.mentions));
        if (log_) {
          *log_ << "  " << report.documents << " documents, " << report.mentions << " mentions, " << report.entities
                << " entities\n";
        }
        produced(rec, p.mentions);
        break;
      }
      case Stage::train: {
        const auto& cat = catalog(need(stage, "entities", p.entities, rec));
        const auto store = load_mentions(need(stage, "mentions", p.mentions, rec));
        const auto result = train_loop(store, cat, c_.train);
        const auto ckpt = c_.resolve(p.checkpoint);
        save_bi_encoder(result.model, ckpt);
        io::write_file(ckpt.string() + ".loss.tsv", serialize_loss_log(result.log));
        if (log_ && !result.log.empty()) {
          *log_ << "  joint loss " << result.log.front().loss.joint << " -> " << result.log.back().loss.joint << "\n";
        }
        produced(rec, p.checkpoint);
        break;
      }
      case Stage::index: {
        const auto& cat = catalog(need(stage, "entities", p.entities, rec));
        const auto store = load_mentions(need(stage, "mentions", p.mentions, rec));
        const auto model = load_bi_encoder(need(stage, "checkpoint", p.checkpoint, rec));
        const auto protos = sample_prototypes(restrict_to_catalog(store, cat), cat, c_.link.k_proto, c_.link.seed);
        build_index(protos, model, cat, true).save(c_.resolve(p.index));
        produced(rec, p.index);
        break;
      }
      case Stage::link: {
        const auto index = VectorIndex::load(need(stage, "index", p.index, rec));
        const auto model = load_bi_encoder(need(stage, "checkpoint", p.checkpoint, rec));
        const auto queries = load_mentions(need(stage, "queries", p.queries, rec));
        std::set<std::string> domain;
        LinkOptions opts;
        opts.top_k = c_.link.top_k;
        opts.fusion = c_.link.fusion;
        if (!p.domain.empty()) {
          domain = parse_domain(io::read_file(need(stage, "domain", p.domain, rec)));
          opts.domain = &domain;
        }
        io::write_file(c_.resolve(p.results), serialize_link_records(link_queries(index, model, queries, opts)));
        produced(rec, p.results);
        break;
      }
      case Stage::rerank: {
        const auto& cat = catalog(need(stage, "entities", p.entities, rec));
        const auto store = load_mentions(need(stage, "mentions", p.mentions, rec));
        const auto index = VectorIndex::load(need(stage, "index", p.index, rec));
        const auto model = load_bi_encoder(need(stage, "checkpoint", p.checkpoint, rec));
        const auto records = load_link_records(need(stage, "results", p.results, rec));
        RerankConfig rc = c_.rerank;
        rc.fusion = c_.link.fusion;
        const auto train_store = cap_per_entity(restrict_to_catalog(store, cat), c_.rerank_train_cap);
        const auto trained = train_reranker(train_store, index, model, cat, rc);
        if (log_ && !trained.loss_log.empty()) {
          *log_ << "  " << trained.usable_queries << " usable, " << trained.skipped_queries << " skipped; loss "
                << trained.loss_log.front() << " -> " << trained.loss_log.back() << "\n";
        }
        save_reranker(trained.model, c_.resolve(p.reranker));
        const auto reranked = rerank_records(records, model_scorer(trained.model, index, cat, rc.text), rc.k);
        io::write_file(c_.resolve(p.reranked), serialize_link_records(reranked));
        produced(rec, p.reranked);
        break;
      }
      case Stage::eval: {
        const auto& cat = catalog(need(stage, "entities", p.entities, rec));
        const auto& results_path = c_.eval_reranked ? p.reranked : p.results;
        const auto records = load_link_records(need(stage, "results", results_path, rec));
        GoldDataset gold;
        gold.mentions = load_mentions(need(stage, "queries", p.queries, rec));
        if (!p.domain.empty()) gold.domain = parse_domain(io::read_file(need(stage, "domain", p.domain, rec)));
        const auto results = results_of(records);
        run.metrics = evaluate(results, gold, cat, c_.eval);
        io::write_file(c_.resolve(p.report), report_json(*run.metrics));
        produced(rec, p.report);
        break;
      }
    }
  }

  const PipelineConfig& c_;
  std::ostream* log_;
  std::optional<EntityCatalog> catalog_;
};

}  // namespace

PipelineRun run_pipeline(const PipelineConfig& config, const std::set<Stage>& stages, std::ostream* log) {
  return Runner(config, log).run(stages);
}

}  // namespace kriss
