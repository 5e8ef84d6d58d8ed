#include <cstdio>
#include <iostream>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "kriss/checkpoint.hpp"
#include "kriss/error.hpp"
#include "kriss/evaluation.hpp"
#include "kriss/io.hpp"
#include "kriss/pipeline.hpp"
#include "kriss/prototype_index.hpp"
#include "kriss/reranker.hpp"
#include "kriss/synthetic.hpp"
#include "kriss/trainer.hpp"

namespace fs = std::filesystem;
using namespace kriss;

namespace {

bool on_off(const std::string& v) { return v == "on"; }

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Random seed")->capture_default_str();
}

void write_or_print(const fs::path& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text;
  } else {
    io::write_file(out, text);
  }
}

struct OntologyArgs {
  fs::path entities, out;
  bool no_aliases = false;
  bool exact = false;
  std::uint64_t seed = kDefaultSeed;
};

void setup_ontology(CLI::App& app) {
  auto* ont = app.add_subcommand("ontology", "Validate a catalog or report ambiguous surfaces");
  ont->require_subcommand(1);
  auto args = std::make_shared<OntologyArgs>();

  auto* validate = ont->add_subcommand("validate", "Parse and validate entities.jsonl");
  validate->add_option("--entities", args->entities)->required();
  add_seed(validate, args->seed);
  validate->callback([args] {
    const auto catalog = load_catalog(args->entities);
    const auto index = build_surface_index(catalog, true);
    std::size_t ambiguous = 0;
    for (const auto& [surface, ids] : index.entries()) ambiguous += ids.size() >= 2;
    std::cout << "entities\t" << catalog.size() << "\nsurfaces\t" << index.size() << "\nambiguous_surfaces\t"
              << ambiguous << "\n";
  });

  auto* report = ont->add_subcommand("ambiguity-report", "List surfaces shared by two or more entities (TSV)");
  report->add_option("--entities", args->entities)->required();
  report->add_option("--out", args->out, "Output file (default stdout)");
  report->add_flag("--no-aliases", args->no_aliases, "Only canonical names");
  report->add_flag("--exact", args->exact, "Case-sensitive matching");
  add_seed(report, args->seed);
  report->callback([args] {
    const auto catalog = load_catalog(args->entities);
    const SurfaceIndex index(catalog, !args->no_aliases, args->exact ? SurfaceKey::exact : SurfaceKey::folded);
    std::string out = "surface\tcount\tentity_ids\n";
    for (const auto& [surface, ids] : index.entries()) {
      if (ids.size() < 2) continue;
      std::string joined;
      for (const auto& id : ids) joined += (joined.empty() ? "" : ",") + id;
      out += surface + "\t" + std::to_string(ids.size()) + "\t" + joined + "\n";
    }
    write_or_print(args->out, out);
  });
}

struct GenerateArgs {
  fs::path entities, corpus, out;
  std::size_t window = 64;
  std::string aliases = "on";
  std::uint64_t seed = kDefaultSeed;
};

void setup_generate(CLI::App& app) {
  auto a = std::make_shared<GenerateArgs>();
  auto* cmd = app.add_subcommand("generate", "Extract self-supervised mentions from a corpus");
  cmd->add_option("--entities", a->entities)->required();
  cmd->add_option("--corpus", a->corpus, "corpus.jsonl or a directory of .txt files")->required();
  cmd->add_option("--out", a->out, "mentions.jsonl")->required();
  cmd->add_option("--window", a->window, "Context tokens (split evenly)")->capture_default_str();
  cmd->add_option("--aliases", a->aliases, "Match aliases as well as names")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  add_seed(cmd, a->seed);
  cmd->callback([a] {
    const auto catalog = load_catalog(a->entities);
    MentionStore store;
    const auto r = generate_mentions(catalog, load_corpus(a->corpus), {a->window, on_off(a->aliases)}, store);
    save_mentions(store, a->out);
    std::cout << "documents\t" << r.documents << "\nmentions\t" << r.mentions << "\nentities\t" << r.entities << "\n";
  });
}

struct TrainArgs {
  fs::path mentions, entities, out, config;
  std::vector<std::string> overrides;
  std::uint64_t seed = kDefaultSeed;
};

void setup_train(CLI::App& app) {
  auto a = std::make_shared<TrainArgs>();
  auto* cmd = app.add_subcommand("train", "Train the mention and reference encoders");
  cmd->add_option("--mentions", a->mentions)->required();
  cmd->add_option("--entities", a->entities)->required();
  cmd->add_option("--out", a->out, "Checkpoint path")->required();
  cmd->add_option("--config", a->config, "key = value training config");
  cmd->add_option("--set", a->overrides, "Override a config key, e.g. --set steps=500");
  add_seed(cmd, a->seed);
  cmd->callback([a, cmd] {
    TrainConfig config = a->config.empty() ? TrainConfig{} : load_train_config(a->config);
    if (a->config.empty() || cmd->count("--seed") > 0) {
      config.seed = a->seed;
      config.encoder.seed = a->seed;
    }
    for (const auto& kv : a->overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || !set_train_config_key(config, kv.substr(0, eq), kv.substr(eq + 1))) {
        throw UsageError("bad --set '" + kv + "'");
      }
    }
    config.validate();
    const auto result = train_loop(load_mentions(a->mentions), load_catalog(a->entities), config);
    save_bi_encoder(result.model, a->out);
    io::write_file(a->out.string() + ".loss.tsv", serialize_loss_log(result.log));
    std::cout << serialize_loss_log(result.log);
  });
}

struct EncodeArgs {
  fs::path model, mentions, entities, out;
  bool description = false;
  std::uint64_t seed = kDefaultSeed;
};

void setup_encode(CLI::App& app) {
  auto a = std::make_shared<EncodeArgs>();
  auto* cmd = app.add_subcommand("encode", "Encode mentions (or entity references) to a KRSV vector file");
  cmd->add_option("--model", a->model)->required();
  auto* m = cmd->add_option("--mentions", a->mentions);
  auto* e = cmd->add_option("--entities", a->entities, "Encode reference texts instead");
  m->excludes(e);
  cmd->add_flag("--description", a->description, "Append descriptions to reference texts");
  cmd->add_option("--out", a->out, "vectors.bin")->required();
  add_seed(cmd, a->seed);
  cmd->callback([a] {
    if (a->mentions.empty() == a->entities.empty()) throw UsageError("give exactly one of --mentions, --entities");
    const auto model = load_bi_encoder(a->model);
    std::vector<float> rows;
    std::size_t count = 0;
    if (!a->mentions.empty()) {
      for (const auto& q : load_mentions(a->mentions).examples()) {
        const auto v = to_float(encode_mention(q, model));
        rows.insert(rows.end(), v.begin(), v.end());
        ++count;
      }
    } else {
      for (const auto& ent : load_catalog(a->entities)) {
        const auto v = to_float(encode_reference(ent, model, a->description));
        rows.insert(rows.end(), v.begin(), v.end());
        ++count;
      }
    }
    io::write_file(a->out, encode_vector_file(model.mention.config.dim, rows));
    std::cout << "vectors\t" << count << "\n";
  });
}

struct IndexArgs {
  fs::path model, mentions, entities, gold, index, out;
  std::size_t k_proto = 16;
  std::string references = "on";
  std::uint64_t seed = kDefaultSeed;
};

void setup_index(CLI::App& app) {
  auto a = std::make_shared<IndexArgs>();
  auto* idx = app.add_subcommand("index", "Build or extend a prototype index");
  idx->require_subcommand(1);

  auto* build = idx->add_subcommand("build", "Sample and encode prototypes");
  build->add_option("--model", a->model)->required();
  build->add_option("--mentions", a->mentions)->required();
  build->add_option("--entities", a->entities)->required();
  build->add_option("--k-proto", a->k_proto, "Prototypes per entity")->capture_default_str();
  build->add_option("--references", a->references, "Store reference vectors for fusion")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  build->add_option("--gold", a->gold, "Gold mentions appended as prototypes");
  build->add_option("--out", a->out, "Index directory")->required();
  add_seed(build, a->seed);
  build->callback([a] {
    const auto catalog = load_catalog(a->entities);
    const auto model = load_bi_encoder(a->model);
    const auto protos = sample_prototypes(restrict_to_catalog(load_mentions(a->mentions), catalog), catalog,
                                          a->k_proto, a->seed);
    auto index = build_index(protos, model, catalog, on_off(a->references));
    if (!a->gold.empty()) index = add_gold_prototypes(index, load_mentions(a->gold), model, catalog);
    index.save(a->out);
    std::cout << "prototypes\t" << index.size() << "\nreferences\t" << index.references().size() << "\n";
  });

  auto* add = idx->add_subcommand("add-gold", "Append gold mentions as prototypes, no retraining");
  add->add_option("--index", a->index)->required();
  add->add_option("--model", a->model)->required();
  add->add_option("--entities", a->entities)->required();
  add->add_option("--gold", a->gold)->required();
  add->add_option("--out", a->out, "Index directory")->required();
  add_seed(add, a->seed);
  add->callback([a] {
    const auto index = add_gold_prototypes(VectorIndex::load(a->index), load_mentions(a->gold),
                                           load_bi_encoder(a->model), load_catalog(a->entities));
    index.save(a->out);
    std::cout << "prototypes\t" << index.size() << "\n";
  });
}

struct LinkArgs {
  fs::path index, model, queries, domain, out;
  std::size_t top_k = 100;
  std::string fusion = "off";
  std::uint64_t seed = kDefaultSeed;
};

void setup_link(CLI::App& app) {
  auto a = std::make_shared<LinkArgs>();
  auto* cmd = app.add_subcommand("link", "Rank entities for each query mention");
  cmd->add_option("--index", a->index)->required();
  cmd->add_option("--model", a->model)->required();
  cmd->add_option("--queries", a->queries, "mentions.jsonl")->required();
  cmd->add_option("--top-k", a->top_k)->capture_default_str();
  cmd->add_option("--fusion", a->fusion)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  cmd->add_option("--domain", a->domain, "Restrict candidates to these ids (one per line)");
  cmd->add_option("--out", a->out, "results.jsonl (default stdout)");
  add_seed(cmd, a->seed);
  cmd->callback([a] {
    LinkOptions opts;
    opts.top_k = a->top_k;
    opts.fusion = on_off(a->fusion);
    std::set<std::string> domain;
    if (!a->domain.empty()) {
      domain = parse_domain(io::read_file(a->domain));
      opts.domain = &domain;
    }
    const auto records =
        link_queries(VectorIndex::load(a->index), load_bi_encoder(a->model), load_mentions(a->queries), opts);
    write_or_print(a->out, serialize_link_records(records));
  });
}

struct RerankArgs {
  fs::path model, reranker, mentions, index, entities, results, out;
  std::size_t train_cap = 80;
  std::string text = "prototype";
  std::string fusion = "off";
  std::size_t depth = RerankConfig{}.k;
  RerankConfig config;
  std::uint64_t seed = kDefaultSeed;
};

CandidateText parse_text(const std::string& s) {
  return s == "reference" ? CandidateText::reference : CandidateText::prototype;
}

void setup_rerank(CLI::App& app) {
  auto a = std::make_shared<RerankArgs>();
  auto* train = app.add_subcommand("rerank-train", "Train the cross-encoder re-ranker");
  train->add_option("--model", a->model, "Bi-encoder checkpoint")->required();
  train->add_option("--mentions", a->mentions, "Self-supervised mentions")->required();
  train->add_option("--index", a->index)->required();
  train->add_option("--entities", a->entities)->required();
  train->add_option("--out", a->out, "Re-ranker checkpoint")->required();
  train->add_option("--k", a->config.k, "Candidates per training query")->capture_default_str();
  train->add_option("--steps", a->config.steps)->capture_default_str();
  train->add_option("--batch", a->config.batch_queries)->capture_default_str();
  train->add_option("--lr", a->config.lr)->capture_default_str();
  train->add_option("--train-cap", a->train_cap, "Mentions per entity")->capture_default_str();
  train->add_option("--text", a->text)->check(CLI::IsMember({"prototype", "reference"}))->capture_default_str();
  train->add_option("--fusion", a->fusion)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  add_seed(train, a->seed);
  train->callback([a] {
    const auto catalog = load_catalog(a->entities);
    RerankConfig config = a->config;
    config.seed = a->seed;
    config.text = parse_text(a->text);
    config.fusion = on_off(a->fusion);
    const auto store = cap_per_entity(restrict_to_catalog(load_mentions(a->mentions), catalog), a->train_cap);
    const auto r = train_reranker(store, VectorIndex::load(a->index), load_bi_encoder(a->model), catalog, config);
    save_reranker(r.model, a->out);
    std::cout << "usable\t" << r.usable_queries << "\nskipped\t" << r.skipped_queries << "\n";
    for (std::size_t i = 0; i < r.loss_log.size(); ++i) std::cout << "loss\t" << i << "\t" << r.loss_log[i] << "\n";
  });

  auto* apply = app.add_subcommand("rerank", "Re-rank linking results with a trained cross-encoder");
  apply->add_option("--model", a->reranker, "Re-ranker checkpoint")->required();
  apply->add_option("--results", a->results)->required();
  apply->add_option("--index", a->index, "Index that produced the results")->required();
  apply->add_option("--entities", a->entities)->required();
  apply->add_option("--text", a->text)->check(CLI::IsMember({"prototype", "reference"}))->capture_default_str();
  apply->add_option("--depth", a->depth, "Leading candidates to re-rank (the K used in training)")
      ->capture_default_str();
  apply->add_option("--out", a->out, "reranked.jsonl (default stdout)");
  add_seed(apply, a->seed);
  apply->callback([a] {
    const auto model = load_reranker(a->reranker);
    const auto index = VectorIndex::load(a->index);
    const auto catalog = load_catalog(a->entities);
    const auto out = rerank_records(load_link_records(a->results), model_scorer(model, index, catalog, parse_text(a->text)),
                                    a->depth);
    write_or_print(a->out, serialize_link_records(out));
  });
}

struct EvalArgs {
  fs::path results, gold, entities, domain, out;
  std::string metrics = "strict,lenient,asis,ambiguity,topk";
  std::string ks = "1,5,10,50,100";
  std::string format = "json";
  std::uint64_t seed = kDefaultSeed;
};

void setup_eval(CLI::App& app) {
  auto a = std::make_shared<EvalArgs>();
  auto* cmd = app.add_subcommand("eval", "Score linking results");
  cmd->add_option("--results", a->results)->required();
  cmd->add_option("--gold", a->gold, "Gold mentions.jsonl aligned with the results")->required();
  cmd->add_option("--entities", a->entities)->required();
  cmd->add_option("--domain", a->domain, "domain_entities.txt");
  cmd->add_option("--metrics", a->metrics)->capture_default_str();
  cmd->add_option("--topk", a->ks)->capture_default_str();
  cmd->add_option("--format", a->format)->check(CLI::IsMember({"json", "tsv"}))->capture_default_str();
  cmd->add_option("--out", a->out, "Report file (default stdout)");
  add_seed(cmd, a->seed);
  cmd->callback([a] {
    EvalOptions opts;
    opts.metrics = parse_metrics(a->metrics);
    opts.ks = parse_ks(a->ks);
    opts.seed = a->seed;
    const auto gold = load_gold(a->gold, a->domain);
    const auto report =
        evaluate(results_of(load_link_records(a->results)), gold, load_catalog(a->entities), opts);
    write_or_print(a->out, a->format == "json" ? report_json(report) : report_tsv(report));
  });
}

struct PipelineArgs {
  fs::path config, out;
  std::string stages = "all";
  std::vector<std::string> overrides;
  std::size_t steps = 2000;
  std::size_t documents = 5000;
  std::uint64_t seed = kDefaultSeed;
};

void apply_overrides(PipelineConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("bad --set '" + kv + "'");
    set_pipeline_key(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

void setup_pipeline(CLI::App& app) {
  auto a = std::make_shared<PipelineArgs>();
  auto* cmd = app.add_subcommand("pipeline", "Run pipeline stages from a config file");
  cmd->add_option("--config", a->config)->required();
  cmd->add_option("--stages", a->stages, "Comma-separated: generate,train,index,link,rerank,eval or all")
      ->capture_default_str();
  cmd->add_option("--set", a->overrides, "Override a config key, e.g. --set link.fusion=on");
  add_seed(cmd, a->seed);
  cmd->callback([a, cmd] {
    auto config = load_pipeline_config(a->config);
    if (cmd->count("--seed") > 0) config.set_seed(a->seed);
    apply_overrides(config, a->overrides);
    config.train.validate();
    const auto run = run_pipeline(config, parse_stages(a->stages), &std::cerr);
    if (run.metrics) std::cout << report_json(*run.metrics);
  });

  auto* demo = app.add_subcommand("demo", "Build the synthetic world and run every stage on it");
  demo->add_option("--out", a->out, "Working directory")->required();
  demo->add_option("--steps", a->steps, "Training steps")->capture_default_str();
  demo->add_option("--documents", a->documents, "Synthetic corpus size")->capture_default_str();
  demo->add_option("--set", a->overrides, "Override a pipeline config key");
  add_seed(demo, a->seed);
  demo->callback([a] {
    SyntheticConfig sc;
    sc.documents = a->documents;
    sc.seed = a->seed;
    write_synthetic_world(make_synthetic_world(sc), a->out);
    PipelineConfig config;
    config.base = a->out;
    config.set_seed(a->seed);
    config.paths.queries = "heldout.jsonl";
    config.paths.domain = "domain_entities.txt";
    config.train.steps = a->steps;
    apply_overrides(config, a->overrides);
    config.train.validate();
    io::write_file(a->out / "pipeline.cfg", serialize_pipeline_config(config));
    const auto run = run_pipeline(config, parse_stages("all"), &std::cerr);
    if (run.metrics) std::cout << report_json(*run.metrics);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised entity linking toolkit"};
  app.require_subcommand(1);
  setup_ontology(app);
  setup_generate(app);
  setup_train(app);
  setup_encode(app);
  setup_index(app);
  setup_link(app);
  setup_rerank(app);
  setup_eval(app);
  setup_pipeline(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}
