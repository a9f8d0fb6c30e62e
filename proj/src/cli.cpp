#include "kgsq/cli.hpp"

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <pthread.h>

#include "CLI11.hpp"

#include "kgsq/evaluation.hpp"
#include "kgsq/graph.hpp"
#include "kgsq/model_store.hpp"
#include "kgsq/semquery.hpp"
#include "kgsq/service.hpp"
#include "kgsq/training.hpp"

namespace kgsq {

namespace {

struct IngestOptions {
  std::string triples;
  std::string types;
  double holdout = 0.0;
  std::uint64_t seed = 0;
  std::string train_out;
  std::string test_out;
};

struct TrainOptions {
  std::string triples;
  std::string types;
  std::string out;
  std::string config_file;
  std::string optimizer = "sgd";
  ModelConfig model;
};

struct EvalOptions {
  std::string model;
  std::string test;
  std::string train;
};

struct QueryOptions {
  std::string model;
  std::string task = "similar";
  std::string entity;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  std::size_t k = 10;
  std::string type_filter;
  std::string format = "table";
  bool include_self = false;
  bool cosine = false;
};

struct ServeOptions {
  std::string model;
  std::string host = "127.0.0.1";
  int port = 8080;
  long long ttl_seconds = 3600;
  std::size_t capacity = 10000;
  std::string static_dir;
};

// Reads `key=value` lines and fills any option of `cmd` that was not given
// on the command line. Flags therefore win over the file, and the file wins
// over defaults.
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, path + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = nullptr;
    try {
      opt = cmd.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ParseError(line_no, path + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void echo_config(const TrainOptions& o, std::ostream& err) {
  const auto& m = o.model;
  err << "# effective config\n"
      << "triples=" << o.triples << '\n'
      << "types=" << o.types << '\n'
      << "out=" << o.out << '\n'
      << "dim=" << m.dim << '\n'
      << "init_scale=" << m.init_scale << '\n'
      << "lr=" << m.lr << '\n'
      << "n_neg=" << m.n_neg << '\n'
      << "epochs=" << m.epochs << '\n'
      << "l2=" << m.l2 << '\n'
      << "seed=" << m.seed << '\n'
      << "optimizer=" << to_string(m.optimizer) << '\n'
      << "batch_size=" << m.batch_size << '\n';
}

int cmd_ingest(const IngestOptions& o, std::ostream& out) {
  KnowledgeGraph graph = ingest_triples_file(o.triples);
  if (!o.types.empty()) ingest_entity_types_file(o.types, graph);
  out << "entities=" << graph.vocabulary.entity_count() << " relations=" << graph.vocabulary.relation_count()
      << " triples=" << graph.triples.size() << " duplicates=" << graph.duplicates_dropped
      << " typed=" << graph.vocabulary.entity_types().size() << '\n';
  if (o.holdout > 0.0) {
    if (o.train_out.empty() || o.test_out.empty()) throw Error("--holdout needs --train-out and --test-out");
    const auto split = split_holdout(graph, o.holdout, o.seed);
    std::ofstream train_file(o.train_out), test_file(o.test_out);
    if (!train_file) throw Error("cannot open '" + o.train_out + "' for writing");
    if (!test_file) throw Error("cannot open '" + o.test_out + "' for writing");
    render_triples(graph.vocabulary, split.train.triples, train_file);
    render_triples(graph.vocabulary, split.test, test_file);
    out << "train=" << split.train.triples.size() << " test=" << split.test.size() << '\n';
  }
  return kExitOk;
}

int cmd_train(TrainOptions o, std::ostream& out, std::ostream& err) {
  o.model.optimizer = parse_optimizer(o.optimizer);
  o.model.validate();
  echo_config(o, err);

  KnowledgeGraph graph = ingest_triples_file(o.triples);
  if (!o.types.empty()) ingest_entity_types_file(o.types, graph);
  const KnowledgeGraph augmented = augment(graph);
  const auto model = train(augmented, o.model, [&](std::size_t epoch, double loss) {
    out << "epoch=" << epoch << " loss=" << std::setprecision(9) << loss << '\n';
  });
  save_model_file(model, o.out);
  return kExitOk;
}

std::vector<Triple> read_resolved(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return resolve_triples(in, vocab);
}

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  const auto model = load_model_file(o.model);
  const auto test = read_resolved(o.test, model.vocabulary);
  if (test.empty()) throw Error("no test triples in '" + o.test + "'");
  TripleSet known(test.begin(), test.end());
  for (const auto& t : read_resolved(o.train, model.vocabulary)) known.insert(t);
  const auto metrics = evaluate_link_prediction(model, test, known);
  out << std::setprecision(6) << "mrr=" << metrics.mrr;
  for (const auto& [k, v] : metrics.hits_at) out << " hits@" << k << '=' << v;
  out << '\n';
  return kExitOk;
}

int cmd_query(const QueryOptions& o, std::ostream& out) {
  const auto model = load_model_file(o.model);
  const auto& vocab = model.vocabulary;
  QuerySpec spec;
  spec.anchor = vocab.entity_id(o.entity);
  for (const auto& n : o.positives) spec.positives.push_back(vocab.entity_id(n));
  for (const auto& n : o.negatives) spec.negatives.push_back(vocab.entity_id(n));
  spec.k = o.k;
  if (!o.type_filter.empty()) spec.type_filter = o.type_filter;
  spec.exclude = !o.include_self;
  spec.similarity = o.cosine ? Similarity::cosine : Similarity::dot;

  RankedList results;
  if (o.task == "similar") {
    results = similar_entities(model, spec);
  } else if (o.task == "biased") {
    results = similar_with_bias(model, spec);
  } else {
    results = analogy_query(model, spec);
  }

  if (o.format == "json") {
    out << results_json(vocab, results).dump() << '\n';
    return kExitOk;
  }
  out << std::left << std::setw(6) << "rank" << std::setw(32) << "entity" << std::setw(16) << "type"
      << "score\n";
  std::size_t rank = 1;
  for (const auto& e : results.entries) {
    out << std::left << std::setw(6) << rank++ << std::setw(32) << vocab.entity_name(e.entity) << std::setw(16)
        << vocab.type_of(e.entity) << std::setprecision(6) << e.score << '\n';
  }
  return kExitOk;
}

int cmd_serve(const ServeOptions& o, std::ostream& out) {
  ServiceConfig cfg;
  cfg.ttl = std::chrono::seconds(o.ttl_seconds);
  cfg.capacity = o.capacity;
  cfg.static_dir = o.static_dir;

  // Route SIGINT/SIGTERM to a watcher thread that stops the server.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(load_model_file(o.model), cfg);
  if (!service.bind(o.host, o.port)) {
    pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
    throw Error("cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  out << "serving " << o.model << " on http://" << o.host << ':' << o.port << std::endl;

  std::atomic<bool> done{false};
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (!done) service.stop();
  });
  const bool ok = service.listen_after_bind();
  done = true;
  pthread_kill(watcher.native_handle(), SIGTERM);
  watcher.join();
  pthread_sigmask(SIG_UNBLOCK, &signals, nullptr);
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph embedding training and semantic queries", "kgsq"};
  app.require_subcommand(1);

  IngestOptions ingest_opts;
  auto* ingest = app.add_subcommand("ingest", "Parse triples, report vocabulary stats, optionally split a holdout");
  ingest->add_option("--triples", ingest_opts.triples, "Triple file (head<TAB>relation<TAB>tail)")->required();
  ingest->add_option("--types", ingest_opts.types, "Entity type file (entity<TAB>type)");
  ingest->add_option("--holdout", ingest_opts.holdout, "Fraction of triples to hold out");
  ingest->add_option("--seed", ingest_opts.seed, "Holdout seed");
  ingest->add_option("--train-out", ingest_opts.train_out, "Where to write training triples");
  ingest->add_option("--test-out", ingest_opts.test_out, "Where to write held-out triples");

  TrainOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a CP embedding model and write a .kgsq file");
  train_cmd->add_option("--triples", train_opts.triples, "Triple file")->required();
  train_cmd->add_option("--types", train_opts.types, "Entity type file");
  train_cmd->add_option("--out", train_opts.out, "Output model path")->required();
  train_cmd->add_option("--config", train_opts.config_file, "key=value config file; flags take precedence");
  train_cmd->add_option("--dim", train_opts.model.dim, "Embedding size");
  train_cmd->add_option("--init-scale", train_opts.model.init_scale, "Init standard deviation");
  train_cmd->add_option("--lr", train_opts.model.lr, "Learning rate");
  train_cmd->add_option("--n-neg", train_opts.model.n_neg, "Negatives per positive per side");
  train_cmd->add_option("--epochs", train_opts.model.epochs, "Training epochs");
  train_cmd->add_option("--l2", train_opts.model.l2, "L2 coefficient on touched rows");
  train_cmd->add_option("--seed", train_opts.model.seed, "PRNG seed");
  train_cmd->add_option("--optimizer", train_opts.optimizer, "sgd or adagrad")
      ->check(CLI::IsMember({"sgd", "adagrad"}));
  train_cmd->add_option("--batch-size", train_opts.model.batch_size, "Minibatch size");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "Filtered link-prediction metrics on held-out triples");
  eval->add_option("--model", eval_opts.model, "Model file")->required();
  eval->add_option("--test", eval_opts.test, "Held-out triples")->required();
  eval->add_option("--train", eval_opts.train, "Training triples (used as the filter set)")->required();

  QueryOptions query_opts;
  auto* query = app.add_subcommand("query", "Run a semantic query");
  query->add_option("--model", query_opts.model, "Model file")->required();
  query->add_option("--task", query_opts.task, "similar, biased or analogy")
      ->check(CLI::IsMember({"similar", "biased", "analogy"}));
  query->add_option("--entity", query_opts.entity, "Anchor entity name")->required();
  query->add_option("--positive", query_opts.positives, "Positive bias entity (repeatable)");
  query->add_option("--negative", query_opts.negatives, "Negative bias entity (repeatable)");
  query->add_option("--k", query_opts.k, "Result count")->check(CLI::PositiveNumber);
  query->add_option("--type", query_opts.type_filter, "Restrict results to this entity type");
  query->add_option("--format", query_opts.format, "table or json")->check(CLI::IsMember({"table", "json"}));
  query->add_flag("--include-self", query_opts.include_self, "Keep anchor and bias entities in results");
  query->add_flag("--cosine", query_opts.cosine, "Cosine similarity instead of dot product");

  ServeOptions serve_opts;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP query API");
  serve->add_option("--model", serve_opts.model, "Model file")->required();
  serve->add_option("--host", serve_opts.host, "Bind host");
  serve->add_option("--port", serve_opts.port, "Bind port");
  serve->add_option("--session-ttl", serve_opts.ttl_seconds, "Session lifetime in seconds");
  serve->add_option("--session-capacity", serve_opts.capacity, "Maximum live sessions");
  serve->add_option("--static-dir", serve_opts.static_dir, "Directory served at / (browse UI bundle)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitFailure;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_opts, out);
    if (*train_cmd) {
      if (!train_opts.config_file.empty()) apply_config_file(*train_cmd, train_opts.config_file);
      return cmd_train(train_opts, out, err);
    }
    if (*eval) return cmd_eval(eval_opts, out);
    if (*query) {
      if (query_opts.task == "similar" && (!query_opts.positives.empty() || !query_opts.negatives.empty())) {
        throw Error("--task similar takes no --positive/--negative");
      }
      if (query_opts.task == "biased" && !query_opts.negatives.empty()) {
        throw Error("--task biased takes no --negative");
      }
      return cmd_query(query_opts, out);
    }
    if (*serve) return cmd_serve(serve_opts, out);
  } catch (const ResolutionError& e) {
    err << "error: " << e.what() << '\n';
    // Training treats an unresolvable type line as a failed stage.
    return *train_cmd || *ingest ? kExitFailure : kExitUnresolved;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace kgsq
