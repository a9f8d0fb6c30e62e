#include "kgsq/graph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

namespace kgsq {

EntityId Vocabulary::add_entity(std::string_view name) {
  auto [it, inserted] = entity_index_.try_emplace(std::string(name), static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.emplace_back(name);
  return it->second;
}

RelationId Vocabulary::add_relation(std::string_view name) {
  auto [it, inserted] =
      relation_index_.try_emplace(std::string(name), static_cast<RelationId>(relation_names_.size()));
  if (inserted) relation_names_.emplace_back(name);
  return it->second;
}

std::optional<EntityId> Vocabulary::find_entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> Vocabulary::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

EntityId Vocabulary::entity_id(std::string_view name) const {
  if (auto id = find_entity(name)) return *id;
  throw UnknownEntityError(std::string(name));
}

void Vocabulary::set_type(EntityId id, std::string type) {
  if (id >= entity_names_.size()) throw Error("set_type: entity id out of range");
  entity_types_[id] = std::move(type);
}

const std::string& Vocabulary::type_of(EntityId id) const {
  static const std::string kUntyped;
  auto it = entity_types_.find(id);
  return it == entity_types_.end() ? kUntyped : it->second;
}

namespace {

// Splits a data line on tabs. Returns false for comment and blank lines.
bool split_fields(std::string& line, std::vector<std::string_view>& fields) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  fields.clear();
  if (line.empty() || line.front() == '#') return false;
  std::string_view rest(line);
  while (true) {
    auto tab = rest.find('\t');
    fields.push_back(rest.substr(0, tab));
    if (tab == std::string_view::npos) break;
    rest.remove_prefix(tab + 1);
  }
  return true;
}

void require_fields(const std::vector<std::string_view>& fields, std::size_t expected, std::size_t line_no) {
  if (fields.size() != expected) {
    throw ParseError(line_no, "expected " + std::to_string(expected) + " tab-separated fields, got " +
                                  std::to_string(fields.size()));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].empty()) throw ParseError(line_no, "field " + std::to_string(i + 1) + " is empty");
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

}  // namespace

KnowledgeGraph ingest_triples(std::istream& source) {
  KnowledgeGraph graph;
  std::unordered_set<Triple, TripleHash> seen;
  std::vector<std::string_view> fields;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!split_fields(line, fields)) continue;
    require_fields(fields, 3, line_no);
    Triple t;
    t.head = graph.vocabulary.add_entity(fields[0]);
    t.relation = graph.vocabulary.add_relation(fields[1]);
    t.tail = graph.vocabulary.add_entity(fields[2]);
    if (seen.insert(t).second) {
      graph.triples.push_back(t);
    } else {
      ++graph.duplicates_dropped;
    }
  }
  if (graph.triples.empty()) throw Error("no triples");
  return graph;
}

KnowledgeGraph ingest_triples_file(const std::string& path) {
  auto in = open_or_throw(path);
  return ingest_triples(in);
}

void ingest_entity_types(std::istream& source, KnowledgeGraph& graph) {
  std::vector<std::string_view> fields;
  std::string line;
  std::size_t line_no = 0;
  // Validate everything before touching the graph.
  std::vector<std::pair<EntityId, std::string>> updates;
  while (std::getline(source, line)) {
    ++line_no;
    if (!split_fields(line, fields)) continue;
    require_fields(fields, 2, line_no);
    auto id = graph.vocabulary.find_entity(fields[0]);
    if (!id) throw UnknownEntityError(std::string(fields[0]), "line " + std::to_string(line_no));
    updates.emplace_back(*id, std::string(fields[1]));
  }
  for (auto& [id, type] : updates) graph.vocabulary.set_type(id, std::move(type));
}

void ingest_entity_types_file(const std::string& path, KnowledgeGraph& graph) {
  auto in = open_or_throw(path);
  ingest_entity_types(in, graph);
}

KnowledgeGraph augment(const KnowledgeGraph& graph) {
  if (graph.augmented) throw Error("graph is already augmented");
  if (graph.triples.empty()) throw Error("no triples");
  const auto m = static_cast<RelationId>(graph.vocabulary.relation_count());
  KnowledgeGraph out = graph;
  out.triples.reserve(2 * graph.triples.size());
  for (const auto& t : graph.triples) out.triples.push_back({t.tail, t.head, t.relation + m});
  out.augmented = true;
  return out;
}

KnowledgeGraph strip_augmentation(const KnowledgeGraph& graph) {
  if (!graph.augmented) throw Error("graph is not augmented");
  KnowledgeGraph out = graph;
  out.triples.resize(graph.triples.size() / 2);
  out.augmented = false;
  return out;
}

HoldoutSplit split_holdout(const KnowledgeGraph& graph, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error("holdout fraction must lie in (0, 1)");
  if (graph.augmented) throw Error("split_holdout expects an un-augmented graph");
  const auto n_test = static_cast<std::size_t>(fraction * static_cast<double>(graph.triples.size()));
  if (n_test < 1) throw Error("holdout fraction selects no triples");

  std::vector<std::size_t> entity_uses(graph.vocabulary.entity_count(), 0);
  std::vector<std::size_t> relation_uses(graph.vocabulary.relation_count(), 0);
  for (const auto& t : graph.triples) {
    ++entity_uses[t.head];
    if (t.tail != t.head) ++entity_uses[t.tail];
    ++relation_uses[t.relation];
  }

  std::vector<std::size_t> order(graph.triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_test(graph.triples.size(), false);
  std::size_t taken = 0;
  for (std::size_t idx : order) {
    if (taken == n_test) break;
    const auto& t = graph.triples[idx];
    if (entity_uses[t.head] < 2 || entity_uses[t.tail] < 2 || relation_uses[t.relation] < 2) continue;
    --entity_uses[t.head];
    if (t.tail != t.head) --entity_uses[t.tail];
    --relation_uses[t.relation];
    in_test[idx] = true;
    ++taken;
  }
  if (taken < n_test) {
    throw Error("cannot hold out " + std::to_string(n_test) + " triples without orphaning an entity or relation");
  }

  HoldoutSplit split;
  split.train.vocabulary = graph.vocabulary;
  for (std::size_t i = 0; i < graph.triples.size(); ++i) {
    (in_test[i] ? split.test : split.train.triples).push_back(graph.triples[i]);
  }
  return split;
}

void render_triples(const Vocabulary& vocab, const std::vector<Triple>& triples, std::ostream& sink) {
  for (const auto& t : triples) {
    sink << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.relation) << '\t'
         << vocab.entity_name(t.tail) << '\n';
  }
}

void render_entity_types(const Vocabulary& vocab, std::ostream& sink) {
  for (const auto& [id, type] : vocab.entity_types()) sink << vocab.entity_name(id) << '\t' << type << '\n';
}

std::vector<Triple> resolve_triples(std::istream& source, const Vocabulary& vocab) {
  std::vector<Triple> out;
  std::vector<std::string_view> fields;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (!split_fields(line, fields)) continue;
    require_fields(fields, 3, line_no);
    const std::string where = "line " + std::to_string(line_no);
    auto h = vocab.find_entity(fields[0]);
    if (!h) throw UnknownEntityError(std::string(fields[0]), where);
    auto r = vocab.find_relation(fields[1]);
    if (!r) throw UnknownRelationError(std::string(fields[1]), where);
    auto t = vocab.find_entity(fields[2]);
    if (!t) throw UnknownEntityError(std::string(fields[2]), where);
    out.push_back({*h, *t, *r});
  }
  return out;
}

}  // namespace kgsq
