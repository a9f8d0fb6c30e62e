#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgsq/error.hpp"

namespace kgsq {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  EntityId tail = 0;
  RelationId relation = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t h = (std::uint64_t{t.head} << 32) ^ t.tail;
    h ^= std::uint64_t{t.relation} * 0x9e3779b97f4a7c15ULL;
    h ^= h >> 29;
    return static_cast<std::size_t>(h * 0xbf58476d1ce4e5b9ULL);
  }
};

/// Entity and relation names with ids assigned by first appearance.
/// Relation names cover original relations only; augmented relation r + M
/// has no name of its own.
class Vocabulary {
public:
  EntityId add_entity(std::string_view name);
  RelationId add_relation(std::string_view name);

  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  /// Throws UnknownEntityError.
  EntityId entity_id(std::string_view name) const;

  const std::string& entity_name(EntityId id) const { return entity_names_.at(id); }
  const std::string& relation_name(RelationId id) const { return relation_names_.at(id); }

  std::size_t entity_count() const { return entity_names_.size(); }
  std::size_t relation_count() const { return relation_names_.size(); }

  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }

  void set_type(EntityId id, std::string type);
  /// Empty string when the entity is untyped.
  const std::string& type_of(EntityId id) const;
  bool has_type(EntityId id) const { return entity_types_.count(id) != 0; }
  const std::map<EntityId, std::string>& entity_types() const { return entity_types_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.entity_names_ == b.entity_names_ && a.relation_names_ == b.relation_names_ &&
           a.entity_types_ == b.entity_types_;
  }

private:
  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  std::map<EntityId, std::string> entity_types_;
};

struct KnowledgeGraph {
  Vocabulary vocabulary;
  std::vector<Triple> triples;
  bool augmented = false;
  /// Duplicate input lines dropped during ingestion.
  std::size_t duplicates_dropped = 0;

  /// Original relation count M. Augmented ids occupy [M, 2M).
  std::size_t original_relation_count() const { return vocabulary.relation_count(); }
  std::size_t total_relation_count() const {
    return augmented ? 2 * vocabulary.relation_count() : vocabulary.relation_count();
  }

  friend bool operator==(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    return a.vocabulary == b.vocabulary && a.triples == b.triples && a.augmented == b.augmented;
  }
};

/// Parses `head<TAB>relation<TAB>tail` lines; `#` lines and blank lines are skipped.
KnowledgeGraph ingest_triples(std::istream& source);
KnowledgeGraph ingest_triples_file(const std::string& path);

/// Tags entities with `entity<TAB>type` lines. Entities must already exist.
void ingest_entity_types(std::istream& source, KnowledgeGraph& graph);
void ingest_entity_types_file(const std::string& path, KnowledgeGraph& graph);

/// Appends (t, h, r + M) for every (h, t, r). Original triples keep their positions.
KnowledgeGraph augment(const KnowledgeGraph& graph);

/// Inverse of augment: keeps the first half, clears the flag.
KnowledgeGraph strip_augmentation(const KnowledgeGraph& graph);

struct HoldoutSplit {
  KnowledgeGraph train;
  std::vector<Triple> test;
};

/// Moves floor(fraction * |triples|) triples to a test list. A candidate is
/// only accepted if every entity and relation it uses still appears in train.
HoldoutSplit split_holdout(const KnowledgeGraph& graph, double fraction, std::uint64_t seed);

/// Writes triples back as `head<TAB>relation<TAB>tail` lines (original relations only).
void render_triples(const Vocabulary& vocab, const std::vector<Triple>& triples, std::ostream& sink);
void render_entity_types(const Vocabulary& vocab, std::ostream& sink);

/// Resolves triple lines against an existing vocabulary; never adds names.
/// Unknown names raise UnknownEntityError.
std::vector<Triple> resolve_triples(std::istream& source, const Vocabulary& vocab);

}  // namespace kgsq
