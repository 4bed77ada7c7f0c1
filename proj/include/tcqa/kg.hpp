#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tcqa/ids.hpp"

namespace tcqa {

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    auto operator<=>(const Triple&) const = default;
};

struct TypeAssertion {
    EntityId entity;
    TypeId type;

    auto operator<=>(const TypeAssertion&) const = default;
};

/// Name <-> dense id table. Ids are assigned in first-appearance order.
class Vocabulary {
public:
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const;
    std::size_t size() const { return names_.size(); }
    bool contains(std::uint32_t id) const { return id < names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

/// Entities, relations, types, relation assertions and type assertions.
///
/// Relation assertions and type assertions have set semantics; duplicates are
/// dropped on insertion. The type vocabulary always holds the reserved
/// UNKNOWN type at id 0. Once built, a graph is only read.
class KnowledgeGraph {
public:
    KnowledgeGraph();

    /// Interns names as needed. Returns false if the assertion was already present.
    bool add_triple(std::string_view head, std::string_view relation, std::string_view tail);
    bool add_triple(const Triple& t);
    bool add_type(std::string_view entity, std::string_view type);
    bool add_type(EntityId e, TypeId c);

    EntityId intern_entity(std::string_view name) { return EntityId{entities_.intern(name)}; }
    RelationId intern_relation(std::string_view name) { return RelationId{relations_.intern(name)}; }
    TypeId intern_type(std::string_view name) { return TypeId{types_.intern(name)}; }

    const Vocabulary& entities() const { return entities_; }
    const Vocabulary& relations() const { return relations_; }
    const Vocabulary& types() const { return types_; }

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    std::size_t num_types() const { return types_.size(); }

    std::optional<EntityId> find_entity(std::string_view name) const;
    std::optional<RelationId> find_relation(std::string_view name) const;
    std::optional<TypeId> find_type(std::string_view name) const;

    bool has_entity(EntityId e) const { return entities_.contains(e.value); }
    bool has_relation(RelationId r) const { return relations_.contains(r.value); }
    bool has_type(TypeId c) const { return types_.contains(c.value); }
    bool contains(const Triple& t) const { return triple_set_.contains(t); }

    /// Relation assertions in insertion order.
    const std::vector<Triple>& triples() const { return triples_; }
    const std::vector<TypeAssertion>& type_assertions() const { return type_assertions_; }

    /// Tails reachable from `head` over `relation`, ascending.
    const std::vector<EntityId>& tails(EntityId head, RelationId relation) const;
    /// Incoming (head, relation) pairs of `tail`, in insertion order.
    const std::vector<std::pair<EntityId, RelationId>>& incoming(EntityId tail) const;

    /// Types asserted for `e`, strictly increasing. Throws LookupError for an unknown id.
    const std::vector<TypeId>& entity_types(EntityId e) const;

    /// Entities that occur in at least one relation assertion.
    std::set<EntityId> entities_in_triples() const;

    /// Creates an empty graph over the same vocabularies.
    KnowledgeGraph with_vocabulary_only() const;

private:
    void grow_entity_tables();

    Vocabulary entities_;
    Vocabulary relations_;
    Vocabulary types_;
    std::vector<Triple> triples_;
    std::set<Triple> triple_set_;
    std::vector<TypeAssertion> type_assertions_;
    std::set<TypeAssertion> type_set_;
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<EntityId>> forward_;
    std::vector<std::vector<std::pair<EntityId, RelationId>>> incoming_;
    std::vector<std::vector<TypeId>> entity_types_;
};

/// Free-function spelling of KnowledgeGraph::entity_types, returning a copy.
std::vector<TypeId> entity_types(const KnowledgeGraph& kg, EntityId e);

/// Reads a tab-separated triples file and a tab-separated entity/type file.
/// Lines starting with '#' and blank lines are skipped. An empty types path
/// loads no type assertions.
KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::filesystem::path& types_path);

/// Writes triples.tsv, types.tsv and vocab.json into `dir`.
void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& dir);
/// Inverse of save_kg; ids are restored from vocab.json.
KnowledgeGraph load_saved_kg(const std::filesystem::path& dir);

struct SplitGraphs {
    KnowledgeGraph train;
    KnowledgeGraph valid;  // train plus validation edges
    KnowledgeGraph test;   // valid plus test edges
    /// True when no entity of a test edge occurs in a training edge.
    bool inductive = false;
};

inline constexpr const char* kTrainFile = "train.tsv";
inline constexpr const char* kValidFile = "valid.tsv";
inline constexpr const char* kTestFile = "test.tsv";
inline constexpr const char* kTypesFile = "types.tsv";

/// Loads train.tsv, valid.tsv, test.tsv and types.tsv from `dir`. All three
/// graphs share one vocabulary built over the union of the files and the same
/// type assertions.
SplitGraphs load_splits(const std::filesystem::path& dir);

/// Builds splits from in-memory edge lists that already use one shared vocabulary.
SplitGraphs make_splits(const KnowledgeGraph& vocabulary_and_types,
                        const std::vector<Triple>& train_edges,
                        const std::vector<Triple>& valid_edges,
                        const std::vector<Triple>& test_edges);

}  // namespace tcqa
