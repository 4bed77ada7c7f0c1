#pragma once

#include <map>
#include <string>
#include <vector>

#include "tcqa/ids.hpp"
#include "tcqa/kg.hpp"

namespace tcqa {

/// A set of type ids kept sorted and deduplicated.
using TypeSet = std::vector<TypeId>;

struct RelationTypes {
    TypeSet head;  // intersection of head-entity types over the relation's assertions
    TypeSet tail;  // same for tails
    TypeSet all;   // head ∪ tail, ascending
};

/// (head type set, relation, tail type set) as observed on one assertion.
struct TypeGraphEdge {
    TypeSet head;
    RelationId relation;
    TypeSet tail;

    auto operator<=>(const TypeGraphEdge&) const = default;
};

/// Types as nodes, relations as edges. Relation type sets are the
/// intersection of the types of the relation's head (tail) entities; an empty
/// intersection becomes {UNKNOWN}. Untyped entities count as {UNKNOWN}.
class TypeGraph {
public:
    const TypeSet& nodes() const { return nodes_; }
    /// Relations that occur in at least one assertion, ascending.
    std::vector<RelationId> edges() const;
    const std::vector<TypeGraphEdge>& labeled_edges() const { return labeled_edges_; }

    bool contains(RelationId r) const { return relations_.contains(r); }
    const RelationTypes& relation(RelationId r) const;
    const TypeSet& head_types(RelationId r) const { return relation(r).head; }
    const TypeSet& tail_types(RelationId r) const { return relation(r).tail; }

    /// JSON `{nodes, edges:[{relation, head_types, tail_types}]}` using names
    /// when `kg` is supplied.
    std::string to_json(const KnowledgeGraph& kg) const;
    std::string to_dot(const KnowledgeGraph& kg) const;

private:
    friend TypeGraph build_type_graph(const KnowledgeGraph& kg);

    TypeSet nodes_;
    std::map<RelationId, RelationTypes> relations_;
    std::vector<TypeGraphEdge> labeled_edges_;
};

TypeGraph build_type_graph(const KnowledgeGraph& kg);

/// All types of `r` in ascending id order; position i is the i-th relation
/// type. Throws LookupError if `r` has no assertions in the graph.
const TypeSet& relation_type_list(const TypeGraph& tg, RelationId r);

}  // namespace tcqa
