#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tcqa/ids.hpp"
#include "tcqa/kg.hpp"

namespace tcqa {

/// The nine positive query structures.
enum class Structure : std::uint8_t { p1, p2, p3, i2, i3, pi, ip, u2, up };

inline constexpr std::array<Structure, 9> kAllStructures = {
    Structure::p1, Structure::p2, Structure::p3, Structure::i2, Structure::i3,
    Structure::pi, Structure::ip, Structure::u2, Structure::up};

/// Structures used for training; pi/ip/2u/up are held out for evaluation.
inline constexpr std::array<Structure, 5> kTrainingStructures = {
    Structure::p1, Structure::p2, Structure::p3, Structure::i2, Structure::i3};

std::string_view to_string(Structure s);
/// Accepts "1p", "2p", ..., "up". Negation tags raise UnsupportedStructure.
Structure parse_structure(std::string_view tag);
std::size_t anchor_count(Structure s);
std::size_t relation_count(Structure s);

enum class Regime : std::uint8_t { generalization, deductive, inductive };

std::string_view to_string(Regime r);
Regime parse_regime(std::string_view tag);

struct QueryNode {
    enum class Kind : std::uint8_t { anchor, projection, intersection, union_, negation };

    Kind kind = Kind::anchor;
    EntityId entity{};        // anchors only
    RelationId relation{};    // projections only
    std::vector<std::size_t> inputs;

    bool operator==(const QueryNode&) const = default;
};

/// Computation DAG of a query. Nodes are stored children-first, so node order
/// is a topological order and the last node is the root (target variable).
///
/// Queries built with `make` lay their anchors and relations out in the
/// canonical order of the structure:
///   1p  a0.r0            2i  a0.r0 & a1.r1         ip  (a0.r0 & a1.r1).r2
///   2p  a0.r0.r1         3i  a0.r0 & a1.r1 & a2.r2 2u  a0.r0 | a1.r1
///   3p  a0.r0.r1.r2      pi  a0.r0.r1 & a1.r2      up  (a0.r0 | a1.r1).r2
class QueryDAG {
public:
    static QueryDAG make(Structure s, std::vector<EntityId> anchors,
                         std::vector<RelationId> relations);

    /// Arbitrary DAG; validated for a single root and children-first order.
    /// The structure tag is left empty.
    static QueryDAG from_nodes(std::vector<QueryNode> nodes);

    std::optional<Structure> structure() const { return structure_; }
    const std::vector<QueryNode>& nodes() const { return nodes_; }
    std::size_t root() const { return nodes_.size() - 1; }

    /// Anchors and relations in node order (canonical order for `make`).
    std::vector<EntityId> anchors() const;
    std::vector<RelationId> relations() const;

    /// Union-free branches of the disjunctive normal form. A union-free query
    /// yields itself.
    std::vector<QueryDAG> dnf_branches() const;

    bool operator==(const QueryDAG&) const = default;

private:
    std::optional<Structure> structure_;
    std::vector<QueryNode> nodes_;
};

using AnswerSet = std::vector<EntityId>;  // ascending, unique

/// Exact answers by bottom-up set evaluation of the DAG over `kg`.
AnswerSet answer_query(const KnowledgeGraph& kg, const QueryDAG& q);

struct QueryRecord {
    QueryDAG query;
    AnswerSet answers;       // on the regime graph
    AnswerSet easy_answers;  // on the training graph

    /// Answers not reachable on the training graph.
    AnswerSet hard_answers() const;

    bool operator==(const QueryRecord&) const = default;
};

struct QuerySet {
    Regime regime = Regime::deductive;
    std::vector<QueryRecord> queries;

    std::map<Structure, std::size_t> counts() const;
    /// Records of one structure, in order.
    std::vector<const QueryRecord*> of(Structure s) const;

    bool operator==(const QuerySet&) const = default;
};

inline constexpr std::size_t kRetryBudget = 10'000;

/// Samples `count` distinct evaluation queries for `regime`.
///
/// Queries are grounded by a reverse random walk from a uniformly chosen
/// answer entity of the regime graph (G_test). Answers are computed exactly on
/// both the regime graph and G_train. Generalization queries are kept only when
/// they have an answer missing from G_train; inductive queries start from an
/// entity that has no training edge.
QuerySet generate_queries(const SplitGraphs& splits, Structure structure, std::size_t count,
                          Regime regime, std::uint64_t seed);

/// Samples training queries on a single graph; answers and easy answers are
/// both taken on `kg`.
QuerySet generate_training_queries(const KnowledgeGraph& kg, Structure structure,
                                   std::size_t count, Regime regime, std::uint64_t seed);

/// JSON lines: one object per query with fields structure, anchors, relations,
/// answers, easy_answers and regime.
void serialize_queries(const QuerySet& qs, const std::filesystem::path& path);
QuerySet load_queries(const std::filesystem::path& path);

/// Concatenates query sets of one regime.
QuerySet merge(const std::vector<QuerySet>& sets);

}  // namespace tcqa
