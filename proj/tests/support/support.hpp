#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tcqa/autodiff.hpp"
#include "tcqa/kg.hpp"
#include "tcqa/metrics.hpp"
#include "tcqa/params.hpp"
#include "tcqa/query.hpp"

namespace tcqa::testing {

std::filesystem::path data_dir(const std::string& name);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

struct RandomKgSpec {
    std::size_t max_entities = 12;
    std::size_t max_relations = 3;
    std::size_t max_triples = 30;
    std::size_t max_types = 4;
    std::size_t max_assertions = 20;
};

/// Random graph with named entities e0.., relations r0.., types t0... Some
/// entities may stay untyped.
KnowledgeGraph random_kg(std::mt19937_64& rng, const RandomKgSpec& spec);

/// Head and tail type sets per relation, computed by scanning the raw
/// assertion list for every candidate type.
struct NaiveRelationTypes {
    std::set<TypeId> head;
    std::set<TypeId> tail;
};
std::map<RelationId, NaiveRelationTypes> naive_type_graph(const KnowledgeGraph& kg);

/// Answers by enumerating every assignment of the existential variables and
/// the target over all entities.
std::set<EntityId> brute_force_answers(const KnowledgeGraph& kg, Structure s,
                                       const std::vector<EntityId>& anchors,
                                       const std::vector<RelationId>& relations);

/// Random anchors and relations for a structure (the answer set may be empty).
QueryDAG random_grounding(std::mt19937_64& rng, const KnowledgeGraph& kg, Structure s);

/// MRR and Hits@K written out term by term.
double naive_mrr(const std::vector<std::vector<std::size_t>>& ranks);
double naive_hits(const std::vector<std::vector<std::size_t>>& ranks, std::size_t k);

/// Rank of each target by sorting the candidate list.
std::vector<std::size_t> naive_ranks(const std::vector<double>& scores, const std::vector<EntityId>& targets,
                                     const std::vector<EntityId>& answers);

/// Largest |analytic − numeric| / max(|analytic|, |numeric|, 1e-3) over all
/// coordinates of all inputs, using central differences.
///
/// `fn` builds the computation from constant inputs; a non-scalar output is
/// reduced with fixed random weights so every output coordinate is checked.
struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;
GradCheck grad_check(const TapeFn& fn, std::vector<Tensor> inputs, std::uint64_t seed, double h = 1e-5);

/// Same check against every scalar of a ParameterStore. `fn` evaluates the
/// loss from the store's current values and, when asked, runs backward so the
/// store's gradient slots hold the analytic gradient.
using ValueFn = std::function<double(bool backward)>;
GradCheck grad_check_values(ParameterStore& store, const ValueFn& fn, double h = 1e-5);

using StoreFn = std::function<Var(Tape&)>;
GradCheck grad_check_store(ParameterStore& store, const StoreFn& fn, double h = 1e-5);

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double bound = 1.0);

}  // namespace tcqa::testing
