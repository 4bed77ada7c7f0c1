#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tcqa/autodiff.hpp"
#include "tcqa/kg.hpp"
#include "tcqa/params.hpp"
#include "tcqa/query.hpp"
#include "tcqa/temp.hpp"
#include "tcqa/typegraph.hpp"

#ifndef TCQA_WITH_TEMP
#define TCQA_WITH_TEMP 1
#endif

namespace tcqa {

/// Which type-aware layers are plugged into the host model.
enum class TempMode : std::uint8_t { off, ter_only, trr_only, both };

std::string_view to_string(TempMode m);
TempMode parse_temp_mode(std::string_view s);

struct ModelConfig {
    std::size_t dim = 32;
    TempMode temp = TempMode::off;
    double margin = 24.0;
    std::size_t negative_samples = 16;
    std::size_t highway_k = 2;
    TypeAggregator entity_aggregator = TypeAggregator::highway;
    Fusion fusion = Fusion::gated;
    /// Entities are represented from their types only; entity embeddings are never read by TER.
    bool inductive = false;

    bool ter_enabled() const { return temp == TempMode::ter_only || temp == TempMode::both; }
    bool trr_enabled() const { return temp == TempMode::trr_only || temp == TempMode::both; }

    void validate() const;
    nlohmann::json to_json() const;
    /// Missing keys keep their defaults; unknown keys raise ConfigError.
    static ModelConfig from_json(const nlohmann::json& j);
};

/// One point per DNF branch.
struct QueryEmbedding {
    std::vector<Var> branches;
};

/// Translational point-embedding query model (GQE-style) with the type-aware
/// layers as an optional plug-in.
///
/// Anchors and scored entities go through the entity enhancer when TER is on.
/// Each projection edge runs the relation enhancer when TRR is on and then
/// adds the (enhanced) relation vector. Intersections are a permutation
/// invariant deep set; unions are answered per DNF branch and scored by the
/// closest branch.
class Model {
public:
    /// `types_source` supplies vocabulary sizes and entity type assertions.
    /// `seen` lists entities observed during training; it only matters for
    /// inductive models without TER, which cannot represent other entities.
    Model(ModelConfig config, const KnowledgeGraph& types_source, const TypeGraph& type_graph,
          std::uint64_t seed, std::optional<std::set<EntityId>> seen = std::nullopt);

    /// Restores parameters and config from a checkpoint written by `save`.
    static Model load(const std::filesystem::path& path, const KnowledgeGraph& types_source,
                      const TypeGraph& type_graph,
                      std::optional<std::set<EntityId>> seen = std::nullopt);
    void save(const std::filesystem::path& path) const;

    const ModelConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    std::size_t num_entities() const { return entity_types_.size(); }
    bool is_seen(EntityId e) const;
    std::vector<EntityId> seen_entities() const;

    /// Records one forward pass on its own tape. Entity representations and
    /// relation type aggregates are computed once per pass.
    class Forward {
    public:
        explicit Forward(Model& model) : model_(model) {}
        Forward(const Forward&) = delete;
        Forward& operator=(const Forward&) = delete;

        Tape& tape() { return tape_; }

        Var entity(EntityId e);
        Var relation(RelationId r);
        Var relation_types(RelationId r);
        QueryEmbedding embed(const QueryDAG& q);
        /// −min over branches of the L1 distance to the entity representation.
        Var score(const QueryEmbedding& qe, EntityId e);
        /// Mean over negatives of max(0, γ − score(pos) + score(neg)).
        Var loss(const QueryEmbedding& qe, EntityId positive, std::span<const EntityId> negatives);
        Var loss(const QueryDAG& q, EntityId positive, std::span<const EntityId> negatives);
        /// Plain score of every entity, indexed by entity id; records entity
        /// representations on the tape but no distance nodes.
        std::vector<double> score_values(const QueryEmbedding& qe);

    private:
        Var type_matrix(std::span<const TypeId> types);
        Var intersect(std::span<const Var> branches);

        Model& model_;
        Tape tape_;
        std::unordered_map<EntityId, Var> entities_;
        std::unordered_map<RelationId, Var> relation_types_;
    };

    /// Score of every entity against `q`, indexed by entity id. Throws
    /// ContractError if some entity cannot be represented.
    std::vector<double> score_all(const QueryDAG& q);
    double score(const QueryDAG& q, EntityId e);

private:
    void register_parameters();
    const std::vector<TypeId>& relation_types_of(RelationId r) const;

    ModelConfig config_;
    ParameterStore params_;
    std::vector<std::vector<TypeId>> entity_types_;
    std::vector<std::vector<TypeId>> relation_types_;
    std::size_t num_relations_ = 0;
    std::size_t num_types_ = 0;
    std::vector<bool> seen_;
    std::optional<TerLayer> ter_;
    std::optional<TrrLayer> trr_;
};

}  // namespace tcqa
