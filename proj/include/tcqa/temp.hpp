#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tcqa/autodiff.hpp"
#include "tcqa/params.hpp"

namespace tcqa {

// ---------------------------------------------------------------------------
// Type-aware entity and relation layers.
//
// The free functions below take their weights as Vars so the same code runs
// on trained parameters (bound from a ParameterStore) and on hand-built
// constants in tests. TerLayer and TrrLayer own the parameter naming and
// registration for a model.
// ---------------------------------------------------------------------------

enum class TypeAggregator : std::uint8_t { highway, mean, max };
enum class Fusion : std::uint8_t { gated, concat };

std::string_view to_string(TypeAggregator a);
std::string_view to_string(Fusion f);
TypeAggregator parse_aggregator(std::string_view s);
Fusion parse_fusion(std::string_view s);

struct TerConfig {
    std::size_t dim = 32;
    std::size_t highway_k = 2;
    TypeAggregator aggregator = TypeAggregator::highway;
    bool inductive = false;

    void validate() const;
};

struct TrrConfig {
    std::size_t dim = 32;
    Fusion fusion = Fusion::gated;
    /// Width of the attention MLP's single hidden layer.
    std::size_t attention_hidden = 32;

    void validate() const;
};

/// w·x + b, with b broadcast over the columns of x.
struct Affine {
    Var w;
    Var b;
};

Var apply(const Affine& layer, Var x);

/// Per-iteration highway weights: gate (W_i, b_i) and transform (W'_i, b'_i).
struct HighwayStep {
    Affine gate;
    Affine transform;
};

/// Runs the highway update once per step on the d×n type matrix:
///   g = σ(W_i H + b_i);  H ← g ∗ (W'_i H + b'_i) + (1 − g) ∗ H
Var highway_iterate(Var types, std::span<const HighwayStep> steps);

/// Highway aggregation followed by column mean and the output affine map,
/// reducing d×n type vectors to one d×1 vector.
Var ter_highway(Var types, std::span<const HighwayStep> steps, const Affine& out);
Var ter_mean(Var types, const Affine& out);
Var ter_max(Var types, const Affine& out);

/// Enhanced entity representation. Transductive: proj.w (d×2d) applied to
/// [type_agg; entity]. Inductive: proj.w (d×d) applied to type_agg alone; an
/// entity vector must not be supplied (ContractError).
Var ter_entity(std::optional<Var> entity, Var type_agg, const Affine& proj, bool inductive);

/// Hidden layer with Relu, linear output; applied column-wise.
struct Mlp {
    Affine hidden;
    Affine output;
};

Var apply(const Mlp& mlp, Var x);

/// d×n per-coordinate attention weights over the relation's type vectors;
/// every row sums to one.
Var attention_weights(std::span<const Var> type_vectors, const Mlp& mlp);
/// Σ_i a_i ⊙ type_i.
Var trr_attention(std::span<const Var> type_vectors, const Mlp& mlp);

/// Forward (x,y) and backward (y,x) integration weights of one pair kind.
struct PairWeights {
    Affine forward;
    Affine backward;
};

/// Returns (Relu(W1 [x−y; x⊙y] + b1), Relu(W2 [y−x; y⊙x] + b2)), each 2d×1.
std::pair<Var, Var> bidir_integrate(Var x, Var y, const PairWeights& w);

/// g = σ(W3 a + W4 b + b3 + b4); g ∗ a + (1 − g) ∗ b.
struct GateWeights {
    Var w_first;
    Var w_second;
    Var b_first;
    Var b_second;
};

Var gate_values(Var a, Var b, const GateWeights& w);
Var gated_fuse(Var a, Var b, const GateWeights& w);
/// The stacked 8d input [a; b; a+b; a⊙b] of the concatenation fusion.
Var interactive_concat(Var a, Var b);
Var concat_fuse(Var a, Var b, const Affine& w);
/// Maps a fused 2d vector back to d.
Var project_back(Var fused, const Affine& w);

struct TrrWeights {
    PairWeights entity_relation;
    PairWeights entity_type;
    PairWeights relation_type;
    Fusion fusion = Fusion::gated;
    GateWeights entity_gate;
    GateWeights relation_gate;
    Affine entity_concat;
    Affine relation_concat;
    Affine entity_out;
    Affine relation_out;
};

struct TrrOutput {
    Var entity;
    Var relation;
};

/// Integrates (entity, relation, relation types) pairwise and fuses the
/// entity side (G^er, G^es) and the relation side (G^re, G^rs).
TrrOutput trr_enhance(Var entity, Var relation, Var relation_types, const TrrWeights& w);

// ---------------------------------------------------------------------------
// Parameter-owning layers.
// ---------------------------------------------------------------------------

class TerLayer {
public:
    explicit TerLayer(TerConfig config, std::string prefix = "ter");

    const TerConfig& config() const { return config_; }
    std::vector<ParamSpec> param_specs() const;

    /// Aggregates a d×n matrix of type vectors into d×1.
    Var aggregate(Tape& tape, ParameterStore& store, Var types) const;
    /// Full entity representation; `entity` must be absent in inductive mode.
    Var enhance(Tape& tape, ParameterStore& store, Var types, std::optional<Var> entity) const;

private:
    std::string name(std::string_view suffix) const { return prefix_ + "." + std::string(suffix); }

    TerConfig config_;
    std::string prefix_;
};

class TrrLayer {
public:
    explicit TrrLayer(TrrConfig config, std::string prefix = "trr");

    const TrrConfig& config() const { return config_; }
    std::vector<ParamSpec> param_specs() const;

    Var relation_types(Tape& tape, ParameterStore& store, std::span<const Var> type_vectors) const;
    TrrOutput enhance(Tape& tape, ParameterStore& store, Var entity, Var relation,
                      Var relation_types) const;

    TrrWeights bind(Tape& tape, ParameterStore& store) const;
    Mlp bind_attention(Tape& tape, ParameterStore& store) const;

private:
    std::string name(std::string_view suffix) const { return prefix_ + "." + std::string(suffix); }

    TrrConfig config_;
    std::string prefix_;
};

}  // namespace tcqa
