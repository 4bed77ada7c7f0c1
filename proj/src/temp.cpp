#include "tcqa/temp.hpp"

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

ParamSpec matrix(std::string name, std::size_t rows, std::size_t cols) {
    return {std::move(name), rows, cols, InitScheme::uniform_for_dim(cols)};
}

ParamSpec bias(std::string name, std::size_t rows) {
    return {std::move(name), rows, 1, InitScheme::zeros()};
}

}  // namespace

std::string_view to_string(TypeAggregator a) {
    switch (a) {
        case TypeAggregator::highway: return "highway";
        case TypeAggregator::mean: return "mean";
        case TypeAggregator::max: return "max";
    }
    return "?";
}

std::string_view to_string(Fusion f) { return f == Fusion::gated ? "gated" : "concat"; }

TypeAggregator parse_aggregator(std::string_view s) {
    for (auto a : {TypeAggregator::highway, TypeAggregator::mean, TypeAggregator::max}) {
        if (to_string(a) == s) return a;
    }
    throw ConfigError("unknown entity aggregator '" + std::string(s) + "'");
}

Fusion parse_fusion(std::string_view s) {
    for (auto f : {Fusion::gated, Fusion::concat}) {
        if (to_string(f) == s) return f;
    }
    throw ConfigError("unknown fusion '" + std::string(s) + "'");
}

void TerConfig::validate() const {
    if (dim == 0) throw ConfigError("TER dimension must be at least 1");
    if (aggregator == TypeAggregator::highway && highway_k == 0) {
        throw ConfigError("highway aggregation needs at least one iteration");
    }
}

void TrrConfig::validate() const {
    if (dim == 0) throw ConfigError("TRR dimension must be at least 1");
    if (attention_hidden == 0) throw ConfigError("attention MLP needs a hidden layer");
}

Var apply(const Affine& layer, Var x) { return add_bias(matmul(layer.w, x), layer.b); }

Var highway_iterate(Var types, std::span<const HighwayStep> steps) {
    Var h = types;
    for (const auto& step : steps) {
        Var g = sigmoid(apply(step.gate, h));
        Var transformed = apply(step.transform, h);
        h = hadamard(g, transformed) + hadamard(one_minus(g), h);
    }
    return h;
}

Var ter_highway(Var types, std::span<const HighwayStep> steps, const Affine& out) {
    return apply(out, col_mean(highway_iterate(types, steps)));
}

Var ter_mean(Var types, const Affine& out) { return apply(out, col_mean(types)); }

Var ter_max(Var types, const Affine& out) { return apply(out, col_max(types)); }

Var ter_entity(std::optional<Var> entity, Var type_agg, const Affine& proj, bool inductive) {
    if (inductive) {
        if (entity) {
            throw ContractError("inductive entity enhancement must not read an entity embedding");
        }
        return apply(proj, type_agg);
    }
    if (!entity) {
        throw ContractError("transductive entity enhancement needs the entity embedding");
    }
    return apply(proj, concat_rows({type_agg, *entity}));
}

Var apply(const Mlp& mlp, Var x) { return apply(mlp.output, relu(apply(mlp.hidden, x))); }

Var attention_weights(std::span<const Var> type_vectors, const Mlp& mlp) {
    if (type_vectors.empty()) {
        throw PreconditionError("relation type attention needs at least one type vector");
    }
    return row_softmax(apply(mlp, hstack(type_vectors)));
}

Var trr_attention(std::span<const Var> type_vectors, const Mlp& mlp) {
    Var weights = attention_weights(type_vectors, mlp);
    return col_sum(hadamard(weights, hstack(type_vectors)));
}

std::pair<Var, Var> bidir_integrate(Var x, Var y, const PairWeights& w) {
    Var xy = relu(apply(w.forward, concat_rows({x - y, hadamard(x, y)})));
    Var yx = relu(apply(w.backward, concat_rows({y - x, hadamard(y, x)})));
    return {xy, yx};
}

Var gate_values(Var a, Var b, const GateWeights& w) {
    Var pre = matmul(w.w_first, a) + matmul(w.w_second, b);
    return sigmoid(pre + w.b_first + w.b_second);
}

Var gated_fuse(Var a, Var b, const GateWeights& w) {
    Var g = gate_values(a, b, w);
    return hadamard(g, a) + hadamard(one_minus(g), b);
}

Var interactive_concat(Var a, Var b) { return concat_rows({a, b, a + b, hadamard(a, b)}); }

Var concat_fuse(Var a, Var b, const Affine& w) { return apply(w, interactive_concat(a, b)); }

Var project_back(Var fused, const Affine& w) { return apply(w, fused); }

TrrOutput trr_enhance(Var entity, Var relation, Var relation_types, const TrrWeights& w) {
    auto [g_er, g_re] = bidir_integrate(entity, relation, w.entity_relation);
    auto [g_es, g_se] = bidir_integrate(entity, relation_types, w.entity_type);
    auto [g_rs, g_sr] = bidir_integrate(relation, relation_types, w.relation_type);
    (void)g_se;
    (void)g_sr;

    Var entity_fused, relation_fused;
    if (w.fusion == Fusion::gated) {
        entity_fused = gated_fuse(g_er, g_es, w.entity_gate);
        relation_fused = gated_fuse(g_re, g_rs, w.relation_gate);
    } else {
        entity_fused = concat_fuse(g_er, g_es, w.entity_concat);
        relation_fused = concat_fuse(g_re, g_rs, w.relation_concat);
    }
    return {project_back(entity_fused, w.entity_out), project_back(relation_fused, w.relation_out)};
}

TerLayer::TerLayer(TerConfig config, std::string prefix)
    : config_(config), prefix_(std::move(prefix)) {
    config_.validate();
}

std::vector<ParamSpec> TerLayer::param_specs() const {
    const std::size_t d = config_.dim;
    std::vector<ParamSpec> specs;
    if (config_.aggregator == TypeAggregator::highway) {
        for (std::size_t i = 0; i < config_.highway_k; ++i) {
            auto step = "hw" + std::to_string(i);
            specs.push_back(matrix(name(step + ".gate_w"), d, d));
            specs.push_back(bias(name(step + ".gate_b"), d));
            specs.push_back(matrix(name(step + ".transform_w"), d, d));
            specs.push_back(bias(name(step + ".transform_b"), d));
        }
    }
    specs.push_back(matrix(name("agg_w"), d, d));
    specs.push_back(bias(name("agg_b"), d));
    specs.push_back(matrix(name("entity_w"), d, config_.inductive ? d : 2 * d));
    specs.push_back(bias(name("entity_b"), d));
    return specs;
}

Var TerLayer::aggregate(Tape& tape, ParameterStore& store, Var types) const {
    Affine out{tape.parameter(store, name("agg_w")), tape.parameter(store, name("agg_b"))};
    switch (config_.aggregator) {
        case TypeAggregator::mean:
            return ter_mean(types, out);
        case TypeAggregator::max:
            return ter_max(types, out);
        case TypeAggregator::highway:
            break;
    }
    std::vector<HighwayStep> steps;
    for (std::size_t i = 0; i < config_.highway_k; ++i) {
        auto step = "hw" + std::to_string(i);
        steps.push_back({{tape.parameter(store, name(step + ".gate_w")),
                          tape.parameter(store, name(step + ".gate_b"))},
                         {tape.parameter(store, name(step + ".transform_w")),
                          tape.parameter(store, name(step + ".transform_b"))}});
    }
    return ter_highway(types, steps, out);
}

Var TerLayer::enhance(Tape& tape, ParameterStore& store, Var types, std::optional<Var> entity) const {
    if (config_.inductive && entity) {
        throw ContractError("inductive entity enhancement must not read an entity embedding");
    }
    Var agg = aggregate(tape, store, types);
    Affine proj{tape.parameter(store, name("entity_w")), tape.parameter(store, name("entity_b"))};
    return ter_entity(entity, agg, proj, config_.inductive);
}

TrrLayer::TrrLayer(TrrConfig config, std::string prefix)
    : config_(config), prefix_(std::move(prefix)) {
    config_.validate();
}

std::vector<ParamSpec> TrrLayer::param_specs() const {
    const std::size_t d = config_.dim;
    const std::size_t h = config_.attention_hidden;
    std::vector<ParamSpec> specs;
    specs.push_back(matrix(name("att.hidden_w"), h, d));
    specs.push_back(bias(name("att.hidden_b"), h));
    specs.push_back(matrix(name("att.out_w"), d, h));
    specs.push_back(bias(name("att.out_b"), d));
    for (const char* pair : {"er", "es", "rs"}) {
        std::string p = pair;
        specs.push_back(matrix(name(p + ".fwd_w"), 2 * d, 2 * d));
        specs.push_back(bias(name(p + ".fwd_b"), 2 * d));
        specs.push_back(matrix(name(p + ".bwd_w"), 2 * d, 2 * d));
        specs.push_back(bias(name(p + ".bwd_b"), 2 * d));
    }
    for (const char* side : {"entity", "relation"}) {
        std::string s = side;
        if (config_.fusion == Fusion::gated) {
            specs.push_back(matrix(name(s + "_gate.w_first"), 2 * d, 2 * d));
            specs.push_back(matrix(name(s + "_gate.w_second"), 2 * d, 2 * d));
            specs.push_back(bias(name(s + "_gate.b_first"), 2 * d));
            specs.push_back(bias(name(s + "_gate.b_second"), 2 * d));
        } else {
            specs.push_back(matrix(name(s + "_concat.w"), 2 * d, 8 * d));
            specs.push_back(bias(name(s + "_concat.b"), 2 * d));
        }
        specs.push_back(matrix(name(s + "_out.w"), d, 2 * d));
        specs.push_back(bias(name(s + "_out.b"), d));
    }
    return specs;
}

Mlp TrrLayer::bind_attention(Tape& tape, ParameterStore& store) const {
    return {{tape.parameter(store, name("att.hidden_w")), tape.parameter(store, name("att.hidden_b"))},
            {tape.parameter(store, name("att.out_w")), tape.parameter(store, name("att.out_b"))}};
}

TrrWeights TrrLayer::bind(Tape& tape, ParameterStore& store) const {
    auto affine = [&](const std::string& w, const std::string& b) {
        return Affine{tape.parameter(store, name(w)), tape.parameter(store, name(b))};
    };
    auto pair = [&](const std::string& p) {
        return PairWeights{affine(p + ".fwd_w", p + ".fwd_b"), affine(p + ".bwd_w", p + ".bwd_b")};
    };
    TrrWeights w;
    w.entity_relation = pair("er");
    w.entity_type = pair("es");
    w.relation_type = pair("rs");
    w.fusion = config_.fusion;
    for (const char* side : {"entity", "relation"}) {
        std::string s = side;
        auto& gate = s == "entity" ? w.entity_gate : w.relation_gate;
        auto& concat = s == "entity" ? w.entity_concat : w.relation_concat;
        auto& out = s == "entity" ? w.entity_out : w.relation_out;
        if (config_.fusion == Fusion::gated) {
            gate = {tape.parameter(store, name(s + "_gate.w_first")),
                    tape.parameter(store, name(s + "_gate.w_second")),
                    tape.parameter(store, name(s + "_gate.b_first")),
                    tape.parameter(store, name(s + "_gate.b_second"))};
        } else {
            concat = affine(s + "_concat.w", s + "_concat.b");
        }
        out = affine(s + "_out.w", s + "_out.b");
    }
    return w;
}

Var TrrLayer::relation_types(Tape& tape, ParameterStore& store,
                             std::span<const Var> type_vectors) const {
    return trr_attention(type_vectors, bind_attention(tape, store));
}

TrrOutput TrrLayer::enhance(Tape& tape, ParameterStore& store, Var entity, Var relation,
                            Var relation_types) const {
    return trr_enhance(entity, relation, relation_types, bind(tape, store));
}

}  // namespace tcqa
