#include "tcqa/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

constexpr const char* kEntityTable = "entity_emb";
constexpr const char* kRelationTable = "relation_emb";
constexpr const char* kTypeTable = "type_emb";
constexpr const char* kInterHiddenW = "inter.hidden_w";
constexpr const char* kInterHiddenB = "inter.hidden_b";
constexpr const char* kInterOutW = "inter.out_w";
constexpr const char* kInterOutB = "inter.out_b";

const std::vector<TypeId> kUnknownOnly = {kUnknownType};

}  // namespace

std::string_view to_string(TempMode m) {
    switch (m) {
        case TempMode::off: return "off";
        case TempMode::ter_only: return "ter_only";
        case TempMode::trr_only: return "trr_only";
        case TempMode::both: return "both";
    }
    return "?";
}

TempMode parse_temp_mode(std::string_view s) {
    for (auto m : {TempMode::off, TempMode::ter_only, TempMode::trr_only, TempMode::both}) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown temp mode '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
    if (dim == 0) throw ConfigError("dim must be at least 1");
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be finite and non-negative");
    if (negative_samples == 0) throw ConfigError("negative_samples must be at least 1");
    if (ter_enabled() && entity_aggregator == TypeAggregator::highway && highway_k == 0) {
        throw ConfigError("highway_k must be at least 1");
    }
#if !TCQA_WITH_TEMP
    if (temp != TempMode::off) {
        throw ConfigError("this build has the type-aware layers disabled; temp must be off");
    }
#endif
}

nlohmann::json ModelConfig::to_json() const {
    return {{"dim", dim},
            {"temp", to_string(temp)},
            {"margin", margin},
            {"negative_samples", negative_samples},
            {"highway_k", highway_k},
            {"entity_aggregator", to_string(entity_aggregator)},
            {"fusion", to_string(fusion)},
            {"inductive", inductive},
            {"distance", "l1"}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "dim") c.dim = value.get<std::size_t>();
            else if (key == "temp") c.temp = parse_temp_mode(value.get<std::string>());
            else if (key == "margin") c.margin = value.get<double>();
            else if (key == "negative_samples") c.negative_samples = value.get<std::size_t>();
            else if (key == "highway_k") c.highway_k = value.get<std::size_t>();
            else if (key == "entity_aggregator") c.entity_aggregator = parse_aggregator(value.get<std::string>());
            else if (key == "fusion") c.fusion = parse_fusion(value.get<std::string>());
            else if (key == "inductive") c.inductive = value.get<bool>();
            else if (key == "distance") {
                if (value.get<std::string>() != "l1") throw ConfigError("only the l1 distance is supported");
            } else {
                throw ConfigError("unknown model config key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
}

Model::Model(ModelConfig config, const KnowledgeGraph& types_source, const TypeGraph& type_graph,
             std::uint64_t seed, std::optional<std::set<EntityId>> seen)
    : config_(config),
      params_(seed),
      num_relations_(types_source.num_relations()),
      num_types_(types_source.num_types()) {
    config_.validate();
    entity_types_.resize(types_source.num_entities());
    for (std::uint32_t i = 0; i < types_source.num_entities(); ++i) {
        const auto& types = types_source.entity_types(EntityId{i});
        entity_types_[i] = types.empty() ? kUnknownOnly : types;
    }
    relation_types_.resize(num_relations_);
    for (std::uint32_t r = 0; r < num_relations_; ++r) {
        RelationId rel{r};
        relation_types_[r] = type_graph.contains(rel) ? relation_type_list(type_graph, rel) : kUnknownOnly;
    }
    seen_.assign(entity_types_.size(), !seen.has_value());
    if (seen) {
        for (EntityId e : *seen) {
            if (e.index() < seen_.size()) seen_[e.index()] = true;
        }
    }
#if TCQA_WITH_TEMP
    if (config_.ter_enabled()) {
        ter_.emplace(TerConfig{config_.dim, config_.highway_k, config_.entity_aggregator, config_.inductive});
    }
    if (config_.trr_enabled()) {
        trr_.emplace(TrrConfig{config_.dim, config_.fusion, config_.dim});
    }
#endif
    register_parameters();
}

void Model::register_parameters() {
    const std::size_t d = config_.dim;
    const auto emb = InitScheme::uniform_for_dim(d);
    params_.add({kEntityTable, entity_types_.size(), d, emb});
    params_.add({kRelationTable, num_relations_, d, emb});
    params_.add({kInterHiddenW, d, d, emb});
    params_.add({kInterHiddenB, d, 1, InitScheme::zeros()});
    params_.add({kInterOutW, d, d, emb});
    params_.add({kInterOutB, d, 1, InitScheme::zeros()});
#if TCQA_WITH_TEMP
    if (config_.temp != TempMode::off) {
        params_.add({kTypeTable, num_types_, d, emb});
    }
    if (ter_) {
        for (const auto& spec : ter_->param_specs()) params_.add(spec);
    }
    if (trr_) {
        for (const auto& spec : trr_->param_specs()) params_.add(spec);
    }
#endif
}

Model Model::load(const std::filesystem::path& path, const KnowledgeGraph& types_source,
                  const TypeGraph& type_graph, std::optional<std::set<EntityId>> seen) {
    nlohmann::json meta;
    ParameterStore stored = ParameterStore::load(path, &meta);
    if (!meta.contains("model_config")) {
        throw IoError(path.string() + " has no model configuration");
    }
    auto config = ModelConfig::from_json(meta.at("model_config"));
    Model model(config, types_source, type_graph, stored.seed(), std::move(seen));
    if (stored.size() != model.params_.size()) {
        throw IoError(path.string() + ": parameter count does not match the model configuration");
    }
    for (std::size_t i = 0; i < stored.size(); ++i) {
        const auto& want = model.params_.value(i);
        const auto& got = stored.value(i);
        if (stored.name(i) != model.params_.name(i) || !want.same_shape(got)) {
            throw IoError(path.string() + ": parameter '" + stored.name(i) + "' " + got.shape_string() +
                          " does not match the model (vocabulary changed?)");
        }
    }
    model.params_ = std::move(stored);
    return model;
}

void Model::save(const std::filesystem::path& path) const {
    params_.save(path, {{"model_config", config_.to_json()}});
}

bool Model::is_seen(EntityId e) const { return e.index() < seen_.size() && seen_[e.index()]; }

std::vector<EntityId> Model::seen_entities() const {
    std::vector<EntityId> out;
    for (std::uint32_t i = 0; i < seen_.size(); ++i) {
        if (seen_[i]) out.emplace_back(i);
    }
    return out;
}

const std::vector<TypeId>& Model::relation_types_of(RelationId r) const {
    if (r.index() >= relation_types_.size()) {
        throw LookupError("unknown relation id " + std::to_string(r.value));
    }
    return relation_types_[r.index()];
}

Var Model::Forward::type_matrix(std::span<const TypeId> types) {
    std::vector<Var> columns;
    columns.reserve(types.size());
    for (TypeId c : types) {
        if (c.index() >= model_.num_types_) {
            throw LookupError("unknown type id " + std::to_string(c.value));
        }
        columns.push_back(tape_.parameter_row(model_.params_, kTypeTable, c.index()));
    }
    return hstack(columns);
}

Var Model::Forward::entity(EntityId e) {
    if (auto it = entities_.find(e); it != entities_.end()) return it->second;
    if (e.index() >= model_.entity_types_.size()) {
        throw LookupError("unknown entity id " + std::to_string(e.value));
    }
    const auto& config = model_.config_;
    Var rep;
#if TCQA_WITH_TEMP
    if (model_.ter_) {
        Var types = type_matrix(model_.entity_types_[e.index()]);
        std::optional<Var> own;
        if (!config.inductive) own = tape_.parameter_row(model_.params_, kEntityTable, e.index());
        rep = model_.ter_->enhance(tape_, model_.params_, types, own);
    }
#endif
    if (!rep.valid()) {
        if (config.inductive && !model_.is_seen(e)) {
            throw ContractError("entity " + std::to_string(e.value) +
                                " was not seen in training and the model has no type-aware entity layer");
        }
        rep = tape_.parameter_row(model_.params_, kEntityTable, e.index());
    }
    entities_.emplace(e, rep);
    return rep;
}

Var Model::Forward::relation(RelationId r) {
    if (r.index() >= model_.num_relations_) {
        throw LookupError("unknown relation id " + std::to_string(r.value));
    }
    return tape_.parameter_row(model_.params_, kRelationTable, r.index());
}

Var Model::Forward::relation_types(RelationId r) {
    if (auto it = relation_types_.find(r); it != relation_types_.end()) return it->second;
#if TCQA_WITH_TEMP
    if (model_.trr_) {
        const auto& types = model_.relation_types_of(r);
        std::vector<Var> vectors;
        for (TypeId c : types) vectors.push_back(tape_.parameter_row(model_.params_, kTypeTable, c.index()));
        Var agg = model_.trr_->relation_types(tape_, model_.params_, vectors);
        relation_types_.emplace(r, agg);
        return agg;
    }
#endif
    throw StateError("relation type aggregation requires the type-aware relation layer");
}

Var Model::Forward::intersect(std::span<const Var> branches) {
    auto& store = model_.params_;
    Affine hidden{tape_.parameter(store, kInterHiddenW), tape_.parameter(store, kInterHiddenB)};
    Affine out{tape_.parameter(store, kInterOutW), tape_.parameter(store, kInterOutB)};
    std::vector<Var> features;
    features.reserve(branches.size());
    for (Var b : branches) features.push_back(relu(apply(hidden, b)));
    return apply(out, mean_sorted(features));
}

QueryEmbedding Model::Forward::embed(const QueryDAG& q) {
    using Kind = QueryNode::Kind;
    for (const auto& n : q.nodes()) {
        if (n.kind == Kind::negation) {
            throw UnsupportedStructure("negation is not supported by the query embedding model");
        }
    }
    QueryEmbedding result;
    for (const auto& branch : q.dnf_branches()) {
        std::vector<Var> value(branch.nodes().size());
        for (std::size_t i = 0; i < branch.nodes().size(); ++i) {
            const auto& n = branch.nodes()[i];
            switch (n.kind) {
                case Kind::anchor:
                    value[i] = entity(n.entity);
                    break;
                case Kind::projection: {
                    Var x = value[n.inputs[0]];
                    Var r = relation(n.relation);
#if TCQA_WITH_TEMP
                    if (model_.trr_) {
                        auto enhanced = model_.trr_->enhance(tape_, model_.params_, x, r, relation_types(n.relation));
                        value[i] = enhanced.entity + enhanced.relation;
                        break;
                    }
#endif
                    value[i] = x + r;
                    break;
                }
                case Kind::intersection: {
                    std::vector<Var> inputs;
                    for (auto in : n.inputs) inputs.push_back(value[in]);
                    value[i] = intersect(inputs);
                    break;
                }
                case Kind::union_:
                case Kind::negation:
                    throw UnsupportedStructure("unexpected operator in a DNF branch");
            }
        }
        result.branches.push_back(value.back());
    }
    return result;
}

Var Model::Forward::score(const QueryEmbedding& qe, EntityId e) {
    if (qe.branches.empty()) throw PreconditionError("query embedding has no branches");
    Var rep = entity(e);
    std::vector<Var> distances;
    distances.reserve(qe.branches.size());
    for (Var b : qe.branches) distances.push_back(l1_distance(b, rep));
    return scale(min_of(distances), -1.0);
}

Var Model::Forward::loss(const QueryEmbedding& qe, EntityId positive,
                         std::span<const EntityId> negatives) {
    if (negatives.empty()) {
        throw PreconditionError("margin loss needs at least one negative");
    }
    Var margin = tape_.constant(Tensor(1, 1, model_.config_.margin));
    Var pos = score(qe, positive);
    std::vector<Var> terms;
    terms.reserve(negatives.size());
    for (EntityId n : negatives) {
        terms.push_back(relu(margin - pos + score(qe, n)));
    }
    return scale(sum(concat_rows(terms)), 1.0 / static_cast<double>(negatives.size()));
}

Var Model::Forward::loss(const QueryDAG& q, EntityId positive, std::span<const EntityId> negatives) {
    return loss(embed(q), positive, negatives);
}

std::vector<double> Model::Forward::score_values(const QueryEmbedding& qe) {
    if (qe.branches.empty()) throw PreconditionError("query embedding has no branches");
    std::vector<double> scores(model_.num_entities());
    for (std::uint32_t i = 0; i < scores.size(); ++i) {
        const Tensor& rep = entity(EntityId{i}).value();
        double best = std::numeric_limits<double>::infinity();
        for (Var b : qe.branches) {
            const Tensor& bv = b.value();
            double d = 0.0;
            for (std::size_t k = 0; k < bv.size(); ++k) d += std::abs(bv[k] - rep[k]);
            best = std::min(best, d);
        }
        scores[i] = -best;
    }
    return scores;
}

std::vector<double> Model::score_all(const QueryDAG& q) {
    Forward fwd(*this);
    return fwd.score_values(fwd.embed(q));
}

double Model::score(const QueryDAG& q, EntityId e) {
    Forward fwd(*this);
    return fwd.score(fwd.embed(q), e).value()[0];
}

}  // namespace tcqa
