#include "tcqa/query.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <random>
#include <set>

#include <json.hpp>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

using Kind = QueryNode::Kind;

struct StructureInfo {
    Structure structure;
    std::string_view tag;
    std::size_t anchors;
    std::size_t relations;
};

constexpr std::array<StructureInfo, 9> kInfo = {{
    {Structure::p1, "1p", 1, 1},
    {Structure::p2, "2p", 1, 2},
    {Structure::p3, "3p", 1, 3},
    {Structure::i2, "2i", 2, 2},
    {Structure::i3, "3i", 3, 3},
    {Structure::pi, "pi", 2, 3},
    {Structure::ip, "ip", 2, 3},
    {Structure::u2, "2u", 2, 2},
    {Structure::up, "up", 2, 3},
}};

const StructureInfo& info(Structure s) { return kInfo[static_cast<std::size_t>(s)]; }

class Builder {
public:
    std::size_t anchor(EntityId e) {
        nodes_.push_back({Kind::anchor, e, {}, {}});
        return nodes_.size() - 1;
    }
    std::size_t project(std::size_t input, RelationId r) {
        nodes_.push_back({Kind::projection, {}, r, {input}});
        return nodes_.size() - 1;
    }
    std::size_t combine(Kind kind, std::vector<std::size_t> inputs) {
        nodes_.push_back({kind, {}, {}, std::move(inputs)});
        return nodes_.size() - 1;
    }
    std::vector<QueryNode> take() { return std::move(nodes_); }

private:
    std::vector<QueryNode> nodes_;
};

AnswerSet to_answer_set(const std::set<EntityId>& s) { return {s.begin(), s.end()}; }

/// Canonical key of the subtree rooted at `i`, used to reject duplicate branches.
std::string subtree_key(const std::vector<QueryNode>& nodes, std::size_t i) {
    const auto& n = nodes[i];
    switch (n.kind) {
        case Kind::anchor:
            return "e" + std::to_string(n.entity.value);
        case Kind::projection:
            return "p" + std::to_string(n.relation.value) + "(" + subtree_key(nodes, n.inputs[0]) + ")";
        default: {
            std::string out = n.kind == Kind::intersection ? "i(" : n.kind == Kind::union_ ? "u(" : "n(";
            for (auto in : n.inputs) out += subtree_key(nodes, in) + ",";
            return out + ")";
        }
    }
}

bool has_duplicate_branches(const std::vector<QueryNode>& nodes) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        if (n.kind != Kind::intersection && n.kind != Kind::union_) continue;
        std::set<std::string> keys;
        for (auto in : n.inputs) {
            if (!keys.insert(subtree_key(nodes, in)).second) return true;
        }
    }
    return false;
}

std::vector<std::uint32_t> ids_of(const AnswerSet& s) {
    std::vector<std::uint32_t> out;
    out.reserve(s.size());
    for (auto e : s) out.push_back(e.value);
    return out;
}

/// Reverse random walk: assigns entities and relations to a structure template
/// so that `target` is an answer on `kg`.
class Grounder {
public:
    Grounder(const KnowledgeGraph& kg, std::mt19937_64& rng) : kg_(kg), rng_(rng) {}

    bool ground(std::vector<QueryNode>& nodes, std::size_t i, EntityId target) {
        auto& n = nodes[i];
        switch (n.kind) {
            case Kind::anchor:
                n.entity = target;
                return true;
            case Kind::projection: {
                const auto& in = kg_.incoming(target);
                if (in.empty()) return false;
                std::uniform_int_distribution<std::size_t> pick(0, in.size() - 1);
                auto [head, rel] = in[pick(rng_)];
                n.relation = rel;
                return ground(nodes, n.inputs[0], head);
            }
            case Kind::intersection:
            case Kind::union_:
                for (auto in : std::vector<std::size_t>(n.inputs)) {
                    if (!ground(nodes, in, target)) return false;
                }
                return true;
            case Kind::negation:
                break;
        }
        throw UnsupportedStructure("negation cannot be sampled");
    }

private:
    const KnowledgeGraph& kg_;
    std::mt19937_64& rng_;
};

struct SampleSpec {
    const KnowledgeGraph* walk_graph;
    const KnowledgeGraph* easy_graph;
    std::vector<EntityId> targets;
    bool require_hard;
};

QuerySet sample(const SampleSpec& spec, Structure structure, std::size_t count, Regime regime,
                std::uint64_t seed) {
    if (count == 0) {
        throw PreconditionError("query count must be at least 1");
    }
    QuerySet out;
    out.regime = regime;
    if (spec.targets.empty()) {
        throw GenerationExhausted(std::string("no candidate answer entity for ") +
                                      std::string(to_string(structure)),
                                  0);
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_target(0, spec.targets.size() - 1);
    Grounder grounder(*spec.walk_graph, rng);
    auto shape = QueryDAG::make(structure, std::vector<EntityId>(anchor_count(structure)),
                                std::vector<RelationId>(relation_count(structure)));
    std::set<std::string> seen;
    std::size_t total_attempts = 0;

    while (out.queries.size() < count) {
        bool accepted = false;
        for (std::size_t attempt = 0; attempt < kRetryBudget && !accepted; ++attempt) {
            ++total_attempts;
            auto nodes = shape.nodes();
            EntityId target = spec.targets[pick_target(rng)];
            if (!grounder.ground(nodes, nodes.size() - 1, target)) continue;
            if (has_duplicate_branches(nodes)) continue;
            if (!seen.insert(subtree_key(nodes, nodes.size() - 1)).second) continue;

            std::vector<EntityId> anchors;
            std::vector<RelationId> relations;
            for (const auto& n : nodes) {
                if (n.kind == Kind::anchor) anchors.push_back(n.entity);
                if (n.kind == Kind::projection) relations.push_back(n.relation);
            }
            QueryRecord rec{QueryDAG::make(structure, anchors, relations), {}, {}};
            rec.answers = answer_query(*spec.walk_graph, rec.query);
            rec.easy_answers = answer_query(*spec.easy_graph, rec.query);
            if (spec.require_hard && rec.hard_answers().empty()) continue;
            out.queries.push_back(std::move(rec));
            accepted = true;
        }
        if (!accepted) {
            throw GenerationExhausted("cannot sample " + std::string(to_string(structure)) +
                                          " query " + std::to_string(out.queries.size() + 1) +
                                          " of " + std::to_string(count),
                                      total_attempts);
        }
    }
    return out;
}

std::vector<EntityId> entities_with_incoming(const KnowledgeGraph& kg,
                                             const std::set<EntityId>* exclude) {
    std::vector<EntityId> out;
    for (std::uint32_t i = 0; i < kg.num_entities(); ++i) {
        EntityId e{i};
        if (kg.incoming(e).empty()) continue;
        if (exclude && exclude->contains(e)) continue;
        out.push_back(e);
    }
    return out;
}

}  // namespace

std::string_view to_string(Structure s) { return info(s).tag; }

Structure parse_structure(std::string_view tag) {
    for (const auto& i : kInfo) {
        if (i.tag == tag) return i.structure;
    }
    for (std::string_view neg : {"2in", "3in", "inp", "pin", "pni"}) {
        if (tag == neg) {
            throw UnsupportedStructure("negation structure '" + std::string(tag) + "' is not supported");
        }
    }
    throw UnsupportedStructure("unknown query structure '" + std::string(tag) + "'");
}

std::size_t anchor_count(Structure s) { return info(s).anchors; }
std::size_t relation_count(Structure s) { return info(s).relations; }

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::generalization: return "generalization";
        case Regime::deductive: return "deductive";
        case Regime::inductive: return "inductive";
    }
    return "?";
}

Regime parse_regime(std::string_view tag) {
    for (Regime r : {Regime::generalization, Regime::deductive, Regime::inductive}) {
        if (to_string(r) == tag) return r;
    }
    throw ConfigError("unknown regime '" + std::string(tag) + "'");
}

QueryDAG QueryDAG::make(Structure s, std::vector<EntityId> a, std::vector<RelationId> r) {
    if (a.size() != anchor_count(s) || r.size() != relation_count(s)) {
        throw PreconditionError("structure " + std::string(to_string(s)) + " needs " +
                                std::to_string(anchor_count(s)) + " anchors and " +
                                std::to_string(relation_count(s)) + " relations, got " +
                                std::to_string(a.size()) + " and " + std::to_string(r.size()));
    }
    Builder b;
    switch (s) {
        case Structure::p1:
            b.project(b.anchor(a[0]), r[0]);
            break;
        case Structure::p2:
            b.project(b.project(b.anchor(a[0]), r[0]), r[1]);
            break;
        case Structure::p3:
            b.project(b.project(b.project(b.anchor(a[0]), r[0]), r[1]), r[2]);
            break;
        case Structure::i2: {
            auto x = b.project(b.anchor(a[0]), r[0]);
            auto y = b.project(b.anchor(a[1]), r[1]);
            b.combine(Kind::intersection, {x, y});
            break;
        }
        case Structure::i3: {
            auto x = b.project(b.anchor(a[0]), r[0]);
            auto y = b.project(b.anchor(a[1]), r[1]);
            auto z = b.project(b.anchor(a[2]), r[2]);
            b.combine(Kind::intersection, {x, y, z});
            break;
        }
        case Structure::pi: {
            auto x = b.project(b.project(b.anchor(a[0]), r[0]), r[1]);
            auto y = b.project(b.anchor(a[1]), r[2]);
            b.combine(Kind::intersection, {x, y});
            break;
        }
        case Structure::ip: {
            auto x = b.project(b.anchor(a[0]), r[0]);
            auto y = b.project(b.anchor(a[1]), r[1]);
            b.project(b.combine(Kind::intersection, {x, y}), r[2]);
            break;
        }
        case Structure::u2: {
            auto x = b.project(b.anchor(a[0]), r[0]);
            auto y = b.project(b.anchor(a[1]), r[1]);
            b.combine(Kind::union_, {x, y});
            break;
        }
        case Structure::up: {
            auto x = b.project(b.anchor(a[0]), r[0]);
            auto y = b.project(b.anchor(a[1]), r[1]);
            b.project(b.combine(Kind::union_, {x, y}), r[2]);
            break;
        }
    }
    QueryDAG q;
    q.structure_ = s;
    q.nodes_ = b.take();
    return q;
}

QueryDAG QueryDAG::from_nodes(std::vector<QueryNode> nodes) {
    if (nodes.empty()) {
        throw PreconditionError("a query needs at least one node");
    }
    std::vector<int> consumers(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        std::size_t want_min = 0, want_max = 0;
        switch (n.kind) {
            case Kind::anchor: want_min = want_max = 0; break;
            case Kind::projection:
            case Kind::negation: want_min = want_max = 1; break;
            case Kind::intersection:
            case Kind::union_: want_min = 2; want_max = SIZE_MAX; break;
        }
        if (n.inputs.size() < want_min || n.inputs.size() > want_max) {
            throw PreconditionError("node " + std::to_string(i) + " has the wrong number of inputs");
        }
        for (auto in : n.inputs) {
            if (in >= i) {
                throw PreconditionError("node " + std::to_string(i) +
                                        " consumes a later node; nodes must be children-first");
            }
            ++consumers[in];
        }
    }
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        if (consumers[i] == 0) {
            throw PreconditionError("node " + std::to_string(i) + " is a second root");
        }
    }
    QueryDAG q;
    q.nodes_ = std::move(nodes);
    return q;
}

std::vector<EntityId> QueryDAG::anchors() const {
    std::vector<EntityId> out;
    for (const auto& n : nodes_) {
        if (n.kind == Kind::anchor) out.push_back(n.entity);
    }
    return out;
}

std::vector<RelationId> QueryDAG::relations() const {
    std::vector<RelationId> out;
    for (const auto& n : nodes_) {
        if (n.kind == Kind::projection) out.push_back(n.relation);
    }
    return out;
}

std::vector<QueryDAG> QueryDAG::dnf_branches() const {
    if (structure_ == Structure::u2) {
        auto a = anchors();
        auto r = relations();
        return {make(Structure::p1, {a[0]}, {r[0]}), make(Structure::p1, {a[1]}, {r[1]})};
    }
    if (structure_ == Structure::up) {
        auto a = anchors();
        auto r = relations();
        return {make(Structure::p2, {a[0]}, {r[0], r[2]}), make(Structure::p2, {a[1]}, {r[1], r[2]})};
    }
    for (const auto& n : nodes_) {
        if (n.kind == Kind::union_) {
            throw UnsupportedStructure("DNF rewriting is only defined for the 2u and up structures");
        }
    }
    return {*this};
}

AnswerSet answer_query(const KnowledgeGraph& kg, const QueryDAG& q) {
    std::vector<std::set<EntityId>> value(q.nodes().size());
    for (std::size_t i = 0; i < q.nodes().size(); ++i) {
        const auto& n = q.nodes()[i];
        auto& out = value[i];
        switch (n.kind) {
            case Kind::anchor:
                if (!kg.has_entity(n.entity)) {
                    throw SemanticsError("anchor entity " + std::to_string(n.entity.value) +
                                         " is not in the graph");
                }
                out.insert(n.entity);
                break;
            case Kind::projection:
                if (!kg.has_relation(n.relation)) {
                    throw SemanticsError("relation " + std::to_string(n.relation.value) +
                                         " is not in the graph");
                }
                for (EntityId x : value[n.inputs[0]]) {
                    const auto& tails = kg.tails(x, n.relation);
                    out.insert(tails.begin(), tails.end());
                }
                break;
            case Kind::intersection: {
                out = value[n.inputs[0]];
                for (std::size_t k = 1; k < n.inputs.size(); ++k) {
                    std::set<EntityId> next;
                    const auto& other = value[n.inputs[k]];
                    std::set_intersection(out.begin(), out.end(), other.begin(), other.end(),
                                          std::inserter(next, next.end()));
                    out = std::move(next);
                }
                break;
            }
            case Kind::union_:
                for (auto in : n.inputs) out.insert(value[in].begin(), value[in].end());
                break;
            case Kind::negation:
                throw SemanticsError("negation is not supported by the exact answerer");
        }
    }
    return to_answer_set(value.back());
}

AnswerSet QueryRecord::hard_answers() const {
    AnswerSet out;
    std::set_difference(answers.begin(), answers.end(), easy_answers.begin(), easy_answers.end(),
                        std::back_inserter(out));
    return out;
}

std::map<Structure, std::size_t> QuerySet::counts() const {
    std::map<Structure, std::size_t> out;
    for (const auto& rec : queries) {
        if (auto s = rec.query.structure()) ++out[*s];
    }
    return out;
}

std::vector<const QueryRecord*> QuerySet::of(Structure s) const {
    std::vector<const QueryRecord*> out;
    for (const auto& rec : queries) {
        if (rec.query.structure() == s) out.push_back(&rec);
    }
    return out;
}

QuerySet generate_queries(const SplitGraphs& splits, Structure structure, std::size_t count,
                          Regime regime, std::uint64_t seed) {
    SampleSpec spec{&splits.test, &splits.train, {}, regime == Regime::generalization};
    if (regime == Regime::inductive) {
        auto seen = splits.train.entities_in_triples();
        spec.targets = entities_with_incoming(splits.test, &seen);
    } else {
        spec.targets = entities_with_incoming(splits.test, nullptr);
    }
    return sample(spec, structure, count, regime, seed);
}

QuerySet generate_training_queries(const KnowledgeGraph& kg, Structure structure,
                                   std::size_t count, Regime regime, std::uint64_t seed) {
    SampleSpec spec{&kg, &kg, entities_with_incoming(kg, nullptr), false};
    return sample(spec, structure, count, regime, seed);
}

void serialize_queries(const QuerySet& qs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    for (const auto& rec : qs.queries) {
        if (!rec.query.structure()) {
            throw PreconditionError("only tagged query structures can be serialized");
        }
        std::vector<std::uint32_t> anchors, relations;
        for (auto e : rec.query.anchors()) anchors.push_back(e.value);
        for (auto r : rec.query.relations()) relations.push_back(r.value);
        nlohmann::json j = {{"structure", to_string(*rec.query.structure())},
                            {"anchors", anchors},
                            {"relations", relations},
                            {"answers", ids_of(rec.answers)},
                            {"easy_answers", ids_of(rec.easy_answers)},
                            {"regime", to_string(qs.regime)}};
        out << j.dump() << '\n';
    }
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

QuerySet load_queries(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    QuerySet qs;
    std::optional<Regime> regime;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto structure = parse_structure(j.at("structure").get<std::string>());
            auto r = parse_regime(j.at("regime").get<std::string>());
            if (regime && *regime != r) {
                throw ParseError(path.string(), line_no, "mixed regimes in one query file");
            }
            regime = r;
            std::vector<EntityId> anchors;
            std::vector<RelationId> relations;
            for (auto v : j.at("anchors")) anchors.emplace_back(v.get<std::uint32_t>());
            for (auto v : j.at("relations")) relations.emplace_back(v.get<std::uint32_t>());
            QueryRecord rec{QueryDAG::make(structure, anchors, relations), {}, {}};
            for (auto v : j.at("answers")) rec.answers.emplace_back(v.get<std::uint32_t>());
            for (auto v : j.value("easy_answers", nlohmann::json::array())) {
                rec.easy_answers.emplace_back(v.get<std::uint32_t>());
            }
            std::sort(rec.answers.begin(), rec.answers.end());
            std::sort(rec.easy_answers.begin(), rec.easy_answers.end());
            qs.queries.push_back(std::move(rec));
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(path.string(), line_no, e.what());
        }
    }
    if (regime) qs.regime = *regime;
    return qs;
}

QuerySet merge(const std::vector<QuerySet>& sets) {
    QuerySet out;
    if (!sets.empty()) out.regime = sets.front().regime;
    for (const auto& s : sets) {
        if (s.regime != out.regime) {
            throw PreconditionError("cannot merge query sets of different regimes");
        }
        out.queries.insert(out.queries.end(), s.queries.begin(), s.queries.end());
    }
    return out;
}

}  // namespace tcqa
