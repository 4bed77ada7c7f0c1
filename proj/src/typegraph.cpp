#include "tcqa/typegraph.hpp"

#include <algorithm>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

TypeSet types_or_unknown(const KnowledgeGraph& kg, EntityId e) {
    const auto& types = kg.entity_types(e);
    if (types.empty()) {
        return {kUnknownType};
    }
    return types;
}

void intersect_into(std::optional<TypeSet>& acc, const TypeSet& next) {
    if (!acc) {
        acc = next;
        return;
    }
    TypeSet out;
    std::set_intersection(acc->begin(), acc->end(), next.begin(), next.end(),
                          std::back_inserter(out));
    *acc = std::move(out);
}

TypeSet or_unknown(TypeSet s) {
    if (s.empty()) {
        return {kUnknownType};
    }
    return s;
}

nlohmann::json type_names(const KnowledgeGraph& kg, const TypeSet& s) {
    auto arr = nlohmann::json::array();
    for (TypeId c : s) arr.push_back(kg.types().name(c.value));
    return arr;
}

std::string join_names(const KnowledgeGraph& kg, const TypeSet& s) {
    std::string out;
    for (TypeId c : s) {
        if (!out.empty()) out += ",";
        out += kg.types().name(c.value);
    }
    return out;
}

}  // namespace

std::vector<RelationId> TypeGraph::edges() const {
    std::vector<RelationId> out;
    out.reserve(relations_.size());
    for (const auto& [r, _] : relations_) out.push_back(r);
    return out;
}

const RelationTypes& TypeGraph::relation(RelationId r) const {
    auto it = relations_.find(r);
    if (it == relations_.end()) {
        throw LookupError("relation " + std::to_string(r.value) + " is not an edge of the type graph");
    }
    return it->second;
}

TypeGraph build_type_graph(const KnowledgeGraph& kg) {
    std::map<RelationId, std::pair<std::optional<TypeSet>, std::optional<TypeSet>>> acc;
    std::set<TypeGraphEdge> labeled;
    for (const auto& t : kg.triples()) {
        auto head = types_or_unknown(kg, t.head);
        auto tail = types_or_unknown(kg, t.tail);
        auto& [h, tl] = acc[t.relation];
        intersect_into(h, head);
        intersect_into(tl, tail);
        labeled.insert({std::move(head), t.relation, std::move(tail)});
    }

    TypeGraph tg;
    std::set<TypeId> nodes;
    for (auto& [r, sets] : acc) {
        RelationTypes rt;
        rt.head = or_unknown(std::move(*sets.first));
        rt.tail = or_unknown(std::move(*sets.second));
        std::set_union(rt.head.begin(), rt.head.end(), rt.tail.begin(), rt.tail.end(),
                       std::back_inserter(rt.all));
        nodes.insert(rt.all.begin(), rt.all.end());
        tg.relations_.emplace(r, std::move(rt));
    }
    tg.nodes_.assign(nodes.begin(), nodes.end());
    tg.labeled_edges_.assign(labeled.begin(), labeled.end());
    return tg;
}

const TypeSet& relation_type_list(const TypeGraph& tg, RelationId r) { return tg.relation(r).all; }

std::string TypeGraph::to_json(const KnowledgeGraph& kg) const {
    nlohmann::json j;
    j["nodes"] = type_names(kg, nodes_);
    j["edges"] = nlohmann::json::array();
    for (const auto& [r, rt] : relations_) {
        j["edges"].push_back({{"relation", kg.relations().name(r.value)},
                              {"head_types", type_names(kg, rt.head)},
                              {"tail_types", type_names(kg, rt.tail)}});
    }
    return j.dump(2);
}

std::string TypeGraph::to_dot(const KnowledgeGraph& kg) const {
    std::ostringstream out;
    out << "digraph type_graph {\n";
    for (TypeId c : nodes_) {
        out << "  \"" << kg.types().name(c.value) << "\";\n";
    }
    for (const auto& e : labeled_edges_) {
        out << "  \"{" << join_names(kg, e.head) << "}\" -> \"{" << join_names(kg, e.tail)
            << "}\" [label=\"" << kg.relations().name(e.relation.value) << "\"];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace tcqa
