#include "tcqa/kg.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

const std::vector<EntityId> kNoEntities;
const std::vector<std::pair<EntityId, RelationId>> kNoIncoming;

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

/// Calls `fn(fields, line_no)` for every non-comment, non-blank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, std::size_t arity, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() != arity) {
            throw ParseError(path.string(), line_no,
                             "expected " + std::to_string(arity) + " tab-separated fields, got " +
                                 std::to_string(fields.size()));
        }
        for (auto f : fields) {
            if (f.empty()) {
                throw ParseError(path.string(), line_no, "empty field");
            }
        }
        fn(fields, line_no);
    }
}

using RawTriple = std::array<std::string, 3>;

std::vector<RawTriple> read_raw_triples(const std::filesystem::path& path) {
    std::vector<RawTriple> out;
    for_each_record(path, 3, [&](const auto& f, std::size_t) {
        out.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2])});
    });
    return out;
}

std::vector<std::pair<std::string, std::string>> read_raw_types(const std::filesystem::path& path) {
    std::vector<std::pair<std::string, std::string>> out;
    for_each_record(path, 2, [&](const auto& f, std::size_t) {
        out.emplace_back(std::string(f[0]), std::string(f[1]));
    });
    return out;
}

}  // namespace

std::uint32_t Vocabulary::intern(std::string_view name) {
    std::string key(name);
    if (auto it = index_.find(key); it != index_.end()) {
        return it->second;
    }
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.push_back(key);
    index_.emplace(std::move(key), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
    if (auto it = index_.find(std::string(name)); it != index_.end()) {
        return it->second;
    }
    return std::nullopt;
}

const std::string& Vocabulary::name(std::uint32_t id) const {
    if (id >= names_.size()) {
        throw LookupError("id " + std::to_string(id) + " out of vocabulary range " +
                          std::to_string(names_.size()));
    }
    return names_[id];
}

KnowledgeGraph::KnowledgeGraph() { types_.intern(kUnknownTypeName); }

void KnowledgeGraph::grow_entity_tables() {
    if (incoming_.size() < entities_.size()) {
        incoming_.resize(entities_.size());
        entity_types_.resize(entities_.size());
    }
}

bool KnowledgeGraph::add_triple(std::string_view head, std::string_view relation,
                                std::string_view tail) {
    EntityId h = intern_entity(head);
    RelationId r = intern_relation(relation);
    EntityId t = intern_entity(tail);
    return add_triple(Triple{h, r, t});
}

bool KnowledgeGraph::add_triple(const Triple& t) {
    if (!has_entity(t.head) || !has_entity(t.tail) || !has_relation(t.relation)) {
        throw LookupError("triple references an id outside the vocabulary");
    }
    if (!triple_set_.insert(t).second) {
        return false;
    }
    grow_entity_tables();
    triples_.push_back(t);
    auto& tails = forward_[{t.head.value, t.relation.value}];
    tails.insert(std::upper_bound(tails.begin(), tails.end(), t.tail), t.tail);
    incoming_[t.tail.index()].emplace_back(t.head, t.relation);
    return true;
}

bool KnowledgeGraph::add_type(std::string_view entity, std::string_view type) {
    EntityId e = intern_entity(entity);
    TypeId c = intern_type(type);
    return add_type(e, c);
}

bool KnowledgeGraph::add_type(EntityId e, TypeId c) {
    if (!has_entity(e) || !has_type(c)) {
        throw LookupError("type assertion references an id outside the vocabulary");
    }
    if (c == kUnknownType) {
        throw LookupError("the reserved UNKNOWN type cannot be asserted");
    }
    if (!type_set_.insert({e, c}).second) {
        return false;
    }
    grow_entity_tables();
    type_assertions_.push_back({e, c});
    auto& types = entity_types_[e.index()];
    types.insert(std::upper_bound(types.begin(), types.end(), c), c);
    return true;
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
    if (auto id = entities_.find(name)) return EntityId{*id};
    return std::nullopt;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
    if (auto id = relations_.find(name)) return RelationId{*id};
    return std::nullopt;
}

std::optional<TypeId> KnowledgeGraph::find_type(std::string_view name) const {
    if (auto id = types_.find(name)) return TypeId{*id};
    return std::nullopt;
}

const std::vector<EntityId>& KnowledgeGraph::tails(EntityId head, RelationId relation) const {
    auto it = forward_.find({head.value, relation.value});
    return it == forward_.end() ? kNoEntities : it->second;
}

const std::vector<std::pair<EntityId, RelationId>>& KnowledgeGraph::incoming(EntityId tail) const {
    if (tail.index() >= incoming_.size()) {
        return kNoIncoming;
    }
    return incoming_[tail.index()];
}

const std::vector<TypeId>& KnowledgeGraph::entity_types(EntityId e) const {
    static const std::vector<TypeId> none;
    if (!has_entity(e)) {
        throw LookupError("unknown entity id " + std::to_string(e.value));
    }
    return e.index() < entity_types_.size() ? entity_types_[e.index()] : none;
}

std::set<EntityId> KnowledgeGraph::entities_in_triples() const {
    std::set<EntityId> out;
    for (const auto& t : triples_) {
        out.insert(t.head);
        out.insert(t.tail);
    }
    return out;
}

KnowledgeGraph KnowledgeGraph::with_vocabulary_only() const {
    KnowledgeGraph g;
    g.entities_ = entities_;
    g.relations_ = relations_;
    g.types_ = types_;
    g.grow_entity_tables();
    return g;
}

std::vector<TypeId> entity_types(const KnowledgeGraph& kg, EntityId e) { return kg.entity_types(e); }

KnowledgeGraph load_kg(const std::filesystem::path& triples_path,
                       const std::filesystem::path& types_path) {
    KnowledgeGraph kg;
    for (const auto& [h, r, t] : read_raw_triples(triples_path)) {
        kg.add_triple(h, r, t);
    }
    if (types_path.empty()) return kg;
    for (const auto& [e, c] : read_raw_types(types_path)) {
        kg.add_type(e, c);
    }
    return kg;
}

void save_kg(const KnowledgeGraph& kg, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    auto open = [](const std::filesystem::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw IoError("cannot write " + p.string());
        return out;
    };
    {
        auto out = open(dir / "triples.tsv");
        for (const auto& t : kg.triples()) {
            out << kg.entities().name(t.head.value) << '\t' << kg.relations().name(t.relation.value)
                << '\t' << kg.entities().name(t.tail.value) << '\n';
        }
    }
    {
        auto out = open(dir / "types.tsv");
        for (const auto& a : kg.type_assertions()) {
            out << kg.entities().name(a.entity.value) << '\t' << kg.types().name(a.type.value) << '\n';
        }
    }
    nlohmann::json vocab = {{"entities", kg.entities().names()},
                            {"relations", kg.relations().names()},
                            {"types", kg.types().names()}};
    auto out = open(dir / "vocab.json");
    out << vocab.dump(2) << '\n';
}

KnowledgeGraph load_saved_kg(const std::filesystem::path& dir) {
    auto manifest_path = dir / "vocab.json";
    std::ifstream in(manifest_path);
    if (!in) {
        throw IoError("cannot open " + manifest_path.string());
    }
    nlohmann::json vocab;
    try {
        in >> vocab;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(manifest_path.string() + ": " + e.what());
    }
    KnowledgeGraph kg;
    for (const auto& name : vocab.at("entities")) kg.intern_entity(name.get<std::string>());
    for (const auto& name : vocab.at("relations")) kg.intern_relation(name.get<std::string>());
    const auto& types = vocab.at("types");
    if (types.empty() || types[0].get<std::string>() != kUnknownTypeName) {
        throw IoError(manifest_path.string() + ": type vocabulary must start with the UNKNOWN type");
    }
    for (const auto& name : types) kg.intern_type(name.get<std::string>());

    for (const auto& [h, r, t] : read_raw_triples(dir / "triples.tsv")) {
        kg.add_triple(h, r, t);
    }
    for (const auto& [e, c] : read_raw_types(dir / "types.tsv")) {
        kg.add_type(e, c);
    }
    return kg;
}

SplitGraphs load_splits(const std::filesystem::path& dir) {
    for (const char* name : {kTrainFile, kValidFile, kTestFile, kTypesFile}) {
        if (!std::filesystem::exists(dir / name)) {
            throw IoError("missing split file " + (dir / name).string());
        }
    }
    auto train_raw = read_raw_triples(dir / kTrainFile);
    auto valid_raw = read_raw_triples(dir / kValidFile);
    auto test_raw = read_raw_triples(dir / kTestFile);
    auto types_raw = read_raw_types(dir / kTypesFile);

    KnowledgeGraph base;
    auto intern_all = [&](const std::vector<RawTriple>& raw, std::vector<Triple>& out) {
        for (const auto& [h, r, t] : raw) {
            EntityId head = base.intern_entity(h);
            RelationId rel = base.intern_relation(r);
            out.push_back({head, rel, base.intern_entity(t)});
        }
    };
    std::vector<Triple> train_edges, valid_edges, test_edges;
    intern_all(train_raw, train_edges);
    intern_all(valid_raw, valid_edges);
    intern_all(test_raw, test_edges);
    for (const auto& [e, c] : types_raw) {
        base.add_type(e, c);
    }
    return make_splits(base, train_edges, valid_edges, test_edges);
}

SplitGraphs make_splits(const KnowledgeGraph& vocabulary_and_types,
                        const std::vector<Triple>& train_edges,
                        const std::vector<Triple>& valid_edges,
                        const std::vector<Triple>& test_edges) {
    KnowledgeGraph base = vocabulary_and_types.with_vocabulary_only();
    for (const auto& a : vocabulary_and_types.type_assertions()) {
        base.add_type(a.entity, a.type);
    }
    SplitGraphs splits{base, {}, {}, false};
    for (const auto& t : train_edges) splits.train.add_triple(t);
    splits.valid = splits.train;
    for (const auto& t : valid_edges) splits.valid.add_triple(t);
    splits.test = splits.valid;
    for (const auto& t : test_edges) splits.test.add_triple(t);

    std::set<EntityId> train_entities;
    for (const auto& t : train_edges) {
        train_entities.insert(t.head);
        train_entities.insert(t.tail);
    }
    bool disjoint = !test_edges.empty();
    for (const auto& t : test_edges) {
        if (train_entities.contains(t.head) || train_entities.contains(t.tail)) {
            disjoint = false;
            break;
        }
    }
    splits.inductive = disjoint;
    return splits;
}

}  // namespace tcqa
