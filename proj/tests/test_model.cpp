#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "tcqa/errors.hpp"
#include "tcqa/model.hpp"

using namespace tcqa;

namespace {

struct Toy {
    SplitGraphs splits = load_splits(tcqa::testing::data_dir("toy"));
    TypeGraph tg = build_type_graph(splits.test);

    EntityId e(const std::string& n) const { return *splits.test.find_entity(n); }
    RelationId r(const std::string& n) const { return *splits.test.find_relation(n); }
};

ModelConfig config(TempMode mode, std::size_t dim = 8) {
    ModelConfig c;
    c.dim = dim;
    c.temp = mode;
    return c;
}

}  // namespace

TEST_CASE("config JSON") {
    ModelConfig c;
    c.dim = 16;
    c.temp = TempMode::trr_only;
    c.fusion = Fusion::concat;
    c.entity_aggregator = TypeAggregator::max;
    auto back = ModelConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(ModelConfig::from_json(nlohmann::json::object()).to_json() == ModelConfig{}.to_json());
    CHECK_THROWS_AS(ModelConfig::from_json({{"dimension", 3}}), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json({{"dim", 0}}), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json({{"temp", "all"}}), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json({{"dim", "big"}}), ConfigError);
    CHECK_THROWS_AS(ModelConfig::from_json({{"distance", "l2"}}), ConfigError);
}

TEST_CASE("zero relation leaves the anchor in place") {
    Toy toy;
    Model m(config(TempMode::off), toy.splits.test, toy.tg, 1);
    auto rel = toy.r("part_of");
    auto& table = m.params().value("relation_emb");
    for (std::size_t k = 0; k < table.cols(); ++k) table(rel.index(), k) = 0.0;
    Model::Forward f(m);
    auto qe = f.embed(QueryDAG::make(Structure::p1, {toy.e("unit0")}, {rel}));
    REQUIRE(qe.branches.size() == 1);
    CHECK(qe.branches[0].value() == f.entity(toy.e("unit0")).value());
}

TEST_CASE("duplicate intersection branches reduce to the single-branch image") {
    Toy toy;
    Model m(config(TempMode::off), toy.splits.test, toy.tg, 2);
    Model::Forward f(m);
    auto a = toy.e("unit1");
    auto r = toy.r("part_of");
    auto qe = f.embed(QueryDAG::make(Structure::i2, {a, a}, {r, r}));
    auto& t = f.tape();
    auto x = f.entity(a) + f.relation(r);
    auto hidden = relu(add_bias(matmul(t.parameter(m.params(), "inter.hidden_w"), x),
                                t.parameter(m.params(), "inter.hidden_b")));
    auto single = add_bias(matmul(t.parameter(m.params(), "inter.out_w"), hidden),
                           t.parameter(m.params(), "inter.out_b"));
    CHECK(qe.branches[0].value() == single.value());
}

TEST_CASE("unions embed one branch per disjunct") {
    Toy toy;
    for (auto mode : {TempMode::off, TempMode::both}) {
        Model m(config(mode), toy.splits.test, toy.tg, 3);
        Model::Forward f(m);
        auto a0 = toy.e("unit0"), a1 = toy.e("site2");
        auto r0 = toy.r("part_of"), r1 = toy.r("located_in"), r2 = toy.r("governed_by");
        auto u = f.embed(QueryDAG::make(Structure::u2, {a0, a1}, {r0, r1}));
        REQUIRE(u.branches.size() == 2);
        CHECK(u.branches[0].value() == f.embed(QueryDAG::make(Structure::p1, {a0}, {r0})).branches[0].value());
        CHECK(u.branches[1].value() == f.embed(QueryDAG::make(Structure::p1, {a1}, {r1})).branches[0].value());
        auto up = f.embed(QueryDAG::make(Structure::up, {a0, a1}, {r0, r1, r2}));
        CHECK(up.branches.size() == 2);
    }
}

TEST_CASE("scores") {
    Toy toy;
    Model m(config(TempMode::both), toy.splits.test, toy.tg, 4);
    Model::Forward f(m);
    auto e = toy.e("agency2");
    QueryEmbedding exact{{f.entity(e)}};
    CHECK(f.score(exact, e).value()[0] == 0.0);

    auto& t = f.tape();
    auto rep = f.entity(e).value();
    Tensor far = rep, close = rep;
    for (auto& v : far.data()) v += 1.0;
    close[0] += 0.25;
    QueryEmbedding two{{t.constant(far), t.constant(close)}};
    CHECK(f.score(two, e).value()[0] == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK_THROWS_AS(f.score(two, EntityId{999}), LookupError);
}

TEST_CASE("margin loss cases") {
    Toy toy;
    auto c = config(TempMode::off, 4);
    c.margin = 3.0;
    Model m(c, toy.splits.test, toy.tg, 5);
    Model::Forward f(m);
    auto pos = toy.e("site1");
    auto neg = toy.e("site3");
    QueryEmbedding at_pos{{f.entity(pos)}};
    std::vector<EntityId> same{pos};
    CHECK(f.loss(at_pos, pos, same).value()[0] == 3.0);

    // Put the negative far away so the margin is satisfied.
    auto& table = m.params().value("entity_emb");
    for (std::size_t k = 0; k < table.cols(); ++k) table(neg.index(), k) = table(pos.index(), k) + 10.0;
    Model::Forward g(m);
    QueryEmbedding q{{g.entity(pos)}};
    std::vector<EntityId> negs{neg};
    CHECK(g.loss(q, pos, negs).value()[0] == 0.0);
    CHECK_THROWS_AS(g.loss(q, pos, std::vector<EntityId>{}), PreconditionError);
}

TEST_CASE("end-to-end loss gradient at d=4") {
    Toy toy;
    for (auto mode : {TempMode::off, TempMode::ter_only, TempMode::trr_only, TempMode::both}) {
        for (auto fusion : {Fusion::gated, Fusion::concat}) {
            auto c = config(mode, 4);
            c.fusion = fusion;
            Model m(c, toy.splits.test, toy.tg, 6);
            auto q = QueryDAG::make(Structure::pi, {toy.e("unit0"), toy.e("site2")},
                                    {toy.r("part_of"), toy.r("located_in"), toy.r("located_in")});
            std::vector<EntityId> negs{toy.e("region1"), toy.e("agency3")};
            auto res = tcqa::testing::grad_check_values(m.params(), [&](bool backward) {
                Model::Forward f(m);
                auto loss = f.loss(q, toy.e("region2"), negs);
                if (backward) f.tape().backward(loss);
                return loss.value()[0];
            });
            INFO(to_string(mode), " ", to_string(fusion));
            CHECK(res.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("intersection ignores branch order bit for bit") {
    Toy toy;
    Model m(config(TempMode::both), toy.splits.test, toy.tg, 7);
    Model::Forward f(m);
    std::vector<EntityId> a{toy.e("unit0"), toy.e("unit1"), toy.e("unit4")};
    std::vector<RelationId> r(3, toy.r("part_of"));
    auto base = f.embed(QueryDAG::make(Structure::i3, a, r)).branches[0].value();
    std::sort(a.begin(), a.end());
    do {
        Model::Forward g(m);
        CHECK(g.embed(QueryDAG::make(Structure::i3, a, r)).branches[0].value() == base);
    } while (std::next_permutation(a.begin(), a.end()));
}

TEST_CASE("negation is rejected") {
    Toy toy;
    Model m(config(TempMode::off), toy.splits.test, toy.tg, 8);
    std::vector<QueryNode> nodes(3);
    nodes[0] = {QueryNode::Kind::anchor, toy.e("unit0"), {}, {}};
    nodes[1] = {QueryNode::Kind::projection, {}, toy.r("part_of"), {0}};
    nodes[2] = {QueryNode::Kind::negation, {}, {}, {1}};
    Model::Forward f(m);
    CHECK_THROWS_AS(f.embed(QueryDAG::from_nodes(nodes)), UnsupportedStructure);
}

TEST_CASE("inductive representation") {
    auto splits = load_splits(tcqa::testing::data_dir("toy_inductive"));
    auto tg = build_type_graph(splits.train);
    auto seen = splits.train.entities_in_triples();
    auto unseen = *splits.test.find_entity("site6");
    REQUIRE_FALSE(seen.contains(unseen));
    auto q = QueryDAG::make(Structure::p1, {*splits.test.find_entity("unit6")}, {*splits.test.find_relation("part_of")});

    auto c = config(TempMode::both);
    c.inductive = true;
    Model m(c, splits.test, tg, 9, seen);
    auto scores = m.score_all(q);
    CHECK(std::all_of(scores.begin(), scores.end(), [](double s) { return std::isfinite(s); }));

    // Entity embeddings never reach the type-aware representation.
    Tensor before = Model::Forward(m).entity(unseen).value();
    for (auto& v : m.params().value("entity_emb").data()) v += 0.37;
    CHECK(Model::Forward(m).entity(unseen).value() == before);
    CHECK(m.score_all(q) == scores);

    auto off = config(TempMode::off);
    off.inductive = true;
    Model plain(off, splits.test, tg, 9, seen);
    CHECK_THROWS_AS(plain.score_all(q), ContractError);
    CHECK_NOTHROW(Model::Forward(plain).entity(*seen.begin()));
}

TEST_CASE("base parameters come first and match across modes") {
    Toy toy;
    Model off(config(TempMode::off), toy.splits.test, toy.tg, 10);
    CHECK_FALSE(off.params().contains("type_emb"));
    for (auto mode : {TempMode::ter_only, TempMode::trr_only, TempMode::both}) {
        Model on(config(mode), toy.splits.test, toy.tg, 10);
        CHECK(on.params().contains("type_emb"));
        for (std::size_t i = 0; i < off.params().size(); ++i) {
            CHECK(on.params().name(i) == off.params().name(i));
            CHECK(on.params().value(i) == off.params().value(i));
        }
    }
}

TEST_CASE("checkpoint round trip") {
    Toy toy;
    auto c = config(TempMode::both);
    c.fusion = Fusion::concat;
    Model m(c, toy.splits.test, toy.tg, 11);
    auto dir = tcqa::testing::scratch_dir("model_ckpt");
    m.save(dir / "m.ckpt");
    auto back = Model::load(dir / "m.ckpt", toy.splits.test, toy.tg);
    CHECK(back.params() == m.params());
    CHECK(back.config().to_json() == c.to_json());
    auto q = QueryDAG::make(Structure::p2, {toy.e("unit2")}, {toy.r("part_of"), toy.r("located_in")});
    CHECK(back.score_all(q) == m.score_all(q));

    KnowledgeGraph bigger = toy.splits.test;
    bigger.intern_entity("newcomer");
    CHECK_THROWS_AS(Model::load(dir / "m.ckpt", bigger, toy.tg), IoError);
}
