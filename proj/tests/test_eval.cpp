#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tcqa/errors.hpp"
#include "tcqa/eval.hpp"

using namespace tcqa;

namespace {

std::vector<EntityId> ids(std::initializer_list<std::uint32_t> v) {
    std::vector<EntityId> out;
    for (auto x : v) out.emplace_back(x);
    return out;
}

void check_bounds(const MetricSummary& m) {
    for (double v : {m.mrr, m.hits1, m.hits3, m.hits10}) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(m.hits1 <= m.hits3);
    CHECK(m.hits3 <= m.hits10);
    CHECK(m.mrr <= 1.0);
}

}  // namespace

TEST_CASE("rank examples") {
    std::vector<double> scores{0.9, 0.1, 0.2};
    CHECK(rank_answers(scores, ids({0}), ids({0})) == std::vector<std::size_t>{1});
    std::vector<double> tied{0.5, 0.5, 0.1};
    CHECK(rank_answers(tied, ids({0}), ids({0})) == std::vector<std::size_t>{2});
    std::vector<double> two{0.9, 0.8, 0.1, 0.2};
    CHECK(rank_answers(two, ids({0, 1}), ids({0, 1})) == std::vector<std::size_t>{1, 1});
    std::vector<double> three_ties{0.5, 0.5, 0.5, 0.5};
    CHECK(rank_answers(three_ties, ids({0}), ids({0})) == std::vector<std::size_t>{3});
}

TEST_CASE("metric examples") {
    std::vector<QueryRanks> perfect{{1}, {1, 1}};
    CHECK(mrr(perfect) == 1.0);
    CHECK(hits_at_k(perfect, 1) == 1.0);
    std::vector<QueryRanks> four{{4}};
    CHECK(mrr(four) == 0.25);
    CHECK(hits_at_k(four, 3) == 0.0);
    CHECK(hits_at_k(four, 10) == 1.0);
    std::vector<QueryRanks> pair{{1, 2}};
    CHECK(mrr(pair) == 0.75);
    CHECK_THROWS_AS(mrr(std::vector<QueryRanks>{}), UndefinedMetric);
    CHECK_THROWS_AS(hits_at_k(std::vector<QueryRanks>{{}}, 3), UndefinedMetric);
}

TEST_CASE("metrics and ranks match the naive transcriptions") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<QueryRanks> ranks(std::uniform_int_distribution<int>(1, 6)(rng));
        for (auto& q : ranks) {
            q.resize(std::uniform_int_distribution<int>(1, 5)(rng));
            for (auto& r : q) r = std::uniform_int_distribution<std::size_t>(1, 30)(rng);
        }
        CHECK(std::abs(mrr(ranks) - tcqa::testing::naive_mrr(ranks)) <= 1e-12);
        for (std::size_t k : {1, 3, 10}) {
            CHECK(std::abs(hits_at_k(ranks, k) - tcqa::testing::naive_hits(ranks, k)) <= 1e-12);
        }
        check_bounds(summarize(ranks));

        // Coarse scores force ties.
        std::vector<double> scores(12);
        for (auto& s : scores) s = std::uniform_int_distribution<int>(0, 4)(rng);
        std::vector<EntityId> answers;
        for (std::uint32_t e = 0; e < scores.size(); ++e) {
            if (std::bernoulli_distribution(0.3)(rng)) answers.emplace_back(e);
        }
        if (answers.empty()) answers.emplace_back(0);
        CHECK(rank_answers(scores, answers, answers) == tcqa::testing::naive_ranks(scores, answers, answers));
    }
}

TEST_CASE("adding a true answer never worsens another's rank") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(10);
        for (auto& s : scores) s = std::uniform_int_distribution<int>(0, 3)(rng);
        auto first = EntityId{0};
        auto second = EntityId{std::uniform_int_distribution<std::uint32_t>(1, 9)(rng)};
        auto alone = rank_answers(scores, std::vector<EntityId>{first}, std::vector<EntityId>{first})[0];
        auto with = rank_answers(scores, std::vector<EntityId>{first}, std::vector<EntityId>{first, second})[0];
        CHECK(with <= alone);
    }
}

TEST_CASE("report JSON and table") {
    EvalReport r;
    r.regime = Regime::generalization;
    r.per_structure[Structure::p1] = {3, 0.5, 0.25, 0.5, 1.0};
    r.per_structure[Structure::ip] = {2, 0.75, 0.5, 1.0, 1.0};
    r.average = {5, 0.625, 0.375, 0.75, 1.0};
    r.config = {{"dim", 8}};
    auto j = r.to_json();
    CHECK(j["schema_version"] == kReportSchemaVersion);
    CHECK(EvalReport::from_json(j) == r);
    auto table = r.to_table();
    CHECK(table.find("MRR") != std::string::npos);
    CHECK(table.find("Hits@10") != std::string::npos);
    CHECK(table.find("ip") != std::string::npos);
    CHECK(table.find("62.5") != std::string::npos);
    j["schema_version"] = 99;
    CHECK_THROWS_AS(EvalReport::from_json(j), ConfigError);

    auto dir = tcqa::testing::scratch_dir("eval_report");
    save_report(r, dir / "r.json");
    CHECK(load_report(dir / "r.json") == r);
}

TEST_CASE("regime harness") {
    auto splits = load_splits(tcqa::testing::data_dir("toy"));
    auto tg = build_type_graph(splits.train);
    ModelConfig c;
    c.dim = 8;
    c.temp = TempMode::both;
    Model m(c, splits.test, tg, 1);

    std::vector<QuerySet> parts;
    for (auto s : {Structure::p1, Structure::p2}) parts.push_back(generate_queries(splits, s, 2, Regime::generalization, 4));
    auto gen = merge(parts);
    auto report = run_regime(Regime::generalization, m, gen);
    CHECK(report.schema_version == kReportSchemaVersion);
    for (const auto& [s, metrics] : report.per_structure) check_bounds(metrics);

    // Only answers missing from the training graph are ranked.
    std::vector<QueryRanks> p1;
    for (const auto* rec : gen.of(Structure::p1)) {
        auto hard = rec->hard_answers();
        REQUIRE_FALSE(hard.empty());
        p1.push_back(rank_answers(m.score_all(rec->query), hard, rec->answers));
    }
    CHECK(report.per_structure.at(Structure::p1) == summarize(p1));

    CHECK_THROWS_AS(run_regime(Regime::deductive, m, gen), ContractError);
    auto ind_splits = load_splits(tcqa::testing::data_dir("toy_inductive"));
    auto ind = generate_queries(ind_splits, Structure::p1, 2, Regime::inductive, 1);
    Model transductive(c, ind_splits.test, build_type_graph(ind_splits.train), 1);
    CHECK_THROWS_AS(run_regime(Regime::inductive, transductive, ind), ContractError);
    CHECK_THROWS_AS(run_regime(Regime::deductive, m, QuerySet{}), UndefinedMetric);
}
