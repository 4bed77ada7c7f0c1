#include "support.hpp"

#include <algorithm>
#include <cmath>

namespace tcqa::testing {

std::filesystem::path data_dir(const std::string& name) {
    return std::filesystem::path(TCQA_TEST_DATA_DIR) / name;
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("tcqa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

KnowledgeGraph random_kg(std::mt19937_64& rng, const RandomKgSpec& spec) {
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };
    KnowledgeGraph kg;
    const std::size_t n_ent = pick(2, spec.max_entities);
    const std::size_t n_rel = pick(1, spec.max_relations);
    const std::size_t n_typ = pick(1, spec.max_types);
    const std::size_t n_tri = pick(1, spec.max_triples);
    const std::size_t n_ass = pick(0, spec.max_assertions);
    for (std::size_t i = 0; i < n_tri; ++i) {
        kg.add_triple("e" + std::to_string(pick(0, n_ent - 1)), "r" + std::to_string(pick(0, n_rel - 1)),
                      "e" + std::to_string(pick(0, n_ent - 1)));
    }
    for (std::size_t i = 0; i < n_ass; ++i) {
        kg.add_type("e" + std::to_string(pick(0, n_ent - 1)), "t" + std::to_string(pick(0, n_typ - 1)));
    }
    return kg;
}

std::map<RelationId, NaiveRelationTypes> naive_type_graph(const KnowledgeGraph& kg) {
    auto has_type = [&](EntityId e, TypeId c) {
        for (const auto& a : kg.type_assertions()) {
            if (a.entity == e && a.type == c) return true;
        }
        return false;
    };
    auto untyped = [&](EntityId e) {
        for (const auto& a : kg.type_assertions()) {
            if (a.entity == e) return false;
        }
        return true;
    };
    // Every type id, UNKNOWN included, is a candidate; an untyped entity has
    // exactly {UNKNOWN}.
    auto member = [&](EntityId e, TypeId c) {
        if (untyped(e)) return c == kUnknownType;
        return has_type(e, c);
    };
    std::map<RelationId, NaiveRelationTypes> out;
    for (std::uint32_t r = 0; r < kg.num_relations(); ++r) {
        std::vector<Triple> uses;
        for (const auto& t : kg.triples()) {
            if (t.relation.value == r) uses.push_back(t);
        }
        if (uses.empty()) continue;
        NaiveRelationTypes rt;
        for (std::uint32_t c = 0; c < kg.num_types(); ++c) {
            bool all_heads = true, all_tails = true;
            for (const auto& t : uses) {
                all_heads = all_heads && member(t.head, TypeId{c});
                all_tails = all_tails && member(t.tail, TypeId{c});
            }
            if (all_heads) rt.head.insert(TypeId{c});
            if (all_tails) rt.tail.insert(TypeId{c});
        }
        if (rt.head.empty()) rt.head.insert(kUnknownType);
        if (rt.tail.empty()) rt.tail.insert(kUnknownType);
        out[RelationId{r}] = rt;
    }
    return out;
}

std::set<EntityId> brute_force_answers(const KnowledgeGraph& kg, Structure s,
                                       const std::vector<EntityId>& a,
                                       const std::vector<RelationId>& r) {
    std::set<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> facts;
    for (const auto& t : kg.triples()) facts.insert({t.head.value, t.relation.value, t.tail.value});
    auto holds = [&](std::uint32_t h, RelationId rel, std::uint32_t t) {
        return facts.contains({h, rel.value, t});
    };
    const auto n = static_cast<std::uint32_t>(kg.num_entities());
    std::set<EntityId> out;
    for (std::uint32_t y = 0; y < n; ++y) {
        bool ok = false;
        switch (s) {
            case Structure::p1:
                ok = holds(a[0].value, r[0], y);
                break;
            case Structure::p2:
                for (std::uint32_t v = 0; v < n && !ok; ++v) ok = holds(a[0].value, r[0], v) && holds(v, r[1], y);
                break;
            case Structure::p3:
                for (std::uint32_t v1 = 0; v1 < n && !ok; ++v1) {
                    for (std::uint32_t v2 = 0; v2 < n && !ok; ++v2) {
                        ok = holds(a[0].value, r[0], v1) && holds(v1, r[1], v2) && holds(v2, r[2], y);
                    }
                }
                break;
            case Structure::i2:
                ok = holds(a[0].value, r[0], y) && holds(a[1].value, r[1], y);
                break;
            case Structure::i3:
                ok = holds(a[0].value, r[0], y) && holds(a[1].value, r[1], y) && holds(a[2].value, r[2], y);
                break;
            case Structure::pi:
                for (std::uint32_t v = 0; v < n && !ok; ++v) {
                    ok = holds(a[0].value, r[0], v) && holds(v, r[1], y) && holds(a[1].value, r[2], y);
                }
                break;
            case Structure::ip:
                for (std::uint32_t v = 0; v < n && !ok; ++v) {
                    ok = holds(a[0].value, r[0], v) && holds(a[1].value, r[1], v) && holds(v, r[2], y);
                }
                break;
            case Structure::u2:
                ok = holds(a[0].value, r[0], y) || holds(a[1].value, r[1], y);
                break;
            case Structure::up:
                for (std::uint32_t v = 0; v < n && !ok; ++v) {
                    ok = (holds(a[0].value, r[0], v) || holds(a[1].value, r[1], v)) && holds(v, r[2], y);
                }
                break;
        }
        if (ok) out.insert(EntityId{y});
    }
    return out;
}

QueryDAG random_grounding(std::mt19937_64& rng, const KnowledgeGraph& kg, Structure s) {
    std::uniform_int_distribution<std::uint32_t> ent(0, static_cast<std::uint32_t>(kg.num_entities() - 1));
    std::uniform_int_distribution<std::uint32_t> rel(0, static_cast<std::uint32_t>(kg.num_relations() - 1));
    std::vector<EntityId> anchors;
    std::vector<RelationId> relations;
    for (std::size_t i = 0; i < anchor_count(s); ++i) anchors.emplace_back(ent(rng));
    for (std::size_t i = 0; i < relation_count(s); ++i) relations.emplace_back(rel(rng));
    return QueryDAG::make(s, anchors, relations);
}

double naive_mrr(const std::vector<std::vector<std::size_t>>& ranks) {
    double total = 0.0;
    for (const auto& q : ranks) {
        double inner = 0.0;
        for (std::size_t v = 0; v < q.size(); ++v) inner += 1.0 / static_cast<double>(q[v]);
        total += inner / static_cast<double>(q.size());
    }
    return total / static_cast<double>(ranks.size());
}

double naive_hits(const std::vector<std::vector<std::size_t>>& ranks, std::size_t k) {
    double total = 0.0;
    for (const auto& q : ranks) {
        double inner = 0.0;
        for (std::size_t v = 0; v < q.size(); ++v) inner += q[v] <= k ? 1.0 : 0.0;
        total += inner / static_cast<double>(q.size());
    }
    return total / static_cast<double>(ranks.size());
}

std::vector<std::size_t> naive_ranks(const std::vector<double>& scores, const std::vector<EntityId>& targets,
                                     const std::vector<EntityId>& answers) {
    std::vector<std::size_t> out;
    for (EntityId v : targets) {
        std::vector<double> others;
        for (std::uint32_t e = 0; e < scores.size(); ++e) {
            if (std::find(answers.begin(), answers.end(), EntityId{e}) == answers.end()) others.push_back(scores[e]);
        }
        std::sort(others.begin(), others.end(), std::greater<>());
        const double s = scores[v.index()];
        auto first_tie = std::find_if(others.begin(), others.end(), [&](double x) { return x <= s; });
        auto past_tie = std::find_if(first_tie, others.end(), [&](double x) { return x < s; });
        const auto strict = static_cast<std::size_t>(first_tie - others.begin());
        const auto ties = static_cast<std::size_t>(past_tie - first_tie);
        out.push_back(1 + strict + static_cast<std::size_t>(std::ceil(static_cast<double>(ties) / 2.0)));
    }
    return out;
}

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(rows, cols);
    for (double& v : t.data()) v = u(rng);
    return t;
}

namespace {

double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
}

Var reduce(Tape& tape, Var out, const Tensor& weights) {
    if (out.value().size() == 1) return out;
    return sum(hadamard(out, tape.constant(weights)));
}

}  // namespace

GradCheck grad_check(const TapeFn& fn, std::vector<Tensor> inputs, std::uint64_t seed, double h) {
    std::mt19937_64 rng(seed);
    Tensor weights;
    auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& t : inputs) vars.push_back(tape.constant(t));
        Var out = fn(tape, vars);
        if (weights.empty()) weights = random_tensor(rng, out.rows(), out.cols());
        Var loss = reduce(tape, out, weights);
        double value = loss.value()[0];
        if (with_grad) {
            tape.backward(loss);
            for (Var v : vars) grads->push_back(tape.grad(v.id()));
        }
        return value;
    };
    std::vector<Tensor> analytic;
    evaluate(true, &analytic);
    GradCheck result;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            const double x = inputs[i][k];
            inputs[i][k] = x + h;
            const double up = evaluate(false, nullptr);
            inputs[i][k] = x - h;
            const double down = evaluate(false, nullptr);
            inputs[i][k] = x;
            const double numeric = (up - down) / (2.0 * h);
            result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic[i][k], numeric));
            ++result.checked;
        }
    }
    return result;
}

GradCheck grad_check_values(ParameterStore& store, const ValueFn& fn, double h) {
    fn(true);
    std::vector<Tensor> analytic;
    for (std::size_t i = 0; i < store.size(); ++i) analytic.push_back(store.grad(i));
    GradCheck result;
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto data = store.value(i).data();
        for (std::size_t k = 0; k < data.size(); ++k) {
            const double x = data[k];
            data[k] = x + h;
            const double up = fn(false);
            data[k] = x - h;
            const double down = fn(false);
            data[k] = x;
            const double numeric = (up - down) / (2.0 * h);
            result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic[i][k], numeric));
            ++result.checked;
        }
    }
    return result;
}

GradCheck grad_check_store(ParameterStore& store, const StoreFn& fn, double h) {
    return grad_check_values(store, [&](bool backward) {
        Tape tape;
        Var loss = fn(tape);
        if (backward) tape.backward(loss);
        return loss.value()[0];
    }, h);
}

}  // namespace tcqa::testing
