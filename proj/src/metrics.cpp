#include "tcqa/metrics.hpp"

#include <algorithm>

#include "tcqa/errors.hpp"

namespace tcqa {

std::vector<std::size_t> rank_answers(std::span<const double> scores, std::span<const EntityId> targets,
                                      std::span<const EntityId> filter) {
    std::vector<bool> filtered(scores.size(), false);
    for (EntityId e : filter) {
        if (e.index() < scores.size()) filtered[e.index()] = true;
    }
    std::vector<std::size_t> ranks;
    ranks.reserve(targets.size());
    for (EntityId v : targets) {
        if (v.index() >= scores.size()) {
            throw LookupError("answer entity " + std::to_string(v.value) + " has no score");
        }
        const double s = scores[v.index()];
        std::size_t higher = 0, ties = 0;
        for (std::size_t e = 0; e < scores.size(); ++e) {
            if (e == v.index() || filtered[e]) continue;
            if (scores[e] > s) ++higher;
            else if (scores[e] == s) ++ties;
        }
        ranks.push_back(1 + higher + (ties + 1) / 2);
    }
    return ranks;
}

namespace {

template <typename PerAnswer>
double average(std::span<const QueryRanks> ranks, PerAnswer f) {
    if (ranks.empty()) throw UndefinedMetric("metric over an empty query set");
    double total = 0.0;
    for (const auto& q : ranks) {
        if (q.empty()) throw UndefinedMetric("query without answers");
        double s = 0.0;
        for (auto r : q) s += f(r);
        total += s / static_cast<double>(q.size());
    }
    return total / static_cast<double>(ranks.size());
}

}  // namespace

double mrr(std::span<const QueryRanks> ranks) {
    return average(ranks, [](std::size_t r) { return 1.0 / static_cast<double>(r); });
}

double hits_at_k(std::span<const QueryRanks> ranks, std::size_t k) {
    return average(ranks, [k](std::size_t r) { return r <= k ? 1.0 : 0.0; });
}

MetricSummary summarize(std::span<const QueryRanks> ranks) {
    return {ranks.size(), mrr(ranks), hits_at_k(ranks, 1), hits_at_k(ranks, 3), hits_at_k(ranks, 10)};
}

}  // namespace tcqa
