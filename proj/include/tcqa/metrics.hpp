#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcqa/ids.hpp"

namespace tcqa {

/// Filtered rank of each target against the entities outside `filter`.
///
/// `scores` is indexed by entity id, higher is better. Entities in `filter`
/// (normally every true answer) are skipped, except the target itself.
/// Rank = 1 + (strictly higher) + ceil(ties / 2).
std::vector<std::size_t> rank_answers(std::span<const double> scores, std::span<const EntityId> targets,
                                      std::span<const EntityId> filter);

/// Ranks of one query's answers.
using QueryRanks = std::vector<std::size_t>;

/// Mean over answers, then over queries. An empty list, or a query without
/// answers, raises UndefinedMetric.
double mrr(std::span<const QueryRanks> ranks);
double hits_at_k(std::span<const QueryRanks> ranks, std::size_t k);

struct MetricSummary {
    std::size_t queries = 0;
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits3 = 0.0;
    double hits10 = 0.0;

    bool operator==(const MetricSummary&) const = default;
};

MetricSummary summarize(std::span<const QueryRanks> ranks);

}  // namespace tcqa
