#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "tcqa/metrics.hpp"
#include "tcqa/model.hpp"
#include "tcqa/query.hpp"

namespace tcqa {

inline constexpr int kReportSchemaVersion = 1;

struct EvalReport {
    int schema_version = kReportSchemaVersion;
    Regime regime = Regime::deductive;
    std::map<Structure, MetricSummary> per_structure;
    /// Unweighted mean of the per-structure rows.
    MetricSummary average;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    /// Metrics as rows, structures as columns, values ×100.
    std::string to_table() const;

    bool operator==(const EvalReport&) const = default;
};

/// Filtered ranks of `targets` for one query.
std::vector<std::size_t> rank_answers(Model& model, const QueryDAG& q, const AnswerSet& targets,
                                      const AnswerSet& filter);

/// Evaluates every query of `queries` and aggregates per structure.
///
/// Generalization ranks only the answers missing from the training graph;
/// the other regimes rank all answers. Every answer is filtered from the
/// ranking of the others. An inductive regime needs an inductive model, and
/// the query set must carry the same regime (ContractError otherwise).
EvalReport run_regime(Regime regime, Model& model, const QuerySet& queries,
                      const nlohmann::json& config_echo = nlohmann::json::object());

void save_report(const EvalReport& report, const std::filesystem::path& path);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace tcqa
