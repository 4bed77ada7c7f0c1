#include "tcqa/eval.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "tcqa/errors.hpp"

namespace tcqa {

namespace {

// Fresh tape every so many queries keeps memory flat on large query sets.
constexpr std::size_t kQueriesPerPass = 64;

nlohmann::json summary_json(const MetricSummary& m) {
    return {{"queries", m.queries}, {"mrr", m.mrr}, {"hits@1", m.hits1}, {"hits@3", m.hits3},
            {"hits@10", m.hits10}};
}

MetricSummary summary_from_json(const nlohmann::json& j) {
    return {j.at("queries").get<std::size_t>(), j.at("mrr").get<double>(), j.at("hits@1").get<double>(),
            j.at("hits@3").get<double>(), j.at("hits@10").get<double>()};
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * v);
    return buf;
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["regime"] = to_string(regime);
    j["structures"] = nlohmann::json::object();
    for (const auto& [s, m] : per_structure) j["structures"][std::string(to_string(s))] = summary_json(m);
    j["average"] = summary_json(average);
    j["config"] = config;
    return j;
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
    EvalReport r;
    try {
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion) {
            throw ConfigError("unsupported report schema_version " + std::to_string(r.schema_version));
        }
        r.regime = parse_regime(j.at("regime").get<std::string>());
        for (const auto& [tag, m] : j.at("structures").items()) {
            r.per_structure[parse_structure(tag)] = summary_from_json(m);
        }
        r.average = summary_from_json(j.at("average"));
        r.config = j.value("config", nlohmann::json::object());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what());
    }
    return r;
}

std::string EvalReport::to_table() const {
    std::vector<std::string> header{"Metric"};
    for (const auto& [s, m] : per_structure) header.emplace_back(to_string(s));
    header.emplace_back("Avg");

    std::vector<std::vector<std::string>> rows;
    auto add_row = [&](const std::string& name, double MetricSummary::*field) {
        std::vector<std::string> row{name};
        for (const auto& [s, m] : per_structure) row.push_back(percent(m.*field));
        row.push_back(percent(average.*field));
        rows.push_back(std::move(row));
    };
    add_row("MRR", &MetricSummary::mrr);
    add_row("Hits@1", &MetricSummary::hits1);
    add_row("Hits@3", &MetricSummary::hits3);
    add_row("Hits@10", &MetricSummary::hits10);
    std::vector<std::string> counts{"#queries"};
    std::size_t total = 0;
    for (const auto& [s, m] : per_structure) {
        counts.push_back(std::to_string(m.queries));
        total += m.queries;
    }
    counts.push_back(std::to_string(total));
    rows.push_back(std::move(counts));

    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    out << "regime: " << to_string(regime) << '\n';
    auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c == 0) {
                out << row[c] << std::string(width[c] - row[c].size(), ' ');
            } else {
                out << "  " << std::string(width[c] - row[c].size(), ' ') << row[c];
            }
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    return out.str();
}

std::vector<std::size_t> rank_answers(Model& model, const QueryDAG& q, const AnswerSet& targets,
                                      const AnswerSet& filter) {
    return rank_answers(model.score_all(q), targets, filter);
}

EvalReport run_regime(Regime regime, Model& model, const QuerySet& queries, const nlohmann::json& config_echo) {
    if (queries.regime != regime) {
        throw ContractError("query set was generated for the " + std::string(to_string(queries.regime)) +
                            " regime, not " + std::string(to_string(regime)));
    }
    if (regime == Regime::inductive && !model.config().inductive) {
        throw ContractError("inductive evaluation needs a model trained in inductive mode");
    }
    if (queries.queries.empty()) throw UndefinedMetric("no queries to evaluate");

    std::map<Structure, std::vector<QueryRanks>> ranks;
    for (std::size_t start = 0; start < queries.queries.size(); start += kQueriesPerPass) {
        Model::Forward fwd(model);
        const std::size_t end = std::min(queries.queries.size(), start + kQueriesPerPass);
        for (std::size_t i = start; i < end; ++i) {
            const auto& rec = queries.queries[i];
            if (!rec.query.structure()) throw PreconditionError("query without a structure tag");
            const AnswerSet targets = regime == Regime::generalization ? rec.hard_answers() : rec.answers;
            if (targets.empty()) continue;
            auto scores = fwd.score_values(fwd.embed(rec.query));
            ranks[*rec.query.structure()].push_back(rank_answers(scores, targets, rec.answers));
        }
    }
    if (ranks.empty()) throw UndefinedMetric("no query has answers to rank");

    EvalReport report;
    report.regime = regime;
    report.config = config_echo;
    for (const auto& [s, r] : ranks) {
        auto m = summarize(r);
        report.per_structure[s] = m;
        report.average.queries += m.queries;
        report.average.mrr += m.mrr;
        report.average.hits1 += m.hits1;
        report.average.hits3 += m.hits3;
        report.average.hits10 += m.hits10;
    }
    const double n = static_cast<double>(report.per_structure.size());
    report.average.mrr /= n;
    report.average.hits1 /= n;
    report.average.hits3 /= n;
    report.average.hits10 /= n;
    return report;
}

void save_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << report.to_json().dump(2) << '\n';
}

EvalReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return EvalReport::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string(), 1, e.what());
    }
}

}  // namespace tcqa
