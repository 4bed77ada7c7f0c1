#include "tcqa/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcqa/errors.hpp"
#include "tcqa/eval.hpp"
#include "tcqa/kg.hpp"
#include "tcqa/model.hpp"
#include "tcqa/params.hpp"
#include "tcqa/query.hpp"
#include "tcqa/train.hpp"
#include "tcqa/typegraph.hpp"

namespace tcqa {

namespace {

constexpr const char* kSeedEnv = "TEMP_CQA_SEED";

struct GraphSource {
    std::string data;
    std::string triples;
    std::string types;
    std::string graph = "test";

    void add_to(CLI::App* cmd) {
        cmd->add_option("--data", data, "Dataset directory with train/valid/test/types TSV files");
        cmd->add_option("--triples", triples, "Single triples TSV (instead of --data)");
        cmd->add_option("--types", types, "Entity type TSV used with --triples");
        cmd->add_option("--graph", graph, "Split graph to read from --data")
            ->check(CLI::IsMember({"train", "valid", "test"}));
    }

    KnowledgeGraph load() const {
        if (!data.empty() && !triples.empty()) throw ConfigError("use either --data or --triples, not both");
        if (!triples.empty()) {
            return load_kg(triples, types);
        }
        if (data.empty()) throw ConfigError("a graph is required (--data or --triples)");
        auto splits = load_splits(data);
        if (graph == "train") return std::move(splits.train);
        if (graph == "valid") return std::move(splits.valid);
        return std::move(splits.test);
    }
};

const KnowledgeGraph& training_graph(const SplitGraphs& splits, Regime regime) {
    return regime == Regime::deductive ? splits.test : splits.train;
}

std::optional<std::set<EntityId>> seen_for(const ModelConfig& config, const SplitGraphs& splits, Regime regime) {
    if (!config.inductive) return std::nullopt;
    return training_graph(splits, regime).entities_in_triples();
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const nlohmann::json& file) {
    if (flag) return *flag;
    if (file.contains("seed")) return file.at("seed").get<std::uint64_t>();
    if (const char* env = std::getenv(kSeedEnv)) {
        try {
            std::size_t used = 0;
            auto v = std::stoull(env, &used);
            if (used == std::string(env).size()) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string(kSeedEnv) + " is not an unsigned integer: '" + env + "'");
    }
    return 0;
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Type-aware complex query answering toolkit", "tcqa"};
    app.require_subcommand(1);
    app.fallthrough(false);

    // load
    GraphSource load_src;
    std::string load_out;
    auto* load_cmd = app.add_subcommand("load", "Parse a graph and print vocabulary statistics");
    load_src.add_to(load_cmd);
    load_cmd->add_option("--out", load_out, "Write the parsed graph (triples, types, vocab.json) here");

    // build-typegraph
    GraphSource tg_src;
    std::string tg_format = "json", tg_out;
    auto* tg_cmd = app.add_subcommand("build-typegraph", "Derive the relation type graph");
    tg_src.add_to(tg_cmd);
    tg_cmd->add_option("--format", tg_format)->check(CLI::IsMember({"json", "dot"}));
    tg_cmd->add_option("--out", tg_out, "Output file (stdout if omitted)");

    // gen-queries
    std::string gq_data, gq_out, gq_regime = "deductive", gq_role = "eval";
    std::vector<std::string> gq_structures;
    std::size_t gq_count = 100;
    std::optional<std::uint64_t> gq_seed;
    auto* gq_cmd = app.add_subcommand("gen-queries", "Sample queries with exact answers");
    gq_cmd->add_option("--data", gq_data)->required();
    gq_cmd->add_option("--out", gq_out, "JSONL output")->required();
    gq_cmd->add_option("--regime", gq_regime)->check(CLI::IsMember({"generalization", "deductive", "inductive"}));
    gq_cmd->add_option("--role", gq_role, "train: sample on the regime's training graph; eval: held-out sampling")
        ->check(CLI::IsMember({"train", "eval"}));
    gq_cmd->add_option("--structure", gq_structures, "Structure tag, repeatable (default: all for eval, 1p..3i for train)");
    gq_cmd->add_option("--count", gq_count, "Queries per structure");
    gq_cmd->add_option("--seed", gq_seed);

    // train
    std::string tr_data, tr_queries, tr_out, tr_config, tr_loss_csv, tr_temp, tr_aggregator, tr_fusion;
    std::optional<std::uint64_t> tr_seed;
    std::optional<std::size_t> tr_steps, tr_batch, tr_dim, tr_negatives, tr_highway_k, tr_log_every;
    std::optional<double> tr_lr, tr_margin;
    bool tr_inductive = false;
    auto* tr_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
    tr_cmd->add_option("--data", tr_data)->required();
    tr_cmd->add_option("--queries", tr_queries, "Training queries (JSONL)")->required();
    tr_cmd->add_option("--out", tr_out, "Checkpoint path")->required();
    tr_cmd->add_option("--config", tr_config, "JSON file with optional seed, model and train blocks");
    tr_cmd->add_option("--loss-csv", tr_loss_csv);
    tr_cmd->add_option("--seed", tr_seed);
    tr_cmd->add_option("--steps", tr_steps);
    tr_cmd->add_option("--batch-size", tr_batch);
    tr_cmd->add_option("--lr", tr_lr);
    tr_cmd->add_option("--log-every", tr_log_every);
    tr_cmd->add_option("--dim", tr_dim);
    tr_cmd->add_option("--temp", tr_temp)->check(CLI::IsMember({"off", "ter_only", "trr_only", "both"}));
    tr_cmd->add_option("--margin", tr_margin);
    tr_cmd->add_option("--negatives", tr_negatives);
    tr_cmd->add_option("--highway-k", tr_highway_k);
    tr_cmd->add_option("--aggregator", tr_aggregator)->check(CLI::IsMember({"highway", "mean", "max"}));
    tr_cmd->add_option("--fusion", tr_fusion)->check(CLI::IsMember({"gated", "concat"}));
    tr_cmd->add_flag("--inductive", tr_inductive, "Represent entities from their types only");

    // eval
    std::string ev_data, ev_checkpoint, ev_queries, ev_out, ev_format = "table";
    auto* ev_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a query file");
    ev_cmd->add_option("--data", ev_data)->required();
    ev_cmd->add_option("--checkpoint", ev_checkpoint)->required();
    ev_cmd->add_option("--queries", ev_queries)->required();
    ev_cmd->add_option("--out", ev_out, "Write the report JSON here");
    ev_cmd->add_option("--format", ev_format)->check(CLI::IsMember({"table", "json"}));

    // answer
    GraphSource an_src;
    std::string an_structure;
    std::vector<std::string> an_anchors, an_relations;
    auto* an_cmd = app.add_subcommand("answer", "Exact answers of one query");
    an_src.add_to(an_cmd);
    an_cmd->add_option("--structure", an_structure)->required();
    an_cmd->add_option("--anchor", an_anchors, "Anchor entity name, repeatable")->required();
    an_cmd->add_option("--relation", an_relations, "Relation name, repeatable")->required();

    // report
    std::string rp_input, rp_format = "table";
    auto* rp_cmd = app.add_subcommand("report", "Render a saved evaluation report");
    rp_cmd->add_option("--input", rp_input)->required();
    rp_cmd->add_option("--format", rp_format)->check(CLI::IsMember({"table", "json"}));

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (load_cmd->parsed()) {
            auto kg = load_src.load();
            out << "entities\t" << kg.num_entities() << '\n'
                << "relations\t" << kg.num_relations() << '\n'
                << "types\t" << kg.num_types() - 1 << '\n'
                << "triples\t" << kg.triples().size() << '\n'
                << "type_assertions\t" << kg.type_assertions().size() << '\n';
            if (!load_src.data.empty()) {
                auto splits = load_splits(load_src.data);
                out << "train_triples\t" << splits.train.triples().size() << '\n'
                    << "valid_triples\t" << splits.valid.triples().size() << '\n'
                    << "test_triples\t" << splits.test.triples().size() << '\n'
                    << "inductive\t" << (splits.inductive ? "yes" : "no") << '\n';
            }
            if (!load_out.empty()) save_kg(kg, load_out);
        } else if (tg_cmd->parsed()) {
            auto kg = tg_src.load();
            auto tg = build_type_graph(kg);
            std::string text = tg_format == "dot" ? tg.to_dot(kg) : tg.to_json(kg);
            if (tg_out.empty()) {
                out << text << '\n';
            } else {
                std::ofstream f(tg_out);
                if (!f) throw IoError("cannot write " + tg_out);
                f << text << '\n';
            }
        } else if (gq_cmd->parsed()) {
            if (gq_count == 0) throw PreconditionError("--count must be at least 1");
            const Regime regime = parse_regime(gq_regime);
            const std::uint64_t seed = resolve_seed(gq_seed, nlohmann::json::object());
            std::vector<Structure> structures;
            for (const auto& tag : gq_structures) structures.push_back(parse_structure(tag));
            if (structures.empty()) {
                if (gq_role == "train") structures.assign(kTrainingStructures.begin(), kTrainingStructures.end());
                else structures.assign(kAllStructures.begin(), kAllStructures.end());
            }
            auto splits = load_splits(gq_data);
            if (regime == Regime::inductive && !splits.inductive) {
                throw PreconditionError("inductive queries need test edges over entities absent from training");
            }
            std::vector<QuerySet> sets;
            for (std::size_t i = 0; i < structures.size(); ++i) {
                const std::uint64_t s = seed + i;
                if (gq_role == "train") {
                    sets.push_back(generate_training_queries(training_graph(splits, regime), structures[i], gq_count, regime, s));
                } else {
                    sets.push_back(generate_queries(splits, structures[i], gq_count, regime, s));
                }
            }
            auto all = merge(sets);
            serialize_queries(all, gq_out);
            for (const auto& [s, n] : all.counts()) out << to_string(s) << '\t' << n << '\n';
        } else if (tr_cmd->parsed()) {
            nlohmann::json file = tr_config.empty() ? nlohmann::json::object() : read_json_file(tr_config);
            for (const auto& [key, value] : file.items()) {
                if (key != "seed" && key != "model" && key != "train") {
                    throw ConfigError("unknown config section '" + key + "'");
                }
            }
            ModelConfig mc = ModelConfig::from_json(file.value("model", nlohmann::json::object()));
            TrainConfig tc = TrainConfig::from_json(file.value("train", nlohmann::json::object()));
            if (tr_dim) mc.dim = *tr_dim;
            if (!tr_temp.empty()) mc.temp = parse_temp_mode(tr_temp);
            if (tr_margin) mc.margin = *tr_margin;
            if (tr_negatives) mc.negative_samples = *tr_negatives;
            if (tr_highway_k) mc.highway_k = *tr_highway_k;
            if (!tr_aggregator.empty()) mc.entity_aggregator = parse_aggregator(tr_aggregator);
            if (!tr_fusion.empty()) mc.fusion = parse_fusion(tr_fusion);
            if (tr_inductive) mc.inductive = true;
            if (tr_steps) tc.steps = *tr_steps;
            if (tr_batch) tc.batch_size = *tr_batch;
            if (tr_lr) tc.learning_rate = *tr_lr;
            if (tr_log_every) tc.log_every = *tr_log_every;
            tc.seed = resolve_seed(tr_seed, file);
            mc.validate();

            auto splits = load_splits(tr_data);
            auto queries = load_queries(tr_queries);
            const auto& graph = training_graph(splits, queries.regime);
            Model model(mc, splits.test, build_type_graph(graph), tc.seed, seen_for(mc, splits, queries.regime));
            auto result = train(model, queries, tc);
            model.save(tr_out);
            if (!tr_loss_csv.empty()) write_loss_csv(result, tc.log_every, tr_loss_csv);
            out << "checkpoint\t" << tr_out << '\n'
                << "hash\t" << file_hash(tr_out) << '\n'
                << "steps\t" << result.losses.size() << '\n';
            if (!result.losses.empty()) out << "final_loss\t" << result.losses.back() << '\n';
        } else if (ev_cmd->parsed()) {
            auto splits = load_splits(ev_data);
            auto queries = load_queries(ev_queries);
            nlohmann::json meta;
            const auto seed = ParameterStore::load(ev_checkpoint, &meta).seed();
            auto mc = ModelConfig::from_json(meta.at("model_config"));
            const auto& graph = training_graph(splits, queries.regime);
            Model model = Model::load(ev_checkpoint, splits.test, build_type_graph(graph),
                                      seen_for(mc, splits, queries.regime));
            nlohmann::json echo = {{"model", mc.to_json()},
                                   {"checkpoint_hash", file_hash(ev_checkpoint)},
                                   {"seed", seed}};
            auto report = run_regime(queries.regime, model, queries, echo);
            if (!ev_out.empty()) save_report(report, ev_out);
            out << (ev_format == "json" ? report.to_json().dump(2) + "\n" : report.to_table());
        } else if (an_cmd->parsed()) {
            auto kg = an_src.load();
            std::vector<EntityId> anchors;
            for (const auto& name : an_anchors) {
                auto e = kg.find_entity(name);
                if (!e) throw LookupError("unknown entity '" + name + "'");
                anchors.push_back(*e);
            }
            std::vector<RelationId> relations;
            for (const auto& name : an_relations) {
                auto r = kg.find_relation(name);
                if (!r) throw LookupError("unknown relation '" + name + "'");
                relations.push_back(*r);
            }
            auto q = QueryDAG::make(parse_structure(an_structure), anchors, relations);
            for (EntityId e : answer_query(kg, q)) out << kg.entities().name(e.value) << '\n';
        } else if (rp_cmd->parsed()) {
            auto report = load_report(rp_input);
            out << (rp_format == "json" ? report.to_json().dump(2) + "\n" : report.to_table());
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace tcqa
