#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "support.hpp"
#include "tcqa/cli.hpp"

using tcqa::run_cli;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::string field(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(key + "\t", 0) == 0) return line.substr(key.size() + 1);
    }
    return {};
}

const std::string kToy = tcqa::testing::data_dir("toy").string();

}  // namespace

TEST_CASE("answer passes the oracle through") {
    auto dir = tcqa::testing::scratch_dir("cli_answer");
    std::ofstream(dir / "kg.tsv") << "a\tr\tb\n";
    auto r = cli({"answer", "--triples", (dir / "kg.tsv").string(), "--structure", "1p", "--anchor", "a", "--relation", "r"});
    CHECK(r.code == 0);
    CHECK(r.out == "b\n");

    auto two = cli({"answer", "--data", kToy, "--structure", "2i", "--anchor", "unit0", "--anchor", "unit1",
                    "--relation", "part_of", "--relation", "part_of"});
    CHECK(two.code == 0);
    CHECK(two.out == "site1\nsite2\n");

    auto missing = cli({"answer", "--triples", (dir / "kg.tsv").string(), "--structure", "1p", "--anchor", "zz",
                        "--relation", "r"});
    CHECK(missing.code != 0);
    CHECK(missing.err.find("zz") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({"load", "--data", kToy, "--bogus"}).code == 2);
    CHECK(cli({"gen-queries", "--data", kToy}).code == 2);
    CHECK(cli({"--help"}).code == 0);
    CHECK(cli({"train", "--help"}).code == 0);
}

TEST_CASE("load and build-typegraph") {
    auto load = cli({"load", "--data", kToy});
    CHECK(load.code == 0);
    CHECK(field(load.out, "entities") == "20");
    CHECK(field(load.out, "relations") == "3");
    CHECK(field(load.out, "types") == "4");
    auto tg = cli({"build-typegraph", "--data", kToy});
    REQUIRE(tg.code == 0);
    auto j = nlohmann::json::parse(tg.out);
    CHECK(j["edges"].size() == 3);
    auto dot = cli({"build-typegraph", "--data", kToy, "--format", "dot"});
    CHECK(dot.out.rfind("digraph", 0) == 0);
}

TEST_CASE("gen-queries validates its count") {
    auto dir = tcqa::testing::scratch_dir("cli_gen");
    auto r = cli({"gen-queries", "--data", kToy, "--count", "0", "--out", (dir / "q.jsonl").string()});
    CHECK(r.code != 0);
    CHECK(r.code != 2);
    CHECK(r.err.find("count") != std::string::npos);
}

TEST_CASE("pipeline: train twice, evaluate, report") {
    auto dir = tcqa::testing::scratch_dir("cli_pipeline");
    auto train_q = (dir / "train.jsonl").string();
    auto eval_q = (dir / "eval.jsonl").string();
    REQUIRE(cli({"gen-queries", "--data", kToy, "--role", "train", "--structure", "1p", "--structure", "2p",
                 "--count", "5", "--seed", "1", "--out", train_q}).code == 0);
    REQUIRE(cli({"gen-queries", "--data", kToy, "--structure", "1p", "--structure", "ip", "--count", "3",
                 "--seed", "2", "--out", eval_q}).code == 0);

    std::vector<std::string> train_args = {"train", "--data", kToy, "--queries", train_q, "--steps", "20",
                                           "--batch-size", "8", "--dim", "8", "--temp", "both", "--lr", "0.01"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = train_args;
        args.insert(args.end(), extra.begin(), extra.end());
        return cli(args);
    };
    auto a = with({"--seed", "7", "--out", (dir / "a.ckpt").string(), "--loss-csv", (dir / "loss.csv").string()});
    auto b = with({"--seed", "7", "--out", (dir / "b.ckpt").string()});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(field(a.out, "hash").size() == 16);
    CHECK(field(a.out, "hash") == field(b.out, "hash"));

    setenv("TEMP_CQA_SEED", "7", 1);
    auto env = with({"--out", (dir / "c.ckpt").string()});
    unsetenv("TEMP_CQA_SEED");
    CHECK(field(env.out, "hash") == field(a.out, "hash"));
    auto other = with({"--seed", "8", "--out", (dir / "d.ckpt").string()});
    CHECK(field(other.out, "hash") != field(a.out, "hash"));

    std::ifstream csv(dir / "loss.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "step,loss");

    auto cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"seed": 7, "model": {"dim": 8, "temp": "both"}, "train": {"learning_rate": 0.01, "steps": 20, "batch_size": 8}})";
    auto from_file = cli({"train", "--data", kToy, "--queries", train_q, "--config", cfg.string(), "--out",
                          (dir / "e.ckpt").string()});
    CHECK(from_file.code == 0);
    CHECK(field(from_file.out, "hash") == field(a.out, "hash"));
    std::ofstream(cfg) << R"({"model": {"dimm": 8}})";
    CHECK(cli({"train", "--data", kToy, "--queries", train_q, "--config", cfg.string(), "--out",
               (dir / "f.ckpt").string()}).code == 1);

    auto report_path = (dir / "report.json").string();
    auto ev = cli({"eval", "--data", kToy, "--checkpoint", (dir / "a.ckpt").string(), "--queries", eval_q, "--out",
                   report_path});
    REQUIRE(ev.code == 0);
    CHECK(ev.out.find("Hits@3") != std::string::npos);
    auto rp = cli({"report", "--input", report_path});
    CHECK(rp.code == 0);
    CHECK(rp.out == ev.out);
    auto js = cli({"report", "--input", report_path, "--format", "json"});
    CHECK(nlohmann::json::parse(js.out)["schema_version"] == 1);
}
