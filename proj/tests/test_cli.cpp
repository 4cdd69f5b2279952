#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "aloha/cli.hpp"

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = aloha::cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

/// Rows of a CSV keyed by header name.
std::vector<std::map<std::string, std::string>> parse_csv(const std::string& text) {
    const auto ls = lines(text);
    std::vector<std::map<std::string, std::string>> rows;
    if (ls.empty()) return rows;
    const auto header = split(ls[0]);
    for (std::size_t i = 1; i < ls.size(); ++i) {
        const auto cells = split(ls[i]);
        std::map<std::string, std::string> row;
        for (std::size_t c = 0; c < header.size() && c < cells.size(); ++c) row[header[c]] = cells[c];
        rows.push_back(std::move(row));
    }
    return rows;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("aloha_cli_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST(CliEval, PoissonSweepCsv) {
    const auto r = run({"eval", "--poisson", "--lambda", "0.02", "--epsilon", "0.4", "--k", "0..30", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 31u);
    EXPECT_EQ(rows[7].at("k"), "7");
    EXPECT_NEAR(std::stod(rows[7].at("1-V_inf")), 0.0535778114, 1e-9);
    EXPECT_NEAR(std::stod(rows[0].at("1-V_inf")), 0.4119, 5e-5);
    for (const auto& row : rows) EXPECT_EQ(row.at("provenance"), "analytic");
}

TEST(CliEval, SingleUser) {
    const auto r = run({"eval", "--finite", "--n", "1", "--q", "0.3", "--epsilon", "0.25", "--k", "0", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].at("metric"), "V");
    EXPECT_DOUBLE_EQ(std::stod(rows[0].at("value")), 0.75);
}

TEST(CliEval, HistoryCurve) {
    const auto r = run({"eval", "--finite", "--n", "2", "--q", "0.0526", "--epsilon", "0.99", "--variant", "history",
                        "--k", "0..200", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 201u);
    EXPECT_EQ(rows[0].at("metric"), "V_hist");
    EXPECT_EQ(rows[0].at("variant"), "history");
}

TEST(CliEval, FiniteFromRate) {
    const auto r = run({"eval", "--finite", "--n", "2", "--lambda", "0.02", "--epsilon", "0.4", "--k", "0", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    EXPECT_NEAR(std::stod(rows[0].at("q")), 0.02 / 1.98, 1e-11);
    EXPECT_NEAR(std::stod(rows[0].at("1-V")), 0.406, 1e-9);
}

TEST(CliEval, InvalidInputsExitTwoWithoutOutput) {
    for (const std::vector<std::string>& args : {
             std::vector<std::string>{"eval", "--poisson", "--lambda", "-1", "--epsilon", "0.4"},
             {"eval", "--poisson", "--lambda", "0.1", "--epsilon", "1.0"},
             {"eval", "--finite", "--n", "2", "--q", "0.1", "--epsilon", "0.4", "--k", "5..2"},
             {"eval", "--finite", "--n", "2", "--q", "0.1", "--epsilon", "0.4", "--k", "x"},
             {"eval", "--finite", "--poisson", "--n", "2", "--q", "0.1", "--epsilon", "0.4"},
             {"eval", "--n", "2", "--q", "0.1", "--epsilon", "0.4"},
             {"eval", "--finite", "--q", "0.1", "--epsilon", "0.4"},
             {"eval", "--finite", "--n", "2", "--q", "0.1", "--epsilon", "0.4", "--variant", "other"},
             {"eval", "--finite", "--n", "2", "--q", "0.1", "--epsilon", "0.4", "--format", "xml"},
             {"frobnicate"},
             {},
         }) {
        const auto r = run(args);
        EXPECT_EQ(r.code, 2) << r.out;
        EXPECT_TRUE(r.out.empty());
        EXPECT_FALSE(r.err.empty());
    }
}

TEST(CliEval, NoCapacityWarningForValidModel) {
    const auto r = run({"eval", "--finite", "--n", "5", "--q", "0.9", "--epsilon", "0", "--k", "0"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.err.find("warning"), std::string::npos);
}

TEST(CliEval, CsvAndJsonCarryTheSameValues) {
    const std::vector<std::string> base{"eval", "--finite", "--n", "3", "--q", "0.07", "--epsilon", "0.35", "--k", "0..6"};
    auto csv_args = base;
    csv_args.insert(csv_args.end(), {"--format", "csv"});
    auto json_args = base;
    json_args.insert(json_args.end(), {"--format", "json"});
    const auto c = run(csv_args);
    const auto j = run(json_args);
    ASSERT_EQ(c.code, 0);
    ASSERT_EQ(j.code, 0);
    const auto rows = parse_csv(c.out);
    const auto doc = nlohmann::json::parse(j.out);
    ASSERT_TRUE(doc.contains("parameters"));
    ASSERT_TRUE(doc.contains("meta"));
    EXPECT_EQ(doc["meta"]["tool"], "aloha-retx");
    const auto& results = doc["results"];
    ASSERT_EQ(results.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(std::stod(rows[i].at("value")), results[i]["value"].get<double>());
        EXPECT_EQ(std::stod(rows[i].at("W")), results[i]["W"].get<double>());
        EXPECT_EQ(std::stoi(rows[i].at("k")), results[i]["k"].get<int>());
        EXPECT_EQ(rows[i].at("variant"), results[i]["variant"].get<std::string>());
    }
}

TEST(CliOptimize, ScanAndNoiselessFastPath) {
    auto r = run({"optimize", "--poisson", "--lambda", "0.02", "--epsilon", "0.4", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].at("metric"), "K_star");
    EXPECT_EQ(rows[0].at("value"), "6");
    EXPECT_EQ(rows[0].at("provenance"), "optimizer");

    r = run({"optimize", "--poisson", "--lambda", "0.5", "--epsilon", "0", "--format", "csv"});
    ASSERT_EQ(r.code, 0);
    rows = parse_csv(r.out);
    EXPECT_EQ(rows[0].at("value"), "0");
}

TEST(CliOptimize, NewtonFields) {
    const auto r = run({"optimize", "--poisson", "--lambda", "0.005", "--epsilon", "0.3", "--newton", "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    const auto& x = doc["results"].back();
    EXPECT_EQ(x["metric"], "x_star");
    EXPECT_LE(x["residual"].get<double>(), 1e-10);
    EXPECT_EQ(x["converged"].get<double>(), 1.0);
    EXPECT_NEAR(x["value"].get<double>(), 7.3791488535, 1e-8);
}

TEST(CliOptimize, NewtonFailureExitsThreeAfterPrintingScan) {
    const auto r = run({"optimize", "--poisson", "--lambda", "0.02", "--epsilon", "0.4", "--newton", "--newton-max-iter",
                        "1", "--format", "csv"});
    EXPECT_EQ(r.code, 3);
    const auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].at("value"), "6");
    EXPECT_EQ(rows[3].at("converged"), "0");
}

TEST(CliOptimize, NewtonNeedsNoise) {
    const auto r = run({"optimize", "--poisson", "--lambda", "0.02", "--epsilon", "0", "--newton"});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
}

TEST(CliOptimize, FiniteHistory) {
    const auto r = run({"optimize", "--finite", "--n", "2", "--q", "0.0526", "--epsilon", "0.99", "--variant", "history",
                        "--k-cap", "200", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    EXPECT_EQ(rows[1].at("metric"), "V_hist");
}

TEST(CliRegions, DefaultGrid) {
    const auto r = run({"regions", "--threads", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ls = lines(r.out);
    ASSERT_EQ(ls.size(), 99u * 75u + 1u);
    EXPECT_EQ(ls[0], "epsilon,lambda,k_star");
    bool found = false;
    for (const auto& row : parse_csv(r.out)) {
        if (row.at("epsilon") == "0.99" && row.at("lambda") == "0.25") {
            EXPECT_EQ(row.at("k_star"), "3");
            found = true;
        }
        if (row.at("epsilon") == "0.01" && std::stod(row.at("lambda")) >= 0.1) {
            EXPECT_EQ(row.at("k_star"), "0");
        }
    }
    EXPECT_TRUE(found);
}

TEST(CliRegions, CornerGridAndJson) {
    auto r = run({"regions", "--eps-min", "0.1", "--eps-max", "0.9", "--eps-points", "2", "--lambda-min", "0.1",
                  "--lambda-max", "0.7", "--lambda-points", "2"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(lines(r.out).size(), 5u);

    r = run({"regions", "--eps-points", "3", "--lambda-points", "4", "--bucket", "--format", "json"});
    ASSERT_EQ(r.code, 0);
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["results"]["k_star"].size(), 3u);
    EXPECT_EQ(doc["results"]["k_star"][0].size(), 4u);
    for (const auto& row : doc["results"]["k_star"])
        for (const auto& k : row) EXPECT_LE(k.get<int>(), 5);
}

TEST(CliRegions, InvalidRange) {
    const auto r = run({"regions", "--eps-min", "0", "--eps-max", "0.5"});
    EXPECT_EQ(r.code, 2);
    EXPECT_TRUE(r.out.empty());
}

TEST(CliSimulate, LoneNoiselessSource) {
    const auto r = run({"simulate", "--finite", "--n", "1", "--q", "0.3", "--epsilon", "0", "--k", "0", "--slots",
                        "100000", "--seed", "1", "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = parse_csv(r.out);
    EXPECT_EQ(rows[0].at("metric"), "v_hat");
    EXPECT_EQ(rows[0].at("value"), "1");
    EXPECT_EQ(rows[0].at("z"), "0");
}

TEST(CliSimulate, JsonReportAndReplicationDump) {
    const auto dir = temp_dir("sim");
    const auto dump = (dir / "reps.csv").string();
    const auto r = run({"simulate", "--poisson", "--lambda", "0.1", "--epsilon", "0.3", "--k", "2", "--slots", "200000",
                        "--replications", "10", "--seed", "5", "--dump-replications", dump, "--format", "json"});
    ASSERT_TRUE(r.code == 0 || r.code == 4) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    EXPECT_EQ(doc["meta"]["seed"], 5);
    EXPECT_EQ(doc["parameters"]["horizon_per_replication"], 20000);
    EXPECT_EQ(doc["results"]["stats"]["replication_count"], 10);
    EXPECT_EQ(doc["results"]["pass"].get<bool>(), r.code == 0);
    std::ifstream in(dump);
    std::stringstream text;
    text << in.rdbuf();
    EXPECT_EQ(lines(text.str()).size(), 11u);
}

TEST(CliSimulate, ConfigErrorsExitTwo) {
    // Missing seed, horizon below the minimum per replication.
    EXPECT_EQ(run({"simulate", "--poisson", "--lambda", "0.1", "--epsilon", "0.3"}).code, 2);
    EXPECT_EQ(run({"simulate", "--poisson", "--lambda", "0.1", "--epsilon", "0.3", "--seed", "1", "--slots", "10000"}).code,
              2);
}

TEST(CliConfig, FileValuesYieldToFlags) {
    const auto dir = temp_dir("cfg");
    const auto path = (dir / "run.cfg").string();
    {
        std::ofstream f(path);
        f << "# scenario\npoisson = true\nlambda = 0.02\nepsilon=0.4\nk=0..3\nformat=csv\n";
    }
    auto r = run({"eval", "--config", path});
    ASSERT_EQ(r.code, 0) << r.err;
    auto rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0].at("lambda"), "0.02");

    r = run({"eval", "--config", path, "--lambda", "0.1", "--k", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    rows = parse_csv(r.out);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].at("lambda"), "0.1");

    EXPECT_EQ(run({"eval", "--config", (dir / "missing.cfg").string()}).code, 2);
}

TEST(CliExamples, AllExamplesAndCurves) {
    const auto dir = temp_dir("examples");
    const auto r = run({"examples", "--curves-dir", dir.string(), "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    ASSERT_EQ(doc["results"].size(), 5u);
    for (int id = 1; id <= 5; ++id) EXPECT_TRUE(std::filesystem::exists(dir / ("example" + std::to_string(id) + "_curves.csv")));
    // Example 3 reports the scanned argmax and flags the index mismatch.
    const auto& ex3 = doc["results"][2];
    bool has_kstar = false;
    for (const auto& h : ex3["headlines"]) has_kstar |= h["metric"] == "K_star";
    EXPECT_TRUE(has_kstar);
    bool flagged = false;
    for (const auto& n : ex3["notes"]) flagged |= n.get<std::string>().find("K=8") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(CliExamples, OutOfRange) {
    EXPECT_EQ(run({"examples", "--example", "6"}).code, 2);
}

TEST(CliHelp, ExitsZero) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("simulate"), std::string::npos);
}
