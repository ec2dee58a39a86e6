#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "glassbox/report.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef GLASSBOX_BIN
#error "GLASSBOX_BIN must point at the CLI executable"
#endif

const std::string kBin = GLASSBOX_BIN;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = kBin + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf;
    while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

const std::string kRoot = "/tmp/glassbox_cli_test";

std::string write_tiny_config() {
    const std::string path = kRoot + "/tiny.conf";
    fs::create_directories(kRoot);
    std::ofstream out(path);
    out << "synth.rows = 240\n"
           "synth.cols = 24\n"
           "synth.informative = 4\n"
           "synth.classes = 2\n"
           "synth.noise_sigma = 0.4\n"
           "cae.embedding_dim = 4\n"
           "cae.epochs = 6\n"
           "cae.channels = 4,4\n"
           "cae.kernel_width = 3\n"
           "probe.epochs = 10\n"
           "probe.hidden = 8\n"
           "top_k = 8\n"
           "forest.n_trees = 20\n"
           "forest.max_depth = 5\n"
           "shap.background = 8\n"
           "explain.instances = 2\n";
    return path;
}

void run_pipeline(const std::string& run_dir, const std::string& config,
                  const std::string& extra = "") {
    const std::string shared = " --config " + config + " --run-dir " + run_dir + extra;
    for (const std::string stage : {"synth", "train-blackbox", "probe", "sensitivity",
                                    "surrogate", "importance", "rules", "explain", "report"}) {
        RunResult r = run(stage + shared);
        INFO("stage ", stage, " output:\n", r.output);
        REQUIRE(r.exit_code == 0);
    }
}

}  // namespace

TEST_CASE("full pipeline smoke on tiny synthetic data") {
    const std::string cfg = write_tiny_config();
    const std::string dir = kRoot + "/run_a";
    fs::remove_all(dir);
    run_pipeline(dir, cfg);

    for (const std::string f : {"data.json", "checkpoint.json", "probe.json", "ranking.json",
                                "sensitivity.json", "surrogate_ert.json", "importance.json",
                                "rules.json", "rules.txt", "explanations.json", "report.json"}) {
        INFO("missing artifact: ", f);
        CHECK(fs::exists(dir + "/" + f));
    }
    glassbox::Report rep = glassbox::Report::load(dir + "/report.json");
    rep.validate();
    CHECK(rep.body.contains("blackbox"));
    CHECK(rep.body.contains("ranking"));
    CHECK(rep.body.contains("surrogates"));
    CHECK(rep.body.contains("rules"));
    CHECK(rep.body.contains("explanations"));
}

TEST_CASE("rerun with the same seed is byte-identical modulo timestamps") {
    const std::string cfg = write_tiny_config();
    const std::string a = kRoot + "/run_a";  // reuses the smoke run when present
    const std::string b = kRoot + "/run_b";
    if (!fs::exists(a + "/report.json")) run_pipeline(a, cfg);
    fs::remove_all(b);
    run_pipeline(b, cfg, " --threads 2");

    glassbox::Report ra = glassbox::Report::load(a + "/report.json");
    glassbox::Report rb = glassbox::Report::load(b + "/report.json");
    CHECK(ra.without_timestamps() == rb.without_timestamps());
}

TEST_CASE("explain --instance emits a local explanation for that row") {
    const std::string cfg = write_tiny_config();
    const std::string dir = kRoot + "/run_a";
    if (!fs::exists(dir + "/rules.json")) run_pipeline(dir, cfg);
    RunResult r = run("explain --config " + cfg + " --run-dir " + dir + " --instance 7");
    CHECK(r.exit_code == 0);
    std::ifstream in(dir + "/explanations.json");
    nlohmann::json j = nlohmann::json::parse(in);
    bool found = false;
    for (const auto& e : j.at("explanations")) {
        if (e.at("instance_id") == 7) found = true;
    }
    CHECK(found);
}

TEST_CASE("exit code 1 on usage errors") {
    CHECK(run("synth --config /tmp/glassbox_missing.conf --run-dir " + kRoot + "/x").exit_code ==
          1);
    CHECK(run("no-such-command").exit_code == 1);
    CHECK(run("probe").exit_code != 0);  // missing upstream artifacts

    const std::string bad = kRoot + "/bad.conf";
    fs::create_directories(kRoot);
    std::ofstream(bad) << "not.a.real.key = 1\n";
    CHECK(run("synth --config " + bad + " --run-dir " + kRoot + "/x").exit_code == 1);
}

TEST_CASE("exit code 2 on data errors") {
    const std::string dir = kRoot + "/empty_run";
    fs::remove_all(dir);
    fs::create_directories(dir);
    // train-blackbox with no ingest/synth artifact -> data error
    CHECK(run("train-blackbox --run-dir " + dir).exit_code == 2);

    const std::string csv = kRoot + "/bad.csv";
    std::ofstream(csv) << "a,b,label\n1,oops,0\n";
    CHECK(run("ingest --input " + csv + " --run-dir " + dir).exit_code == 2);
    CHECK(run("ingest --input /tmp/glassbox_nonexistent.csv --run-dir " + dir).exit_code == 2);
}

TEST_CASE("exit code 3 on numeric failures") {
    // a barely-trained classifier on heavily imbalanced labels predicts one
    // class everywhere, so the surrogate R^2 denominator has zero variance
    const std::string dir = kRoot + "/numeric_run";
    fs::remove_all(dir);
    const std::string csv = kRoot + "/skewed.csv";
    fs::create_directories(kRoot);
    {
        std::ofstream out(csv);
        out << "a,b,c,d,label\n";
        for (int i = 0; i < 40; ++i) {
            out << (i % 7) << "," << (i % 5) << "," << (i % 3) << "," << (i % 2) << ","
                << (i < 6 ? 1 : 0) << "\n";
        }
    }
    const std::string cfg = kRoot + "/numeric.conf";
    std::ofstream(cfg) << "cae.embedding_dim = 2\ncae.epochs = 2\ncae.channels = 2,2\n"
                          "cae.kernel_width = 3\ntop_k = 3\nforest.n_trees = 5\n";
    REQUIRE(run("ingest --input " + csv + " --config " + cfg + " --run-dir " + dir).exit_code ==
            0);
    REQUIRE(run("train-blackbox --config " + cfg + " --run-dir " + dir).exit_code == 0);
    REQUIRE(run("probe --config " + cfg + " --run-dir " + dir).exit_code == 0);
    CHECK(run("surrogate --config " + cfg + " --run-dir " + dir).exit_code == 3);
}
