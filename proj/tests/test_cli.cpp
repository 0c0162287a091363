#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "cli.hpp"

using contend::cli::run_cli;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("contend-cli-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("analyze: exact values in text") {
    auto r = run({"analyze", "--op", "fk-latency", "--n", "5", "--k", "3"});
    CHECK(r.code == 0);
    CHECK(r.out == "597/200 = 2.985\n");

    r = run({"analyze", "--op", "f2-deviation", "--n", "5"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("31/5", 0) == 0);

    r = run({"analyze", "--op", "no-transmit", "--m", "4"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("4", 0) == 0);

    r = run({"analyze", "--op", "pmf", "--n", "3", "--k", "2", "--z", "1"});
    CHECK(r.code == 0);
    CHECK(r.out.find("(1, 3/4)") != std::string::npos);
}

TEST_CASE("analyze: json output") {
    auto r = run({"analyze", "--op", "fk-latency", "--n", "3", "--k", "2", "--format", "json"});
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["result"]["exact"] == "8/3");
    CHECK(j["meta"]["command"] == "analyze");
    CHECK(j["meta"]["version"].is_string());
}

TEST_CASE("exit codes") {
    CHECK(run({"analyze", "--op", "fk-latency", "--n", "2", "--k", "1"}).code == 2);
    CHECK(run({"analyze", "--op", "bound", "--which", "sop", "--n", "20", "--k", "1"}).code == 2);
    CHECK(run({"analyze", "--op", "nonsense", "--n", "2"}).code == 2);
    CHECK(run({"simulate", "--n", "3"}).code == 2);
    CHECK(run({"simulate", "--n", "3", "--k", "2", "--protocol", "aloha"}).code == 2);
    CHECK(run({"simulate", "--n", "3", "--k", "2", "--protocol", "sop", "--feedback", "ack"}).code == 2);
    CHECK(run({"bogus"}).code == 2);
    CHECK(run({"equilibrium", "--max-m", "6", "--tol", "1e-30"}).code == 4);
    auto bad = run({"check", "--n", "5", "--k", "2", "--dev", "uniform:k=1", "--no-mc"});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("equilibrium: stdout csv and files") {
    auto r = run({"equilibrium", "--max-m", "100"});
    REQUIRE(r.code == 0);
    std::istringstream is(r.out);
    std::string line;
    std::getline(is, line);
    CHECK(line.rfind("# {", 0) == 0);
    std::getline(is, line);
    CHECK(line == "m,p_m,F_m");
    std::getline(is, line);
    CHECK(line == "2,0.5,2");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 99);

    auto dir = scratch("eq");
    REQUIRE(run({"equilibrium", "--max-m", "30", "--out", dir.string()}).code == 0);
    auto first = slurp(dir / "equilibrium.csv");
    REQUIRE(run({"equilibrium", "--max-m", "30", "--out", dir.string()}).code == 0);
    CHECK(slurp(dir / "equilibrium.csv") == first);
    auto j = nlohmann::json::parse(slurp(dir / "equilibrium.json"));
    CHECK(j["table"]["rows"].size() == 29);
    fs::remove_all(dir);
}

TEST_CASE("simulate: files and reproducibility") {
    auto a = scratch("sim-a"), b = scratch("sim-b");
    std::vector<std::string> base{"simulate", "--exp", "latency", "--protocol", "uniform", "--n", "4", "--k",
                                  "2",        "--trials", "2000", "--seed", "7"};
    auto ra = base, rb = base;
    ra.insert(ra.end(), {"--out", a.string(), "--workers", "1"});
    rb.insert(rb.end(), {"--out", b.string(), "--workers", "3"});
    REQUIRE(run(ra).code == 0);
    REQUIRE(run(rb).code == 0);
    CHECK(fs::exists(a / "latency.json"));
    auto ca = slurp(a / "latency.csv");
    auto cb = slurp(b / "latency.csv");
    // meta differs only in the workers field, rows must match exactly
    CHECK(ca.substr(ca.find('\n')) == cb.substr(cb.find('\n')));
    auto j = nlohmann::json::parse(slurp(a / "latency.json"));
    CHECK(j["meta"]["seed"] == 7);
    CHECK(j["meta"]["params"]["n"] == 4);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("simulate: deviation writes both batches") {
    auto dir = scratch("dev");
    auto r = run({"simulate", "--exp", "deviation", "--base", "uniform", "--dev", "delay1", "--n", "5", "--k", "2",
                  "--trials", "1000", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("independent streams") != std::string::npos);
    CHECK(fs::exists(dir / "deviation_base.csv"));
    CHECK(fs::exists(dir / "deviation_dev.csv"));
    CHECK(fs::exists(dir / "deviation.json"));
    fs::remove_all(dir);
}

TEST_CASE("simulate: tail with an automatic cut") {
    auto r = run({"simulate", "--exp", "tail", "--protocol", "deadline-r", "--n", "41", "--k", "2", "--trials", "500"});
    CHECK(r.code == 0);
    CHECK(r.out.find("Pr(T > 213)") != std::string::npos);
    CHECK(run({"simulate", "--exp", "tail", "--protocol", "uniform", "--n", "4", "--k", "2"}).code == 2);
}

TEST_CASE("seed from the environment") {
    auto dir = scratch("env");
    ::setenv("CONTEND_SEED", "99", 1);
    auto r = run({"simulate", "--n", "3", "--k", "2", "--trials", "10", "--out", dir.string()});
    ::unsetenv("CONTEND_SEED");
    REQUIRE(r.code == 0);
    auto j = nlohmann::json::parse(slurp(dir / "latency.json"));
    CHECK(j["meta"]["seed"] == 99);
    ::setenv("CONTEND_SEED", "abc", 1);
    CHECK(run({"simulate", "--n", "3", "--k", "2", "--trials", "10"}).code == 2);
    ::unsetenv("CONTEND_SEED");
    fs::remove_all(dir);
}

TEST_CASE("check: verdict lines") {
    auto r = run({"check", "--n", "5", "--k", "2", "--horizon", "3"});
    CHECK(r.code == 0);
    CHECK(r.out == "VIOLATED witness=delay1 latency=31/5 base=32/5\n");
    auto c = run({"check", "--n", "4", "--k", "2", "--horizon", "3"});
    CHECK(c.code == 0);
    CHECK(c.out.rfind("EQUILIBRIUM-CONSISTENT", 0) == 0);
    auto j = run({"check", "--n", "3", "--k", "3", "--horizon", "1", "--format", "json"});
    REQUIRE(j.code == 0);
    auto doc = nlohmann::json::parse(j.out);
    CHECK(doc["report"]["deviations"].size() == 4);
}

TEST_CASE("schedule") {
    auto r = run({"schedule", "--protocol", "g1", "--n", "100", "--k", "4"});
    CHECK(r.code == 0);
    CHECK(r.out == "r=5 (log-half-n) t0=154 l=[67, 33, 16, 8, 4, 25]\n");
    auto t = run({"schedule", "--protocol", "deadline-r", "--n", "9", "--k", "2"});
    CHECK(t.code == 0);
    CHECK(t.out.rfind("t0=39 ", 0) == 0);
    CHECK(run({"schedule", "--protocol", "g1", "--n", "4", "--k", "2"}).code == 2);
}
