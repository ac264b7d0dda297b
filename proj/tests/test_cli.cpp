#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string env_or_fail(const char* name) {
    const char* v = std::getenv(name);
    REQUIRE(v != nullptr);
    return v;
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("pks_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

struct Run {
    int code = -1;
    std::string out, err;
};

Run run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path base = work_dir() / ("run_" + std::to_string(counter++));
    const std::string cmd = env_or_fail("PKS_CLI") + " " + args + " > '" + base.string() +
                            ".out' 2> '" + base.string() + ".err'";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WIFEXITED(status));
    return {WEXITSTATUS(status), slurp(base.string() + ".out"), slurp(base.string() + ".err")};
}

std::string fixture(const std::string& name) {
    return (fs::path(env_or_fail("PKS_DATA")) / name).string();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    for (std::string line; std::getline(ss, line);) out.push_back(line);
    return out;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string want_digest(const std::string& path) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(slurp(path))));
    return std::string("fnv1a:") + buf;
}

const std::string kChainSystem = "descriptor X1 2\n"
                                 "descriptor X2 2\n"
                                 "descriptor X3 2\n"
                                 "absolute X1 X2 : 0.3 0.2 0.3 0.2\n"
                                 "absolute X2 X3 : 0.35 0.25 0.15 0.25\n";

} // namespace

TEST_CASE("classify prints the classification and unpack order", "[cli]") {
    const auto r = run_cli("classify '" + fixture("counterexample.pks") + "'");
    REQUIRE(r.code == 0);
    const auto lines = lines_of(r.out);
    REQUIRE(lines.size() >= 2);
    CHECK(lines[0] == "web: yes, forest: no, conditional-web: yes, bayes-net: yes");
    CHECK(lines[1] == "unpack order (first peeled last): (X2) (X1) (X3|X1 X2)");
}

TEST_CASE("extend product prints the joint in file format", "[cli]") {
    const auto r = run_cli("extend --method product '" + fixture("counterexample.pks") + "'");
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "# iterations: 0\n"));
    CHECK(contains(r.out, "# max residual: 0\n"));
    CHECK(contains(r.out, "\njoint\ndescriptor X1 2\ndescriptor X2 2\ndescriptor X3 2\n"));
    CHECK(contains(r.out, "values : 0.25 0 0.125 0.125 0.125 0.125 0 0.25\n"));
}

TEST_CASE("extend maxent reports the solve in json", "[cli]") {
    const auto r =
        run_cli("--format json extend --method maxent '" + fixture("counterexample.pks") + "'");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["command"] == "extend");
    CHECK(j["method"] == "maxent");
    CHECK(j["digest"] == want_digest(fixture("counterexample.pks")));
    CHECK(j["iterations"].get<std::size_t>() > 0);
    CHECK(j["max_residual"].get<double>() <= 1e-8);
    CHECK(std::abs(j["entropy"].get<double>() - 1.7918) <= 1e-3);
    CHECK(j["conversions"].empty());
    const auto values = j["joint"]["values"].get<std::vector<double>>();
    REQUIRE(values.size() == 8);
    CHECK(values[1] <= 1e-6);
    CHECK(values[6] <= 1e-6);
    CHECK(std::abs(values[0] - 1.0 / 6.0) <= 1e-3);
    CHECK(j["joint"]["descriptors"][2]["name"] == "X3");
}

TEST_CASE("check separates consistent from inconsistent", "[cli]") {
    const auto good = run_cli("check '" + fixture("counterexample.pks") + "'");
    CHECK(good.code == 0);
    CHECK(lines_of(good.out)[0] == "status: consistent");
    CHECK(contains(good.out, "witness residual: "));

    const auto bad = run_cli("--format json check '" + fixture("inconsistent.pks") + "'");
    CHECK(bad.code == 3);
    const json j = json::parse(bad.out);
    CHECK(j["status"] == "inconsistent");
    CHECK(j["consistent"] == false);
    CHECK(std::abs(j["objective"].get<double>() - 0.2) <= 1e-9);
    REQUIRE(!j["certificate"].empty());
    CHECK(j["certificate"][0].contains("tag"));
    CHECK(!j.contains("witness"));

    const auto text = run_cli("check '" + fixture("inconsistent.pks") + "'");
    CHECK(text.code == 3);
    CHECK(lines_of(text.out)[0] == "status: inconsistent");
    CHECK(contains(text.out, "violated: "));
}

TEST_CASE("info and prune report information values", "[cli]") {
    const auto info = run_cli("--format json info '" + fixture("counterexample.pks") + "'");
    REQUIRE(info.code == 0);
    const json ij = json::parse(info.out);
    CHECK(std::abs(ij["information"].get<double>() - 1.7918) <= 1e-3);
    CHECK(ij["joint"]["values"].size() == 8);

    const auto prune = run_cli("--format json prune '" + fixture("counterexample.pks") + "'");
    REQUIRE(prune.code == 0);
    const json pj = json::parse(prune.out);
    CHECK(pj["best"]["mask"] == 3);
    CHECK(pj["best"]["components"] == "(X1), (X2)");
    CHECK(std::abs(pj["information"].get<double>() - std::log(8.0)) <= 1e-4);
    CHECK(std::abs(pj["information_loss"].get<double>() - std::log(4.0 / 3.0)) <= 1e-3);
    REQUIRE(pj["subforests"].size() == 3);
    CHECK(pj["subforests"][0]["mask"] == 1);

    const auto text = run_cli("prune '" + fixture("counterexample.pks") + "'");
    CHECK(lines_of(text.out)[0] == "best subforest: (X1), (X2)");
}

TEST_CASE("entropy reads the joint format", "[cli]") {
    const fs::path path = work_dir() / "product.joint";
    spit(path, "joint\n"
               "descriptor X1 2\n"
               "descriptor X2 2\n"
               "descriptor X3 2\n"
               "values : 0.25 0 0.125 0.125 0.125 0.125 0 0.25\n");
    const auto r = run_cli("--format json entropy '" + path.string() + "'");
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(std::abs(j["entropy"].get<double>() - 2.5 * std::log(2.0)) <= 1e-12);

    const auto text = run_cli("entropy '" + path.string() + "'");
    CHECK(contains(lines_of(text.out)[0], "entropy: 1.7328679"));
    CHECK(contains(lines_of(text.out)[0], " nats"));
}

TEST_CASE("demo passes at its own tolerances and fails at absurd ones", "[cli]") {
    const auto ok = run_cli("demo counterexample");
    REQUIRE(ok.code == 0);
    CHECK(contains(ok.out,
                   "classification: web: yes, forest: no, conditional-web: yes, bayes-net: yes"));
    CHECK(contains(ok.out, "independence would require 0.444"));
    CHECK(contains(ok.out, "PASS overall"));
    CHECK(!contains(ok.out, "FAIL "));

    const auto strict = run_cli("demo counterexample --tol 1e-12");
    CHECK(strict.code == 6);
    CHECK(contains(strict.out, "FAIL overall"));

    const auto unknown = run_cli("demo nosuch");
    CHECK(unknown.code == 1);
    CHECK(contains(unknown.err, "unknown demonstration"));
}

TEST_CASE("usage and input errors use distinct exit codes", "[cli]") {
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("frobnicate x").code == 1);
    CHECK(run_cli("extend '" + fixture("counterexample.pks") + "'").code == 1); // missing --method

    const auto missing = run_cli("check '" + (work_dir() / "nonexistent.pks").string() + "'");
    CHECK(missing.code == 2);
    CHECK(contains(missing.err, "cannot open file"));

    const fs::path bad = work_dir() / "bad.pks";
    spit(bad, "descriptor X1 2\nabsolute X9 : 0.5 0.5\n");
    const auto parse = run_cli("classify '" + bad.string() + "'");
    CHECK(parse.code == 2);
    CHECK(contains(parse.err, "parse error: line 2, column 10"));

    const fs::path sloppy = work_dir() / "sloppy.pks";
    spit(sloppy, "descriptor X1 2\nabsolute X1 : 0.6 0.6\n");
    CHECK(run_cli("check '" + sloppy.string() + "'").code == 2);
    // a loose table tolerance lets the same file through
    CHECK(run_cli("--table-tol 0.5 check '" + sloppy.string() + "'").code == 0);
}

TEST_CASE("solver failures map to their own exit codes", "[cli]") {
    const auto infeasible =
        run_cli("extend --method maxent '" + fixture("inconsistent.pks") + "'");
    CHECK(infeasible.code == 3);
    CHECK(contains(infeasible.err, "inconsistent system:"));
    CHECK(contains(infeasible.err, "violated:"));

    const fs::path chain = work_dir() / "chain.pks";
    spit(chain, kChainSystem);
    const auto starved = run_cli("extend --method maxent --max-iter 1 '" + chain.string() + "'");
    CHECK(starved.code == 4);
    CHECK(contains(starved.err, "did not converge"));
    CHECK(run_cli("extend --method maxent '" + chain.string() + "'").code == 0);

    std::string wide;
    for (int d = 0; d < 13; ++d) wide += "descriptor D" + std::to_string(d) + " 2\n";
    wide += "absolute D0 : 0.5 0.5\n";
    const fs::path big = work_dir() / "wide.pks";
    spit(big, wide);
    const auto capacity = run_cli("check '" + big.string() + "'");
    CHECK(capacity.code == 5);
    CHECK(contains(capacity.err, "capacity exceeded"));
    // the same file is fine for commands that never build the polytope
    CHECK(run_cli("classify '" + big.string() + "'").code == 0);
}

TEST_CASE("json output is stable across runs", "[cli]") {
    const std::string file = fixture("counterexample.pks");
    for (const std::string args : {"--format json classify '" + file + "'",
                                   "--format json extend --method maxent '" + file + "'",
                                   "--format json check '" + file + "'"}) {
        json a = json::parse(run_cli(args).out);
        json b = json::parse(run_cli(args).out);
        a.erase("timings");
        b.erase("timings");
        CHECK(a == b);
        CHECK(a["digest"] == want_digest(file));
    }

    const json cls = json::parse(run_cli("--format json classify '" + file + "'").out);
    const auto order = cls["classification"]["unpack_order"].get<std::vector<std::string>>();
    REQUIRE(order.size() == 3);
    CHECK(order[0] == "(X2)");
    CHECK(order[2] == "(X3|X1 X2)");
}

TEST_CASE("corrupted files never exit clean", "[cli][property]") {
    const std::string original = slurp(fixture("counterexample.pks"));
    // only digits outside comments make the file invalid when clobbered
    std::vector<std::size_t> digit_positions;
    bool in_comment = false;
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (original[i] == '#') in_comment = true;
        if (original[i] == '\n') in_comment = false;
        if (!in_comment && original[i] >= '0' && original[i] <= '9') digit_positions.push_back(i);
    }
    REQUIRE(!digit_positions.empty());

    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 30; ++trial) {
        std::string mutated = original;
        const std::size_t at =
            digit_positions[rng() % digit_positions.size()];
        mutated[at] = 'z';
        const fs::path path = work_dir() / ("fuzz_" + std::to_string(trial) + ".pks");
        spit(path, mutated);
        const auto r = run_cli("check '" + path.string() + "'");
        CHECK(r.code == 2);
        CHECK(r.out.empty());
        CHECK(!r.err.empty());
    }
}
