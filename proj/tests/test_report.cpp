#include "finsler/report.hpp"

#include "catch_amalgamated.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace finsler;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

json square_config()
{
    return json::parse(R"({
        "norm": {"family": "euclidean"},
        "polygon": {"id": "square", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
        "solver": {"bc": "neumann", "levels": [3, 4]},
        "checks": ["poincare_bound"]
    })");
}

std::string config_error(const json& j)
{
    try {
        parse_run_config(j);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::set<std::string> keys_of(const json& obj)
{
    std::set<std::string> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) out.insert(it.key());
    return out;
}

json load_schema()
{
    return read_json_file(std::string(FINSLER_SOURCE_DIR) + "/schema/run_config.schema.json");
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("finsler_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(const std::string& args)
{
    const std::string cmd = std::string("\"") + FINSLER_CLI + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_corpus()
{
    return json::parse(R"({
        "corpus": {
            "polygons": [{"id": "tri", "vertices": [[0, 0], [1, 0], [0.3, 0.8]]}],
            "random": {"count": 2, "points": 8, "seed": 3},
            "norms": [{"family": "euclidean"}, {"family": "pnorm", "p": 3}],
            "bcs": ["neumann", "dirichlet"]
        },
        "solver": {"levels": [3], "restarts": 2}
    })");
}

} // namespace

TEST_CASE("config validation", "[report]")
{
    CHECK(config_error(square_config()).empty());

    json j = square_config();
    j["norm"] = {{"family", "pnorm"}, {"p", 0.5}};
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("norm"));

    j = square_config();
    j["extra"] = 1;
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("unknown key \"extra\""));

    j = square_config();
    j["solver"]["tolerance"] = 1e-6;
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("solver: unknown key"));

    j = square_config();
    j["solver"]["bc"] = "dirichlet";
    j["polygon"]["vertices"] = json::parse("[[0, 0], [1, 0], [0.5, 0.2], [1, 1], [0, 1]]");
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("vertex triple (1, 2, 3)"));

    j = square_config();
    j["solver"]["bc"] = "dirichlet";
    j["checks"] = {"gradient_comparison"};
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("does not apply to dirichlet"));

    j = square_config();
    j["checks"] = {"spectral_gap"};
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("unknown check"));

    j = square_config();
    j["solver"]["levels"] = {4, 3};
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("strictly increasing"));

    j = square_config();
    j["norm"] = {{"family", "euclidean"}, {"n", 3}};
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("R^2"));

    j = square_config();
    j.erase("polygon");
    CHECK_THAT(config_error(j), Catch::Matchers::ContainsSubstring("missing \"polygon\""));
}

TEST_CASE("validator and published schema accept the same keys", "[report]")
{
    const json schema = load_schema();
    const json& defs = schema["$defs"];

    // one sample object per section, holding every key the schema lists
    const json sections = json::parse(R"({
        "top": {"norm": {"family": "euclidean"},
                "polygon": {"id": "s", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
                "solver": {}, "checks": [], "output": {}},
        "solver": {"bc": "neumann", "levels": [3], "grad_tol": 1e-8, "max_iters": 10, "restarts": 1,
                   "seed": 3, "eps_schedule": [0.1, 0.01]},
        "polygon": {"id": "s", "vertices": [[0, 0], [1, 0], [1, 1], [0, 1]]},
        "output": {"report": "r.json", "mesh": "m.txt", "eigenfunction": "u.txt"},
        "check": {"name": "dirichlet_gradient_bound", "threshold": 0.1, "alpha": [0.5]}
    })");
    const std::map<std::string, json> schema_props{{"top", schema["properties"]},
                                                   {"solver", defs["solver"]["properties"]},
                                                   {"polygon", defs["polygon"]["properties"]},
                                                   {"output", schema["properties"]["output"]["properties"]},
                                                   {"check", defs["check"]["oneOf"][1]["properties"]}};

    auto embed = [&](const std::string& section, const json& value) {
        json c = sections["top"];
        if (section == "top") return value;
        if (section == "check") {
            c["solver"] = {{"bc", "dirichlet"}};
            c["checks"] = json::array({value});
        } else {
            c[section] = value;
        }
        return c;
    };

    for (const auto& [section, props] : schema_props) {
        INFO("section " << section);
        CHECK(keys_of(sections[section]) == keys_of(props));
        CHECK_NOTHROW(parse_run_config(embed(section, sections[section])));
        json bogus = sections[section];
        bogus["bogus"] = 1;
        CHECK_THAT(config_error(embed(section, bogus)), Catch::Matchers::ContainsSubstring("unknown key \"bogus\""));
    }

    // norm families: oneOf branches against parse_norm
    const json norms = json::parse(R"([
        {"family": "euclidean", "n": 2},
        {"family": "pnorm", "p": 3, "n": 2},
        {"family": "quadratic", "A": [[2, 0], [0, 1]]},
        {"family": "regularized", "base": {"family": "pnorm", "p": 4}, "eps": 0.1}
    ])");
    const json& branches = defs["norm"]["oneOf"];
    REQUIRE(branches.size() == norms.size());
    for (std::size_t i = 0; i < norms.size(); ++i) {
        CHECK(keys_of(norms[i]) == keys_of(branches[i]["properties"]));
        CHECK(branches[i]["properties"]["family"]["const"] == norms[i]["family"]);
        CHECK_NOTHROW(parse_norm(norms[i]));
        json bogus = norms[i];
        bogus["bogus"] = 1;
        CHECK_THROWS_AS(parse_norm(bogus), ConfigError);
    }

    std::set<std::string> names;
    for (const auto& n : defs["check_name"]["enum"]) names.insert(n.get<std::string>());
    CHECK(names == std::set<std::string>(known_checks().begin(), known_checks().end()));
}

TEST_CASE("config echo round-trips", "[report]")
{
    json j = square_config();
    j["norm"] = json::parse(R"({"family": "regularized", "base": {"family": "pnorm", "p": 4}, "eps": 0.1})");
    j["checks"] = json::parse(R"(["poincare_bound", {"name": "neumann_gradient_bound", "threshold": 0.1}])");
    const RunConfig a = parse_run_config(j);
    const json echo = run_config_to_json(a);
    CHECK(run_config_to_json(parse_run_config(echo)) == echo);
    CHECK(echo["checks"][1]["threshold"] == 0.1);
    CHECK(echo["checks"][0]["threshold"] == 1e-9);
}

TEST_CASE("run on the unit square", "[report]")
{
    const RunConfig cfg = parse_run_config(square_config());
    const RunOutcome out = run(cfg);
    CHECK(out.exit_code == exit_pass);
    CHECK(out.report["status"] == "pass");
    CHECK(out.d_F == Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(out.i_F == Approx(0.5).epsilon(1e-12));
    CHECK(out.ratio == Approx(2.0).epsilon(0.01));
    CHECK(out.ratio >= 2.0);
    CHECK(out.theorem_pass);
    CHECK(out.report["eigen"]["levels"].size() == 2);
    CHECK(out.report["checks"][0]["values"]["ratio"] == out.ratio);
    CHECK_FALSE(out.report["environment"].contains("wall_time_s"));
    CHECK(run(cfg, {true}).report["environment"].contains("wall_time_s"));

    // identical config and seed: byte-identical report
    CHECK(run(cfg).report.dump(2) == out.report.dump(2));

    // the echoed config reproduces the run
    const RunConfig again = parse_run_config(out.report["config"]);
    CHECK(run(again).report.dump() == out.report.dump());
}

TEST_CASE("module errors give a partial report", "[report]")
{
    RunConfig cfg = parse_run_config(square_config());
    cfg.polygon.vertices[2] = Vec2(0.5, 0.1);
    const RunOutcome out = run(cfg);
    CHECK(out.exit_code == exit_config_error);
    CHECK(out.report["status"] == "config_error");
    CHECK(out.report["error"]["type"] == "config");
    CHECK(out.report.contains("config"));
    CHECK_FALSE(out.report.contains("eigen"));
}

TEST_CASE("corpus expansion and summary", "[report]")
{
    const CorpusConfig corpus = parse_corpus_config(small_corpus());
    REQUIRE(corpus.runs.size() == 3 * 2 * 2);
    CHECK(corpus.runs[0].polygon.id == "tri");
    CHECK(corpus.runs[4].polygon.id == "random3_0");
    CHECK(corpus.runs[1].solver.bc == BoundaryCondition::dirichlet);
    CHECK(corpus.runs[2].norm.family == NormFamily::p_norm);

    const CorpusOutcome serial = run_corpus(corpus.runs, 1);
    const CorpusOutcome threaded = run_corpus(corpus.runs, 3);
    CHECK(serial.summary_csv == threaded.summary_csv);
    CHECK(serial.exit_code == 0);

    std::istringstream csv(serial.summary_csv);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(csv, line)) rows.push_back(line);
    REQUIRE(rows.size() == corpus.runs.size() + 1);
    CHECK(rows[0] == "index,polygon,norm,bc,lambda,d_F,i_F,ratio,theorem_pass,checks_pass,converged,status");
    for (std::size_t i = 0; i < corpus.runs.size(); ++i) {
        const auto& r = serial.runs[i];
        CHECK(rows[i + 1].rfind(std::to_string(i) + ",", 0) == 0);
        // pass columns agree with the per-run report
        const std::string tail = std::string(r.report["checks"][0]["pass"].get<bool>() ? "1" : "0") + "," +
                                 (r.checks_pass ? "1" : "0") + "," + (r.converged ? "1" : "0") + "," +
                                 r.report["status"].get<std::string>();
        CHECK(rows[i + 1].size() > tail.size());
        CHECK(rows[i + 1].substr(rows[i + 1].size() - tail.size()) == tail);
        CHECK(r.ratio >= 1.0);
    }

    // a single-config corpus duplicates run()
    const CorpusOutcome one = run_corpus({corpus.runs[3]}, 1);
    CHECK(one.runs[0].report.dump() == run(corpus.runs[3]).report.dump());

    CHECK_THROWS_AS(run_corpus({}, 1), ConfigError);
    CHECK_THROWS_AS(run_corpus(corpus.runs, 0), ConfigError);
}

TEST_CASE("corpus config validation", "[report]")
{
    json j = small_corpus();
    j["solver"]["bc"] = "neumann";
    CHECK_THROWS_AS(parse_corpus_config(j), ConfigError);

    j = small_corpus();
    j["corpus"].erase("polygons");
    j["corpus"]["random"]["count"] = 0;
    CHECK_THROWS_AS(parse_corpus_config(j), ConfigError);

    j = small_corpus();
    j["corpus"]["norms"] = json::array();
    CHECK_THROWS_AS(parse_corpus_config(j), ConfigError);

    // inapplicable checks are filtered per boundary condition
    j = small_corpus();
    j["checks"] = {"poincare_bound", "gradient_comparison"};
    const auto c = parse_corpus_config(j);
    CHECK(c.runs[0].checks.size() == 2);
    CHECK(c.runs[1].checks.size() == 1);
}

TEST_CASE("csv number formatting", "[report]")
{
    CHECK(csv_number(0.1) == "0.10000000000000001");
    CHECK(std::stod(csv_number(pi)) == pi);
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(number(std::numeric_limits<double>::infinity()) == "inf");
}

TEST_CASE("cli exit codes and outputs", "[report][cli]")
{
    const fs::path dir = scratch("cli");
    write_file(dir / "square.json", square_config().dump());

    CHECK(cli("eig --config " + (dir / "square.json").string() + " --out " + (dir / "a").string() +
              " --dump-mesh mesh.txt --dump-eigenfunction u.txt") == 0);
    const std::string report = slurp(dir / "a" / "report.json");
    CHECK(json::parse(report)["status"] == "pass");
    CHECK(slurp(dir / "a" / "u.txt").rfind("# finsler eigenfunction v1", 0) == 0);
    CHECK(fs::file_size(dir / "a" / "mesh.txt") > 0);

    // same config and seed from a second process: identical bytes
    CHECK(cli("eig --config " + (dir / "square.json").string() + " --out " + (dir / "b").string()) == 0);
    CHECK(slurp(dir / "b" / "report.json") == report);
    CHECK(cli("report " + (dir / "a" / "report.json").string()) == 0);

    json bad = square_config();
    bad["norm"] = {{"family", "pnorm"}, {"p", 0.5}};
    write_file(dir / "bad.json", bad.dump());
    CHECK(cli("eig --config " + (dir / "bad.json").string() + " --out " + (dir / "c").string()) == 2);
    CHECK_FALSE(fs::exists(dir / "c" / "report.json"));

    json strict = square_config();
    strict["norm"] = {{"family", "pnorm"}, {"p", 4}};
    strict["polygon"]["vertices"] = json::parse("[[0, 0], [1, 0], [1, 0.05], [0, 0.05]]");
    strict["checks"] = json::parse(R"([{"name": "gradient_comparison", "threshold": 0}])");
    write_file(dir / "strict.json", strict.dump());
    CHECK(cli("eig --config " + (dir / "strict.json").string() + " --levels 3 --out " + (dir / "d").string()) == 1);
    CHECK(json::parse(slurp(dir / "d" / "report.json"))["status"] == "check_failure");

    CHECK(cli("eig --config " + (dir / "missing.json").string()) == 2);
    CHECK(cli("eig --config " + (dir / "square.json").string() + " --levels 3,x") == 2);
    CHECK(cli("frobnicate") == 2);
    CHECK(cli("geom --config " + (dir / "square.json").string()) == 0);
    CHECK(cli("model1d --a 0,1 --out " + (dir / "m").string()) == 0);
    CHECK(slurp(dir / "m" / "model1d_table.csv").rfind("a,b,delta,m\n", 0) == 0);

    write_file(dir / "check.json", R"({"norm": {"family": "pnorm", "p": 4}, "samples": 20})");
    CHECK(cli("check --config " + (dir / "check.json").string() + " --out " + (dir / "k").string()) == 0);
    CHECK(json::parse(slurp(dir / "k" / "check.json"))["checks"].size() == 5);  // no level-set sweep: p = 4 is not strongly convex

    json corpus = small_corpus();
    corpus["corpus"].erase("random");
    write_file(dir / "corpus.json", corpus.dump());
    CHECK(cli("corpus --config " + (dir / "corpus.json").string() + " --parallelism 2 --out " + (dir / "e").string()) == 0);
    CHECK(fs::exists(dir / "e" / "summary.csv"));
    CHECK(fs::exists(dir / "e" / "runs" / "run_0003.json"));
    CHECK(cli("corpus --config " + (dir / "corpus.json").string() + " --parallelism 0") == 2);
    fs::remove_all(dir);
}
