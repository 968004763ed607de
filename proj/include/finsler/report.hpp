// Run configuration, single runs, corpus batches and their JSON/CSV output.

#pragma once

#include "finsler/analysis.hpp"
#include "finsler/domain.hpp"
#include "finsler/eigensolver.hpp"
#include "finsler/model1d.hpp"
#include "finsler/norms.hpp"
#include "finsler/types.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#ifndef FINSLER_VERSION
#define FINSLER_VERSION "0.0.0"
#endif

namespace finsler {

using json = nlohmann::json;

inline constexpr const char* version = FINSLER_VERSION;

enum ExitCode { exit_pass = 0, exit_check_failure = 1, exit_config_error = 2, exit_numerical_failure = 3 };

// ---------------------------------------------------------------------------
// Validation helpers
// ---------------------------------------------------------------------------

namespace config {

inline void require_object(const json& j, const std::string& path)
{
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys)
{
    require_object(j, path);
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
            throw ConfigError(path + ": unknown key \"" + it.key() + "\"");
    }
}

inline double get_number(const json& j, const std::string& path)
{
    if (!j.is_number()) throw ConfigError(path + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path + ": expected a finite number");
    return v;
}

inline long get_integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j.get<long>();
}

inline std::string get_string(const json& j, const std::string& path)
{
    if (!j.is_string()) throw ConfigError(path + ": expected a string");
    return j.get<std::string>();
}

inline std::vector<double> get_number_list(const json& j, const std::string& path)
{
    if (!j.is_array()) throw ConfigError(path + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

} // namespace config

// ---------------------------------------------------------------------------
// Norm and polygon sub-schemas
// ---------------------------------------------------------------------------

inline NormSpec parse_norm(const json& j, const std::string& path = "norm")
{
    config::require_object(j, path);
    if (!j.contains("family")) throw ConfigError(path + ": missing \"family\"");
    const std::string family = config::get_string(j["family"], path + ".family");
    NormSpec spec;
    if (family == "euclidean") {
        config::allow_keys(j, path, {"family", "n"});
        spec = NormSpec::euclidean(j.contains("n") ? static_cast<int>(config::get_integer(j["n"], path + ".n")) : 2);
    } else if (family == "pnorm") {
        config::allow_keys(j, path, {"family", "p", "n"});
        if (!j.contains("p")) throw ConfigError(path + ": pnorm needs \"p\"");
        spec.family = NormFamily::p_norm;
        spec.p = config::get_number(j["p"], path + ".p");
        spec.n = j.contains("n") ? static_cast<int>(config::get_integer(j["n"], path + ".n")) : 2;
    } else if (family == "quadratic") {
        config::allow_keys(j, path, {"family", "A"});
        if (!j.contains("A") || !j["A"].is_array() || j["A"].empty())
            throw ConfigError(path + ".A: expected a square matrix");
        const int n = static_cast<int>(j["A"].size());
        Mat A(n, n);
        for (int r = 0; r < n; ++r) {
            const auto row = config::get_number_list(j["A"][r], path + ".A[" + std::to_string(r) + "]");
            if (static_cast<int>(row.size()) != n) throw ConfigError(path + ".A: expected a square matrix");
            for (int c = 0; c < n; ++c) A(r, c) = row[c];
        }
        spec.family = NormFamily::quadratic;
        spec.n = n;
        spec.A = A;
    } else if (family == "regularized") {
        config::allow_keys(j, path, {"family", "base", "eps"});
        if (!j.contains("base") || !j.contains("eps")) throw ConfigError(path + ": regularized needs \"base\" and \"eps\"");
        const NormSpec base = parse_norm(j["base"], path + ".base");
        const double eps = config::get_number(j["eps"], path + ".eps");
        if (!(eps > 0.0)) throw ConfigError(path + ".eps: must be > 0");
        spec = regularize(base, eps);
    } else {
        throw ConfigError(path + ".family: unknown norm family \"" + family + "\"");
    }
    try {
        validate(spec);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return spec;
}

inline json norm_to_json(const NormSpec& spec)
{
    switch (spec.family) {
    case NormFamily::euclidean: return {{"family", "euclidean"}, {"n", spec.n}};
    case NormFamily::p_norm: return {{"family", "pnorm"}, {"p", spec.p}, {"n", spec.n}};
    case NormFamily::quadratic: {
        json A = json::array();
        for (int r = 0; r < spec.A.rows(); ++r) {
            json row = json::array();
            for (int c = 0; c < spec.A.cols(); ++c) row.push_back(spec.A(r, c));
            A.push_back(row);
        }
        return {{"family", "quadratic"}, {"A", A}};
    }
    case NormFamily::regularized: return {{"family", "regularized"}, {"base", norm_to_json(*spec.base)}, {"eps", spec.eps}};
    }
    return {};
}

struct PolygonConfig {
    std::string id = "polygon";
    std::vector<Vec2> vertices;
};

inline PolygonConfig parse_polygon(const json& j, const std::string& path = "polygon")
{
    config::allow_keys(j, path, {"id", "vertices"});
    PolygonConfig out;
    if (j.contains("id")) out.id = config::get_string(j["id"], path + ".id");
    if (!j.contains("vertices") || !j["vertices"].is_array()) throw ConfigError(path + ".vertices: expected an array");
    for (std::size_t i = 0; i < j["vertices"].size(); ++i) {
        const std::string p = path + ".vertices[" + std::to_string(i) + "]";
        const auto xy = config::get_number_list(j["vertices"][i], p);
        if (xy.size() != 2) throw ConfigError(p + ": expected [x, y]");
        out.vertices.emplace_back(xy[0], xy[1]);
    }
    return out;
}

inline json polygon_to_json(const PolygonConfig& poly)
{
    json v = json::array();
    for (const auto& p : poly.vertices) v.push_back({p[0], p[1]});
    return {{"id", poly.id}, {"vertices", v}};
}

// ---------------------------------------------------------------------------
// Solver, checks, output
// ---------------------------------------------------------------------------

struct SolverConfig {
    BoundaryCondition bc = BoundaryCondition::neumann;
    std::vector<int> levels{3, 4, 5, 6};
    SolverOptions options;
};

inline BoundaryCondition parse_bc(const json& j, const std::string& path)
{
    const std::string s = config::get_string(j, path);
    if (s == "neumann") return BoundaryCondition::neumann;
    if (s == "dirichlet") return BoundaryCondition::dirichlet;
    throw ConfigError(path + ": expected \"neumann\" or \"dirichlet\"");
}

inline std::vector<int> parse_levels(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty()) throw ConfigError(path + ": expected a nonempty array of levels");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const long l = config::get_integer(j[i], path + "[" + std::to_string(i) + "]");
        if (l < 0 || l > 10) throw ConfigError(path + ": levels must lie in [0, 10]");
        if (!out.empty() && l <= out.back()) throw ConfigError(path + ": levels must be strictly increasing");
        out.push_back(static_cast<int>(l));
    }
    return out;
}

/// `allow_bc` is false inside a corpus config, where the bcs come from the corpus block.
inline SolverConfig parse_solver(const json& j, const std::string& path = "solver", bool allow_bc = true)
{
    if (allow_bc)
        config::allow_keys(j, path, {"bc", "levels", "grad_tol", "max_iters", "restarts", "seed", "eps_schedule"});
    else
        config::allow_keys(j, path, {"levels", "grad_tol", "max_iters", "restarts", "seed", "eps_schedule"});
    SolverConfig s;
    if (j.contains("bc")) s.bc = parse_bc(j["bc"], path + ".bc");
    if (j.contains("levels")) s.levels = parse_levels(j["levels"], path + ".levels");
    if (j.contains("grad_tol")) s.options.grad_tol = config::get_number(j["grad_tol"], path + ".grad_tol");
    if (j.contains("max_iters")) s.options.max_iters = config::get_integer(j["max_iters"], path + ".max_iters");
    if (j.contains("restarts")) s.options.restarts = static_cast<int>(config::get_integer(j["restarts"], path + ".restarts"));
    if (j.contains("seed")) {
        const long seed = config::get_integer(j["seed"], path + ".seed");
        if (seed < 0) throw ConfigError(path + ".seed: must be >= 0");
        s.options.seed = static_cast<std::uint64_t>(seed);
    }
    if (j.contains("eps_schedule")) s.options.eps_schedule = config::get_number_list(j["eps_schedule"], path + ".eps_schedule");
    if (!(s.options.grad_tol > 0.0)) throw ConfigError(path + ".grad_tol: must be > 0");
    if (s.options.restarts < 1) throw ConfigError(path + ".restarts: must be >= 1");
    if (s.options.max_iters < 0) throw ConfigError(path + ".max_iters: must be >= 0");
    for (std::size_t i = 0; i < s.options.eps_schedule.size(); ++i) {
        if (!(s.options.eps_schedule[i] > 0.0)) throw ConfigError(path + ".eps_schedule: entries must be > 0");
        if (i > 0 && !(s.options.eps_schedule[i] < s.options.eps_schedule[i - 1]))
            throw ConfigError(path + ".eps_schedule: must be strictly decreasing");
    }
    return s;
}

inline json solver_to_json(const SolverConfig& s, bool with_bc = true)
{
    json j = {{"levels", s.levels},
              {"grad_tol", s.options.grad_tol},
              {"max_iters", s.options.max_iters},
              {"restarts", s.options.restarts},
              {"seed", s.options.seed},
              {"eps_schedule", s.options.eps_schedule}};
    if (with_bc) j["bc"] = to_string(s.bc);
    return j;
}

struct CheckConfig {
    std::string name;
    double threshold = 0.0;
    std::vector<double> alphas;  // dirichlet_gradient_bound
};

inline const std::vector<std::string>& known_checks()
{
    static const std::vector<std::string> names{"poincare_bound", "gradient_comparison", "neumann_gradient_bound",
                                                "dirichlet_gradient_bound"};
    return names;
}

inline double default_threshold(const std::string& name)
{
    return name == "poincare_bound" ? 1e-9 : 0.05;
}

inline std::vector<CheckConfig> parse_checks(const json& j, const std::string& path = "checks")
{
    if (!j.is_array()) throw ConfigError(path + ": expected an array");
    std::vector<CheckConfig> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        CheckConfig c;
        if (j[i].is_string()) {
            c.name = j[i].get<std::string>();
        } else {
            config::allow_keys(j[i], p, {"name", "threshold", "alpha"});
            if (!j[i].contains("name")) throw ConfigError(p + ": missing \"name\"");
            c.name = config::get_string(j[i]["name"], p + ".name");
        }
        const auto& names = known_checks();
        if (std::find(names.begin(), names.end(), c.name) == names.end())
            throw ConfigError(p + ".name: unknown check \"" + c.name + "\"");
        c.threshold = default_threshold(c.name);
        if (c.name == "dirichlet_gradient_bound") c.alphas = {0.01, 0.1, 1.0};
        if (j[i].is_object()) {
            if (j[i].contains("threshold")) {
                c.threshold = config::get_number(j[i]["threshold"], p + ".threshold");
                if (!(c.threshold >= 0.0)) throw ConfigError(p + ".threshold: must be >= 0");
            }
            if (j[i].contains("alpha")) {
                if (c.name != "dirichlet_gradient_bound") throw ConfigError(p + ".alpha: only for dirichlet_gradient_bound");
                c.alphas = config::get_number_list(j[i]["alpha"], p + ".alpha");
                for (double a : c.alphas)
                    if (!(a > 0.0)) throw ConfigError(p + ".alpha: entries must be > 0");
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

inline json checks_to_json(const std::vector<CheckConfig>& checks)
{
    json out = json::array();
    for (const auto& c : checks) {
        json j = {{"name", c.name}, {"threshold", c.threshold}};
        if (c.name == "dirichlet_gradient_bound") j["alpha"] = c.alphas;
        out.push_back(j);
    }
    return out;
}

inline bool check_applies(const std::string& name, BoundaryCondition bc)
{
    if (name == "gradient_comparison" || name == "neumann_gradient_bound") return bc == BoundaryCondition::neumann;
    if (name == "dirichlet_gradient_bound") return bc == BoundaryCondition::dirichlet;
    return true;
}

struct OutputConfig {
    std::string report = "report.json";
    std::string mesh;          // optional dump paths, relative to the output dir
    std::string eigenfunction;
};

inline OutputConfig parse_output(const json& j, const std::string& path = "output")
{
    config::allow_keys(j, path, {"report", "mesh", "eigenfunction"});
    OutputConfig o;
    if (j.contains("report")) o.report = config::get_string(j["report"], path + ".report");
    if (j.contains("mesh")) o.mesh = config::get_string(j["mesh"], path + ".mesh");
    if (j.contains("eigenfunction")) o.eigenfunction = config::get_string(j["eigenfunction"], path + ".eigenfunction");
    return o;
}

inline json output_to_json(const OutputConfig& o)
{
    json j = {{"report", o.report}};
    if (!o.mesh.empty()) j["mesh"] = o.mesh;
    if (!o.eigenfunction.empty()) j["eigenfunction"] = o.eigenfunction;
    return j;
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

struct RunConfig {
    NormSpec norm;
    PolygonConfig polygon;
    SolverConfig solver;
    std::vector<CheckConfig> checks;
    OutputConfig output;
};

/// Full validation, including convexity of the polygon, before any
/// computation. Unknown keys anywhere are rejected.
inline RunConfig parse_run_config(const json& j)
{
    config::allow_keys(j, "config", {"norm", "polygon", "solver", "checks", "output"});
    if (!j.contains("norm")) throw ConfigError("config: missing \"norm\"");
    if (!j.contains("polygon")) throw ConfigError("config: missing \"polygon\"");
    RunConfig c;
    c.norm = parse_norm(j["norm"]);
    if (c.norm.n != 2) throw ConfigError("norm: runs need a norm on R^2");
    c.polygon = parse_polygon(j["polygon"]);
    ConvexPolygon check(c.polygon.vertices);  // throws naming the offending vertex triple
    if (j.contains("solver")) c.solver = parse_solver(j["solver"]);
    c.checks = j.contains("checks") ? parse_checks(j["checks"]) : parse_checks(json::array({"poincare_bound"}));
    for (const auto& ch : c.checks)
        if (!check_applies(ch.name, c.solver.bc))
            throw ConfigError("checks: \"" + ch.name + "\" does not apply to " + to_string(c.solver.bc) + " runs");
    if (j.contains("output")) c.output = parse_output(j["output"]);
    return c;
}

inline json run_config_to_json(const RunConfig& c)
{
    return {{"norm", norm_to_json(c.norm)},
            {"polygon", polygon_to_json(c.polygon)},
            {"solver", solver_to_json(c.solver)},
            {"checks", checks_to_json(c.checks)},
            {"output", output_to_json(c.output)}};
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Report pieces
// ---------------------------------------------------------------------------

/// JSON has no infinity: such values are written as the strings "inf"/"-inf".
inline json number(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline json check_to_json(const CheckReport& r)
{
    json where = json::array();
    for (int i = 0; i < r.worst_location.size(); ++i) where.push_back(number(r.worst_location[i]));
    json values = json::object();
    for (const auto& [k, v] : r.values) values[k] = number(v);
    return {{"name", r.name},
            {"sample_count", r.sample_count},
            {"worst_violation", number(r.worst_violation)},
            {"worst_location", where},
            {"threshold", r.threshold},
            {"pass", r.pass},
            {"metadata", r.metadata},
            {"values", values}};
}

inline json eigen_level_to_json(const LevelResult& l)
{
    const auto& r = l.result;
    return {{"level", l.level},
            {"nodes", l.nodes},
            {"triangles", l.triangles},
            {"lambda", r.lambda},
            {"energy", r.energy},
            {"mass", r.mass},
            {"mean", r.mean},
            {"converged", r.converged},
            {"iterations", r.iterations},
            {"final_grad_norm", r.final_grad_norm},
            {"zero_gradient_area", r.zero_gradient_area},
            {"u_min", r.nodal_values.minCoeff()},
            {"u_max", r.nodal_values.maxCoeff()}};
}

inline void write_eigenfunction(std::ostream& os, const TriMesh& mesh, const Vec& u)
{
    os << "# finsler eigenfunction v1: x y u\n";
    for (int i = 0; i < mesh.node_count(); ++i)
        os << format_double(mesh.nodes[i][0]) << " " << format_double(mesh.nodes[i][1]) << " " << format_double(u[i])
           << "\n";
}

// ---------------------------------------------------------------------------
// run()
// ---------------------------------------------------------------------------

struct RunOptions {
    bool timing = false;  // wall time breaks byte-identity of reports, so it is opt-in
};

struct RunOutcome {
    json report;
    int exit_code = exit_pass;
    // summary fields
    double lambda = 0.0;
    double d_F = 0.0;
    double i_F = 0.0;
    double ratio = 0.0;
    bool theorem_pass = false;
    bool checks_pass = false;
    bool converged = false;
    std::string error;
    // kept for dumps
    TriMesh mesh;
    Vec eigenfunction;
};

/// geometry -> eigen solves over the level schedule -> matched 1-D model ->
/// checks. Module errors become a partial report with a nonzero exit code.
inline RunOutcome run(const RunConfig& cfg, const RunOptions& opt = {})
{
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;
    json& rep = out.report;
    rep["config"] = run_config_to_json(cfg);
    rep["environment"] = {{"version", version}, {"seed", cfg.solver.options.seed}};
    try {
        const ConvexPolygon poly(cfg.polygon.vertices);
        out.d_F = diameter(poly, cfg.norm);
        const InscribedBall ball = inscribed_wulff_radius(poly, cfg.norm);
        out.i_F = ball.radius;
        rep["geometry"] = {{"d_F", out.d_F},
                           {"i_F", out.i_F},
                           {"center", {ball.center[0], ball.center[1]}},
                           {"unique_center", ball.unique_center},
                           {"lp_duality_gap", ball.duality_gap},
                           {"area", poly.area()}};

        EigenProblem problem{triangulate(poly, cfg.solver.levels.front()), cfg.norm, cfg.solver.bc, cfg.solver.options};
        const RefinementStudy study = refine_and_solve(problem, cfg.solver.levels);
        json levels = json::array();
        for (const auto& l : study.levels) levels.push_back(eigen_level_to_json(l));
        rep["eigen"] = {{"bc", to_string(cfg.solver.bc)}, {"levels", levels}};
        if (study.richardson) rep["eigen"]["richardson_estimate"] = *study.richardson;

        const EigenResult& eig = study.levels.back().result;
        TriMesh mesh = problem.mesh;
        while (mesh.refinement_level < study.levels.back().level) mesh = refine(mesh);
        out.lambda = eig.lambda;
        out.converged = eig.converged;

        std::optional<OneDSolution> profile;
        if (cfg.solver.bc == BoundaryCondition::neumann) {
            const ModelMatch match = match_model(2, eig.lambda, std::min(1.0, eig.nodal_values.maxCoeff()));
            profile = comparison_profile(match.model);
            rep["model1d"] = {{"n", 2},
                              {"lambda", eig.lambda},
                              {"kind", to_string(match.model.kind)},
                              {"a", number(match.model.a)},
                              {"m", match.m},
                              {"clamped", match.clamped},
                              {"delta", profile->delta}};
        }

        json checks = json::array();
        bool all_pass = true;
        for (const auto& c : cfg.checks) {
            std::vector<CheckReport> reports;
            if (c.name == "poincare_bound") {
                const bool neu = cfg.solver.bc == BoundaryCondition::neumann;
                CheckReport r = poincare_bound_report(eig.lambda, neu ? out.d_F : out.i_F,
                                                      neu ? BoundKind::neumann_diameter : BoundKind::dirichlet_inradius);
                r.threshold = c.threshold;
                r.finalize();
                out.ratio = r.values["ratio"];
                out.theorem_pass = r.pass;
                reports.push_back(r);
            } else if (c.name == "gradient_comparison") {
                reports.push_back(gradient_comparison_check(mesh, cfg.norm, eig, *profile, c.threshold));
            } else if (c.name == "neumann_gradient_bound") {
                reports.push_back(neumann_gradient_bound_check(mesh, cfg.norm, eig, c.threshold));
            } else if (c.name == "dirichlet_gradient_bound") {
                for (double a : c.alphas) reports.push_back(dirichlet_gradient_bound_check(mesh, cfg.norm, eig, a, c.threshold));
            }
            for (auto& r : reports) {
                r.metadata["polygon"] = cfg.polygon.id;
                all_pass = all_pass && r.pass;
                checks.push_back(check_to_json(r));
            }
        }
        rep["checks"] = checks;
        out.checks_pass = all_pass;
        out.exit_code = all_pass ? exit_pass : exit_check_failure;
        rep["status"] = all_pass ? "pass" : "check_failure";
        out.mesh = std::move(mesh);
        out.eigenfunction = eig.nodal_values;
    } catch (const ConfigError& e) {
        out.error = e.what();
        out.exit_code = exit_config_error;
        rep["status"] = "config_error";
        rep["error"] = {{"type", "config"}, {"message", out.error}};
    } catch (const Error& e) {
        out.error = e.what();
        out.exit_code = exit_numerical_failure;
        rep["status"] = "numerical_failure";
        rep["error"] = {{"type", "numerical"}, {"message", out.error}};
    }
    if (opt.timing)
        rep["environment"]["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

struct CorpusConfig {
    std::vector<RunConfig> runs;
    std::string summary = "summary.csv";
    std::string reports_dir = "runs";
};

/// Expands a corpus block into one RunConfig per (polygon, norm, bc) in that
/// order. Polygons are explicit ({"id", "vertices"}) and/or generated
/// ({"random": {"count", "points", "seed"}}).
inline CorpusConfig parse_corpus_config(const json& j)
{
    config::allow_keys(j, "config", {"corpus", "solver", "checks", "output"});
    if (!j.contains("corpus")) throw ConfigError("config: missing \"corpus\"");
    const json& c = j["corpus"];
    config::allow_keys(c, "corpus", {"polygons", "random", "norms", "bcs"});

    std::vector<PolygonConfig> polys;
    if (c.contains("polygons")) {
        if (!c["polygons"].is_array()) throw ConfigError("corpus.polygons: expected an array");
        for (std::size_t i = 0; i < c["polygons"].size(); ++i) {
            PolygonConfig p = parse_polygon(c["polygons"][i], "corpus.polygons[" + std::to_string(i) + "]");
            if (!c["polygons"][i].contains("id")) p.id = "polygon" + std::to_string(i);
            ConvexPolygon check(p.vertices);
            polys.push_back(std::move(p));
        }
    }
    if (c.contains("random")) {
        const json& r = c["random"];
        config::allow_keys(r, "corpus.random", {"count", "points", "seed"});
        const long count = r.contains("count") ? config::get_integer(r["count"], "corpus.random.count") : 20;
        const long points = r.contains("points") ? config::get_integer(r["points"], "corpus.random.points") : 12;
        const long seed = r.contains("seed") ? config::get_integer(r["seed"], "corpus.random.seed") : 1;
        if (count < 0) throw ConfigError("corpus.random.count: must be >= 0");
        if (points < 3) throw ConfigError("corpus.random.points: must be >= 3");
        if (seed < 0) throw ConfigError("corpus.random.seed: must be >= 0");
        for (long i = 0; i < count; ++i) {
            Rng rng(static_cast<std::uint64_t>(seed) * 1000003ULL + static_cast<std::uint64_t>(i));
            const ConvexPolygon poly = random_convex_polygon(rng, static_cast<int>(points));
            polys.push_back({"random" + std::to_string(seed) + "_" + std::to_string(i), poly.vertices()});
        }
    }
    if (polys.empty()) throw ConfigError("corpus: needs at least one polygon");

    if (!c.contains("norms") || !c["norms"].is_array() || c["norms"].empty())
        throw ConfigError("corpus.norms: expected a nonempty array");
    std::vector<NormSpec> norms;
    for (std::size_t i = 0; i < c["norms"].size(); ++i) {
        NormSpec s = parse_norm(c["norms"][i], "corpus.norms[" + std::to_string(i) + "]");
        if (s.n != 2) throw ConfigError("corpus.norms[" + std::to_string(i) + "]: runs need a norm on R^2");
        norms.push_back(std::move(s));
    }
    std::vector<BoundaryCondition> bcs{BoundaryCondition::neumann};
    if (c.contains("bcs")) {
        if (!c["bcs"].is_array() || c["bcs"].empty()) throw ConfigError("corpus.bcs: expected a nonempty array");
        bcs.clear();
        for (std::size_t i = 0; i < c["bcs"].size(); ++i) bcs.push_back(parse_bc(c["bcs"][i], "corpus.bcs[" + std::to_string(i) + "]"));
    }

    SolverConfig solver;
    if (j.contains("solver")) solver = parse_solver(j["solver"], "solver", false);
    const std::vector<CheckConfig> checks =
        j.contains("checks") ? parse_checks(j["checks"]) : parse_checks(json::array({"poincare_bound"}));

    CorpusConfig out;
    if (j.contains("output")) {
        config::allow_keys(j["output"], "output", {"summary", "reports_dir"});
        if (j["output"].contains("summary")) out.summary = config::get_string(j["output"]["summary"], "output.summary");
        if (j["output"].contains("reports_dir"))
            out.reports_dir = config::get_string(j["output"]["reports_dir"], "output.reports_dir");
    }
    for (const auto& p : polys)
        for (const auto& n : norms)
            for (BoundaryCondition bc : bcs) {
                RunConfig rc;
                rc.norm = n;
                rc.polygon = p;
                rc.solver = solver;
                rc.solver.bc = bc;
                for (const auto& ch : checks)
                    if (check_applies(ch.name, bc)) rc.checks.push_back(ch);
                out.runs.push_back(std::move(rc));
            }
    return out;
}

struct CorpusOutcome {
    std::vector<RunOutcome> runs;
    std::string summary_csv;
    int exit_code = exit_pass;
};

inline std::string csv_number(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_field(std::string s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string summary_csv(const std::vector<RunConfig>& cfgs, const std::vector<RunOutcome>& runs)
{
    std::ostringstream os;
    os << "index,polygon,norm,bc,lambda,d_F,i_F,ratio,theorem_pass,checks_pass,converged,status\n";
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        const auto& c = cfgs[i];
        os << i << "," << csv_field(c.polygon.id) << "," << csv_field(describe(c.norm)) << "," << to_string(c.solver.bc)
           << "," << csv_number(r.lambda) << "," << csv_number(r.d_F) << "," << csv_number(r.i_F) << ","
           << csv_number(r.ratio) << "," << (r.theorem_pass ? 1 : 0) << "," << (r.checks_pass ? 1 : 0) << ","
           << (r.converged ? 1 : 0) << "," << csv_field(r.report.value("status", std::string("unknown"))) << "\n";
    }
    return os.str();
}

/// Runs every config on up to `parallelism` threads; results are stored by
/// index, so the output never depends on scheduling.
inline CorpusOutcome run_corpus(const std::vector<RunConfig>& cfgs, int parallelism, const RunOptions& opt = {})
{
    if (cfgs.empty()) throw ConfigError("corpus: empty config list");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    CorpusOutcome out;
    out.runs.resize(cfgs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cfgs.size(); i = next++) {
            out.runs[i] = run(cfgs[i], opt);
            // dumps are not kept for corpus rows
            out.runs[i].mesh = TriMesh();
            out.runs[i].eigenfunction = Vec();
        }
    };
    const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(parallelism), cfgs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    out.summary_csv = summary_csv(cfgs, out.runs);
    for (const auto& r : out.runs) out.exit_code = std::max(out.exit_code, r.exit_code == exit_pass ? 0 : 1);
    return out;
}

// ---------------------------------------------------------------------------
// Re-rendering a stored report
// ---------------------------------------------------------------------------

inline std::string render_report(const json& rep)
{
    std::ostringstream os;
    auto num = [](const json& v) { return v.is_number() ? format_double(v.get<double>()) : v.dump(); };
    os << "status: " << rep.value("status", std::string("unknown")) << "\n";
    if (rep.contains("config")) {
        const json& c = rep["config"];
        if (c.contains("polygon")) os << "polygon: " << c["polygon"].value("id", std::string("?")) << " ("
                                      << c["polygon"]["vertices"].size() << " vertices)\n";
        if (c.contains("norm")) os << "norm: " << c["norm"].dump() << "\n";
    }
    if (rep.contains("geometry")) {
        const json& g = rep["geometry"];
        os << "d_F = " << num(g["d_F"]) << ", i_F = " << num(g["i_F"]) << "\n";
    }
    if (rep.contains("eigen")) {
        os << "eigen (" << rep["eigen"].value("bc", std::string("?")) << "):\n";
        for (const auto& l : rep["eigen"]["levels"])
            os << "  level " << l["level"] << "  nodes " << l["nodes"] << "  lambda " << num(l["lambda"])
               << (l["converged"].get<bool>() ? "" : "  (not converged)") << "\n";
        if (rep["eigen"].contains("richardson_estimate"))
            os << "  richardson estimate " << num(rep["eigen"]["richardson_estimate"]) << "\n";
    }
    if (rep.contains("model1d")) {
        const json& m = rep["model1d"];
        os << "1-D model: " << m["kind"].get<std::string>() << ", a = " << num(m["a"]) << ", m = " << num(m["m"]) << "\n";
    }
    if (rep.contains("checks")) {
        for (const auto& c : rep["checks"]) {
            os << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << "  worst "
               << num(c["worst_violation"]) << "  threshold " << num(c["threshold"]);
            if (c["values"].contains("ratio")) os << "  ratio " << num(c["values"]["ratio"]);
            if (c["values"].contains("alpha")) os << "  alpha " << num(c["values"]["alpha"]);
            os << "\n";
        }
    }
    if (rep.contains("error")) os << "error: " << rep["error"]["message"].get<std::string>() << "\n";
    return os.str();
}

} // namespace finsler
