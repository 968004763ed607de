#include "finsler/finsler.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace finsler;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string levels;
    std::string dump_mesh;
    std::string dump_eigenfunction;
    std::string out = ".";
    int parallelism = 1;
    bool timing = false;
};

std::vector<int> parse_level_list(const std::string& s)
{
    json arr = json::array();
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            arr.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--levels: expected a comma separated list of integers, got \"" + s + "\"");
        }
    }
    return parse_levels(arr, "--levels");
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path.string());
    os << text;
}

fs::path under(const std::string& out, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : fs::path(out) / path;
}

RunConfig load_run_config(const CommonFlags& f)
{
    if (f.config.empty()) throw ConfigError("--config is required");
    RunConfig cfg = parse_run_config(read_json_file(f.config));
    if (f.seed) cfg.solver.options.seed = *f.seed;
    if (!f.levels.empty()) cfg.solver.levels = parse_level_list(f.levels);
    return cfg;
}

int cmd_eig(const CommonFlags& f)
{
    const RunConfig cfg = load_run_config(f);
    const RunOutcome out = run(cfg, {f.timing});
    write_text(under(f.out, cfg.output.report), out.report.dump(2) + "\n");
    const std::string mesh_path = !f.dump_mesh.empty() ? f.dump_mesh : cfg.output.mesh;
    const std::string eig_path = !f.dump_eigenfunction.empty() ? f.dump_eigenfunction : cfg.output.eigenfunction;
    if (out.eigenfunction.size() > 0) {
        if (!mesh_path.empty()) {
            std::ostringstream os;
            write_mesh(os, out.mesh);
            write_text(under(f.out, mesh_path), os.str());
        }
        if (!eig_path.empty()) {
            std::ostringstream os;
            write_eigenfunction(os, out.mesh, out.eigenfunction);
            write_text(under(f.out, eig_path), os.str());
        }
    }
    std::cout << render_report(out.report);
    return out.exit_code;
}

int cmd_geom(const CommonFlags& f)
{
    const RunConfig cfg = load_run_config(f);
    const ConvexPolygon poly(cfg.polygon.vertices);
    const InscribedBall ball = inscribed_wulff_radius(poly, cfg.norm);
    const json j = {{"polygon", cfg.polygon.id},
                    {"norm", norm_to_json(cfg.norm)},
                    {"d_F", diameter(poly, cfg.norm)},
                    {"i_F", ball.radius},
                    {"center", {ball.center[0], ball.center[1]}},
                    {"unique_center", ball.unique_center},
                    {"area", poly.area()}};
    std::cout << j.dump(2) << "\n";
    return exit_pass;
}

struct ModelFlags {
    int n = 2;
    double lambda = 1.0;
    std::vector<double> a{0.0, 0.1, 1.0, 10.0, 100.0};
    int samples = 101;
};

int cmd_model1d(const CommonFlags& f, const ModelFlags& m)
{
    if (m.samples < 2) throw ConfigError("--samples must be >= 2");
    std::ostringstream table, profiles;
    table << "a,b,delta,m\n";
    profiles << "a,t,v,v_prime\n";
    for (double a : m.a) {
        const OneDSolution sol = solve_model({m.n, m.lambda, ModelKind::T_radial, a});
        table << csv_number(a) << "," << csv_number(sol.b) << "," << csv_number(sol.delta) << "," << csv_number(sol.m)
              << "\n";
        // resample on a uniform grid in t by Hermite interpolation of the stored steps
        std::size_t k = 0;
        const double t0 = sol.t_from_a.front(), t1 = sol.t_from_a.back();
        for (int i = 0; i < m.samples; ++i) {
            const double s = t0 + (t1 - t0) * i / (m.samples - 1);
            while (k + 2 < sol.t_from_a.size() && sol.t_from_a[k + 1] < s) ++k;
            const double h = sol.t_from_a[k + 1] - sol.t_from_a[k];
            const double x = h > 0 ? std::clamp((s - sol.t_from_a[k]) / h, 0.0, 1.0) : 0.0;
            const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
            const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
            const double v = h00 * sol.v[k] + h10 * h * sol.v_prime[k] + h01 * sol.v[k + 1] + h11 * h * sol.v_prime[k + 1];
            const double vp = h00 * sol.v_prime[k] + h10 * h * sol.v_second[k] + h01 * sol.v_prime[k + 1] +
                              h11 * h * sol.v_second[k + 1];
            profiles << csv_number(a) << "," << csv_number(a + s) << "," << csv_number(v) << "," << csv_number(vp) << "\n";
        }
    }
    if (f.out == ".") {
        std::cout << table.str();
    } else {
        write_text(fs::path(f.out) / "model1d_table.csv", table.str());
        write_text(fs::path(f.out) / "model1d_profiles.csv", profiles.str());
        std::cout << table.str();
    }
    return exit_pass;
}

int cmd_check(const CommonFlags& f)
{
    if (f.config.empty()) throw ConfigError("--config is required");
    const json j = read_json_file(f.config);
    config::allow_keys(j, "config", {"norm", "samples", "seed", "polygon", "solver", "checks", "output"});
    if (!j.contains("norm")) throw ConfigError("config: missing \"norm\"");
    const NormSpec spec = parse_norm(j["norm"]);
    SweepOptions opt;
    if (j.contains("samples")) {
        opt.samples = static_cast<int>(config::get_integer(j["samples"], "samples"));
        if (opt.samples < 1) throw ConfigError("samples: must be >= 1");
    }
    if (j.contains("seed")) opt.seed = static_cast<std::uint64_t>(config::get_integer(j["seed"], "seed"));
    if (f.seed) opt.seed = *f.seed;

    const auto reports = identity_suite(spec, opt);
    json out = {{"norm", norm_to_json(spec)}, {"seed", opt.seed}, {"samples", opt.samples}, {"checks", json::array()}};
    bool pass = true;
    for (const auto& r : reports) {
        out["checks"].push_back(check_to_json(r));
        pass = pass && r.pass;
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  samples " << r.sample_count << "  worst "
                  << format_double(r.worst_violation) << "  threshold " << format_double(r.threshold) << "\n";
    }
    if (f.out != ".") write_text(fs::path(f.out) / "check.json", out.dump(2) + "\n");
    return pass ? exit_pass : exit_check_failure;
}

int cmd_corpus(const CommonFlags& f)
{
    if (f.config.empty()) throw ConfigError("--config is required");
    CorpusConfig corpus = parse_corpus_config(read_json_file(f.config));
    for (auto& rc : corpus.runs) {
        if (f.seed) rc.solver.options.seed = *f.seed;
        if (!f.levels.empty()) rc.solver.levels = parse_level_list(f.levels);
    }
    const CorpusOutcome out = run_corpus(corpus.runs, f.parallelism, {f.timing});
    // single collector: every file is written here, after the workers are done
    write_text(under(f.out, corpus.summary), out.summary_csv);
    int failed = 0;
    for (std::size_t i = 0; i < out.runs.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%04zu.json", i);
        write_text(under(f.out, corpus.reports_dir) / name, out.runs[i].report.dump(2) + "\n");
        failed += out.runs[i].exit_code != exit_pass;
    }
    std::cout << out.runs.size() << " runs, " << failed << " failed; summary in "
              << under(f.out, corpus.summary).string() << "\n";
    return out.exit_code;
}

int cmd_report(const std::string& path)
{
    std::cout << render_report(read_json_file(path));
    return exit_pass;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Finsler Poincare inequality toolkit"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    CommonFlags f;
    ModelFlags m;
    std::string report_path;
    std::uint64_t seed = 0;

    auto add_common = [&](CLI::App* sub, bool run_flags) {
        sub->add_option("--config", f.config, "JSON config file");
        sub->add_option("--seed", seed, "override the random seed")->each([&](const std::string&) { f.seed = seed; });
        sub->add_option("--out", f.out, "output directory");
        if (run_flags) {
            sub->add_option("--levels", f.levels, "refinement levels, e.g. 3,4,5");
            sub->add_flag("--timing", f.timing, "record wall time in reports");
        }
    };

    auto* eig = app.add_subcommand("eig", "solve one configuration and write its report");
    add_common(eig, true);
    eig->add_option("--dump-mesh", f.dump_mesh, "write the finest mesh");
    eig->add_option("--dump-eigenfunction", f.dump_eigenfunction, "write (x, y, u) at the finest level");

    auto* geom = app.add_subcommand("geom", "F-diameter and F-inradius of the configured polygon");
    add_common(geom, false);

    auto* model = app.add_subcommand("model1d", "tables of b, delta, m over a, plus sampled profiles");
    model->add_option("--n", m.n, "dimension");
    model->add_option("--lambda", m.lambda, "eigenvalue");
    model->add_option("--a", m.a, "values of a")->delimiter(',');
    model->add_option("--samples", m.samples, "profile samples per a");
    model->add_option("--out", f.out, "output directory");

    auto* check = app.add_subcommand("check", "pointwise identity and inequality sweeps for a norm");
    add_common(check, false);

    auto* corpus = app.add_subcommand("corpus", "batch of runs with a CSV summary");
    add_common(corpus, true);
    corpus->add_option("--parallelism", f.parallelism, "worker threads")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "re-render a stored report");
    report->add_option("path", report_path, "report JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config_error;
    }

    try {
        if (*eig) return cmd_eig(f);
        if (*geom) return cmd_geom(f);
        if (*model) return cmd_model1d(f, m);
        if (*check) return cmd_check(f);
        if (*corpus) return cmd_corpus(f);
        if (*report) return cmd_report(report_path);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_config_error;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numerical_failure;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_config_error;
    }
    return exit_config_error;
}
