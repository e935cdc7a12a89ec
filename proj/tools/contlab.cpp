#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "contlab/scenario.hpp"

namespace fs = std::filesystem;
using namespace contlab;

namespace {

void write_file(const fs::path& dir, const std::string& name, const std::string& content) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw OutputError("cannot create output directory " + dir.string());
    std::ofstream f(dir / name, std::ios::binary);
    f << content;
    if (!f) throw OutputError("cannot write " + (dir / name).string());
    std::cout << "wrote " << (dir / name).string() << '\n';
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : detail::split(s, ',')) out.push_back(detail::parse_number(part, s));
    return out;
}

Json recipe_json(const std::string& field, const std::string& name, const std::string& file,
                 const std::string& region) {
    if (!file.empty()) return read_json_file(file);
    std::string n = name.empty() ? (field == "sqrt_abs" ? "sqrt_pair" : "corollary1") : name;
    Json r{{"name", n}};
    if (!region.empty()) {
        const auto v = parse_list(region);
        require(v.size() == 2, "--region expects lo,hi");
        r["region"] = v;
    }
    return r;
}

TestFunction psi_from(const std::string& center, double radius) { return bump_test_function(parse_list(center), radius); }

struct Common {
    std::string out = "contlab-out";
    int verbosity = 0;
};

struct PairArgs {
    std::string field, recipe, recipe_file, region, ks;
};

void add_pair_options(CLI::App* c, PairArgs& a, bool need_ks = true) {
    c->add_option("--field", a.field, "field catalog name")->required();
    auto* ks = c->add_option("--ks", a.ks, "comma-separated k schedule");
    if (need_ks) ks->required();
    c->add_option("--recipe", a.recipe, "sqrt_pair, corollary1, corollary2, radial, potential, one_sided");
    c->add_option("--recipe-file", a.recipe_file, "JSON recipe object (overrides --recipe/--region)");
    c->add_option("--region", a.region, "lo,hi for 1D recipes");
}

int run_scenarios(const std::vector<std::string>& names, bool all, const std::vector<std::string>& sets,
                  const Common& common) {
    std::vector<std::string> todo = names;
    if (all)
        for (const auto& e : list_scenarios()) todo.push_back(e.name);
    if (todo.empty()) throw CLI::ValidationError("scenario", "give scenario names or --all");
    bool ok = true;
    for (const auto& n : todo) {
        Scenario s = load_scenario(n);
        if (!sets.empty()) {
            Json cfg = s.config;
            for (const auto& kv : sets) apply_override(cfg, kv);
            s = parse_scenario(cfg);
        }
        const auto rep = run_scenario(s);
        const auto dir = emit_report(rep, common.out);
        std::cout << text_summary(rep);
        if (common.verbosity > 0) std::cout << "  artifacts: " << dir.string() << '\n';
        ok = ok && rep.passed;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"contlab: continuity-equation uniqueness lab"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--out,-o", common.out, "output directory")->capture_default_str();
    app.add_flag("-v,--verbose", common.verbosity, "more output");

    PairArgs cert;
    std::string cert_path;
    double threshold = 0.05;
    auto* c_cert = app.add_subcommand("certify", "certificate J_k and conditions for a stored path");
    add_pair_options(c_cert, cert);
    c_cert->add_option("--path", cert_path, "MeasurePath JSON")->required()->check(CLI::ExistingFile);
    c_cert->add_option("--threshold", threshold)->capture_default_str();

    std::string s_field, s_initial;
    double s_T = 1.0, s_dt = 1e-3;
    std::size_t s_steps = 1000;
    auto* c_solve = app.add_subcommand("solve", "push an initial measure along b");
    c_solve->add_option("--field", s_field)->required();
    c_solve->add_option("--initial", s_initial, "SignedMeasure JSON")->required()->check(CLI::ExistingFile);
    c_solve->add_option("--T", s_T)->capture_default_str();
    c_solve->add_option("--dt", s_dt, "ODE step")->capture_default_str();
    c_solve->add_option("--steps", s_steps, "output steps")->capture_default_str();

    PairArgs dual;
    double d_k = 100, d_s = 1.0, d_radius = 0.5;
    std::string d_center = "0.25", d_grid = "-2,2,201";
    std::size_t d_times = 5;
    auto* c_dual = app.add_subcommand("dual", "backward dual solution and its weighted gradient bound");
    add_pair_options(c_dual, dual, false);
    c_dual->add_option("--k", d_k)->capture_default_str();
    c_dual->add_option("--s", d_s, "final time")->capture_default_str();
    c_dual->add_option("--psi-center", d_center)->capture_default_str();
    c_dual->add_option("--psi-radius", d_radius)->capture_default_str();
    c_dual->add_option("--grid", d_grid, "lo,hi,n (1D)")->capture_default_str();
    c_dual->add_option("--times", d_times, "number of sample times in [0, s]")->capture_default_str();

    PairArgs gap;
    std::string g_a, g_b, g_center = "0.25";
    double g_radius = 0.5, g_s = -1;
    auto* c_gap = app.add_subcommand("gap", "duality gap of the difference of two paths");
    add_pair_options(c_gap, gap);
    c_gap->add_option("--path-a", g_a)->required()->check(CLI::ExistingFile);
    c_gap->add_option("--path-b", g_b)->required()->check(CLI::ExistingFile);
    c_gap->add_option("--psi-center", g_center)->capture_default_str();
    c_gap->add_option("--psi-radius", g_radius)->capture_default_str();
    c_gap->add_option("--s", g_s, "evaluation time (default T)");

    std::string v_field, v_initial, v_eps = "0.01,0.003,0.001,0.0003";
    FPGrid v_grid;
    double v_T = 1.0;
    std::size_t v_steps = 20;
    auto* c_visc = app.add_subcommand("viscous", "vanishing-viscosity selection experiment (1D)");
    c_visc->add_option("--field", v_field)->required();
    c_visc->add_option("--initial", v_initial)->required()->check(CLI::ExistingFile);
    c_visc->add_option("--eps", v_eps)->capture_default_str();
    c_visc->add_option("--a", v_grid.a)->capture_default_str();
    c_visc->add_option("--b", v_grid.b)->capture_default_str();
    c_visc->add_option("--n", v_grid.n)->capture_default_str();
    c_visc->add_option("--dt", v_grid.dt, "0 picks a stable step")->capture_default_str();
    c_visc->add_flag("--implicit", v_grid.implicit);
    c_visc->add_option("--T", v_T)->capture_default_str();
    c_visc->add_option("--steps", v_steps, "output steps")->capture_default_str();

    std::vector<std::string> sc_names, sc_sets;
    bool sc_all = false;
    auto* c_scen = app.add_subcommand("scenario", "run catalog scenarios and compare expected observables");
    c_scen->add_option("names", sc_names, "scenario names or JSON files");
    c_scen->add_flag("--all", sc_all, "run the whole catalog");
    c_scen->add_option("--set", sc_sets, "config override key=value (dotted keys)");

    auto* c_list = app.add_subcommand("list", "list catalog scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const fs::path out = common.out;
        if (c_list->parsed()) {
            const auto entries = list_scenarios();
            std::size_t w = 0;
            for (const auto& e : entries) w = std::max(w, e.name.size());
            for (const auto& e : entries) std::cout << std::left << std::setw(static_cast<int>(w) + 2) << e.name << e.description << '\n';
            return 0;
        }
        if (c_scen->parsed()) return run_scenarios(sc_names, sc_all, sc_sets, common);

        if (c_cert->parsed()) {
            const auto path = path_from_json(read_json_file(cert_path));
            const auto b = field_from_name(cert.field);
            const auto pairs = build_pairs(recipe_json(cert.field, cert.recipe, cert.recipe_file, cert.region), cert.field,
                                           parse_list(cert.ks));
            CertificateOptions opt;
            opt.threshold = threshold;
            const auto c = certify(path, b, pairs, pairs_region(pairs), opt);
            write_file(out, "certificate.json", to_json(c).dump(2) + "\n");
            std::ostringstream csv;
            write_certificate_csv(csv, c);
            write_file(out, "certificate.csv", csv.str());
            for (std::size_t i = 0; i < c.J.size(); ++i) std::cout << "k=" << c.ks[i] << "  J_k=" << c.J[i] << '\n';
            std::cout << "verdict: " << c.verdict << '\n';
            return 0;
        }
        if (c_solve->parsed()) {
            const auto b = field_from_name(s_field);
            const auto nu = measure_from_json(read_json_file(s_initial));
            const auto path = solve(b, nu, FlowConfig{s_dt, s_T, s_steps});
            write_file(out, "path.json", to_json(path).dump() + "\n");
            std::ostringstream atoms, dens;
            write_path_atoms_csv(atoms, path);
            write_file(out, "path_atoms.csv", atoms.str());
            if (nu.dimension() == 1 && !nu.density().empty()) {
                write_path_density_csv(dens, path);
                write_file(out, "path_density.csv", dens.str());
            }
            std::cout << "mass error: " << detail::path_mass_error(path) << '\n';
            return 0;
        }
        if (c_dual->parsed()) {
            const auto pairs = build_pairs(recipe_json(dual.field, dual.recipe, dual.recipe_file, dual.region), dual.field, {d_k});
            const auto& p = pairs.front();
            const auto psi = psi_from(d_center, d_radius);
            const auto f = solve_dual(p, psi, d_s);
            const auto g = parse_list(d_grid);
            require(g.size() == 3 && g[2] >= 2, "--grid expects lo,hi,n");
            std::vector<Point> xs;
            for (double x : linspace(g[0], g[1], static_cast<std::size_t>(g[2]))) xs.push_back({x});
            const auto ts = linspace(0.0, d_s, std::max<std::size_t>(d_times, 2));
            const auto chk = gradient_bound_check(f, p.V, xs, ts);
            Json j{{"k", p.k},
                   {"R", f.R},
                   {"max_principle_margin", chk.max_principle},
                   {"gradient_margin", chk.margin},
                   {"ratio_max", chk.ratio_max},
                   {"support_violation", support_violation(f, ts)}};
            write_file(out, "dual.json", j.dump(2) + "\n");
            std::ostringstream csv;
            std::vector<double> xv;
            for (const auto& x : xs) xv.push_back(x[0]);
            write_dual_grid_csv(csv, f, p.V, xv, ts);
            write_file(out, "dual_grid.csv", csv.str());
            std::cout << "max-principle margin " << chk.max_principle << ", gradient margin " << chk.margin << '\n';
            return 0;
        }
        if (c_gap->parsed()) {
            const auto b = field_from_name(gap.field);
            const auto diff = path_from_json(read_json_file(g_a)) - path_from_json(read_json_file(g_b));
            const auto pairs = build_pairs(recipe_json(gap.field, gap.recipe, gap.recipe_file, gap.region), gap.field,
                                           parse_list(gap.ks));
            const auto psi = psi_from(g_center, g_radius);
            const double s = g_s < 0 ? diff.horizon() : g_s;
            Json arr = Json::array();
            std::ostringstream csv;
            csv.precision(17);
            csv << "k,lhs,bound,C_tilde,J_k\n";
            for (const auto& p : pairs) {
                const auto r = duality_gap(psi, s, diff, b, p);
                arr.push_back(to_json(r));
                csv << r.k << ',' << r.lhs << ',' << r.bound << ',' << r.C_tilde << ',' << r.J_k << '\n';
                std::cout << "k=" << r.k << "  lhs=" << r.lhs << "  bound=" << r.bound << '\n';
            }
            write_file(out, "gap.json", arr.dump(2) + "\n");
            write_file(out, "gap.csv", csv.str());
            return 0;
        }
        if (c_visc->parsed()) {
            const auto r = selection_experiment(field_from_name(v_field), measure_from_json(read_json_file(v_initial)),
                                                parse_list(v_eps), v_grid, v_T, v_steps);
            write_file(out, "selection.json", to_json(r).dump(2) + "\n");
            std::ostringstream csv;
            write_selection_csv(csv, r);
            write_file(out, "selection.csv", csv.str());
            for (const auto& row : r.rows)
                std::cout << "eps=" << row.eps << "  median=" << row.terminal_median << "  distance=" << row.terminal_distance
                          << '\n';
            return 0;
        }
    } catch (const OutputError& e) {
        std::cerr << "contlab: " << e.what() << '\n';
        return 3;
    } catch (const CLI::Error& e) {
        std::cerr << "contlab: " << e.what() << '\n' << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "contlab: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
