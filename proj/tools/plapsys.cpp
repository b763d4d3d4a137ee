#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plapsys/errors.hpp"
#include "plapsys/nehari.hpp"

namespace {

using namespace plapsys;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Common {
    std::string config;
    double tol = -1.0;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out;
    bool force = false;
};

struct GridSpec {
    std::string text = "0.1:10:25";
    bool log = false;
};

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::vector<double> parse_grid(const GridSpec& g) {
    std::vector<std::string> parts;
    std::stringstream ss(g.text);
    for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
    if (parts.size() != 3) throw DomainError("--r-grid expects a:b:n");
    double a, b;
    long n;
    try {
        a = std::stod(parts[0]);
        b = std::stod(parts[1]);
        n = std::stol(parts[2]);
    } catch (const std::exception&) {
        throw DomainError("--r-grid expects numbers in a:b:n");
    }
    std::vector<double> grid;
    if (n <= 0) return grid;
    if (g.log && !(a > 0.0 && b > 0.0)) throw DomainError("--r-grid with --log needs positive end points");
    for (long i = 0; i < n; ++i) {
        const double s = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
        grid.push_back(g.log ? std::exp(std::log(a) + s * (std::log(b) - std::log(a))) : a + s * (b - a));
    }
    return grid;
}

int default_jobs() {
    if (const char* env = std::getenv("PLAPSYS_JOBS")) {
        const int j = std::atoi(env);
        if (j > 0) return j;
    }
    return 1;
}

CLI::Option* add_common(CLI::App* cmd, Common& c, double default_tol) {
    c.jobs = default_jobs();
    cmd->add_option("--config", c.config, "problem config (YAML)")->required();
    auto* tol = cmd->add_option("--tol", c.tol, "numerical tolerance");
    tol->default_str(fmt(default_tol));
    cmd->add_option("--seed", c.seed, "seed of the start schedule")->capture_default_str();
    cmd->add_option("--jobs", c.jobs, "worker threads (default from PLAPSYS_JOBS)")->capture_default_str();
    cmd->add_option("--out", c.out, "output file or prefix (stdout when omitted)");
    cmd->add_flag("--force", c.force, "overwrite existing output files");
    return tol;
}

class Output {
public:
    Output(const std::string& path, bool force) : path_(path) {
        if (path.empty()) return;
        if (std::filesystem::exists(path) && !force)
            throw DomainError("refusing to overwrite '" + path + "' (use --force)");
        file_.open(path);
        if (!file_) throw DomainError("cannot open '" + path + "' for writing");
    }
    std::ostream& os() { return path_.empty() ? std::cout : file_; }

private:
    std::string path_;
    std::ofstream file_;
};

void write_manifest(std::ostream& os, const std::string& command, const Common& c, const ProblemSpec& spec,
                    const std::string& extra) {
    os << "# command: " << command << "\n";
    os << "# config: " << c.config << "\n";
    os << "# problem_hash: " << hash_hex(problem_hash(spec)) << "\n";
    os << "# seed: " << c.seed << "\n";
    os << "# tol: " << fmt(c.tol) << "\n";
    if (!extra.empty()) os << extra;
    os << "# output: " << (c.out.empty() ? "-" : c.out) << "\n";
    os << "# version: " << PLAPSYS_VERSION << "\n";
}

std::string grid_manifest(const GridSpec& g) {
    return "# r_grid: " + g.text + (g.log ? " log" : " linear") + "\n";
}

void dump_field(const std::string& path, bool force, const Mesh& mesh, const Field& u) {
    Output o(path, force);
    write_field(o.os(), mesh, u);
}

int cmd_eigen(const Common& c, const std::string& dump) {
    const auto spec = load_problem(c.config);
    const auto d = discretize(spec);
    const auto pp = principal_pairs(d, c.tol, c.seed);
    Output o(c.out, c.force);
    write_manifest(o.os(), "eigen", c, spec, "");
    auto& os = o.os();
    os << "lambda1: " << fmt(pp.lambda1()) << "\n";
    os << "mu1: " << fmt(pp.mu1()) << "\n";
    os << "iterations_p: " << pp.phi.iterations << "\n";
    os << "iterations_q: " << pp.psi.iterations << "\n";
    if (!dump.empty()) {
        dump_field(dump + "_phi.txt", c.force, d.mesh, pp.phi.fn);
        dump_field(dump + "_psi.txt", c.force, d.mesh, pp.psi.fn);
    }
    return kExitOk;
}

int cmd_curve(const Common& c, const GridSpec& g, const std::string& which, int starts, bool warm) {
    const auto spec = load_problem(c.config);
    const auto grid = parse_grid(g);
    check_grid(grid, "curve");
    const bool want_f = which != "e", want_e = which != "f";
    Output o(c.out, c.force);

    const FContext fctx = make_f_context(spec, c.tol, c.seed);
    std::vector<CurvePoint> fpts;
    FOptions fo;
    fo.tol = c.tol;
    fo.seed = c.seed;
    fo.jobs = c.jobs;
    if (starts > 0) fo.n_starts = starts;
    if (want_f || (want_e && warm)) fpts = trace_curve_f(fctx, grid, fo);

    ECurve ec;
    if (want_e) {
        std::vector<std::pair<Field, Field>> warm_pairs;
        if (warm) {
            NehariOptions no;
            no.seed = c.seed;
            for (const auto& s : solutions_below_curve(fctx, fpts, 2.0 * c.tol, no)) warm_pairs.emplace_back(s.u, s.v);
        }
        EOptions eo;
        eo.tol = c.tol;
        eo.seed = c.seed;
        eo.jobs = c.jobs;
        if (starts > 0) eo.n_starts = starts;
        ec = trace_curve_e(make_e_context(fctx), grid, eo, warm_pairs);
    }

    std::string extra = grid_manifest(g) + "# which: " + which + "\n";
    if (want_e) extra += "# warm_solutions: " + std::string(warm ? "on" : "off") + "\n";
    write_manifest(o.os(), "curve", c, spec, extra);
    auto& os = o.os();
    const std::string cert_na = "nan";
    if (which == "f") {
        os << "r,lambda_f,mu_f,kind,feasibility_gap,starts_used,flagged\n";
        for (const auto& p : fpts)
            os << fmt(p.r) << ',' << fmt(p.value) << ',' << fmt(p.mu_value) << ',' << to_string(p.kind) << ','
               << fmt(p.feasibility_gap) << ',' << p.starts_used << ',' << int(p.flagged) << '\n';
    } else if (which == "e") {
        os << "r,lambda_e_lower,mu_e_lower,picone_upper,argmin_component,excluded_nodes,flagged\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& p = ec.lower[i];
            os << fmt(p.r) << ',' << fmt(p.value) << ',' << fmt(p.mu_value) << ','
               << (ec.certificate.empty() ? cert_na : fmt(ec.certificate[i].value)) << ',' << p.argmin_component
               << ',' << p.excluded_nodes << ',' << int(p.flagged) << '\n';
        }
    } else {
        os << "r,lambda_f,mu_f,lambda_e_lower,mu_e_lower,picone_upper,argmin_component,excluded_nodes,ordered\n";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& f = fpts[i];
            const auto& e = ec.lower[i];
            const bool ordered = f.value <= e.value + 3.0 * c.tol;
            os << fmt(f.r) << ',' << fmt(f.value) << ',' << fmt(f.mu_value) << ',' << fmt(e.value) << ','
               << fmt(e.mu_value) << ',' << (ec.certificate.empty() ? cert_na : fmt(ec.certificate[i].value)) << ','
               << e.argmin_component << ',' << e.excluded_nodes << ',' << int(ordered) << '\n';
        }
    }
    if (want_e) os << "# c_invariance_gap: " << fmt(ec.c_invariance_gap) << "\n";
    int flags = 0;
    for (const auto& p : fpts) flags += p.flagged;
    flags += ec.flags;
    os << "# monotonicity_flags: " << flags << "\n";
    return kExitOk;
}

int cmd_probe(const Common& c, double lambda, double mu) {
    const auto spec = load_problem(c.config);
    const FContext fctx = make_f_context(spec, c.tol, c.seed);
    const auto pc = make_probe_context(make_e_context(fctx));
    Output o(c.out, c.force);
    std::ostringstream extra;
    extra << "# lambda: " << fmt(lambda) << "\n# mu: " << fmt(mu) << "\n";
    write_manifest(o.os(), "probe", c, spec, extra.str());
    o.os() << "classification: " << to_string(nonexistence_probe(lambda, mu, pc)) << "\n";
    return kExitOk;
}

int cmd_certify(const Common& c, const GridSpec& g) {
    const auto spec = load_problem(c.config);
    const auto grid = parse_grid(g);
    check_grid(grid, "certify");
    const FContext fctx = make_f_context(spec, c.tol, c.seed);
    const EContext ectx = make_e_context(fctx);
    Output o(c.out, c.force);
    write_manifest(o.os(), "certify", c, spec, grid_manifest(g));
    if (ectx.picone.empty()) {
        o.os() << "verdict: no certificate region\n";
        return kExitOk;
    }
    o.os() << "r,picone_upper,mu_picone_upper\n";
    for (double r : grid) {
        const auto p = picone_upper(ectx, r);
        o.os() << fmt(r) << ',' << fmt(p.value) << ',' << fmt(p.mu_value) << '\n';
    }
    return kExitOk;
}

void write_solution_report(std::ostream& os, const SolveResult& s, const SupersolutionReport* sup) {
    os << "lambda: " << fmt(s.lambda) << "\n";
    os << "mu: " << fmt(s.mu) << "\n";
    os << "energy: " << fmt(s.energy) << "\n";
    os << "residual_u: " << fmt(s.residual_u) << "\n";
    os << "residual_v: " << fmt(s.residual_v) << "\n";
    os << "scale_u: " << fmt(s.scale_u) << "\n";
    os << "scale_v: " << fmt(s.scale_v) << "\n";
    os << "P: " << fmt(s.P) << "\n";
    os << "Q: " << fmt(s.Q) << "\n";
    os << "det_H: " << fmt(s.det_H) << "\n";
    os << "det_floor: " << fmt(s.det_floor) << "\n";
    os << "positivity: " << to_string(s.positivity) << "\n";
    os << "start_index: " << s.start_index << "\n";
    if (sup) {
        os << "supersolution: " << (sup->ok ? "yes" : "no") << "\n";
        os << "supersolution_margin: " << fmt(sup->margin) << "\n";
    }
}

int cmd_solve(const Common& c, double lambda, double mu, int starts) {
    const auto spec = load_problem(c.config);
    const FContext fctx = make_f_context(spec, 1e-2, c.seed);
    const auto pc = make_probe_context(make_e_context(fctx));
    const std::string report_path = c.out.empty() ? "" : c.out + "_report.txt";
    Output o(report_path, c.force);
    auto& os = o.os();
    std::ostringstream extra;
    extra << "# lambda: " << fmt(lambda) << "\n# mu: " << fmt(mu) << "\n";
    write_manifest(os, "solve", c, spec, extra.str());

    const auto probe = nonexistence_probe(lambda, mu, pc);
    if (probe != ProbeClass::inconclusive) {
        os << "verdict: " << to_string(probe) << " (certificate)\n";
        return kExitOk;
    }
    NehariOptions no;
    no.tol = c.tol;
    no.seed = c.seed;
    if (starts > 0) no.n_starts = starts;
    const auto res = minimize_nehari(fctx.disc, fctx.pairs, lambda, mu, no);
    if (!res.found()) {
        os << "verdict: not found\n";
        os << "reason: " << res.failure.reason << "\n";
        os << "feasible_starts: " << res.failure.feasible_starts << "\n";
        if (res.failure.best_iterate) {
            os << "# best iterate diagnostics\n";
            write_solution_report(os, *res.failure.best_iterate, nullptr);
        }
        return kExitOk;
    }
    const auto& s = *res.solution;
    std::optional<SupersolutionReport> sup;
    if (lambda > 0.0 && mu > 0.0 && s.positivity == Positivity::positive_interior)
        sup = supersolution_check(fctx.disc, s.u, s.v, lambda, mu, 1e-5);
    os << "verdict: solution\n";
    write_solution_report(os, s, sup ? &*sup : nullptr);
    os << "n_lambda_mu: " << fmt(s.n_lambda_mu) << "\n";
    if (!c.out.empty()) {
        dump_field(c.out + "_u.txt", c.force, fctx.disc.mesh, s.u);
        dump_field(c.out + "_v.txt", c.force, fctx.disc.mesh, s.v);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Critical curves and Nehari solutions of coupled p/q-Laplacian systems"};
    app.set_version_flag("--version", std::string(PLAPSYS_VERSION));
    app.require_subcommand(1);

    Common c;
    GridSpec grid;
    std::string dump, which = "f";
    double lambda = 0.0, mu = 0.0;
    int starts = 0;
    bool no_warm = false;

    auto* eigen = app.add_subcommand("eigen", "first eigenpairs for both exponents");
    auto* eigen_tol = add_common(eigen, c, 1e-13);
    eigen->add_option("--dump-fields", dump, "write PREFIX_phi.txt and PREFIX_psi.txt");

    auto* curve = app.add_subcommand("curve", "trace the fibering and sup-inf curves over a ray grid");
    auto* curve_tol = add_common(curve, c, 1e-2);
    curve->add_option("--which", which, "f, e or both")->check(CLI::IsMember({"f", "e", "both"}))->capture_default_str();
    curve->add_option("--r-grid", grid.text, "ray grid a:b:n")->capture_default_str();
    curve->add_flag("--log", grid.log, "log-spaced grid");
    curve->add_option("--starts", starts, "multi-start count (0 keeps the default)");
    curve->add_flag("--no-warm", no_warm, "skip solution warm starts for the sup-inf curve");

    auto* solve = app.add_subcommand("solve", "Nehari minimization at one parameter point");
    auto* solve_tol = add_common(solve, c, 1e-6);
    solve->add_option("--lambda", lambda, "first parameter")->required();
    solve->add_option("--mu", mu, "second parameter")->required();
    solve->add_option("--starts", starts, "multi-start count (0 keeps the default)");

    auto* probe = app.add_subcommand("probe", "analytic nonexistence tests at one parameter point");
    auto* probe_tol = add_common(probe, c, 1e-2);
    probe->add_option("--lambda", lambda, "first parameter")->required();
    probe->add_option("--mu", mu, "second parameter")->required();

    auto* certify = app.add_subcommand("certify", "Picone upper bounds over a ray grid");
    auto* certify_tol = add_common(certify, c, 1e-2);
    certify->add_option("--r-grid", grid.text, "ray grid a:b:n")->capture_default_str();
    certify->add_flag("--log", grid.log, "log-spaced grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    const std::pair<CLI::App*, std::pair<CLI::Option*, double>> defaults[] = {
        {eigen, {eigen_tol, 1e-13}}, {curve, {curve_tol, 1e-2}}, {solve, {solve_tol, 1e-6}},
        {probe, {probe_tol, 1e-2}}, {certify, {certify_tol, 1e-2}}};
    for (const auto& [cmd, opt] : defaults)
        if (*cmd && opt.first->count() == 0) c.tol = opt.second;
    if (!(c.tol > 0.0)) {
        std::cerr << "error: --tol must be positive\n";
        return kExitUsage;
    }

    const auto t0 = std::chrono::steady_clock::now();
    int rc = kExitOk;
    try {
        if (*eigen) rc = cmd_eigen(c, dump);
        else if (*curve) rc = cmd_curve(c, grid, which, starts, !no_warm);
        else if (*solve) rc = cmd_solve(c, lambda, mu, starts);
        else if (*probe) rc = cmd_probe(c, lambda, mu);
        else if (*certify) rc = cmd_certify(c, grid);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "wall time: " << secs << " s\n";
    return rc;
}
