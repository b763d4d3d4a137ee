#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "../oracles.hpp"
#include "../support.hpp"
#include "plapsys/gamma_e.hpp"
#include "plapsys/gamma_f.hpp"
#include "plapsys/nehari.hpp"
#include "plapsys/plap.hpp"

using namespace plapsys;
using testing_support::config_path;

namespace {

constexpr double kCurveTol = 1e-2;
constexpr double kSolveTol = 1e-6;

std::vector<double> log_grid(double a, double b, int n) {
    std::vector<double> g(n);
    for (int k = 0; k < n; ++k) g[k] = std::exp(std::log(a) + k * (std::log(b) - std::log(a)) / (n - 1));
    return g;
}

std::map<int, std::pair<bool, std::string>> results;

void report(int id, bool ok, const std::string& detail) {
    results[id] = {ok, detail};
    std::cerr << "criterion " << id << " done\n";
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double max_floor(const FContext& ctx, double r) { return std::max(ctx.pairs.lambda1(), ctx.pairs.mu1() / r); }

struct Traced {
    std::unique_ptr<FContext> ctx;
    std::vector<double> grid;
    std::vector<CurvePoint> f;
    std::vector<SolveResult> sols;
    ECurve e;
};

Traced trace(const std::string& config, int points, bool warm) {
    Traced t;
    t.ctx = std::make_unique<FContext>(make_f_context(load_problem(config_path(config)), kCurveTol, 1));
    t.grid = log_grid(0.1, 10.0, points);
    FOptions fo;
    fo.tol = kCurveTol;
    t.f = trace_curve_f(*t.ctx, t.grid, fo);
    std::vector<std::pair<Field, Field>> warm_pairs;
    if (warm) {
        t.sols = solutions_below_curve(*t.ctx, t.f, 2.0 * kCurveTol, {});
        for (const auto& s : t.sols) warm_pairs.emplace_back(s.u, s.v);
    }
    EOptions eo;
    eo.tol = kCurveTol;
    t.e = trace_curve_e(make_e_context(*t.ctx), t.grid, eo, warm_pairs);
    return t;
}

Mesh unit_mesh(int dim, int n) {
    DomainDescriptor d;
    d.dim = dim;
    return build_mesh(d, n);
}

void criterion1() {
    const double pi2 = oracle::kPi * oracle::kPi;
    const double l1 = first_eigenpair(unit_mesh(1, 257), 2.0, 1e-13).value;
    const double l2 = first_eigenpair(unit_mesh(2, 65), 2.0, 1e-13).value;
    const double e1 = std::abs(l1 - pi2) / pi2, e2 = std::abs(l2 - 2 * pi2) / (2 * pi2);
    bool ok = e1 <= 1e-3 && e2 <= 1e-2;
    std::string detail = "1D rel err " + fmt(e1) + ", 2D rel err " + fmt(e2);
    for (double s : {1.5, 3.0}) {
        const double ref = oracle::shooting_eigenvalue(s);
        const double err = std::abs(first_eigenpair(unit_mesh(1, 257), s, 1e-12).value - ref) / ref;
        ok = ok && err <= 1e-2;
        detail += ", p=" + fmt(s) + " rel err " + fmt(err);
    }
    report(1, ok, detail);
}

void criterion2(const std::map<std::string, Traced*>& runs) {
    bool ok = true;
    double worst = kInf;
    for (const auto& [name, t] : runs)
        for (const auto& pt : t->f) {
            const double gap = pt.value - max_floor(*t->ctx, pt.r);
            worst = std::min(worst, gap);
            ok = ok && gap >= -1e-6;
        }
    report(2, ok, "smallest excess over the floor " + fmt(worst));
}

void criterion3(const Traced& nonneg, const Traced& sc) {
    double worst = 0.0;
    for (const auto& pt : nonneg.f) {
        const double fl = max_floor(*nonneg.ctx, pt.r);
        worst = std::max(worst, std::abs(pt.value - fl) / fl);
    }
    const auto& pp = sc.ctx->pairs;
    const double F = F_pairing(sc.ctx->disc, pp.phi.fn, pp.psi.fn).value;
    double excess = 0.0;
    for (const auto& pt : sc.f) {
        const double fl = max_floor(*sc.ctx, pt.r);
        excess = std::max(excess, (pt.value - fl) / fl);
    }
    report(3, worst <= 1e-2 && F < 0.0 && excess > 2e-2,
           "nonnegative max rel dev " + fmt(worst) + ", sign-changing F(phi,psi) " + fmt(F) + ", max excess " +
               fmt(excess));
}

void criterion4(const Traced& sc) {
    const auto& ss = sc.ctx->sstar;
    const double l1 = sc.ctx->pairs.lambda1(), m1 = sc.ctx->pairs.mu1();
    int low = 0, high = 0;
    double worst = 0.0;
    for (const auto& pt : sc.f) {
        if (pt.r <= 0.95 * ss.r0) {
            ++low;
            worst = std::max(worst, std::abs(pt.value * pt.r - m1) / m1);
        } else if (pt.r >= 1.05 * ss.r1) {
            ++high;
            worst = std::max(worst, std::abs(pt.value - l1) / l1);
        }
    }
    report(4, low > 0 && high > 0 && worst <= 2e-2,
           "r0 " + fmt(ss.r0) + ", r1 " + fmt(ss.r1) + ", points " + std::to_string(low) + "+" +
               std::to_string(high) + ", max rel dev " + fmt(worst));
}

void criterion5(const std::map<std::string, Traced*>& runs) {
    int total = 0;
    std::string detail;
    for (const auto& [name, t] : runs) {
        auto f = t->f;
        const int ff = flag_monotonicity(f, 2.0 * kCurveTol);
        total += ff + t->e.flags;
        detail += name + " f/e flags " + std::to_string(ff) + "/" + std::to_string(t->e.flags) + "; ";
    }
    report(5, total == 0, detail);
}

void criterion6() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(-10.0, 10.0), P(1e-3, 10.0), S(0.0, 1.0);
    int bad = 0;
    for (int k = 0; k < 10000; ++k) {
        const double a = U(rng), b = U(rng), c = P(rng), d = P(rng);
        double x = S(rng), y = S(rng);
        if (k % 10 == 0) x = 0.0;
        if (k % 10 == 1) y = 0.0;
        if (x == 0.0 && y == 0.0) y = 1.0;
        const auto [lo, hi] = ratio_bounds(a, b, c, d);
        using Q = boost::multiprecision::cpp_rational;
        const Q quot = (Q(a) * Q(x) + Q(b) * Q(y)) / (Q(c) * Q(x) + Q(d) * Q(y));
        if (quot < Q(lo) || quot > Q(hi)) ++bad;
    }
    report(6, bad == 0, std::to_string(bad) + " of 10000 samples outside the bounds");
}

void criterion7(const Discretization& d, const SolveResult& sol) {
    const auto& spec = d.spec;
    double round_trip = 0.0, ident = 0.0;
    for (auto [d1, d2] : std::vector<std::pair<double, double>>{{spec.alpha, spec.beta}, {5.0, 0.2}, {0.3, 7.0}}) {
        const auto [t, s] = scale_solution(spec.c1, spec.c2, d1, d2, spec);
        const auto [tb, sb] = scale_solution(d1, d2, spec.c1, spec.c2, spec);
        round_trip = std::max({round_trip, std::abs(t * tb - 1.0), std::abs(s * sb - 1.0)});
        ident = std::max(ident, std::abs(spec.c1 * std::pow(t, spec.p - spec.alpha) * std::pow(s, -spec.beta) - d1) / d1);
        ident = std::max(ident, std::abs(spec.c2 * std::pow(t, -spec.alpha) * std::pow(s, spec.q - spec.beta) - d2) / d2);
    }
    double transfer = 0.0;
    for (auto [d1, d2] : std::vector<std::pair<double, double>>{{spec.alpha, spec.beta}, {5.0, 0.2}, {0.3, 7.0}}) {
        const auto [t, s] = scale_solution(spec.c1, spec.c2, d1, d2, spec);
        const auto moved = evaluate_solution(with_couplings(d, d1, d2), Field(t * sol.u), Field(s * sol.v), sol.lambda,
                                             sol.mu);
        transfer = std::max({transfer, moved.residual_u / moved.scale_u, moved.residual_v / moved.scale_v});
    }
    report(7, round_trip <= 1e-12 && ident <= 1e-12 && transfer <= 10.0 * kSolveTol,
           "round trip " + fmt(round_trip) + ", identities " + fmt(ident) + ", transferred rel residual " +
               fmt(transfer));
}

std::vector<SolveResult> criterion8(const Traced& sc) {
    const auto& ctx = *sc.ctx;
    const double l1 = ctx.pairs.lambda1();
    FOptions fo;
    fo.tol = kCurveTol;
    const double lf = lambda_f_star(ctx, 1.0, fo).value;
    std::vector<SolveResult> out;
    bool ok = true;
    std::string detail;
    for (int k = 1; k <= 3; ++k) {
        const double lam = l1 + 0.25 * k * (lf - l1);
        NehariOptions o;
        o.tol = kSolveTol;
        const auto res = minimize_nehari(ctx.disc, ctx.pairs, lam, lam, o);
        if (!res.found()) {
            ok = false;
            detail += "lambda " + fmt(lam) + " not found (" + res.failure.reason + "); ";
            continue;
        }
        const auto& s = *res.solution;
        const double rel = std::max(s.residual_u / s.scale_u, s.residual_v / s.scale_v);
        ok = ok && rel <= kSolveTol && s.positivity == Positivity::positive_interior &&
             std::abs(s.det_H) > s.det_floor;
        detail += "lambda " + fmt(lam) + " rel res " + fmt(rel) + " " + std::string(to_string(s.positivity)) +
                  " |det H| " + fmt(std::abs(s.det_H)) + "; ";
        out.push_back(s);
    }
    report(8, ok, detail);
    return out;
}

void criterion9(const Traced& sc, const std::vector<SolveResult>& interior) {
    double worst = kInf;
    int n = 0;
    auto check = [&](const SolveResult& s) {
        const double val = inner_inf(sc.ctx->disc, s.u, s.v, s.mu / s.lambda).value;
        worst = std::min(worst, val - s.lambda);
        ++n;
    };
    for (const auto& s : sc.sols) check(s);
    for (const auto& s : interior) check(s);
    std::string bad;
    for (std::size_t i = 0; i < sc.f.size(); ++i)
        if (sc.e.lower[i].value < sc.f[i].value - 3.0 * kCurveTol) bad += fmt(sc.f[i].r) + " ";
    report(9, worst >= -1e-5 && bad.empty(),
           std::to_string(n) + " solutions, min inner_inf - lambda " + fmt(worst) + ", ordering violated at r = [" +
               bad + "]");
}

void criterion10(const std::map<std::string, Traced*>& certified, const std::string& cli) {
    bool ok = true;
    std::string detail;
    for (const auto& [name, t] : certified) {
        double gap = kInf;
        for (std::size_t i = 0; i < t->e.lower.size(); ++i) {
            if (t->e.certificate.size() != t->e.lower.size() || !std::isfinite(t->e.certificate[i].value)) {
                ok = false;
                gap = -kInf;
                break;
            }
            gap = std::min(gap, t->e.certificate[i].value - t->e.lower[i].value);
        }
        ok = ok && gap >= -kCurveTol;
        detail += name + " min(picone - lower) " + fmt(gap) + "; ";
    }
    const std::string cmd = cli + " certify --config " + config_path("negative_1d.yaml") + " 2>&1";
    std::string text;
    if (FILE* pipe = popen(cmd.c_str(), "r")) {
        std::array<char, 256> buf{};
        while (fgets(buf.data(), buf.size(), pipe)) text += buf.data();
        pclose(pipe);
    }
    const bool none = text.find("no certificate region") != std::string::npos;
    ok = ok && none;
    detail += std::string("negative config certify ") + (none ? "reports no certificate region" : "output missing");
    report(10, ok, detail);
}

void criterion11() {
    auto probe_for = [](double f) {
        return make_probe_context(make_e_context(make_f_context(testing_support::constant_weight_1d(f))));
    };
    const auto neg = probe_for(-1.0), pos = probe_for(1.0);
    const auto t0 = std::chrono::steady_clock::now();
    constexpr int reps = 1000;
    bool ok = true;
    for (int k = 0; k < reps; ++k) {
        ok = ok && nonexistence_probe(0.5 * neg.lambda1, 0.5 * neg.mu1, neg) == ProbeClass::no_nontrivial;
        ok = ok && nonexistence_probe(1.5 * pos.lambda1, 0.5 * pos.mu1, pos) == ProbeClass::no_positive_f_nonneg;
    }
    const double per = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / (2 * reps);
    report(11, ok && per < 1e-3, "classes correct: " + std::string(ok ? "yes" : "no") + ", seconds per probe " + fmt(per));
}

void criterion12() {
    const auto base = load_problem(config_path("sign_changing_1d.yaml"));
    const auto grid = log_grid(0.1, 10.0, 7);
    std::vector<std::vector<double>> fv, ev;
    for (auto [c1, c2] : std::vector<std::pair<double, double>>{{1.0, 1.0}, {base.alpha, base.beta}, {5.0, 0.2}}) {
        auto spec = base;
        spec.c1 = c1;
        spec.c2 = c2;
        const auto ctx = make_f_context(spec, kCurveTol, 1);
        FOptions fo;
        fo.tol = kCurveTol;
        EOptions eo;
        eo.tol = kCurveTol;
        std::vector<double> f, e;
        for (const auto& pt : trace_curve_f(ctx, grid, fo)) f.push_back(pt.value);
        for (const auto& pt : trace_curve_e(make_e_context(ctx), grid, eo).lower) e.push_back(pt.value);
        fv.push_back(f);
        ev.push_back(e);
    }
    bool bitwise = true;
    double egap = 0.0;
    for (std::size_t k = 1; k < fv.size(); ++k)
        for (std::size_t i = 0; i < grid.size(); ++i) {
            bitwise = bitwise && fv[k][i] == fv[0][i];
            egap = std::max(egap, std::abs(ev[k][i] - ev[0][i]));
        }
    report(12, bitwise && egap <= 5.0 * kCurveTol,
           std::string("lambda_f bitwise equal: ") + (bitwise ? "yes" : "no") + ", max lambda_e gap " + fmt(egap));
}

void criterion13() {
    const int n = 33;
    auto spec = testing_support::two_piece_1d(0.6, n);
    spec.q = 3.0;
    spec.beta = 3.5;
    spec.c1 = 1.7;
    spec.c2 = 0.4;
    const auto d = discretize(spec);
    const auto Q = oracle::make_quotient_1d(n, [](double x) { return x >= 0.6 ? 1.0 : -1.0; }, spec.p, spec.q,
                                            spec.alpha, spec.beta, spec.c1, spec.c2);
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> U(0.05, 1.0), R(0.1, 10.0);
    double worst = kInf, worst_gap = 0.0, worst_scale = 0.0;
    for (int pair = 0; pair < 20; ++pair) {
        Field u = Field::Zero(n), v = Field::Zero(n);
        for (int k : d.mesh.interior_nodes) {
            u(k) = U(rng);
            v(k) = U(rng);
        }
        const double r = R(rng);
        const double val = inner_inf(d, u, v, r).value;
        for (int k = 0; k < 500; ++k) {
            Eigen::VectorXd xi, eta;
            oracle::random_test_pair(rng, n, xi, eta);
            if (xi.sum() + eta.sum() == 0.0) continue;
            const double L = Q(u, v, xi, eta, r);
            const double scale = std::max({1.0, std::abs(L), std::abs(val)});
            if ((L - val) / scale < worst) {
                worst = (L - val) / scale;
                worst_gap = L - val;
                worst_scale = scale;
            }
        }
    }
    report(13, worst >= -1e-12,
           "10000 test pairs, smallest relative gap " + fmt(worst) + " (absolute " + fmt(worst_gap) + " at magnitude " +
               fmt(worst_scale) + ")");
}

template <class Fn>
void timed(const char* what, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    std::cerr << what << " took " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              << " s\n";
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-cli>\n";
        return 2;
    }
    const std::string cli = argv[1];

    Traced sc, nonneg, neg, sc2d;
    timed("sign-changing trace", [&] { sc = trace("sign_changing_1d.yaml", 25, true); });
    timed("nonnegative trace", [&] { nonneg = trace("nonnegative_1d.yaml", 25, true); });
    timed("negative trace", [&] { neg = trace("negative_1d.yaml", 25, true); });
    timed("2D trace", [&] { sc2d = trace("sign_changing_2d.yaml", 7, true); });

    const std::map<std::string, Traced*> all{
        {"sign_changing_1d", &sc}, {"nonnegative_1d", &nonneg}, {"negative_1d", &neg}, {"sign_changing_2d", &sc2d}};

    std::vector<SolveResult> interior;
    timed("criterion 1", criterion1);
    timed("criterion 2", [&] { criterion2(all); });
    timed("criterion 3", [&] { criterion3(nonneg, sc); });
    timed("criterion 4", [&] { criterion4(sc); });
    timed("criterion 5", [&] { criterion5(all); });
    timed("criterion 6", criterion6);
    timed("criterion 8", [&] { interior = criterion8(sc); });
    timed("criterion 7", [&] {
        if (interior.empty())
            report(7, false, "no verified solution to transfer");
        else
            criterion7(sc.ctx->disc, interior.front());
    });
    timed("criterion 9", [&] { criterion9(sc, interior); });
    timed("criterion 10", [&] {
        criterion10({{"sign_changing_1d", &sc}, {"nonnegative_1d", &nonneg}, {"sign_changing_2d", &sc2d}}, cli);
    });
    timed("criterion 11", criterion11);
    timed("criterion 12", criterion12);
    timed("criterion 13", criterion13);

    int failures = 0;
    for (const auto& [id, res] : results) {
        std::cout << (res.first ? "PASS" : "FAIL") << " criterion " << id << ": " << res.second << "\n";
        failures += res.first ? 0 : 1;
    }
    std::cout << failures << " criteria failed" << std::endl;
    return failures == 0 ? 0 : 1;
}
