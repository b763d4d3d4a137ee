#include "plapsys/gamma_f.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>

#include "plapsys/errors.hpp"
#include "plapsys/parallel.hpp"
#include "plapsys/penalty_descent.hpp"

namespace plapsys {

std::string_view to_string(CurveKind k) {
    switch (k) {
        case CurveKind::upper_bound_on_inf: return "upper-bound-on-inf";
        case CurveKind::lower_bound_on_sup: return "lower-bound-on-sup";
        case CurveKind::picone_certificate: return "picone-certificate";
    }
    return "?";
}

CurvePoint make_point(double r, double value, CurveKind kind) {
    CurvePoint pt;
    pt.r = r;
    pt.value = value;
    pt.mu_value = value * r;
    pt.kind = kind;
    return pt;
}

namespace {

using Solver = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

Eigen::ArrayXd signed_pow(const Eigen::VectorXd& x, double e) {
    return x.array().sign() * x.array().abs().pow(e);
}

struct Blocks {
    const Discretization& d;
    int n;
    Eigen::VectorXd w;
    Eigen::VectorXd wf;

    explicit Blocks(const Discretization& disc)
        : d(disc), n(disc.dofs.size()), w(gather(disc.dofs, disc.mesh.lumped_mass)), wf(gather(disc.dofs, disc.wf)) {}

    Field field(const Eigen::VectorXd& x) const { return scatter(d.dofs, x, d.num_nodes()); }
    double mass(const Eigen::VectorXd& x, double s) const { return (w.array() * x.array().abs().pow(s)).sum(); }
    void normalize(Eigen::Ref<Eigen::VectorXd> x, double s) const {
        const double m = mass(x, s);
        if (m > 0.0) x /= std::pow(m, 1.0 / s);
    }
};

/// Rayleigh quotient of a free-dof block and its gradient.
double rayleigh_block(const Blocks& bk, const Eigen::VectorXd& x, double s, Eigen::VectorXd* grad) {
    const Field u = bk.field(x);
    const double M = bk.mass(x, s);
    if (!(M > 0.0)) return std::numeric_limits<double>::infinity();
    const double R = grad_energy(bk.d.mesh, u, s) / M;
    if (grad) {
        const Eigen::VectorXd g = gather(bk.d.dofs, p_laplace_action(bk.d.mesh, u, s));
        *grad = s * (g.array() - R * bk.w.array() * signed_pow(x, s - 1.0)).matrix() / M;
    }
    return R;
}

/// Normalized pairing F / (M_p^{a/p} M_q^{b/q} sup|f|) and its gradient blocks.
double fhat_block(const Blocks& bk, const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd* gu,
                  Eigen::VectorXd* gv) {
    const auto& s = bk.d.spec;
    const double Mp = bk.mass(u, s.p), Mq = bk.mass(v, s.q);
    const double scale = bk.d.f_sup > 0.0 ? bk.d.f_sup : 1.0;
    const double denom = std::pow(Mp, s.alpha / s.p) * std::pow(Mq, s.beta / s.q) * scale;
    if (!(denom > 0.0)) return 0.0;
    const Eigen::ArrayXd ua = u.array().abs().pow(s.alpha), vb = v.array().abs().pow(s.beta);
    const double F = (bk.wf.array() * ua * vb).sum();
    if (gu) {
        const Eigen::ArrayXd dF = s.alpha * bk.wf.array() * signed_pow(u, s.alpha - 1.0) * vb;
        *gu = ((dF - s.alpha * F / Mp * bk.w.array() * signed_pow(u, s.p - 1.0)) / denom).matrix();
    }
    if (gv) {
        const Eigen::ArrayXd dF = s.beta * bk.wf.array() * ua * signed_pow(v, s.beta - 1.0);
        *gv = ((dF - s.beta * F / Mq * bk.w.array() * signed_pow(v, s.q - 1.0)) / denom).matrix();
    }
    return F / denom;
}

struct Candidate {
    double a = 0.0;
    double b = 0.0;
    double fhat = 0.0;
    Field u;
    Field v;
    int origin = -1;

    double value(double r) const { return std::max(a, b / r); }
};

PenaltyOptions descent_options(const FOptions& opts) {
    PenaltyOptions po;
    po.max_iter = opts.max_iter;
    po.feas_tol = 1e-9;
    po.step_max = 1.0;
    return po;
}

Candidate descend_pair(const FContext& ctx, const Solver& K, double r, const Field& u0, const Field& v0,
                       const FOptions& opts) {
    const Blocks bk(ctx.disc);
    const auto& s = ctx.disc.spec;
    const int n = bk.n;
    PenaltyProblem prob;
    prob.eval = [&](const Eigen::VectorXd& x, bool grad, PenaltyEval& out) {
        const Eigen::VectorXd u = x.head(n), v = x.tail(n);
        out.n_obj = 2;
        Eigen::VectorXd gu, gv, cu, cv;
        out.obj[0] = rayleigh_block(bk, u, s.p, grad ? &gu : nullptr);
        out.obj[1] = rayleigh_block(bk, v, s.q, grad ? &gv : nullptr) / r;
        out.con = fhat_block(bk, u, v, grad ? &cu : nullptr, grad ? &cv : nullptr);
        if (grad) {
            out.grad_obj[0] = Eigen::VectorXd::Zero(2 * n);
            out.grad_obj[0].head(n) = gu;
            out.grad_obj[1] = Eigen::VectorXd::Zero(2 * n);
            out.grad_obj[1].tail(n) = gv / r;
            out.grad_con.resize(2 * n);
            out.grad_con << cu, cv;
        }
    };
    prob.precondition = [&](const Eigen::VectorXd& g) {
        Eigen::VectorXd y(2 * n);
        y.head(n) = K.solve(g.head(n));
        y.tail(n) = K.solve(g.tail(n));
        return y;
    };
    prob.retract = [&](Eigen::VectorXd& x) {
        x = x.cwiseAbs();
        bk.normalize(x.head(n), s.p);
        bk.normalize(x.tail(n), s.q);
    };
    Eigen::VectorXd x(2 * n);
    x << gather(ctx.disc.dofs, u0), gather(ctx.disc.dofs, v0);
    const auto res = penalty_descent(prob, x, descent_options(opts));

    Candidate c;
    c.u = bk.field(res.x.head(n));
    c.v = bk.field(res.x.tail(n));
    const auto sc = f_score(ctx.disc, c.u, c.v);
    c.a = sc.Rp;
    c.b = sc.Rq;
    c.fhat = sc.Fhat;
    return c;
}

bool feasible(const Candidate& c) { return c.fhat >= -1e-9 && std::isfinite(c.a) && std::isfinite(c.b); }

std::vector<Candidate> solve_candidates(const FContext& ctx, const Solver& K, double r, const FOptions& opts,
                                        const std::vector<std::pair<Field, Field>>& starts, int origin) {
    std::vector<Candidate> out;
    for (const auto& [u0, v0] : starts) {
        if (u0.cwiseAbs().maxCoeff() == 0.0 || v0.cwiseAbs().maxCoeff() == 0.0) continue;
        Candidate c = descend_pair(ctx, K, r, u0, v0, opts);
        c.origin = origin;
        if (feasible(c)) out.push_back(std::move(c));
    }
    return out;
}

CurvePoint point_from(const FContext& ctx, double r, const Candidate& c, double tol) {
    CurvePoint pt = make_point(r, c.value(r), CurveKind::upper_bound_on_inf);
    pt.a = c.a;
    pt.b = c.b;
    pt.feasibility_gap = std::max(0.0, -c.fhat);
    pt.minimizer = make_state(ctx.disc, c.u, c.v, pt.value, pt.mu_value);
    const double floor = std::max(ctx.pairs.lambda1(), ctx.pairs.mu1() / r);
    if (pt.value < floor - tol) {
        pt.flagged = true;
        pt.note = "below the principal-eigenvalue floor";
    }
    return pt;
}

const Candidate& best_for(const std::vector<Candidate>& pool, double r) {
    if (pool.empty()) throw ConvergenceError("fibering threshold: no feasible candidate found");
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
        if (pool[i].value(r) < pool[best].value(r)) best = i;
    return pool[best];
}

/// Minimum of rayleigh(u, s) subject to F(u, w) >= 0 with the other component w fixed.
double single_constrained(const Discretization& d, const Solver& K, double s, bool first, const Field& fixed,
                          const std::vector<Field>& starts, Field& arg) {
    const Blocks bk(d);
    const auto& sp = d.spec;
    const Eigen::VectorXd wfix = gather(d.dofs, fixed);
    PenaltyProblem prob;
    prob.eval = [&](const Eigen::VectorXd& x, bool grad, PenaltyEval& out) {
        out.n_obj = 1;
        Eigen::VectorXd g, c;
        out.obj[0] = rayleigh_block(bk, x, s, grad ? &g : nullptr);
        out.con = first ? fhat_block(bk, x, wfix, grad ? &c : nullptr, nullptr)
                        : fhat_block(bk, wfix, x, nullptr, grad ? &c : nullptr);
        if (grad) {
            out.grad_obj[0] = g;
            out.grad_con = c;
        }
    };
    prob.precondition = [&](const Eigen::VectorXd& g) -> Eigen::VectorXd { return K.solve(g); };
    prob.retract = [&](Eigen::VectorXd& x) {
        x = x.cwiseAbs();
        bk.normalize(x, s);
    };
    PenaltyOptions po;
    po.feas_tol = 1e-9;
    double best = kInf;
    for (const auto& st : starts) {
        if (st.cwiseAbs().maxCoeff() == 0.0) continue;
        const auto res = penalty_descent(prob, gather(d.dofs, st), po);
        if (res.feasible && res.value < best) {
            best = res.value;
            arg = bk.field(res.x);
        }
    }
    (void)sp;
    return best;
}

std::vector<Box> split_boxes(const Box& dom, double frac) {
    Box left = dom, right = dom;
    const double cut = dom.x[0] + frac * (dom.x[1] - dom.x[0]);
    left.x[1] = cut;
    right.x[0] = cut;
    return {left, right};
}

/// Disjoint bumps split where the scaled interval eigenvalues of both
/// components balance on ray r, in both orientations.
std::vector<std::pair<Field, Field>> balanced_splits(const FContext& ctx, double r) {
    const auto& d = ctx.disc;
    const double l1 = ctx.pairs.lambda1(), m1 = ctx.pairs.mu1();
    const double p = d.spec.p, q = d.spec.q;
    auto gap = [&](double a) { return l1 * std::pow(a, -p) - m1 / r * std::pow(1.0 - a, -q); };
    double lo = 1e-6, hi = 1.0 - 1e-6;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (gap(mid) > 0.0 ? lo : hi) = mid;
    }
    std::vector<std::pair<Field, Field>> out;
    const double a = 0.5 * (lo + hi);
    const double h = d.mesh.hx / (d.spec.domain.bounds.x[1] - d.spec.domain.bounds.x[0]);
    if (a < 2.0 * h || a > 1.0 - 2.0 * h) return out;
    auto lr = split_boxes(d.spec.domain.bounds, a);
    out.emplace_back(sine_bump(d.mesh, lr[0]), sine_bump(d.mesh, lr[1]));
    lr = split_boxes(d.spec.domain.bounds, 1.0 - a);
    out.emplace_back(sine_bump(d.mesh, lr[1]), sine_bump(d.mesh, lr[0]));
    return out;
}

}  // namespace

FScore f_score(const Discretization& d, const Field& u, const Field& v) {
    const Blocks bk(d);
    const Eigen::VectorXd ux = gather(d.dofs, u), vx = gather(d.dofs, v);
    FScore sc;
    sc.Rp = rayleigh_block(bk, ux, d.spec.p, nullptr);
    sc.Rq = rayleigh_block(bk, vx, d.spec.q, nullptr);
    sc.Fhat = fhat_block(bk, ux, vx, nullptr, nullptr);
    return sc;
}

SStar lambda_s_star(const Discretization& d, const PrincipalPairs& pp, double tol, std::uint64_t seed) {
    (void)tol;
    SStar out;
    const Solver K(laplace_stiffness(d.mesh, d.dofs));
    bool any_nonneg = false;
    for (int k : d.mesh.interior_nodes) any_nonneg = any_nonneg || d.wf(k) >= 0.0;

    std::vector<Field> starts;
    for (const auto& box : nonnegative_boxes(d.spec)) starts.push_back(sine_bump(d.mesh, box));
    for (double frac : {0.25, 0.5, 0.75})
        for (const auto& box : split_boxes(d.spec.domain.bounds, frac)) starts.push_back(sine_bump(d.mesh, box));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);

    auto run = [&](double s, bool first, const Field& fixed, const Field& principal, Field& arg) {
        std::vector<Field> st = {principal};
        st.insert(st.end(), starts.begin(), starts.end());
        for (int k = 0; k < 3; ++k) {
            Field z = principal;
            for (int i = 0; i < z.size(); ++i) z(i) *= unif(rng);
            st.push_back(z);
        }
        return single_constrained(d, K, s, first, fixed, st, arg);
    };

    if (any_nonneg) {
        out.lambda_s = run(d.spec.p, true, pp.psi.fn, pp.phi.fn, out.u_star);
        out.mu_s = run(d.spec.q, false, pp.phi.fn, pp.psi.fn, out.v_star);
    }
    out.lambda_infinite = !std::isfinite(out.lambda_s);
    out.mu_infinite = !std::isfinite(out.mu_s);
    out.r0 = out.lambda_infinite ? 0.0 : pp.mu1() / out.lambda_s;
    out.r1 = out.mu_infinite ? kInf : out.mu_s / pp.lambda1();
    return out;
}

FContext make_f_context(const ProblemSpec& spec, double tol, std::uint64_t seed) {
    FContext ctx;
    ctx.disc = discretize(spec);
    ctx.pairs = principal_pairs(ctx.disc);
    ctx.sstar = lambda_s_star(ctx.disc, ctx.pairs, tol, seed);
    return ctx;
}

std::vector<std::pair<Field, Field>> f_start_pool(const FContext& ctx, int n, std::uint64_t seed) {
    const auto& d = ctx.disc;
    const Field& phi = ctx.pairs.phi.fn;
    const Field& psi = ctx.pairs.psi.fn;
    std::vector<std::pair<Field, Field>> pool;
    auto push = [&](Field u, Field v) {
        if (static_cast<int>(pool.size()) < n) pool.emplace_back(std::move(u), std::move(v));
    };
    push(phi, psi);
    if (!ctx.sstar.lambda_infinite && ctx.sstar.u_star.size()) push(ctx.sstar.u_star, psi);
    if (!ctx.sstar.mu_infinite && ctx.sstar.v_star.size()) push(phi, ctx.sstar.v_star);
    for (double frac : {0.5, 0.25, 0.75, 0.125, 0.875}) {
        const auto lr = split_boxes(d.spec.domain.bounds, frac);
        push(sine_bump(d.mesh, lr[0]), sine_bump(d.mesh, lr[1]));
        push(sine_bump(d.mesh, lr[1]), sine_bump(d.mesh, lr[0]));
    }
    for (const auto& box : nonnegative_boxes(d.spec)) {
        const Field b = sine_bump(d.mesh, box);
        push(b, b);
    }
    for (int k = 0; static_cast<int>(pool.size()) < n; ++k) {
        std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unif(0.5, 1.5);
        Field u = phi, v = psi;
        for (int i = 0; i < u.size(); ++i) {
            u(i) *= unif(rng);
            v(i) *= unif(rng);
        }
        push(u, v);
    }
    return pool;
}

CurvePoint lambda_f_star(const FContext& ctx, double r, const FOptions& opts,
                         const std::vector<std::pair<Field, Field>>& extra) {
    if (!(r > 0.0)) throw DomainError("lambda_f_star: r must be > 0");
    const Solver K(laplace_stiffness(ctx.disc.mesh, ctx.disc.dofs));
    auto starts = f_start_pool(ctx, opts.n_starts, opts.seed);
    for (auto& st : balanced_splits(ctx, r)) starts.push_back(std::move(st));
    starts.insert(starts.end(), extra.begin(), extra.end());
    const auto cands = solve_candidates(ctx, K, r, opts, starts, 0);
    CurvePoint pt = point_from(ctx, r, best_for(cands, r), opts.tol);
    pt.starts_used = static_cast<int>(starts.size());
    return pt;
}

int flag_monotonicity(std::vector<CurvePoint>& pts, double slack) {
    int flags = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double sv = slack + 1e-12 * std::abs(pts[i - 1].value);
        const double sm = slack + 1e-12 * std::abs(pts[i - 1].mu_value);
        const bool bad_value = pts[i].value > pts[i - 1].value + sv;
        const bool bad_mu = pts[i].mu_value < pts[i - 1].mu_value - sm;
        if (bad_value || bad_mu) {
            ++flags;
            pts[i].flagged = true;
            if (!pts[i].note.empty()) pts[i].note += "; ";
            pts[i].note += bad_value ? "value increased" : "mu value decreased";
        }
    }
    return flags;
}

void check_grid(const std::vector<double>& grid, const char* who) {
    const std::string w(who);
    if (grid.empty()) throw DomainError(w + ": empty r-grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw DomainError(w + ": r-grid values must be > 0");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError(w + ": r-grid must be increasing");
    }
}

std::vector<CurvePoint> trace_curve_f(const FContext& ctx, const std::vector<double>& grid, const FOptions& opts) {
    check_grid(grid, "trace_curve_f");
    const int m = static_cast<int>(grid.size());
    const Solver K(laplace_stiffness(ctx.disc.mesh, ctx.disc.dofs));
    const auto starts = f_start_pool(ctx, opts.n_starts, opts.seed);

    std::vector<std::vector<Candidate>> per(m);
    parallel_for(m, opts.jobs, [&](int i) {
        auto local = starts;
        for (auto& st : balanced_splits(ctx, grid[i])) local.push_back(std::move(st));
        per[i] = solve_candidates(ctx, K, grid[i], opts, local, i);
    });
    std::vector<Candidate> pool;
    for (auto& v : per)
        for (auto& c : v) pool.push_back(std::move(c));

    // Polish each ray from the best pooled candidate found on another ray.
    std::vector<std::vector<Candidate>> polished(m);
    parallel_for(m, opts.jobs, [&](int i) {
        const Candidate& c = best_for(pool, grid[i]);
        if (c.origin != i) polished[i] = solve_candidates(ctx, K, grid[i], opts, {{c.u, c.v}}, i);
    });
    for (auto& v : polished)
        for (auto& c : v) pool.push_back(std::move(c));

    std::vector<CurvePoint> pts;
    for (int i = 0; i < m; ++i) {
        pts.push_back(point_from(ctx, grid[i], best_for(pool, grid[i]), opts.tol));
        pts.back().starts_used = static_cast<int>(starts.size());
    }
    flag_monotonicity(pts, 2.0 * opts.tol);
    return pts;
}

}  // namespace plapsys
