#include "plapsys/nehari.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "plapsys/errors.hpp"

namespace plapsys {

std::string_view to_string(Positivity p) {
    switch (p) {
        case Positivity::positive_interior: return "positive-interior";
        case Positivity::nonnegative_with_zeros: return "nonnegative-with-zeros";
        case Positivity::sign_changing: return "sign-changing";
    }
    return "?";
}

std::string_view to_string(ProbeClass c) {
    switch (c) {
        case ProbeClass::no_nontrivial: return "no-nontrivial";
        case ProbeClass::no_positive_f_nonneg: return "no-positive-f-nonneg";
        case ProbeClass::beyond_certificate: return "beyond-certificate";
        case ProbeClass::inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

using Sparse = Eigen::SparseMatrix<double>;

double spow(double x, double e) {
    if (x == 0.0) return 0.0;
    const double m = std::pow(std::abs(x), e);
    return x > 0.0 ? m : -m;
}

Positivity classify(const Discretization& d, const Field& u, const Field& v) {
    double lo = kInf;
    for (int k : d.mesh.interior_nodes) lo = std::min({lo, u(k), v(k)});
    if (lo > 0.0) return Positivity::positive_interior;
    if (lo == 0.0) return Positivity::nonnegative_with_zeros;
    return Positivity::sign_changing;
}

/// Fibering-reduced energy on the unit-mass slice. Up to a monotone map the
/// energy at the projected point is exp(branch * psi / d), so minimizing psi
/// minimizes the energy within one sign branch.
struct Reduced {
    const Discretization& d;
    double lambda, mu;
    int branch;
    Eigen::VectorXd w, wf;

    Reduced(const Discretization& disc, double l, double m, int br)
        : d(disc), lambda(l), mu(m), branch(br), w(gather(disc.dofs, disc.mesh.lumped_mass)),
          wf(gather(disc.dofs, disc.wf)) {}

    /// NaN when the trial left the branch.
    double value(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
        const auto& s = d.spec;
        const int n = d.dofs.size();
        const Field u = scatter(d.dofs, x.head(n), d.num_nodes());
        const Field v = scatter(d.dofs, x.tail(n), d.num_nodes());
        const auto st = make_state(d, u, v, lambda, mu);
        const int sa = (st.A > 0) - (st.A < 0), sb = (st.B > 0) - (st.B < 0), sf = (st.F > 0) - (st.F < 0);
        if (sa != branch || sb != branch || sf != branch) return std::nan("");
        const double L = s.alpha / s.p * std::log(std::abs(st.A)) + s.beta / s.q * std::log(std::abs(st.B)) -
                         std::log(std::abs(st.F));
        if (grad) {
            const Eigen::ArrayXd ux = x.head(n).array().abs(), vx = x.tail(n).array().abs();
            const Eigen::VectorXd gp = gather(d.dofs, p_laplace_action(d.mesh, u, s.p));
            const Eigen::VectorXd gq = gather(d.dofs, p_laplace_action(d.mesh, v, s.q));
            const Eigen::ArrayXd cu = wf.array() * ux.pow(s.alpha - 1.0) * vx.pow(s.beta);
            const Eigen::ArrayXd cv = wf.array() * ux.pow(s.alpha) * vx.pow(s.beta - 1.0);
            grad->resize(2 * n);
            grad->head(n) =
                s.alpha * ((gp.array() - lambda * w.array() * ux.pow(s.p - 1.0)) / st.A - cu / st.F).matrix();
            grad->tail(n) = s.beta * ((gq.array() - mu * w.array() * vx.pow(s.q - 1.0)) / st.B - cv / st.F).matrix();
            *grad *= branch;
        }
        return branch * L;
    }

    void normalize(Eigen::VectorXd& x) const {
        const auto& s = d.spec;
        const int n = d.dofs.size();
        x = x.cwiseAbs();
        const double mu_ = (w.array() * x.head(n).array().pow(s.p)).sum();
        const double mv = (w.array() * x.tail(n).array().pow(s.q)).sum();
        x.head(n) /= std::pow(mu_, 1.0 / s.p);
        x.tail(n) /= std::pow(mv, 1.0 / s.q);
    }
};

/// Preconditioned descent on the reduced energy; returns the iteration count.
int reduced_descent(const Reduced& red, const Eigen::SimplicialLDLT<Sparse>& K, Eigen::VectorXd& x, int max_iter) {
    const int n = red.d.dofs.size();
    red.normalize(x);
    Eigen::VectorXd g, dir(2 * n);
    double val = red.value(x, &g);
    double step = 1.0;
    int quiet = 0, it = 0;
    for (; it < max_iter; ++it) {
        dir.head(n) = -K.solve(g.head(n));
        dir.tail(n) = -K.solve(g.tail(n));
        const double slope = g.dot(dir);
        if (!(slope < 0.0)) break;
        const double cap = 0.5 * x.cwiseAbs().maxCoeff() / std::max(dir.cwiseAbs().maxCoeff(), 1e-300);
        double t = std::min(2.0 * step, cap);
        bool moved = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            Eigen::VectorXd trial = x + t * dir;
            red.normalize(trial);
            const double tv = red.value(trial, nullptr);
            if (std::isfinite(tv) && tv <= val + 1e-4 * t * slope) {
                const double drop = val - tv;
                x = trial;
                step = t;
                val = red.value(x, &g);
                moved = true;
                quiet = drop <= 1e-13 * (1.0 + std::abs(val)) ? quiet + 1 : 0;
                break;
            }
        }
        if (!moved || quiet >= 5) break;
    }
    return it;
}

/// Residual of both equations on the free unknowns, u block first.
Eigen::VectorXd full_residual(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    const auto r = system_residuals(d, u, v, lambda, mu);
    Eigen::VectorXd out(2 * r.ru.size());
    out << r.ru, r.rv;
    return out;
}

Sparse jacobian(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    const auto& s = d.spec;
    const auto& m = d.mesh;
    const int n = d.dofs.size();
    const Sparse Tp = tangent_stiffness(m, u, s.p, d.dofs, 1e-12);
    const Sparse Tq = tangent_stiffness(m, v, s.q, d.dofs, 1e-12);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(Tp.nonZeros() + Tq.nonZeros() + 4 * n);
    for (int k = 0; k < Tp.outerSize(); ++k)
        for (Sparse::InnerIterator it(Tp, k); it; ++it) trips.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < Tq.outerSize(); ++k)
        for (Sparse::InnerIterator it(Tq, k); it; ++it) trips.emplace_back(n + it.row(), n + it.col(), it.value());
    for (int i = 0; i < n; ++i) {
        const int k = d.dofs.free[i];
        const double w = m.lumped_mass(k), f = d.wf(k), U = u(k), V = v(k);
        double juu = -lambda * (s.p - 1.0) * w * std::pow(std::abs(U), s.p - 2.0);
        if (s.alpha != 1.0) juu -= s.c1 * (s.alpha - 1.0) * f * std::pow(std::abs(U), s.alpha - 2.0) * std::pow(std::abs(V), s.beta);
        double jvv = -mu * (s.q - 1.0) * w * std::pow(std::abs(V), s.q - 2.0);
        if (s.beta != 1.0) jvv -= s.c2 * (s.beta - 1.0) * f * std::pow(std::abs(U), s.alpha) * std::pow(std::abs(V), s.beta - 2.0);
        const double cross = f * spow(U, s.alpha - 1.0) * spow(V, s.beta - 1.0);
        trips.emplace_back(i, i, juu);
        trips.emplace_back(n + i, n + i, jvv);
        trips.emplace_back(i, n + i, -s.c1 * s.beta * cross);
        trips.emplace_back(n + i, i, -s.c2 * s.alpha * cross);
    }
    Sparse J(2 * n, 2 * n);
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

/// Damped Newton on the full system; returns false when it stalls.
bool newton_polish(const Discretization& d, Field& u, Field& v, double lambda, double mu, int& iters) {
    const int n = d.dofs.size();
    Eigen::VectorXd R = full_residual(d, u, v, lambda, mu);
    auto scale = [&](const Field& a, const Field& b) {
        const auto r = system_residuals(d, a, b, lambda, mu);
        return std::max(r.scale_u.maxCoeff(), r.scale_v.maxCoeff());
    };
    for (int it = 0; it < 60; ++it, ++iters) {
        const double S = scale(u, v);
        if (R.cwiseAbs().maxCoeff() <= 1e-14 * S) return true;
        Eigen::SparseLU<Sparse> lu;
        lu.compute(jacobian(d, u, v, lambda, mu));
        if (lu.info() != Eigen::Success) return false;
        const Eigen::VectorXd dx = lu.solve(-R);
        if (lu.info() != Eigen::Success || !dx.allFinite()) return false;
        const double r0 = R.norm();
        bool moved = false;
        for (double t = 1.0; t > 1e-6; t *= 0.5) {
            Field u1 = u, v1 = v;
            for (int i = 0; i < n; ++i) {
                u1(d.dofs.free[i]) += t * dx(i);
                v1(d.dofs.free[i]) += t * dx(n + i);
            }
            const Eigen::VectorXd R1 = full_residual(d, u1, v1, lambda, mu);
            if (R1.allFinite() && R1.norm() < (1.0 - 1e-4 * t) * r0) {
                u = std::move(u1);
                v = std::move(v1);
                R = R1;
                moved = true;
                break;
            }
        }
        if (!moved) return R.cwiseAbs().maxCoeff() <= 1e-12 * S;
    }
    return R.cwiseAbs().maxCoeff() <= 1e-12 * scale(u, v);
}

std::string acceptance_failure(const SolveResult& r, double tol) {
    if (r.positivity == Positivity::sign_changing) return "iterate changed sign";
    if (r.residual_u > tol * r.scale_u || r.residual_v > tol * r.scale_v) return "weak residual above tolerance";
    if (!(std::abs(r.det_H) > r.det_floor)) return "fibering degeneracy: det H below floor";
    return {};
}

}  // namespace

std::pair<double, double> verify_weak_solution(const Discretization& d, const Field& u, const Field& v, double lambda,
                                               double mu) {
    const auto r = system_residuals(d, u, v, lambda, mu);
    return {r.ru.size() ? r.ru.cwiseAbs().maxCoeff() : 0.0, r.rv.size() ? r.rv.cwiseAbs().maxCoeff() : 0.0};
}

SolveResult evaluate_solution(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    SolveResult r;
    r.u = u;
    r.v = v;
    r.lambda = lambda;
    r.mu = mu;
    r.energy = energy(d, u, v, lambda, mu);
    const auto res = system_residuals(d, u, v, lambda, mu);
    r.residual_u = res.ru.cwiseAbs().maxCoeff();
    r.residual_v = res.rv.cwiseAbs().maxCoeff();
    r.scale_u = res.scale_u.maxCoeff();
    r.scale_v = res.scale_v.maxCoeff();
    r.positivity = classify(d, u, v);
    const auto diag = hessian_det(d, u, v, lambda, mu);
    r.P = diag.P;
    r.Q = diag.Q;
    r.det_H = diag.det_H;
    r.det_floor = 1e-8 * diag.scale * diag.scale;
    r.n_lambda_mu = r.energy;
    return r;
}

NehariOutcome minimize_nehari(const Discretization& d, const PrincipalPairs& pp, double lambda, double mu,
                              const NehariOptions& opts) {
    if (!std::isfinite(lambda) || !std::isfinite(mu)) throw DomainError("minimize_nehari: lambda and mu must be finite");
    if (!d.regime.sob_ok) throw DomainError("minimize_nehari: superhomogeneity condition fails");

    std::vector<std::pair<Field, Field>> starts = opts.warm;
    starts.emplace_back(pp.phi.fn, pp.psi.fn);
    for (int k = 1; k < opts.n_starts; ++k) {
        std::mt19937_64 rng(opts.seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unif(-0.5, 0.5);
        Field u = pp.phi.fn, v = pp.psi.fn;
        for (int i = 0; i < u.size(); ++i) {
            u(i) *= std::exp(unif(rng));
            v(i) *= std::exp(unif(rng));
        }
        starts.emplace_back(std::move(u), std::move(v));
    }

    const Eigen::SimplicialLDLT<Sparse> K(laplace_stiffness(d.mesh, d.dofs));
    const int n = d.dofs.size();
    NehariOutcome out;
    std::string first_infeasible;
    double best_gap = kInf;

    for (std::size_t si = 0; si < starts.size(); ++si) {
        ++out.starts_tried;
        const Field u0 = starts[si].first.cwiseAbs(), v0 = starts[si].second.cwiseAbs();
        if (u0.maxCoeff() == 0.0 || v0.maxCoeff() == 0.0) {
            if (first_infeasible.empty()) first_infeasible = "semi-trivial start rejected";
            continue;
        }
        const auto fib0 = fibering_project(d, u0, v0, lambda, mu);
        if (!fib0.ok() || fib0.branch == 0) {
            if (first_infeasible.empty()) first_infeasible = fib0.reason;
            continue;
        }
        ++out.failure.feasible_starts;

        Eigen::VectorXd x(2 * n);
        x << gather(d.dofs, u0), gather(d.dofs, v0);
        const Reduced red(d, lambda, mu, fib0.branch);
        int iters = reduced_descent(red, K, x, opts.max_iter);
        Field u = scatter(d.dofs, x.head(n), d.num_nodes());
        Field v = scatter(d.dofs, x.tail(n), d.num_nodes());
        const auto fib = fibering_project(d, u, v, lambda, mu);
        if (!fib.ok()) continue;
        u *= fib.t;
        v *= fib.s;
        newton_polish(d, u, v, lambda, mu, iters);

        SolveResult cand = evaluate_solution(d, u, v, lambda, mu);
        cand.start_index = static_cast<int>(si);
        cand.iterations = iters;
        const std::string why = acceptance_failure(cand, opts.tol);
        if (why.empty()) {
            if (!out.solution || cand.energy < out.solution->energy) out.solution = cand;
            continue;
        }
        const double gap = std::max(cand.residual_u / std::max(cand.scale_u, 1e-300),
                                    cand.residual_v / std::max(cand.scale_v, 1e-300));
        if (gap < best_gap) {
            best_gap = gap;
            out.failure.best_iterate = cand;
            out.failure.reason = why;
        }
    }

    if (out.solution) {
        out.solution->n_lambda_mu = out.solution->energy;
        return out;
    }
    if (out.failure.feasible_starts == 0)
        out.failure.reason = "Nehari set empty at all probes" + (first_infeasible.empty() ? "" : " (" + first_infeasible + ")");
    else if (out.failure.reason.empty())
        out.failure.reason = "no start reached the Nehari set after descent";
    return out;
}

std::vector<SolveResult> solutions_below_curve(const FContext& ctx, const std::vector<CurvePoint>& curve, double offset,
                                               const NehariOptions& opts) {
    std::vector<SolveResult> out;
    for (const auto& pt : curve) {
        const double lambda = pt.value - offset, mu = lambda * pt.r;
        if (!(lambda > ctx.pairs.lambda1()) || !(mu > ctx.pairs.mu1())) continue;
        auto res = minimize_nehari(ctx.disc, ctx.pairs, lambda, mu, opts);
        if (res.found()) out.push_back(std::move(*res.solution));
    }
    return out;
}

ProbeContext make_probe_context(const EContext& ctx) {
    ProbeContext pc;
    pc.lambda1 = ctx.f.pairs.lambda1();
    pc.mu1 = ctx.f.pairs.mu1();
    pc.weight_class = ctx.f.disc.regime.weight_class;
    pc.has_certificate = !ctx.picone.empty();
    for (const auto& c : ctx.picone) {
        pc.C1 = std::min(pc.C1, c.C1);
        pc.C2 = std::min(pc.C2, c.C2);
    }
    return pc;
}

ProbeClass nonexistence_probe(double lambda, double mu, const ProbeContext& pc) {
    const bool nonpositive = pc.weight_class == WeightClass::nonpositive || pc.weight_class == WeightClass::zero;
    if (nonpositive && !(lambda >= pc.lambda1 && mu >= pc.mu1)) return ProbeClass::no_nontrivial;
    if (pc.weight_class == WeightClass::nonnegative && !(lambda < pc.lambda1 && mu < pc.mu1))
        return ProbeClass::no_positive_f_nonneg;
    if (pc.weight_class == WeightClass::zero && (lambda > pc.lambda1 || mu > pc.mu1))
        return ProbeClass::no_positive_f_nonneg;
    if (pc.has_certificate && (lambda > pc.C1 || mu > pc.C2)) return ProbeClass::beyond_certificate;
    return ProbeClass::inconclusive;
}

}  // namespace plapsys
