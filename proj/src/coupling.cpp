#include "plapsys/coupling.hpp"

#include <cmath>

#include <Eigen/LU>

#include "plapsys/errors.hpp"

namespace plapsys {

namespace {

double spow(double x, double e) {
    if (x == 0.0) return 0.0;
    const double m = std::pow(std::abs(x), e);
    return x > 0.0 ? m : -m;
}

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

double superhomogeneity(const ProblemSpec& s) { return s.alpha / s.p + s.beta / s.q - 1.0; }

}  // namespace

Discretization discretize(const ProblemSpec& spec) {
    Discretization d;
    d.spec = spec;
    d.regime = validate_spec(spec);
    d.mesh = build_mesh(spec.domain, spec.resolution);
    d.dofs = interior_dofs(d.mesh);
    d.wf = weighted_lumped_mass(d.mesh, spec.weight);
    d.f_sup = element_weight(d.mesh, spec.weight).cwiseAbs().maxCoeff();
    return d;
}

PrincipalPairs principal_pairs(const Discretization& d, double tol, std::uint64_t seed) {
    PrincipalPairs pp;
    pp.phi = first_eigenpair(d.mesh, d.spec.p, tol, seed, &d.dofs);
    pp.psi = d.spec.q == d.spec.p ? pp.phi : first_eigenpair(d.mesh, d.spec.q, tol, seed, &d.dofs);
    return pp;
}

Discretization with_couplings(const Discretization& d, double c1, double c2) {
    Discretization out = d;
    out.spec.c1 = c1;
    out.spec.c2 = c2;
    out.regime = validate_spec(out.spec);
    return out;
}

FPairing F_pairing(const Discretization& d, const Field& u, const Field& v) {
    const double a = d.spec.alpha, b = d.spec.beta;
    const double val = (d.wf.array() * u.array().abs().pow(a) * v.array().abs().pow(b)).sum();
    return {val, sign_of(val)};
}

StatePair make_state(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    const auto& s = d.spec;
    StatePair st{u, v, lambda, mu};
    st.A = grad_energy(d.mesh, u, s.p) - lambda * lp_mass(d.mesh, u, s.p);
    st.B = grad_energy(d.mesh, v, s.q) - mu * lp_mass(d.mesh, v, s.q);
    st.F = F_pairing(d, u, v).value;
    return st;
}

double energy(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    const auto& s = d.spec;
    const auto st = make_state(d, u, v, lambda, mu);
    return s.alpha / (s.c1 * s.p) * st.A + s.beta / (s.c2 * s.q) * st.B - st.F;
}

std::pair<double, double> nehari_PQ(const Discretization& d, const Field& u, const Field& v, double lambda,
                                    double mu) {
    const auto& s = d.spec;
    const auto st = make_state(d, u, v, lambda, mu);
    return {s.alpha / s.c1 * st.A - s.alpha * st.F, s.beta / s.c2 * st.B - s.beta * st.F};
}

NehariDiagnostics hessian_det(const Discretization& d, const StatePair& st) {
    const auto& s = d.spec;
    const double a = s.alpha, b = s.beta;
    NehariDiagnostics n;
    n.P = a / s.c1 * st.A - a * st.F;
    n.Q = b / s.c2 * st.B - b * st.F;
    n.H(0, 0) = s.p * a / s.c1 * st.A - a * a * st.F;
    n.H(0, 1) = n.H(1, 0) = -a * b * st.F;
    n.H(1, 1) = s.q * b / s.c2 * st.B - b * b * st.F;
    n.det_H = n.H.determinant();
    const double s11 = std::abs(s.p * a / s.c1 * st.A) + std::abs(a * a * st.F);
    const double s22 = std::abs(s.q * b / s.c2 * st.B) + std::abs(b * b * st.F);
    n.scale = std::max({s11, s22, std::abs(a * b * st.F)});
    return n;
}

NehariDiagnostics hessian_det(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    return hessian_det(d, make_state(d, u, v, lambda, mu));
}

FiberResult fibering_project(const ProblemSpec& spec, double A, double B, double F) {
    using S = FiberResult::Status;
    FiberResult r;
    const double p = spec.p, q = spec.q, a = spec.alpha, b = spec.beta;
    const double dd = superhomogeneity(spec);
    if (dd == 0.0) {
        r.status = S::degenerate;
        r.reason = "alpha/p + beta/q = 1: fibering amplitudes undefined";
        return r;
    }
    if (F == 0.0) {
        if (A == 0.0 && B == 0.0) {
            r.status = S::projected;
            r.t = r.s = 1.0;
            r.reason = "F = A = B = 0: every amplitude is admissible";
            return r;
        }
        r.status = S::degenerate;
        r.reason = "degenerate fibering: F = 0 with A or B nonzero";
        return r;
    }
    const int sf = sign_of(F);
    if (sign_of(A) != sf || sign_of(B) != sf) {
        r.status = S::infeasible;
        r.reason = std::string("sign certificate: F ") + (sf > 0 ? "> 0" : "< 0") + " but A " +
                   (A > 0 ? "> 0" : A < 0 ? "< 0" : "= 0") + ", B " + (B > 0 ? "> 0" : B < 0 ? "< 0" : "= 0");
        return r;
    }

    // t^p A = c1 t^a s^b F and s^q B = c2 t^a s^b F, in x = log t, y = log s.
    Eigen::Matrix2d M;
    M << p - a, -b, -a, q - b;
    const Eigen::Vector2d rhs(std::log(spec.c1 * F / A), std::log(spec.c2 * F / B));
    Eigen::Vector2d z = Eigen::Vector2d::Zero();
    const auto lu = M.partialPivLu();
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        const Eigen::Vector2d g = M * z - rhs;
        if (g.cwiseAbs().maxCoeff() <= 1e-14 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
            converged = true;
            break;
        }
        Eigen::Vector2d step = -lu.solve(g);
        const double big = step.cwiseAbs().maxCoeff();
        if (big > 50.0) step *= 50.0 / big;
        z += step;
    }
    if (!converged) throw ConvergenceError("fibering_project: Newton did not converge", z);
    r.t = std::exp(z(0));
    r.s = std::exp(z(1));
    if (!std::isfinite(r.t) || !std::isfinite(r.s) || r.t == 0.0 || r.s == 0.0) {
        r.status = S::degenerate;
        r.reason = "degenerate fibering: amplitudes out of floating-point range";
        return r;
    }
    r.status = S::projected;
    r.branch = sf;
    return r;
}

FiberResult fibering_project(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    if (u.cwiseAbs().maxCoeff() == 0.0 || v.cwiseAbs().maxCoeff() == 0.0)
        throw DomainError("fibering_project: both components must be nonzero");
    const auto st = make_state(d, u, v, lambda, mu);
    return fibering_project(d.spec, st.A, st.B, st.F);
}

std::pair<double, double> scale_solution(double c1, double c2, double d1, double d2, const ProblemSpec& spec) {
    const double p = spec.p, q = spec.q, a = spec.alpha, b = spec.beta;
    const double dd = superhomogeneity(spec);
    if (dd == 0.0) throw DomainError("scale_solution: scaling undefined when alpha/p + beta/q = 1");
    if (!(c1 > 0 && c2 > 0 && d1 > 0 && d2 > 0)) throw DomainError("scale_solution: couplings must be positive");
    const double k = p * q * dd;
    const double l1 = std::log(c1 / d1), l2 = std::log(c2 / d2);
    const double t = std::exp(((q - b) * l1 + b * l2) / k);
    const double s = std::exp((a * l1 + (p - a) * l2) / k);
    return {t, s};
}

std::pair<double, double> ratio_bounds(double a, double b, double c, double d) {
    if (!(c > 0.0) || !(d > 0.0)) throw DomainError("ratio_bounds: denominators must be positive");
    auto down = [](double num, double den) {
        const double q = num / den;
        return std::fma(q, den, -num) > 0.0 ? std::nextafter(q, -kInf) : q;
    };
    auto up = [](double num, double den) {
        const double q = num / den;
        return std::fma(q, den, -num) < 0.0 ? std::nextafter(q, kInf) : q;
    };
    return {std::min(down(a, c), down(b, d)), std::max(up(a, c), up(b, d))};
}

Eigen::VectorXd dF_du(const Discretization& d, const Field& u, const Field& v) {
    const double a = d.spec.alpha, b = d.spec.beta;
    Eigen::VectorXd g(u.size());
    for (int i = 0; i < u.size(); ++i) g(i) = a * d.wf(i) * spow(u(i), a - 1.0) * std::pow(std::abs(v(i)), b);
    return g;
}

Eigen::VectorXd dF_dv(const Discretization& d, const Field& u, const Field& v) {
    const double a = d.spec.alpha, b = d.spec.beta;
    Eigen::VectorXd g(u.size());
    for (int i = 0; i < u.size(); ++i) g(i) = b * d.wf(i) * std::pow(std::abs(u(i)), a) * spow(v(i), b - 1.0);
    return g;
}

Residuals system_residuals(const Discretization& d, const Field& u, const Field& v, double lambda, double mu) {
    const auto& s = d.spec;
    const auto& m = d.mesh;
    const Field gu = p_laplace_action(m, u, s.p);
    const Field gv = p_laplace_action(m, v, s.q);
    const int n = static_cast<int>(m.interior_nodes.size());
    Residuals r{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        const int k = m.interior_nodes[i];
        const double wk = m.lumped_mass(k);
        const double mu_term = lambda * wk * spow(u(k), s.p - 1.0);
        const double cu_term = s.c1 * d.wf(k) * spow(u(k), s.alpha - 1.0) * std::pow(std::abs(v(k)), s.beta);
        r.ru(i) = gu(k) - mu_term - cu_term;
        r.scale_u(i) = std::abs(gu(k)) + std::abs(mu_term) + std::abs(cu_term);
        const double mv_term = mu * wk * spow(v(k), s.q - 1.0);
        const double cv_term = s.c2 * d.wf(k) * std::pow(std::abs(u(k)), s.alpha) * spow(v(k), s.beta - 1.0);
        r.rv(i) = gv(k) - mv_term - cv_term;
        r.scale_v(i) = std::abs(gv(k)) + std::abs(mv_term) + std::abs(cv_term);
    }
    return r;
}

}  // namespace plapsys
