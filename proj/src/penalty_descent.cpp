#include "plapsys/penalty_descent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace plapsys {

namespace {

struct BoxQP {
    // q(a, b) = c + 2 a g1 + 2 b g2 + a^2 h11 + 2 a b h12 + b^2 h22 on [alo, ahi] x [blo, bhi]
    double c, g1, g2, h11, h12, h22;
    double alo, ahi, blo, bhi;

    double value(double a, double b) const {
        return c + 2 * a * g1 + 2 * b * g2 + a * a * h11 + 2 * a * b * h12 + b * b * h22;
    }

    std::pair<double, double> solve() const {
        std::vector<std::pair<double, double>> cand;
        auto clampa = [&](double a) { return std::clamp(a, alo, ahi); };
        auto clampb = [&](double b) { return std::clamp(b, blo, bhi); };
        const double det = h11 * h22 - h12 * h12;
        if (det > 0.0) {
            const double a = (-g1 * h22 + g2 * h12) / det;
            const double b = (-g2 * h11 + g1 * h12) / det;
            if (a >= alo && a <= ahi && b >= blo && b <= bhi) cand.emplace_back(a, b);
        }
        for (double a : {alo, ahi}) {
            cand.emplace_back(a, h22 > 0.0 ? clampb(-(g2 + a * h12) / h22) : blo);
            cand.emplace_back(a, blo);
            cand.emplace_back(a, bhi);
        }
        for (double b : {blo, bhi}) cand.emplace_back(h11 > 0.0 ? clampa(-(g1 + b * h12) / h11) : alo, b);
        auto best = cand.front();
        double bv = value(best.first, best.second);
        for (const auto& ab : cand) {
            const double v = value(ab.first, ab.second);
            if (v < bv) {
                bv = v;
                best = ab;
            }
        }
        return best;
    }
};

}  // namespace

PenaltyResult penalty_descent(const PenaltyProblem& prob, Eigen::VectorXd x, const PenaltyOptions& opts) {
    PenaltyEval ev;
    prob.retract(x);
    prob.eval(x, false, ev);
    double rho = opts.rho > 0.0 ? opts.rho : 10.0 * std::max(1.0, std::abs(ev.max_obj()));

    PenaltyResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool have_best = false;
    auto consider = [&](const Eigen::VectorXd& y, const PenaltyEval& e) {
        if (e.con >= -opts.feas_tol && e.max_obj() < best.value) {
            best.x = y;
            best.value = e.max_obj();
            best.con = e.con;
            have_best = true;
        }
    };
    consider(x, ev);

    int total_iter = 0;
    for (int round = 0; round < opts.rho_rounds; ++round, rho *= 10.0) {
        auto merit = [&](const PenaltyEval& e) { return e.max_obj() + rho * std::max(0.0, -e.con); };
        double eps = opts.eps0;
        double step = 0.25 * opts.step_max;
        std::vector<double> trail;
        for (int it = 0; it < opts.max_iter; ++it, ++total_iter) {
            prob.eval(x, true, ev);
            consider(x, ev);
            const double phi = merit(ev);
            const double S = std::max(1.0, std::abs(ev.max_obj()));
            trail.push_back(phi);
            const int w = opts.stall_window;
            if (it >= w && trail[it - w] - phi <= opts.stall_rel * S) break;

            // Objective pieces: gb + theta (ga - gb), theta in [tlo, thi].
            const Eigen::VectorXd& ga = ev.grad_obj[0];
            Eigen::VectorXd gb = ga;
            double tlo = 1.0, thi = 1.0;
            if (ev.n_obj == 2) {
                gb = ev.grad_obj[1];
                if (std::abs(ev.obj[0] - ev.obj[1]) <= eps * S) {
                    tlo = 0.0;
                } else if (ev.obj[1] > ev.obj[0]) {
                    thi = tlo = 0.0;
                }
            }
            double slo = 0.0, shi = 0.0;
            if (ev.con < -eps) slo = shi = 1.0;
            else if (ev.con <= eps) shi = 1.0;
            const Eigen::VectorXd h = -rho * ev.grad_con;

            const Eigen::VectorXd e1 = ga - gb;
            const Eigen::VectorXd Pb = prob.precondition(gb);
            const Eigen::VectorXd Pe1 = prob.precondition(e1);
            const Eigen::VectorXd Ph = prob.precondition(h);
            BoxQP qp{gb.dot(Pb), e1.dot(Pb), h.dot(Pb), e1.dot(Pe1), e1.dot(Ph), h.dot(Ph), tlo, thi, slo, shi};
            const auto [theta, sigma] = qp.solve();
            const Eigen::VectorXd dir = -(Pb + theta * Pe1 + sigma * Ph);
            const double eta = std::max(0.0, qp.value(theta, sigma));

            bool moved = false;
            if (eta > 1e-28 * S * S) {
                double t = std::min(2.0 * step, opts.step_max);
                for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
                    Eigen::VectorXd trial = x + t * dir;
                    PenaltyEval et;
                    prob.eval(trial, false, et);
                    if (!std::isfinite(et.max_obj())) continue;
                    if (merit(et) <= phi - 1e-4 * t * eta) {
                        prob.retract(trial);
                        x = trial;
                        step = t;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved) {
                eps *= 0.1;
                if (eps < opts.eps_min) break;
            }
        }
        prob.eval(x, false, ev);
        consider(x, ev);
        if (ev.con >= -opts.feas_tol) break;
    }

    best.iterations = total_iter;
    best.rho = rho;
    if (have_best) {
        best.feasible = true;
        return best;
    }
    best.x = x;
    best.value = ev.max_obj();
    best.con = ev.con;
    best.feasible = false;
    return best;
}

}  // namespace plapsys
