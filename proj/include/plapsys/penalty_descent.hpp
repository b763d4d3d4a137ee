#pragma once

#include <array>
#include <functional>

#include <Eigen/Core>

namespace plapsys {

/// Values and gradients of a nonsmooth model  max(obj_0, obj_1) subject to con >= 0.
/// With a single objective piece, obj_1 is ignored.
struct PenaltyEval {
    int n_obj = 1;
    std::array<double, 2> obj{0.0, 0.0};
    std::array<Eigen::VectorXd, 2> grad_obj;
    double con = 0.0;
    Eigen::VectorXd grad_con;

    double max_obj() const { return n_obj == 1 ? obj[0] : std::max(obj[0], obj[1]); }
};

struct PenaltyProblem {
    /// Fills `out`; gradients only when `grad` is true.
    std::function<void(const Eigen::VectorXd& x, bool grad, PenaltyEval& out)> eval;
    /// Applies the inverse of the metric (a preconditioner solve).
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> precondition;
    /// Maps an iterate to an equivalent representative. Must not increase the merit value.
    std::function<void(Eigen::VectorXd& x)> retract;
};

struct PenaltyOptions {
    double rho = 0.0;  ///< 0 selects 10 * max(1, |objective|) at the start point
    double eps0 = 1e-2;
    double eps_min = 1e-10;
    double feas_tol = 1e-9;
    double step_max = 1.0;
    int max_iter = 4000;
    int rho_rounds = 4;
    /// Stop a round when the merit value drops by less than stall_rel * |objective|
    /// over the last stall_window iterations.
    int stall_window = 50;
    double stall_rel = 1e-11;
};

struct PenaltyResult {
    Eigen::VectorXd x;
    double value = 0.0;  ///< max objective at x
    double con = 0.0;
    bool feasible = false;  ///< con >= -feas_tol
    int iterations = 0;
    double rho = 0.0;
};

/// Exact l1-penalty descent on  max(obj) + rho * max(0, -con). Each step takes the
/// minimum-norm element of the epsilon-subdifferential (a box QP over the two
/// convex-combination weights) in the preconditioned metric, then an Armijo
/// backtracking search. The penalty weight grows tenfold while the final point is
/// infeasible. Returns the best feasible iterate seen, or the last one if none.
PenaltyResult penalty_descent(const PenaltyProblem& prob, Eigen::VectorXd x0, const PenaltyOptions& opts);

}  // namespace plapsys
