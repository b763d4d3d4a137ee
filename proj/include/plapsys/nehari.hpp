#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "plapsys/gamma_e.hpp"

namespace plapsys {

enum class Positivity { positive_interior, nonnegative_with_zeros, sign_changing };
std::string_view to_string(Positivity p);

struct SolveResult {
    Field u;
    Field v;
    double lambda = 0.0;
    double mu = 0.0;
    double energy = 0.0;
    double residual_u = 0.0;  ///< max weak-residual entry
    double residual_v = 0.0;
    double scale_u = 0.0;  ///< largest per-node sum of term magnitudes
    double scale_v = 0.0;
    Positivity positivity = Positivity::sign_changing;
    double P = 0.0;
    double Q = 0.0;
    double det_H = 0.0;
    double det_floor = 0.0;
    double n_lambda_mu = 0.0;  ///< smallest accepted energy over the starts tried
    int start_index = -1;
    int iterations = 0;
};

struct NoSolutionFound {
    std::string reason;
    std::optional<SolveResult> best_iterate;
    int feasible_starts = 0;
};

struct NehariOutcome {
    std::optional<SolveResult> solution;
    NoSolutionFound failure;
    int starts_tried = 0;
    bool found() const { return solution.has_value(); }
};

struct NehariOptions {
    double tol = 1e-6;
    int n_starts = 4;
    std::uint64_t seed = 1;
    int max_iter = 3000;
    /// Tried before the built-in starts, in order.
    std::vector<std::pair<Field, Field>> warm;
};

/// Minimizes the energy over the Nehari set at (lambda, mu). Each start is
/// driven down the fibering-reduced energy on the unit-mass slice, placed on
/// the Nehari set and polished by Newton's method on the full system. Accepts
/// only verified solutions with a nondegenerate fibering Hessian.
NehariOutcome minimize_nehari(const Discretization& d, const PrincipalPairs& pp, double lambda, double mu,
                              const NehariOptions& opts = {});

/// Maximum absolute weak residuals of both equations over the interior hat functions.
std::pair<double, double> verify_weak_solution(const Discretization& d, const Field& u, const Field& v, double lambda,
                                               double mu);

/// Builds the full diagnostics record of a candidate solution.
SolveResult evaluate_solution(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);

/// Verified solutions at (value - offset) * (1, r) for every traced point of the
/// fibering curve whose shifted point lies strictly above (lambda_1, mu_1).
std::vector<SolveResult> solutions_below_curve(const FContext& ctx, const std::vector<CurvePoint>& curve, double offset,
                                               const NehariOptions& opts = {});

enum class ProbeClass { no_nontrivial, no_positive_f_nonneg, beyond_certificate, inconclusive };
std::string_view to_string(ProbeClass c);

/// Precomputed quantities the nonexistence probe compares against.
struct ProbeContext {
    double lambda1 = 0.0;
    double mu1 = 0.0;
    WeightClass weight_class = WeightClass::zero;
    bool has_certificate = false;
    double C1 = kInf;  ///< smallest first-equation certificate constant
    double C2 = kInf;
};

ProbeContext make_probe_context(const EContext& ctx);

/// Sign tests and certificate comparisons only; never iterates.
ProbeClass nonexistence_probe(double lambda, double mu, const ProbeContext& pc);

}  // namespace plapsys
