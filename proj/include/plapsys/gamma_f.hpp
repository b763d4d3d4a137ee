#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "plapsys/coupling.hpp"

namespace plapsys {

enum class CurveKind { upper_bound_on_inf, lower_bound_on_sup, picone_certificate };

std::string_view to_string(CurveKind k);

/// One point of a critical curve on the ray mu = r * lambda.
struct CurvePoint {
    double r = 0.0;
    double value = 0.0;     ///< lambda coordinate
    double mu_value = 0.0;  ///< value * r
    CurveKind kind = CurveKind::upper_bound_on_inf;
    std::optional<StatePair> minimizer;
    int starts_used = 0;
    double feasibility_gap = 0.0;
    bool flagged = false;
    std::string note;
    /// Ray-independent scores of the minimizer; the point value is a function of
    /// (a, b, r) alone, which is what makes candidates poolable across rays.
    double a = 0.0;
    double b = 0.0;
    std::string argmin_component;  ///< sup-inf points: equation whose ratio is smallest
    int excluded_nodes = 0;
};

CurvePoint make_point(double r, double value, CurveKind kind);

/// Constrained critical values of the single-component problems.
struct SStar {
    double lambda_s = kInf;
    double mu_s = kInf;
    double r0 = 0.0;  ///< mu_1 / lambda_s
    double r1 = kInf;  ///< mu_s / lambda_1
    bool lambda_infinite = false;
    bool mu_infinite = false;
    Field u_star;
    Field v_star;
};

struct FOptions {
    double tol = 1e-2;
    int n_starts = 12;
    std::uint64_t seed = 1;
    int jobs = 1;
    int max_iter = 4000;
};

/// Everything the curve computations share for one discretized problem.
struct FContext {
    Discretization disc;
    PrincipalPairs pairs;
    SStar sstar;
};

FContext make_f_context(const ProblemSpec& spec, double tol = 1e-2, std::uint64_t seed = 1);

/// lambda_s: minimum of rayleigh(u, p) over u with F(u, psi_1) >= 0, and the mirror
/// quantity mu_s; also r0 and r1.
SStar lambda_s_star(const Discretization& d, const PrincipalPairs& pp, double tol, std::uint64_t seed = 1);

/// Start pairs in a fixed prefix order: principal pair, constrained
/// single-component minimizers, disjoint-support splits, bumps on the boxes where
/// f >= 0, then seeded random perturbations.
std::vector<std::pair<Field, Field>> f_start_pool(const FContext& ctx, int n, std::uint64_t seed);

/// Upper bound on lambda_f(r) from local minimization over the first n_starts
/// pool entries (plus any `extra` starts).
CurvePoint lambda_f_star(const FContext& ctx, double r, const FOptions& opts,
                         const std::vector<std::pair<Field, Field>>& extra = {});

/// Traces the curve over an increasing grid. Minimizers found at any grid point
/// are pooled and re-polished at their best rays, so the reported values are
/// minima over a shared candidate set.
std::vector<CurvePoint> trace_curve_f(const FContext& ctx, const std::vector<double>& grid, const FOptions& opts);

/// Throws DomainError unless the grid is nonempty, positive and strictly increasing.
void check_grid(const std::vector<double>& grid, const char* who);

/// Number of adjacent pairs violating the monotonicity of value (nonincreasing)
/// or value * r (nondecreasing) by more than `slack` plus a 1e-12 relative
/// rounding allowance. Marks offending points.
int flag_monotonicity(std::vector<CurvePoint>& pts, double slack);

/// Scores of a candidate pair for the fibering threshold problem.
struct FScore {
    double Rp = 0.0;
    double Rq = 0.0;
    double Fhat = 0.0;  ///< F normalized by the masses and sup |f|
};

FScore f_score(const Discretization& d, const Field& u, const Field& v);

}  // namespace plapsys
