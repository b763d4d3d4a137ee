#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plapsys/gamma_f.hpp"

namespace plapsys {

enum class Component { first_equation, second_equation };
std::string_view to_string(Component c);

/// Infimum of the extended quotient over nonnegative nodal test pairs.
struct InnerInfResult {
    double value = kInf;
    int argmin_node = -1;  ///< mesh node index
    Component argmin_component = Component::first_equation;
    /// Row i: (first-equation ratio, second-equation ratio / r) at interior node i;
    /// +inf where the denominator underflows.
    Eigen::MatrixX2d ratio_table;
    int excluded_nodes = 0;
};

/// Ratios below this denominator are excluded and counted.
inline constexpr double kDenominatorFloor = 1e-300;

/// Throws DomainError ("outside positive cone") unless u, v > 0 at every interior node.
InnerInfResult inner_inf(const Discretization& d, const Field& u, const Field& v, double r);

/// Amplitude-free scores of a positive shape: a is the best first-equation
/// ratio minimum over the coupling amplitude, b the same for the second
/// equation (not divided by r). The lower bound at ray r is min(a, b / r).
struct ShapeScore {
    double a = -kInf;
    double b = -kInf;
    double z1 = 1.0;  ///< effective coupling amplitude attaining a
    double z2 = 1.0;
    bool unbounded = false;  ///< a or b grows without limit in the amplitude
    bool window_edge = false;
};

/// Window of admissible effective amplitudes, in natural-log units around 1.
inline constexpr double kAmplitudeWindow = 30.0;

ShapeScore shape_score(const Discretization& d, const Field& u, const Field& v);

/// Amplitudes (t, s) for which (t u, s v) realizes the effective couplings (z1, z2).
std::pair<double, double> amplitudes_for(const ProblemSpec& spec, double z1, double z2);

struct EOptions {
    double tol = 1e-2;
    int n_starts = 6;
    int sweeps = 12;  ///< ascent budget per start
    std::uint64_t seed = 1;
    int jobs = 1;
};

struct PiconeConstants {
    Box box;
    double C1 = kInf;  ///< rayleigh of the p-eigenfunction of the box
    double C2 = kInf;  ///< same for q
};

/// Shared state of the sup-inf computations for one problem.
struct EContext {
    FContext f;
    std::vector<PiconeConstants> picone;  ///< one per certificate box
};

EContext make_e_context(const FContext& f);

/// Certificate constants on one box, from the first eigenfunctions of the box.
PiconeConstants picone_constants(const Discretization& d, const Box& box, double tol = 1e-12);

/// min over the certificate boxes of min{C1, C2 / r}. Throws DomainError
/// ("no certificate region") when f < 0 almost everywhere.
CurvePoint picone_upper(const EContext& ctx, double r);
CurvePoint picone_upper(const Discretization& d, double r, const Box& box);

/// Certified lower bound on the sup-inf value at ray r: the best inner infimum
/// reached by a multiplicative pattern-search ascent from several positive starts.
CurvePoint lambda_e_lower(const EContext& ctx, double r, const EOptions& opts,
                          const std::vector<std::pair<Field, Field>>& warm = {});

struct SupersolutionReport {
    bool ok = false;
    double margin = 0.0;
    InnerInfResult inner;
};

SupersolutionReport supersolution_check(const Discretization& d, const Field& u, const Field& v, double lambda,
                                        double mu, double tol);

struct StationarityReport {
    double lambda = 0.0;  ///< inner infimum used as the eigenvalue parameter
    double residual_u = 0.0;
    double residual_v = 0.0;
    double rel_residual_u = 0.0;
    double rel_residual_v = 0.0;
    bool is_solution = false;
};

StationarityReport stationarity_check(const Discretization& d, const Field& u, const Field& v, double r, double tol);

struct ECurve {
    std::vector<CurvePoint> lower;
    std::vector<CurvePoint> certificate;  ///< empty when no certificate region exists
    int flags = 0;
    double c_invariance_gap = 0.0;
    bool any_unbounded = false;
};

/// Lower bounds over the grid with pooled candidates, plus the certificate
/// column, monotonicity flags and the coupling-rescaling cross-check.
ECurve trace_curve_e(const EContext& ctx, const std::vector<double>& grid, const EOptions& opts,
                     const std::vector<std::pair<Field, Field>>& warm = {});

}  // namespace plapsys
