#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace plapsys {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Axis-aligned box. In 1D only `x` is used.
struct Box {
    std::array<double, 2> x{0.0, 1.0};
    std::array<double, 2> y{0.0, 1.0};

    bool contains(double px, double py, int dim) const {
        const bool in_x = px >= x[0] && px <= x[1];
        return dim == 1 ? in_x : in_x && py >= y[0] && py <= y[1];
    }
    double measure(int dim) const {
        const double lx = x[1] - x[0];
        return dim == 1 ? lx : lx * (y[1] - y[0]);
    }
};

/// Interval [a,b] (dim = 1) or rectangle [a,b]x[c,d] (dim = 2).
struct DomainDescriptor {
    int dim = 1;
    Box bounds;

    double measure() const { return bounds.measure(dim); }
};

struct WeightPiece {
    Box region;
    double value = 0.0;
};

/// Piecewise-constant weight f. The first piece containing a point wins;
/// `default_value` applies outside all pieces.
struct WeightDescriptor {
    std::vector<WeightPiece> pieces;
    double default_value = 0.0;

    double operator()(double x, double y, int dim) const {
        for (const auto& piece : pieces)
            if (piece.region.contains(x, y, dim)) return piece.value;
        return default_value;
    }
    double sup_norm() const;
};

/// One instance of the coupled p/q-Laplacian Dirichlet system.
struct ProblemSpec {
    double p = 2.0;
    double q = 2.0;
    double alpha = 2.0;
    double beta = 2.0;
    double c1 = 1.0;
    double c2 = 1.0;
    DomainDescriptor domain;
    WeightDescriptor weight;
    int resolution = 65;  // nodes per axis
};

enum class WeightClass { nonpositive, nonnegative, sign_changing, zero };

std::string_view to_string(WeightClass c);

/// Lebesgue measures of {f > 0}, {f = 0}, {f < 0}.
struct WeightMeasures {
    double plus = 0.0;
    double zero = 0.0;
    double minus = 0.0;
};

struct RegimeReport {
    bool sob_ok = false;
    bool super_pq = false;
    bool subcritical = false;
    double p_star = kInf;
    double q_star = kInf;
    /// alpha/p + beta/q - 1; positive exactly when the superhomogeneity condition holds.
    double sob_margin = 0.0;
    /// 1 - alpha/p* - beta/q*.
    double subcritical_margin = 0.0;
    WeightClass weight_class = WeightClass::zero;
    WeightMeasures measures;
    bool interior_plus_zero = false;

    bool weight_nonpositive() const {
        return weight_class == WeightClass::nonpositive || weight_class == WeightClass::zero;
    }
    bool weight_nonnegative() const {
        return weight_class == WeightClass::nonnegative || weight_class == WeightClass::zero;
    }
};

struct CriticalExponents {
    double p_star;
    double q_star;
};

/// Sobolev critical exponents n*s/(n-s), +inf when s >= n.
CriticalExponents critical_exponents(double p, double q, int n);

/// Smallest and largest exponent the discretization supports.
inline constexpr double kMinExponent = 1.1;
inline constexpr double kMaxExponent = 10.0;

/// Checks parameter rules (throws ValidationError) and derives the regime flags.
RegimeReport validate_spec(const ProblemSpec& spec, int n);
inline RegimeReport validate_spec(const ProblemSpec& spec) { return validate_spec(spec, spec.domain.dim); }

/// Measures of the sign sets of f, by midpoint sampling on `samples` cells per axis.
WeightMeasures weight_measures(const ProblemSpec& spec, int samples = 2048);

/// Boxes on which f is constant and nonnegative: the cells of the arrangement
/// cut out by the piece boundaries, plus the whole domain when f >= 0 everywhere.
std::vector<Box> nonnegative_boxes(const ProblemSpec& spec);

/// YAML config I/O. Errors are reported as ConfigError with key path and line.
ProblemSpec parse_problem(std::string_view text);
ProblemSpec load_problem(const std::string& path);
std::string to_yaml(const ProblemSpec& spec);

/// FNV-1a hash of the canonical YAML form; stable across runs and platforms.
std::uint64_t problem_hash(const ProblemSpec& spec);
std::string hash_hex(std::uint64_t h);

}  // namespace plapsys
