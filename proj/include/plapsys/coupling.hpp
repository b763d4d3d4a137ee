#pragma once

#include <string>

#include <Eigen/Core>

#include "plapsys/mesh.hpp"
#include "plapsys/plap.hpp"
#include "plapsys/problem.hpp"

namespace plapsys {

/// A validated problem together with its mesh and the weighted nodal masses
/// that every joint functional is built from.
struct Discretization {
    ProblemSpec spec;
    RegimeReport regime;
    Mesh mesh;
    DofMap dofs;
    Eigen::VectorXd wf;  ///< vertex-rule weights of f, one per node
    double f_sup = 0.0;

    int num_nodes() const { return mesh.num_nodes(); }
};

Discretization discretize(const ProblemSpec& spec);

/// Copy of `d` with different couplings; mesh and weights are shared values.
Discretization with_couplings(const Discretization& d, double c1, double c2);

/// First eigenpairs of the p- and q-Laplacian on the whole domain.
struct PrincipalPairs {
    EigenPair phi;  ///< (lambda_1, phi_1) for the exponent p
    EigenPair psi;  ///< (mu_1, psi_1) for the exponent q
    double lambda1() const { return phi.value; }
    double mu1() const { return psi.value; }
};

PrincipalPairs principal_pairs(const Discretization& d, double tol = 1e-13, std::uint64_t seed = 0);

/// Candidate pair with the cached scalars of the fibering analysis.
struct StatePair {
    Field u;
    Field v;
    double lambda = 0.0;
    double mu = 0.0;
    double A = 0.0;  ///< grad_energy(u, p) - lambda lp_mass(u, p)
    double B = 0.0;  ///< grad_energy(v, q) - mu lp_mass(v, q)
    double F = 0.0;
};

StatePair make_state(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);

struct FPairing {
    double value = 0.0;
    int sign = 0;  ///< -1, 0 or +1
};

/// Vertex-rule value of the integral of f |u|^alpha |v|^beta.
FPairing F_pairing(const Discretization& d, const Field& u, const Field& v);

double energy(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);

struct NehariDiagnostics {
    double P = 0.0;
    double Q = 0.0;
    Eigen::Matrix2d H = Eigen::Matrix2d::Zero();
    double det_H = 0.0;
    /// Largest sum of term magnitudes over the entries of H.
    double scale = 0.0;
};

/// First variations of the energy paired with u and with v.
std::pair<double, double> nehari_PQ(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);
NehariDiagnostics hessian_det(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);
NehariDiagnostics hessian_det(const Discretization& d, const StatePair& st);

struct FiberResult {
    enum class Status { projected, infeasible, degenerate };
    Status status = Status::infeasible;
    double t = 0.0;
    double s = 0.0;
    std::string reason;
    /// Sign class of the projected point: -1 when A, B, F < 0, +1 when all positive.
    int branch = 0;

    bool ok() const { return status == Status::projected; }
};

/// Amplitudes (t, s) putting (t u, s v) on the Nehari set, decided by sign
/// certificates first. Throws DomainError for u = 0 or v = 0.
FiberResult fibering_project(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);

/// Same, from the cached scalars alone.
FiberResult fibering_project(const ProblemSpec& spec, double A, double B, double F);

/// Amplitudes mapping a solution for couplings (c1, c2) to one for (d1, d2).
std::pair<double, double> scale_solution(double c1, double c2, double d1, double d2, const ProblemSpec& spec);

/// (min{a/c, b/d}, max{a/c, b/d}), each end rounded outward so the enclosure is exact.
/// Throws DomainError unless c, d > 0.
std::pair<double, double> ratio_bounds(double a, double b, double c, double d);

/// Per-node residuals of both equations (interior nodes, mesh order).
struct Residuals {
    Eigen::VectorXd ru;
    Eigen::VectorXd rv;
    Eigen::VectorXd scale_u;  ///< sum of term magnitudes at each node
    Eigen::VectorXd scale_v;
};

Residuals system_residuals(const Discretization& d, const Field& u, const Field& v, double lambda, double mu);

/// Nodal derivative of F with respect to u (first) or v (second), all nodes.
Eigen::VectorXd dF_du(const Discretization& d, const Field& u, const Field& v);
Eigen::VectorXd dF_dv(const Discretization& d, const Field& u, const Field& v);

}  // namespace plapsys
