#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/SparseCore>

#include "plapsys/mesh.hpp"

namespace plapsys {

/// grad_energy(u, s) / lp_mass(u, s). Throws DomainError ("undefined quotient") for u = 0.
double rayleigh(const Mesh& mesh, const Field& u, double s);

/// Nodal pairing of |grad u|^{s-2} grad u with every hat function, i.e. the
/// gradient of grad_energy(u, s) / s. Boundary entries are set to zero.
Field p_laplace_action(const Mesh& mesh, const Field& u, double s);

/// Interior entries of  int |grad u|^{s-2} grad u . grad(hat_i) - int rhs hat_i,
/// with the load integrated by the vertex rule. Ordered as mesh.interior_nodes.
Eigen::VectorXd weak_residual(const Mesh& mesh, const Field& u, double s, const Field& rhs);

/// Same, with the load already assembled as a nodal vector (one entry per node).
Eigen::VectorXd weak_residual_load(const Mesh& mesh, const Field& u, double s, const Eigen::VectorXd& load);

/// Second variation of grad_energy(u, s) / s on the free unknowns. `reg` smooths
/// |grad u| near zero, which matters for s < 2.
Eigen::SparseMatrix<double> tangent_stiffness(const Mesh& mesh, const Field& u, double s, const DofMap& dofs,
                                              double reg = 0.0);

struct EigenPair {
    double value = 0.0;
    Field fn;  ///< lp_mass(fn, s) = 1, positive on the free nodes
    int iterations = 0;
    double final_step_norm = 0.0;
    std::vector<double> history;  ///< Rayleigh value after each accepted step
};

struct EigenOptions {
    int max_iter = 20000;
};

/// First Dirichlet eigenpair of the discrete s-Laplacian by preconditioned
/// descent on the Rayleigh quotient. `dofs` restricts the unknowns (sub-box
/// eigenproblems); by default all interior nodes are free.
EigenPair first_eigenpair(const Mesh& mesh, double s, double tol, std::uint64_t seed = 0,
                          const DofMap* dofs = nullptr, EigenOptions opts = {});

}  // namespace plapsys
