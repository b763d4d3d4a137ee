#pragma once

#include <cmath>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "plapsys/problem.hpp"

namespace plapsys {

/// Nodal values over every mesh node. Boundary entries are kept at zero.
using Field = Eigen::VectorXd;

/// Uniform P1 mesh of an interval or rectangle.
///
/// Nodes are numbered x-fastest: node (i, j) has index j * n + i. In 2D every
/// grid cell is split along its (i, j) -- (i+1, j+1) diagonal into the
/// triangles (n00, n10, n11) and (n00, n11, n01).
struct Mesh {
    int dim = 1;
    int n = 0;  ///< nodes per axis
    double hx = 0.0;
    double hy = 0.0;
    double h = 0.0;  ///< max(hx, hy)
    Eigen::MatrixX2d nodes;
    Eigen::MatrixXi elements;  ///< one row per element, dim + 1 node indices
    std::vector<bool> interior;
    std::vector<int> interior_nodes;
    Eigen::VectorXd element_measure;
    /// Column k holds the gradient of the k-th local basis function (row 1 unused in 1D).
    std::vector<Eigen::Matrix<double, 2, 3>> shape_grads;
    /// Vertex-rule nodal weights: sum over adjacent elements of |e| / (dim + 1).
    Eigen::VectorXd lumped_mass;

    int num_nodes() const { return static_cast<int>(nodes.rows()); }
    int num_elements() const { return static_cast<int>(elements.rows()); }
    int verts() const { return dim + 1; }
};

/// Throws ValidationError for resolution < 3.
Mesh build_mesh(const DomainDescriptor& domain, int resolution);

/// Vertex-rule weights with f sampled once per element at its centroid.
Eigen::VectorXd weighted_lumped_mass(const Mesh& mesh, const WeightDescriptor& weight);

/// Per-element value of f at the centroid.
Eigen::VectorXd element_weight(const Mesh& mesh, const WeightDescriptor& weight);

/// Constant gradient of the P1 interpolant of `u` on element `e`.
template <class Derived>
Eigen::Vector2d element_gradient(const Mesh& mesh, int e, const Eigen::MatrixBase<Derived>& u) {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();
    for (int k = 0; k < mesh.verts(); ++k) g += u(mesh.elements(e, k)) * mesh.shape_grads[e].col(k);
    return g;
}

/// Integral of |u|^s by the vertex rule.
template <class Derived>
double lp_mass(const Mesh& mesh, const Eigen::MatrixBase<Derived>& u, double s) {
    return (mesh.lumped_mass.array() * u.derived().array().abs().pow(s)).sum();
}

/// Integral of |grad u|^s, exact for the P1 interpolant.
template <class Derived>
double grad_energy(const Mesh& mesh, const Eigen::MatrixBase<Derived>& u, double s) {
    double sum = 0.0;
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const double g2 = element_gradient(mesh, e, u).squaredNorm();
        if (g2 > 0.0) sum += mesh.element_measure(e) * std::pow(g2, 0.5 * s);
    }
    return sum;
}

/// Maps between all mesh nodes and a set of free unknowns.
struct DofMap {
    std::vector<int> free;      ///< node index of each unknown
    std::vector<int> index_of;  ///< unknown index of each node, -1 if fixed
    int size() const { return static_cast<int>(free.size()); }
};

/// Unknowns at all interior nodes.
DofMap interior_dofs(const Mesh& mesh);

/// Unknowns at the nodes whose whole element star lies inside `box`.
DofMap box_dofs(const Mesh& mesh, const Box& box);

Eigen::VectorXd gather(const DofMap& dofs, const Field& u);
Field scatter(const DofMap& dofs, const Eigen::VectorXd& x, int num_nodes);

/// Linear Laplacian stiffness restricted to the free unknowns.
Eigen::SparseMatrix<double> laplace_stiffness(const Mesh& mesh, const DofMap& dofs);

/// Product of half sine waves on `box`, zero outside it and on the boundary.
Field sine_bump(const Mesh& mesh, const Box& box);

/// Node-to-node adjacency through shared elements (each list includes the node itself).
std::vector<std::vector<int>> node_neighbors(const Mesh& mesh);

/// Field snapshot, one record per node: `x value` in 1D, `x y value` in 2D.
void write_field(std::ostream& out, const Mesh& mesh, const Field& u);

}  // namespace plapsys
