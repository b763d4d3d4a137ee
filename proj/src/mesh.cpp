#include "plapsys/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/LU>

#include "plapsys/errors.hpp"

namespace plapsys {

Mesh build_mesh(const DomainDescriptor& domain, int resolution) {
    if (resolution < 3) throw ValidationError("resolution", "must be >= 3 (no interior node otherwise)");
    if (domain.dim != 1 && domain.dim != 2) throw ValidationError("domain.dim", "must be 1 or 2");
    if (!(domain.measure() > 0.0)) throw ValidationError("domain.bounds", "domain must have positive measure");

    Mesh m;
    m.dim = domain.dim;
    m.n = resolution;
    const int n = resolution;
    const auto& b = domain.bounds;
    m.hx = (b.x[1] - b.x[0]) / (n - 1);
    m.hy = m.dim == 2 ? (b.y[1] - b.y[0]) / (n - 1) : 0.0;
    m.h = std::max(m.hx, m.hy);

    const int ny = m.dim == 2 ? n : 1;
    m.nodes.resize(n * ny, 2);
    m.interior.assign(n * ny, false);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < n; ++i) {
            const int k = j * n + i;
            // Endpoints are taken from the bounds directly so the last node is exact.
            m.nodes(k, 0) = i == n - 1 ? b.x[1] : b.x[0] + i * m.hx;
            m.nodes(k, 1) = m.dim == 2 ? (j == n - 1 ? b.y[1] : b.y[0] + j * m.hy) : 0.0;
            const bool in_x = i > 0 && i < n - 1;
            const bool in_y = m.dim == 1 || (j > 0 && j < n - 1);
            m.interior[k] = in_x && in_y;
            if (m.interior[k]) m.interior_nodes.push_back(k);
        }
    }

    if (m.dim == 1) {
        m.elements.resize(n - 1, 2);
        m.element_measure.resize(n - 1);
        m.shape_grads.resize(n - 1);
        for (int e = 0; e < n - 1; ++e) {
            m.elements(e, 0) = e;
            m.elements(e, 1) = e + 1;
            const double len = m.nodes(e + 1, 0) - m.nodes(e, 0);
            m.element_measure(e) = len;
            m.shape_grads[e].setZero();
            m.shape_grads[e](0, 0) = -1.0 / len;
            m.shape_grads[e](0, 1) = 1.0 / len;
        }
    } else {
        const int cells = (n - 1) * (n - 1);
        m.elements.resize(2 * cells, 3);
        m.element_measure.resize(2 * cells);
        m.shape_grads.resize(2 * cells);
        int e = 0;
        for (int j = 0; j + 1 < n; ++j) {
            for (int i = 0; i + 1 < n; ++i) {
                const int n00 = j * n + i, n10 = n00 + 1, n01 = n00 + n, n11 = n01 + 1;
                for (const auto& tri : {Eigen::Vector3i(n00, n10, n11), Eigen::Vector3i(n00, n11, n01)}) {
                    m.elements.row(e) = tri.transpose();
                    Eigen::Matrix2d J;
                    J.col(0) = (m.nodes.row(tri(1)) - m.nodes.row(tri(0))).transpose();
                    J.col(1) = (m.nodes.row(tri(2)) - m.nodes.row(tri(0))).transpose();
                    m.element_measure(e) = 0.5 * std::abs(J.determinant());
                    const Eigen::Matrix2d Jit = J.inverse().transpose();
                    // Reference gradients of (1 - xi - eta, xi, eta).
                    Eigen::Matrix<double, 2, 3> ref;
                    ref << -1, 1, 0, -1, 0, 1;
                    m.shape_grads[e] = Jit * ref;
                    ++e;
                }
            }
        }
    }

    m.lumped_mass = Eigen::VectorXd::Zero(m.num_nodes());
    for (int e = 0; e < m.num_elements(); ++e)
        for (int k = 0; k < m.verts(); ++k) m.lumped_mass(m.elements(e, k)) += m.element_measure(e) / m.verts();
    return m;
}

Eigen::VectorXd element_weight(const Mesh& mesh, const WeightDescriptor& weight) {
    Eigen::VectorXd fe(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        Eigen::Vector2d c = Eigen::Vector2d::Zero();
        for (int k = 0; k < mesh.verts(); ++k) c += mesh.nodes.row(mesh.elements(e, k)).transpose();
        c /= mesh.verts();
        fe(e) = weight(c(0), c(1), mesh.dim);
    }
    return fe;
}

Eigen::VectorXd weighted_lumped_mass(const Mesh& mesh, const WeightDescriptor& weight) {
    const Eigen::VectorXd fe = element_weight(mesh, weight);
    Eigen::VectorXd wf = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e)
        for (int k = 0; k < mesh.verts(); ++k)
            wf(mesh.elements(e, k)) += fe(e) * mesh.element_measure(e) / mesh.verts();
    return wf;
}

DofMap interior_dofs(const Mesh& mesh) {
    DofMap d;
    d.index_of.assign(mesh.num_nodes(), -1);
    for (int k : mesh.interior_nodes) {
        d.index_of[k] = d.size();
        d.free.push_back(k);
    }
    return d;
}

DofMap box_dofs(const Mesh& mesh, const Box& box) {
    // A node qualifies when the box contains all elements touching it, i.e. the
    // node sits at least one cell width inside every box face.
    const double ex = 1e-9 * mesh.hx;
    const double ey = 1e-9 * mesh.hy;
    DofMap d;
    d.index_of.assign(mesh.num_nodes(), -1);
    for (int k : mesh.interior_nodes) {
        const double x = mesh.nodes(k, 0), y = mesh.nodes(k, 1);
        bool ok = x - mesh.hx >= box.x[0] - ex && x + mesh.hx <= box.x[1] + ex;
        if (mesh.dim == 2) ok = ok && y - mesh.hy >= box.y[0] - ey && y + mesh.hy <= box.y[1] + ey;
        if (ok) {
            d.index_of[k] = d.size();
            d.free.push_back(k);
        }
    }
    return d;
}

Eigen::VectorXd gather(const DofMap& dofs, const Field& u) {
    Eigen::VectorXd x(dofs.size());
    for (int i = 0; i < dofs.size(); ++i) x(i) = u(dofs.free[i]);
    return x;
}

Field scatter(const DofMap& dofs, const Eigen::VectorXd& x, int num_nodes) {
    Field u = Field::Zero(num_nodes);
    for (int i = 0; i < dofs.size(); ++i) u(dofs.free[i]) = x(i);
    return u;
}

Eigen::SparseMatrix<double> laplace_stiffness(const Mesh& mesh, const DofMap& dofs) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.num_elements() * mesh.verts() * mesh.verts());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const auto& G = mesh.shape_grads[e];
        for (int a = 0; a < mesh.verts(); ++a) {
            const int ia = dofs.index_of[mesh.elements(e, a)];
            if (ia < 0) continue;
            for (int b = 0; b < mesh.verts(); ++b) {
                const int ib = dofs.index_of[mesh.elements(e, b)];
                if (ib < 0) continue;
                trips.emplace_back(ia, ib, mesh.element_measure(e) * G.col(a).dot(G.col(b)));
            }
        }
    }
    Eigen::SparseMatrix<double> K(dofs.size(), dofs.size());
    K.setFromTriplets(trips.begin(), trips.end());
    return K;
}

Field sine_bump(const Mesh& mesh, const Box& box) {
    constexpr double pi = 3.14159265358979323846;
    Field u = Field::Zero(mesh.num_nodes());
    for (int k : mesh.interior_nodes) {
        const double x = mesh.nodes(k, 0), y = mesh.nodes(k, 1);
        if (!box.contains(x, y, mesh.dim)) continue;
        double val = std::sin(pi * (x - box.x[0]) / (box.x[1] - box.x[0]));
        if (mesh.dim == 2) val *= std::sin(pi * (y - box.y[0]) / (box.y[1] - box.y[0]));
        u(k) = std::max(0.0, val);
    }
    return u;
}

std::vector<std::vector<int>> node_neighbors(const Mesh& mesh) {
    std::vector<std::vector<int>> nb(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e)
        for (int a = 0; a < mesh.verts(); ++a)
            for (int b = 0; b < mesh.verts(); ++b) nb[mesh.elements(e, a)].push_back(mesh.elements(e, b));
    for (auto& list : nb) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return nb;
}

void write_field(std::ostream& out, const Mesh& mesh, const Field& u) {
    char buf[96];
    for (int k = 0; k < mesh.num_nodes(); ++k) {
        if (mesh.dim == 1)
            std::snprintf(buf, sizeof buf, "%.17g %.17g\n", mesh.nodes(k, 0), u(k));
        else
            std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", mesh.nodes(k, 0), mesh.nodes(k, 1), u(k));
        out << buf;
    }
}

}  // namespace plapsys
