#include "plapsys/plap.hpp"

#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "plapsys/errors.hpp"

namespace plapsys {

double rayleigh(const Mesh& mesh, const Field& u, double s) {
    const double m = lp_mass(mesh, u, s);
    if (!(m > 0.0)) throw DomainError("rayleigh: undefined quotient for the zero field");
    return grad_energy(mesh, u, s) / m;
}

Field p_laplace_action(const Mesh& mesh, const Field& u, double s) {
    Field g = Field::Zero(mesh.num_nodes());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const Eigen::Vector2d gr = element_gradient(mesh, e, u);
        const double n2 = gr.squaredNorm();
        if (n2 == 0.0) continue;
        const Eigen::Vector2d flux = mesh.element_measure(e) * std::pow(n2, 0.5 * (s - 2.0)) * gr;
        for (int k = 0; k < mesh.verts(); ++k) g(mesh.elements(e, k)) += flux.dot(mesh.shape_grads[e].col(k));
    }
    for (int k = 0; k < mesh.num_nodes(); ++k)
        if (!mesh.interior[k]) g(k) = 0.0;
    return g;
}

Eigen::VectorXd weak_residual_load(const Mesh& mesh, const Field& u, double s, const Eigen::VectorXd& load) {
    const Field g = p_laplace_action(mesh, u, s);
    Eigen::VectorXd r(mesh.interior_nodes.size());
    for (std::size_t i = 0; i < mesh.interior_nodes.size(); ++i) {
        const int k = mesh.interior_nodes[i];
        r(i) = g(k) - load(k);
    }
    return r;
}

Eigen::VectorXd weak_residual(const Mesh& mesh, const Field& u, double s, const Field& rhs) {
    return weak_residual_load(mesh, u, s, mesh.lumped_mass.cwiseProduct(rhs));
}

Eigen::SparseMatrix<double> tangent_stiffness(const Mesh& mesh, const Field& u, double s, const DofMap& dofs,
                                              double reg) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(mesh.num_elements() * mesh.verts() * mesh.verts());
    for (int e = 0; e < mesh.num_elements(); ++e) {
        const Eigen::Vector2d gr = element_gradient(mesh, e, u);
        const double n2 = gr.squaredNorm() + reg * reg;
        Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
        if (n2 > 0.0) {
            const double a = std::pow(n2, 0.5 * (s - 2.0));
            C = a * (Eigen::Matrix2d::Identity() + (s - 2.0) * gr * gr.transpose() / n2);
        } else if (s == 2.0) {
            C.setIdentity();
        }
        if (mesh.dim == 1) C(1, 1) = 0.0;
        C *= mesh.element_measure(e);
        const auto& G = mesh.shape_grads[e];
        for (int a = 0; a < mesh.verts(); ++a) {
            const int ia = dofs.index_of[mesh.elements(e, a)];
            if (ia < 0) continue;
            for (int b = 0; b < mesh.verts(); ++b) {
                const int ib = dofs.index_of[mesh.elements(e, b)];
                if (ib < 0) continue;
                trips.emplace_back(ia, ib, G.col(a).dot(C * G.col(b)));
            }
        }
    }
    Eigen::SparseMatrix<double> T(dofs.size(), dofs.size());
    T.setFromTriplets(trips.begin(), trips.end());
    return T;
}

EigenPair first_eigenpair(const Mesh& mesh, double s, double tol, std::uint64_t seed, const DofMap* dofs_in,
                          EigenOptions opts) {
    if (!(s > 1.0)) throw DomainError("first_eigenpair: exponent must be > 1");
    if (!(tol > 0.0)) throw DomainError("first_eigenpair: tol must be > 0");
    const DofMap dofs = dofs_in ? *dofs_in : interior_dofs(mesh);
    if (dofs.size() == 0) throw DomainError("first_eigenpair: no free unknowns");
    const int nn = mesh.num_nodes();

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> K(laplace_stiffness(mesh, dofs));
    if (K.info() != Eigen::Success) throw DomainError("first_eigenpair: stiffness factorization failed");

    Eigen::VectorXd x = Eigen::VectorXd::Ones(dofs.size());
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 0.25);
        for (int i = 0; i < x.size(); ++i) x(i) += unif(rng);
    }

    const Eigen::VectorXd w = gather(dofs, mesh.lumped_mass);
    auto normalize = [&](Eigen::VectorXd& y) {
        const double m = (w.array() * y.array().abs().pow(s)).sum();
        y /= std::pow(m, 1.0 / s);
    };
    auto value_of = [&](const Eigen::VectorXd& y) { return rayleigh(mesh, scatter(dofs, y, nn), s); };

    normalize(x);
    EigenPair out;
    double R = value_of(x);
    out.history.push_back(R);
    double step = 1.0 / s;
    int quiet = 0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        const Field u = scatter(dofs, x, nn);
        const Eigen::VectorXd g = gather(dofs, p_laplace_action(mesh, u, s));
        const Eigen::VectorXd mterm = w.array() * x.array().abs().pow(s - 2.0) * x.array();
        const Eigen::VectorXd grad = s * (g - R * mterm);  // lp_mass(x) = 1
        const Eigen::VectorXd dir = -K.solve(grad);
        const double slope = grad.dot(dir);
        if (!(slope < 0.0)) {
            out.iterations = it;
            break;
        }

        double t = std::min(2.0 * step, 1.5 / s);
        bool accepted = false;
        Eigen::VectorXd trial;
        double Rt = R;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            trial = x + t * dir;
            const double m = (w.array() * trial.array().abs().pow(s)).sum();
            if (!(m > 0.0)) continue;
            Rt = value_of(trial);
            if (Rt <= R + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
        }
        out.iterations = it;
        if (!accepted || Rt >= R) break;  // no representable decrease left

        step = t;
        out.final_step_norm = (t * dir).norm();
        normalize(trial);
        const double Rn = value_of(trial);
        const double decrease = R - Rn;
        x = trial;
        R = std::min(R, Rn);
        out.history.push_back(R);
        quiet = decrease < tol * R ? quiet + 1 : 0;
        if (quiet >= 3) break;
        if (it == opts.max_iter) {
            throw ConvergenceError("first_eigenpair: no convergence within the iteration budget",
                                   scatter(dofs, x, nn));
        }
    }

    if (x.sum() < 0.0) x = -x;

    // Bordered Newton on the eigen-equation with the normalization row.
    auto residual_of = [&](const Eigen::VectorXd& y, double& Ry, double& scale) {
        const Field u = scatter(dofs, y, nn);
        const Eigen::VectorXd g = gather(dofs, p_laplace_action(mesh, u, s));
        const Eigen::VectorXd mt = w.array() * y.array().abs().pow(s - 2.0) * y.array();
        Ry = g.dot(y) / mt.dot(y);
        scale = std::max(g.cwiseAbs().maxCoeff(), 1e-300);
        return Eigen::VectorXd(g - Ry * mt);
    };
    double Rx = 0.0, scale = 0.0;
    Eigen::VectorXd res = residual_of(x, Rx, scale);
    double rnorm = res.cwiseAbs().maxCoeff();
    for (int k = 0; k < 40 && rnorm > tol * scale; ++k) {
        if ((x.array() <= 0.0).any()) break;
        const int n = static_cast<int>(x.size());
        const Eigen::SparseMatrix<double> T = tangent_stiffness(mesh, scatter(dofs, x, nn), s, dofs);
        const Eigen::VectorXd mt = w.array() * x.array().pow(s - 1.0);
        const Eigen::VectorXd dm = (s - 1.0) * Rx * (w.array() * x.array().pow(s - 2.0)).matrix();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(T.nonZeros() + 3 * n);
        for (int c = 0; c < T.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator itr(T, c); itr; ++itr)
                trips.emplace_back(itr.row(), itr.col(), itr.value());
        for (int i = 0; i < n; ++i) {
            trips.emplace_back(i, i, -dm(i));
            trips.emplace_back(i, n, -mt(i));
            trips.emplace_back(n, i, mt(i));
        }
        Eigen::SparseMatrix<double> J(n + 1, n + 1);
        J.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
        if (lu.info() != Eigen::Success) break;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
        rhs.head(n) = -res;
        const Eigen::VectorXd delta = lu.solve(rhs);
        if (lu.info() != Eigen::Success || !delta.allFinite()) break;
        bool improved = false;
        for (double t = 1.0; t > 1e-4; t *= 0.5) {
            Eigen::VectorXd y = x + t * delta.head(n);
            if ((y.array() <= 0.0).any()) continue;
            normalize(y);
            double Ry = 0.0, sy = 0.0;
            const Eigen::VectorXd ry = residual_of(y, Ry, sy);
            const double ny = ry.cwiseAbs().maxCoeff();
            if (ny < rnorm) {
                x = y;
                res = ry;
                rnorm = ny;
                Rx = Ry;
                scale = sy;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }

    out.fn = scatter(dofs, x, nn);
    out.value = rayleigh(mesh, out.fn, s);
    return out;
}

}  // namespace plapsys
