#include "plapsys/gamma_e.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SparseCholesky>

#include "plapsys/errors.hpp"
#include "plapsys/parallel.hpp"

namespace plapsys {

std::string_view to_string(Component c) {
    return c == Component::first_equation ? "first-equation" : "second-equation";
}

namespace {

constexpr double kSweepWindow = 2.0;

double gradient_coef(double n2, double s) { return n2 > 0.0 ? std::pow(n2, 0.5 * (s - 2.0)) : 0.0; }

void require_positive(const Discretization& d, const Field& u, const Field& v) {
    for (int k : d.mesh.interior_nodes)
        if (!(u(k) > 0.0) || !(v(k) > 0.0)) throw DomainError("inner_inf: outside positive cone");
}

// ratio1 = (G1 - C1) / D1 and ratio2 = (G2 - C2) / D2 at every interior node.
struct NodalParts {
    Eigen::VectorXd G1, C1, D1, G2, C2, D2;
};

NodalParts nodal_parts(const Discretization& d, const Field& u, const Field& v) {
    const auto& s = d.spec;
    const auto& m = d.mesh;
    const Field gu = p_laplace_action(m, u, s.p);
    const Field gv = p_laplace_action(m, v, s.q);
    const int n = static_cast<int>(m.interior_nodes.size());
    NodalParts np{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n),
                  Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int i = 0; i < n; ++i) {
        const int k = m.interior_nodes[i];
        const double w = m.lumped_mass(k);
        np.G1(i) = gu(k);
        np.C1(i) = s.c1 * d.wf(k) * std::pow(u(k), s.alpha - 1.0) * std::pow(v(k), s.beta);
        np.D1(i) = w * std::pow(u(k), s.p - 1.0);
        np.G2(i) = gv(k);
        np.C2(i) = s.c2 * d.wf(k) * std::pow(u(k), s.alpha) * std::pow(v(k), s.beta - 1.0);
        np.D2(i) = w * std::pow(v(k), s.q - 1.0);
    }
    return np;
}

double ratio(double G, double C, double D) { return D < kDenominatorFloor ? kInf : (G - C) / D; }

struct AmplitudeChoice {
    double value = -kInf;
    double z = 1.0;
    bool unbounded = false;
    bool edge = false;
};

/// Maximizes the concave function z -> min_i (G_i - z C_i) / D_i over ln z in [-W, W].
AmplitudeChoice best_amplitude(const Eigen::VectorXd& G, const Eigen::VectorXd& C, const Eigen::VectorXd& D,
                               double W) {
    AmplitudeChoice out;
    bool any = false, all_negative = true;
    for (int i = 0; i < G.size(); ++i) {
        if (D(i) < kDenominatorFloor) continue;
        any = true;
        all_negative = all_negative && C(i) < 0.0;
    }
    if (!any) {
        out.value = kInf;
        return out;
    }
    out.unbounded = all_negative;
    auto eval = [&](double z, int& arg) {
        double best = kInf;
        arg = -1;
        for (int i = 0; i < G.size(); ++i) {
            if (D(i) < kDenominatorFloor) continue;
            const double val = (G(i) - z * C(i)) / D(i);
            if (val < best) {
                best = val;
                arg = i;
            }
        }
        return best;
    };
    double lo = -W, hi = W, mid = 0.0;
    for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
        mid = 0.5 * (lo + hi);
        int arg;
        eval(std::exp(mid), arg);
        if (C(arg) < 0.0) lo = mid;
        else if (C(arg) > 0.0) hi = mid;
        else break;
    }
    int arg;
    out.z = std::exp(mid);
    out.value = eval(out.z, arg);
    out.edge = std::abs(std::abs(mid) - W) < 1e-9;
    return out;
}

/// Soft-min of all nodal ratios, smoothed at inverse temperature kappa, with its
/// gradient with respect to the interior values of (U, V).
struct SoftMin {
    const Discretization& d;
    double r;
    Eigen::VectorXd w, wf;

    SoftMin(const Discretization& disc, double ray)
        : d(disc), r(ray), w(gather(disc.dofs, disc.mesh.lumped_mass)), wf(gather(disc.dofs, disc.wf)) {}

    double value(const Eigen::VectorXd& x, double kappa, double* hard, Eigen::VectorXd* grad) const {
        const auto& s = d.spec;
        const int n = d.dofs.size();
        const Eigen::ArrayXd U = x.head(n).array(), V = x.tail(n).array();
        const Field Uf = scatter(d.dofs, x.head(n), d.num_nodes()), Vf = scatter(d.dofs, x.tail(n), d.num_nodes());
        const Eigen::ArrayXd G1 = gather(d.dofs, p_laplace_action(d.mesh, Uf, s.p)).array();
        const Eigen::ArrayXd G2 = gather(d.dofs, p_laplace_action(d.mesh, Vf, s.q)).array();
        const Eigen::ArrayXd C1 = s.c1 * wf.array() * U.pow(s.alpha - 1.0) * V.pow(s.beta);
        const Eigen::ArrayXd C2 = s.c2 * wf.array() * U.pow(s.alpha) * V.pow(s.beta - 1.0);
        const Eigen::ArrayXd D1 = w.array() * U.pow(s.p - 1.0), D2 = r * w.array() * V.pow(s.q - 1.0);
        const Eigen::ArrayXd R1 = (G1 - C1) / D1, R2 = (G2 - C2) / D2;
        const double h = std::min(R1.minCoeff(), R2.minCoeff());
        if (hard) *hard = h;
        const Eigen::ArrayXd e1 = (-kappa * (R1 - h)).exp(), e2 = (-kappa * (R2 - h)).exp();
        const double Z = e1.sum() + e2.sum();
        if (grad) {
            const Eigen::ArrayXd p1 = e1 / Z, p2 = e2 / Z;
            const Eigen::VectorXd a = (p1 / D1).matrix(), b = (p2 / D2).matrix();
            const Eigen::SparseMatrix<double> Tp = tangent_stiffness(d.mesh, Uf, s.p, d.dofs, 1e-12);
            const Eigen::SparseMatrix<double> Tq = tangent_stiffness(d.mesh, Vf, s.q, d.dofs, 1e-12);
            grad->resize(2 * n);
            grad->head(n) = ((Tp * a).array() - a.array() * (s.alpha - 1.0) * C1 / U - p1 * R1 * (s.p - 1.0) / U -
                             b.array() * s.alpha * C2 / U)
                                .matrix();
            grad->tail(n) = ((Tq * b).array() - a.array() * s.beta * C1 / V - b.array() * (s.beta - 1.0) * C2 / V -
                             p2 * R2 * (s.q - 1.0) / V)
                                .matrix();
        }
        return h - std::log(Z) / kappa;
    }
};

/// Preconditioned ascent on the soft-min with a rising inverse temperature,
/// run on each component divided by its maximum so that the path does not
/// depend on the amplitudes. Keeps the iterate with the best hard minimum.
void smooth_ascent(const Discretization& d, double r, Field& U, Field& V, int stages, int iters) {
    const int n = d.dofs.size();
    const SoftMin sm(d, r);
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> K(laplace_stiffness(d.mesh, d.dofs));
    const double su = U.maxCoeff(), sv = V.maxCoeff();
    Eigen::VectorXd scale(2 * n);
    scale.head(n).setConstant(su);
    scale.tail(n).setConstant(sv);
    Eigen::VectorXd y(2 * n);
    y << gather(d.dofs, U) / su, gather(d.dofs, V) / sv;
    auto eval = [&](const Eigen::VectorXd& z, double kappa, double* hard, Eigen::VectorXd* grad) {
        const double val = sm.value(scale.cwiseProduct(z), kappa, hard, grad);
        if (grad) *grad = grad->cwiseProduct(scale);
        return val;
    };
    double hard;
    eval(y, 1.0, &hard, nullptr);
    if (!std::isfinite(hard)) return;
    Eigen::VectorXd best = y;
    double best_hard = hard;
    double kappa = 1.0 / std::max(1.0, std::abs(hard));
    double step = 1.0;
    Eigen::VectorXd g, dir(2 * n);
    for (int st = 0; st < stages; ++st, kappa *= 2.0) {
        for (int it = 0; it < iters; ++it) {
            const double val = eval(y, kappa, &hard, &g);
            if (hard > best_hard) {
                best_hard = hard;
                best = y;
            }
            dir.head(n) = K.solve(g.head(n));
            dir.tail(n) = K.solve(g.tail(n));
            const double slope = g.dot(dir);
            if (!(slope > 0.0)) break;
            const double cap = 0.5 / (dir.array() / y.array()).abs().maxCoeff();
            double t = std::min(2.0 * step, cap);
            bool moved = false;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                const Eigen::VectorXd z = y + t * dir;
                if ((z.array() <= 0.0).any()) continue;
                const double tv = eval(z, kappa, nullptr, nullptr);
                if (std::isfinite(tv) && tv >= val + 1e-4 * t * slope) {
                    y = z;
                    step = t;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
    }
    eval(y, kappa, &hard, nullptr);
    if (hard > best_hard) best = y;
    U = scatter(d.dofs, su * best.head(n), d.num_nodes());
    V = scatter(d.dofs, sv * best.tail(n), d.num_nodes());
}

/// Multiplicative coordinate search on the nodal values of a positive pair,
/// maximizing min(min ratio1, min ratio2 / r) with amplitude re-optimization
/// after every sweep.
class Ascent {
public:
    Ascent(const Discretization& d, double r) : d_(d), m_(d.mesh), s_(d.spec), r_(r) {
        const int nn = m_.num_nodes();
        star_.resize(nn);
        for (int e = 0; e < m_.num_elements(); ++e)
            for (int l = 0; l < m_.verts(); ++l) star_[m_.elements(e, l)].emplace_back(e, l);
        local_.assign(nn, -1);
        for (std::size_t i = 0; i < m_.interior_nodes.size(); ++i) local_[m_.interior_nodes[i]] = static_cast<int>(i);
        n_ = static_cast<int>(m_.interior_nodes.size());
    }

    void run(Field& U, Field& V, int sweeps, bool wide_first) {
        U_ = U;
        V_ = V;
        if (wide_first) rescale(kAmplitudeWindow);
        smooth_ascent(d_, r_, U_, V_, 8, 60);
        rescale(kSweepWindow);
        double delta = 0.1;
        for (int sw = 0; sw < sweeps && delta > 1e-3; ++sw) {
            if (sweep(delta) == 0) delta *= 0.5;
            rescale(kSweepWindow);
        }
        U = U_;
        V = V_;
    }

private:
    void rescale(double W) {
        const auto np = nodal_parts(d_, U_, V_);
        const auto a = best_amplitude(np.G1, np.C1, np.D1, W);
        const auto b = best_amplitude(np.G2, np.C2, np.D2, W);
        const double det = (s_.alpha - s_.p) * (s_.beta - s_.q) - s_.alpha * s_.beta;
        if (std::abs(det) < 1e-12) return;
        const auto [t, s] = amplitudes_for(s_, a.z, b.z);
        if (!std::isfinite(t) || !std::isfinite(s) || !(t > 0.0) || !(s > 0.0)) return;
        const Field U1 = t * U_, V1 = s * V_;
        const auto np1 = nodal_parts(d_, U1, V1);
        auto minval = [](const Eigen::VectorXd& G, const Eigen::VectorXd& C, const Eigen::VectorXd& D) {
            double best = kInf;
            for (int i = 0; i < G.size(); ++i) best = std::min(best, ratio(G(i), C(i), D(i)));
            return best;
        };
        const double old_val = std::min(minval(np.G1, np.C1, np.D1), minval(np.G2, np.C2, np.D2) / r_);
        const double new_val = std::min(minval(np1.G1, np1.C1, np1.D1), minval(np1.G2, np1.C2, np1.D2) / r_);
        if (new_val >= old_val) {
            U_ = U1;
            V_ = V1;
        }
    }

    void refresh() {
        const int ne = m_.num_elements();
        gu_.resize(ne);
        gv_.resize(ne);
        for (int e = 0; e < ne; ++e) element_update(e);
        G1_ = Eigen::VectorXd::Zero(n_);
        G2_ = Eigen::VectorXd::Zero(n_);
        ratio1_.resize(n_);
        ratio2_.resize(n_);
        for (int i = 0; i < n_; ++i) {
            node_update(m_.interior_nodes[i]);
            ratio2_(i) = ratio2_at(m_.interior_nodes[i]);
        }
    }

    void element_update(int e) {
        const Eigen::Vector2d a = element_gradient(m_, e, U_), b = element_gradient(m_, e, V_);
        const double ms = m_.element_measure(e);
        gu_[e] = ms * gradient_coef(a.squaredNorm(), s_.p) * a;
        gv_[e] = ms * gradient_coef(b.squaredNorm(), s_.q) * b;
    }

    // Recomputes both stiffness actions at node k and its first-equation ratio.
    void node_update(int k) {
        const int i = local_[k];
        if (i < 0) return;
        double g1 = 0.0, g2 = 0.0;
        for (const auto& [e, l] : star_[k]) {
            g1 += gu_[e].dot(m_.shape_grads[e].col(l));
            g2 += gv_[e].dot(m_.shape_grads[e].col(l));
        }
        G1_(i) = g1;
        G2_(i) = g2;
        ratio1_(i) = ratio1_at(k);
    }

    double ratio1_at(int k) const {
        const int i = local_[k];
        const double w = m_.lumped_mass(k);
        const double C = s_.c1 * d_.wf(k) * std::pow(U_(k), s_.alpha - 1.0) * std::pow(V_(k), s_.beta);
        return ratio(G1_(i), C, w * std::pow(U_(k), s_.p - 1.0));
    }

    double ratio2_at(int k) const {
        const int i = local_[k];
        const double w = m_.lumped_mass(k);
        const double C = s_.c2 * d_.wf(k) * std::pow(U_(k), s_.alpha) * std::pow(V_(k), s_.beta - 1.0);
        return ratio(G2_(i), C, w * std::pow(V_(k), s_.q - 1.0)) / r_;
    }

    double soft(double x) const { return std::isfinite(x) ? std::exp(-kappa_ * (x - ref_)) : 0.0; }

    int sweep(double delta) {
        refresh();
        ref_ = std::min(ratio1_.minCoeff(), ratio2_.minCoeff());
        kappa_ = 1.0 / (0.02 * std::max(1.0, std::abs(ref_)));
        double S = 0.0;
        for (int i = 0; i < n_; ++i) S += soft(ratio1_(i)) + soft(ratio2_(i));

        int accepted = 0;
        std::vector<int> nodes;
        std::vector<Eigen::Vector2d> old_gu, old_gv;
        for (int comp = 0; comp < 2; ++comp) {
            Field& X = comp == 0 ? U_ : V_;
            for (int k : m_.interior_nodes) {
                nodes.clear();
                for (const auto& [e, l] : star_[k])
                    for (int a = 0; a < m_.verts(); ++a) {
                        const int kk = m_.elements(e, a);
                        if (local_[kk] >= 0 && std::find(nodes.begin(), nodes.end(), kk) == nodes.end())
                            nodes.push_back(kk);
                    }
                old_gu.clear();
                old_gv.clear();
                double before = 0.0;
                for (int kk : nodes) before += soft(ratio1_(local_[kk])) + soft(ratio2_(local_[kk]));
                for (const auto& [e, l] : star_[k]) {
                    old_gu.push_back(gu_[e]);
                    old_gv.push_back(gv_[e]);
                }
                const double x0 = X(k);
                bool moved = false;
                for (double dir : {1.0, -1.0}) {
                    X(k) = x0 * std::exp(dir * delta);
                    for (const auto& [e, l] : star_[k]) element_update(e);
                    double after = 0.0;
                    bool keeps_floor = true;
                    for (int kk : nodes) {
                        node_update(kk);
                        ratio2_(local_[kk]) = ratio2_at(kk);
                        keeps_floor = keeps_floor && ratio1_(local_[kk]) >= ref_ && ratio2_(local_[kk]) >= ref_;
                        after += soft(ratio1_(local_[kk])) + soft(ratio2_(local_[kk]));
                    }
                    if (keeps_floor && after < before - 1e-12 * S) {
                        S += after - before;
                        moved = true;
                        break;
                    }
                }
                if (moved) {
                    ++accepted;
                    continue;
                }
                X(k) = x0;
                std::size_t j = 0;
                for (const auto& [e, l] : star_[k]) {
                    gu_[e] = old_gu[j];
                    gv_[e] = old_gv[j];
                    ++j;
                }
                for (int kk : nodes) {
                    node_update(kk);
                    ratio2_(local_[kk]) = ratio2_at(kk);
                }
            }
        }
        return accepted;
    }

    const Discretization& d_;
    const Mesh& m_;
    const ProblemSpec& s_;
    double r_;
    int n_ = 0;
    std::vector<std::vector<std::pair<int, int>>> star_;
    std::vector<int> local_;
    Field U_, V_;
    std::vector<Eigen::Vector2d> gu_, gv_;
    Eigen::VectorXd G1_, G2_, ratio1_, ratio2_;
    double ref_ = 0.0;
    double kappa_ = 1.0;
};

struct ECandidate {
    double a = -kInf;
    double b = -kInf;
    Field u;
    Field v;
    int origin = -1;
    int excluded = 0;

    double value(double r) const { return std::min(a, b / r); }
};

ECandidate score_candidate(const Discretization& d, Field u, Field v, int origin) {
    ECandidate c;
    const auto np = nodal_parts(d, u, v);
    for (int i = 0; i < np.G1.size(); ++i) {
        const double r1 = ratio(np.G1(i), np.C1(i), np.D1(i));
        const double r2 = ratio(np.G2(i), np.C2(i), np.D2(i));
        c.excluded += (np.D1(i) < kDenominatorFloor) + (np.D2(i) < kDenominatorFloor);
        c.a = i == 0 ? r1 : std::min(c.a, r1);
        c.b = i == 0 ? r2 : std::min(c.b, r2);
    }
    c.u = std::move(u);
    c.v = std::move(v);
    c.origin = origin;
    return c;
}

/// Pair with zero or negative interior entries lifted into the positive cone.
std::pair<Field, Field> lift(const EContext& ctx, const Field& u, const Field& v) {
    const auto& d = ctx.f.disc;
    auto fix = [&](const Field& x, const Field& base) {
        bool ok = true;
        for (int k : d.mesh.interior_nodes) ok = ok && x(k) > 0.0;
        if (ok) return x;
        Field y = x.cwiseAbs();
        const double scale = std::max(y.maxCoeff(), 1e-300) / base.maxCoeff();
        y += 1e-3 * scale * base;
        return y;
    };
    return {fix(u, ctx.f.pairs.phi.fn), fix(v, ctx.f.pairs.psi.fn)};
}

/// Rescales a start so that both effective couplings equal one, which makes the
/// ascent independent of (c1, c2).
std::pair<Field, Field> unit_couplings(const Discretization& d, const std::pair<Field, Field>& start) {
    const auto& s = d.spec;
    if (std::abs(d.regime.sob_margin) < 1e-12) return start;
    const auto [t, sc] = amplitudes_for(s, 1.0 / s.c1, 1.0 / s.c2);
    return {t * start.first, sc * start.second};
}

std::vector<std::pair<Field, Field>> e_start_pool(const EContext& ctx, int n, std::uint64_t seed,
                                                  const std::vector<std::pair<Field, Field>>& warm) {
    const Field& phi = ctx.f.pairs.phi.fn;
    const Field& psi = ctx.f.pairs.psi.fn;
    std::vector<std::pair<Field, Field>> pool;
    auto push = [&](const Field& u, const Field& v) {
        if (static_cast<int>(pool.size()) < n) pool.push_back(unit_couplings(ctx.f.disc, lift(ctx, u, v)));
    };
    push(phi, psi);
    if (!ctx.f.sstar.lambda_infinite && ctx.f.sstar.u_star.size()) push(ctx.f.sstar.u_star, psi);
    if (!ctx.f.sstar.mu_infinite && ctx.f.sstar.v_star.size()) push(phi, ctx.f.sstar.v_star);
    for (int k = 0; static_cast<int>(pool.size()) < n; ++k) {
        std::mt19937_64 rng(seed * 0xD1B54A32D192ED03ull + static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> unif(-0.25, 0.25);
        Field u = phi, v = psi;
        for (int i = 0; i < u.size(); ++i) {
            u(i) *= std::exp(unif(rng));
            v(i) *= std::exp(unif(rng));
        }
        push(u, v);
    }
    for (const auto& [u, v] : warm) pool.push_back(lift(ctx, u, v));
    return pool;
}

ECandidate ascend(const EContext& ctx, double r, const std::pair<Field, Field>& start, int sweeps, int origin) {
    ECandidate best;
    for (bool wide : {false, true}) {
        Field u = start.first, v = start.second;
        Ascent(ctx.f.disc, r).run(u, v, sweeps, wide);
        ECandidate c = score_candidate(ctx.f.disc, std::move(u), std::move(v), origin);
        if (!wide || c.value(r) > best.value(r)) best = std::move(c);
    }
    return best;
}

const ECandidate& best_e(const std::vector<ECandidate>& pool, double r) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pool.size(); ++i)
        if (pool[i].value(r) > pool[best].value(r)) best = i;
    return pool[best];
}

CurvePoint e_point(const EContext& ctx, double r, const ECandidate& c) {
    CurvePoint pt = make_point(r, c.value(r), CurveKind::lower_bound_on_sup);
    pt.a = c.a;
    pt.b = c.b;
    pt.excluded_nodes = c.excluded;
    pt.argmin_component = std::string(to_string(c.a <= c.b / r ? Component::first_equation
                                                                : Component::second_equation));
    pt.minimizer = make_state(ctx.f.disc, c.u, c.v, pt.value, pt.mu_value);
    if (!std::isfinite(pt.value)) pt.note = "no admissible node";
    return pt;
}

}  // namespace

InnerInfResult inner_inf(const Discretization& d, const Field& u, const Field& v, double r) {
    if (!(r > 0.0)) throw DomainError("inner_inf: r must be > 0");
    require_positive(d, u, v);
    const auto np = nodal_parts(d, u, v);
    const int n = static_cast<int>(np.G1.size());
    InnerInfResult out;
    out.ratio_table.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        out.ratio_table(i, 0) = ratio(np.G1(i), np.C1(i), np.D1(i));
        out.ratio_table(i, 1) = ratio(np.G2(i), np.C2(i), np.D2(i)) / r;
        out.excluded_nodes += (np.D1(i) < kDenominatorFloor) + (np.D2(i) < kDenominatorFloor);
        for (int c = 0; c < 2; ++c) {
            if (out.ratio_table(i, c) < out.value) {
                out.value = out.ratio_table(i, c);
                out.argmin_node = d.mesh.interior_nodes[i];
                out.argmin_component = c == 0 ? Component::first_equation : Component::second_equation;
            }
        }
    }
    return out;
}

ShapeScore shape_score(const Discretization& d, const Field& u, const Field& v) {
    require_positive(d, u, v);
    const auto np = nodal_parts(d, u, v);
    const auto a = best_amplitude(np.G1, np.C1, np.D1, kAmplitudeWindow);
    const auto b = best_amplitude(np.G2, np.C2, np.D2, kAmplitudeWindow);
    ShapeScore sc;
    sc.a = a.value;
    sc.b = b.value;
    sc.z1 = a.z;
    sc.z2 = b.z;
    sc.unbounded = a.unbounded || b.unbounded;
    sc.window_edge = a.edge || b.edge;
    return sc;
}

std::pair<double, double> amplitudes_for(const ProblemSpec& spec, double z1, double z2) {
    const double a = spec.alpha, b = spec.beta;
    const double det = (a - spec.p) * (b - spec.q) - a * b;
    if (std::abs(det) < 1e-12) throw DomainError("amplitudes_for: alpha/p + beta/q = 1");
    const double l1 = std::log(z1), l2 = std::log(z2);
    const double lt = ((b - spec.q) * l1 - b * l2) / det;
    const double ls = ((a - spec.p) * l2 - a * l1) / det;
    return {std::exp(lt), std::exp(ls)};
}

PiconeConstants picone_constants(const Discretization& d, const Box& box, double tol) {
    PiconeConstants pc;
    pc.box = box;
    const DofMap bd = box_dofs(d.mesh, box);
    if (bd.size() == 0) return pc;
    pc.C1 = first_eigenpair(d.mesh, d.spec.p, tol, 0, &bd).value;
    pc.C2 = d.spec.q == d.spec.p ? pc.C1 : first_eigenpair(d.mesh, d.spec.q, tol, 0, &bd).value;
    return pc;
}

EContext make_e_context(const FContext& f) {
    EContext ctx{f, {}};
    if (!f.disc.regime.interior_plus_zero) return ctx;
    for (const auto& box : nonnegative_boxes(f.disc.spec)) {
        auto pc = picone_constants(f.disc, box);
        if (std::isfinite(pc.C1) && std::isfinite(pc.C2)) ctx.picone.push_back(pc);
    }
    return ctx;
}

CurvePoint picone_upper(const EContext& ctx, double r) {
    if (!(r > 0.0)) throw DomainError("picone_upper: r must be > 0");
    if (ctx.picone.empty()) throw DomainError("no certificate region");
    double best = kInf;
    for (const auto& pc : ctx.picone) best = std::min(best, std::min(pc.C1, pc.C2 / r));
    return make_point(r, best, CurveKind::picone_certificate);
}

CurvePoint picone_upper(const Discretization& d, double r, const Box& box) {
    if (!(r > 0.0)) throw DomainError("picone_upper: r must be > 0");
    if (!d.regime.interior_plus_zero) throw DomainError("no certificate region");
    const auto pc = picone_constants(d, box);
    if (!std::isfinite(pc.C1)) throw DomainError("picone_upper: box holds no interior nodes");
    return make_point(r, std::min(pc.C1, pc.C2 / r), CurveKind::picone_certificate);
}

CurvePoint lambda_e_lower(const EContext& ctx, double r, const EOptions& opts,
                          const std::vector<std::pair<Field, Field>>& warm) {
    if (!(r > 0.0)) throw DomainError("lambda_e_lower: r must be > 0");
    const auto starts = e_start_pool(ctx, opts.n_starts, opts.seed, warm);
    std::vector<ECandidate> cands(starts.size());
    parallel_for(static_cast<int>(starts.size()), opts.jobs,
                 [&](int i) { cands[i] = ascend(ctx, r, starts[i], opts.sweeps, 0); });
    CurvePoint pt = e_point(ctx, r, best_e(cands, r));
    pt.starts_used = static_cast<int>(starts.size());
    return pt;
}

SupersolutionReport supersolution_check(const Discretization& d, const Field& u, const Field& v, double lambda,
                                        double mu, double tol) {
    if (!(lambda > 0.0)) throw DomainError("supersolution_check: lambda must be > 0");
    if (!(mu > 0.0)) throw DomainError("supersolution_check: mu must be > 0");
    SupersolutionReport rep;
    rep.inner = inner_inf(d, u, v, mu / lambda);
    rep.margin = rep.inner.value - lambda;
    rep.ok = rep.inner.value >= lambda - tol;
    return rep;
}

StationarityReport stationarity_check(const Discretization& d, const Field& u, const Field& v, double r, double tol) {
    StationarityReport rep;
    rep.lambda = inner_inf(d, u, v, r).value;
    const auto res = system_residuals(d, u, v, rep.lambda, rep.lambda * r);
    rep.residual_u = res.ru.cwiseAbs().maxCoeff();
    rep.residual_v = res.rv.cwiseAbs().maxCoeff();
    rep.rel_residual_u = rep.residual_u / std::max(res.scale_u.maxCoeff(), 1e-300);
    rep.rel_residual_v = rep.residual_v / std::max(res.scale_v.maxCoeff(), 1e-300);
    rep.is_solution = rep.rel_residual_u <= tol && rep.rel_residual_v <= tol;
    return rep;
}

ECurve trace_curve_e(const EContext& ctx, const std::vector<double>& grid, const EOptions& opts,
                     const std::vector<std::pair<Field, Field>>& warm) {
    check_grid(grid, "trace_curve_e");
    const int m = static_cast<int>(grid.size());
    const auto starts = e_start_pool(ctx, opts.n_starts, opts.seed, warm);
    const int ns = static_cast<int>(starts.size());

    std::vector<ECandidate> pool(static_cast<std::size_t>(m) * ns);
    parallel_for(m * ns, opts.jobs,
                 [&](int j) { pool[j] = ascend(ctx, grid[j / ns], starts[j % ns], opts.sweeps, j / ns); });

    std::vector<std::optional<ECandidate>> polished(m);
    parallel_for(m, opts.jobs, [&](int i) {
        const ECandidate& c = best_e(pool, grid[i]);
        if (c.origin != i) polished[i] = ascend(ctx, grid[i], {c.u, c.v}, opts.sweeps, i);
    });
    for (auto& c : polished)
        if (c) pool.push_back(std::move(*c));

    ECurve out;
    for (int i = 0; i < m; ++i) {
        out.lower.push_back(e_point(ctx, grid[i], best_e(pool, grid[i])));
        out.lower.back().starts_used = ns;
    }
    out.flags = flag_monotonicity(out.lower, 2.0 * opts.tol);
    if (!ctx.picone.empty())
        for (double r : grid) out.certificate.push_back(picone_upper(ctx, r));

    const auto np = nodal_parts(ctx.f.disc, ctx.f.pairs.phi.fn, ctx.f.pairs.psi.fn);
    out.any_unbounded = best_amplitude(np.G1, np.C1, np.D1, kAmplitudeWindow).unbounded ||
                        best_amplitude(np.G2, np.C2, np.D2, kAmplitudeWindow).unbounded;

    if (std::abs(ctx.f.disc.regime.sob_margin) > 1e-12) {
        const double r = grid[m / 2];
        EContext scaled = ctx;
        scaled.f.disc = with_couplings(ctx.f.disc, 4.0 * ctx.f.disc.spec.c1, 0.25 * ctx.f.disc.spec.c2);
        EOptions single = opts;
        const double v0 = lambda_e_lower(ctx, r, single).value;
        const double v1 = lambda_e_lower(scaled, r, single).value;
        out.c_invariance_gap = std::isfinite(v0) && std::isfinite(v1) ? std::abs(v0 - v1) : 0.0;
    }
    return out;
}

}  // namespace plapsys
