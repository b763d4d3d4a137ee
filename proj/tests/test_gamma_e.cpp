#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "plapsys/errors.hpp"
#include "plapsys/gamma_e.hpp"
#include "support.hpp"

using namespace plapsys;
using testing_support::constant_weight_1d;
using testing_support::two_piece_1d;

namespace {

Field random_positive(const Mesh& m, std::mt19937_64& rng, double lo = 0.2) {
    std::uniform_real_distribution<double> U(lo, 1.0);
    Field u = Field::Zero(m.num_nodes());
    for (int k : m.interior_nodes) u(k) = U(rng);
    return u;
}

}  // namespace

TEST(InnerInf, DecoupledEigenpairOnMatchedRay) {
    const auto d = discretize(constant_weight_1d(0.0));
    const auto pp = principal_pairs(d);
    const auto res = inner_inf(d, pp.phi.fn, pp.psi.fn, pp.mu1() / pp.lambda1());
    EXPECT_NEAR(res.value, pp.lambda1(), 1e-8 * pp.lambda1());
    EXPECT_LT(res.ratio_table.maxCoeff() - res.ratio_table.minCoeff(), 1e-7);
    EXPECT_EQ(res.excluded_nodes, 0);
}

TEST(InnerInf, DecoupledEigenpairGeneralRay) {
    auto spec = constant_weight_1d(0.0, 65, 2.0, 3.0, 2.0, 3.0);
    const auto d = discretize(spec);
    const auto pp = principal_pairs(d);
    for (double r : {0.1, 0.7, 4.0}) {
        const double expect = std::min(pp.lambda1(), pp.mu1() / r);
        EXPECT_NEAR(inner_inf(d, pp.phi.fn, pp.psi.fn, r).value, expect, 1e-7 * expect);
    }
}

TEST(InnerInf, ValueIsTableMinimum) {
    const auto d = discretize(two_piece_1d());
    std::mt19937_64 rng(1);
    const auto res = inner_inf(d, random_positive(d.mesh, rng), random_positive(d.mesh, rng), 2.0);
    EXPECT_EQ(res.value, res.ratio_table.minCoeff());
    const int row = static_cast<int>(std::find(d.mesh.interior_nodes.begin(), d.mesh.interior_nodes.end(),
                                               res.argmin_node) -
                                     d.mesh.interior_nodes.begin());
    const int col = res.argmin_component == Component::first_equation ? 0 : 1;
    EXPECT_EQ(res.ratio_table(row, col), res.value);
}

TEST(InnerInf, BelowRandomConeSamples) {
    auto spec = two_piece_1d(0.6, 33);
    spec.q = 3.0;
    spec.beta = 3.0;
    spec.c1 = 1.7;
    spec.c2 = 0.4;
    const auto d = discretize(spec);
    const auto Q = oracle::make_quotient_1d(33, [](double x) { return x >= 0.6 ? 1.0 : -1.0; }, spec.p, spec.q,
                                            spec.alpha, spec.beta, spec.c1, spec.c2);
    std::mt19937_64 rng(2);
    for (int pair = 0; pair < 5; ++pair) {
        const Field u = random_positive(d.mesh, rng), v = random_positive(d.mesh, rng);
        const double r = 0.5 + pair;
        const double val = inner_inf(d, u, v, r).value;
        for (int k = 0; k < 500; ++k) {
            Eigen::VectorXd xi, eta;
            oracle::random_test_pair(rng, 33, xi, eta);
            const double L = Q(u, v, xi, eta, r);
            EXPECT_GE(L - val, -1e-12 * std::max(1.0, std::abs(val)));
        }
        Eigen::VectorXd xi = Eigen::VectorXd::Zero(33), eta = Eigen::VectorXd::Zero(33);
        const auto res = inner_inf(d, u, v, r);
        (res.argmin_component == Component::first_equation ? xi : eta)(res.argmin_node) = 1.0;
        EXPECT_NEAR(Q(u, v, xi, eta, r), val, 1e-10 * std::max(1.0, std::abs(val)));
    }
}

TEST(InnerInf, RejectsPairsOutsideCone) {
    const auto d = discretize(two_piece_1d(0.75, 17));
    std::mt19937_64 rng(3);
    Field u = random_positive(d.mesh, rng), v = random_positive(d.mesh, rng);
    u(d.mesh.interior_nodes[3]) = 0.0;
    try {
        inner_inf(d, u, v, 1.0);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("outside positive cone"), std::string::npos);
    }
}

TEST(ShapeScore, AgreesWithInnerInfAtChosenAmplitudes) {
    auto spec = two_piece_1d(0.6, 33);
    spec.alpha = 3.0;
    const auto d = discretize(spec);
    std::mt19937_64 rng(4);
    const Field u = random_positive(d.mesh, rng), v = random_positive(d.mesh, rng);
    const auto sc = shape_score(d, u, v);
    ASSERT_FALSE(sc.unbounded);
    const auto [t, s] = amplitudes_for(spec, sc.z1, sc.z2);
    EXPECT_NEAR(std::pow(t, spec.alpha - spec.p) * std::pow(s, spec.beta), sc.z1, 1e-10 * sc.z1);
    EXPECT_NEAR(std::pow(t, spec.alpha) * std::pow(s, spec.beta - spec.q), sc.z2, 1e-10 * sc.z2);
    for (double r : {0.3, 1.0, 3.0}) {
        const double val = inner_inf(d, Field(t * u), Field(s * v), r).value;
        EXPECT_NEAR(val, std::min(sc.a, sc.b / r), 1e-8 * std::abs(val));
    }
}

TEST(ShapeScore, NegativeWeightGrowsWithoutLimit) {
    const auto d = discretize(constant_weight_1d(-1.0));
    const auto pp = principal_pairs(d);
    EXPECT_TRUE(shape_score(d, pp.phi.fn, pp.psi.fn).unbounded);
}

TEST(LambdaELower, DecoupledPrincipalStartSuffices) {
    const auto ectx = make_e_context(make_f_context(constant_weight_1d(0.0)));
    EOptions o;
    o.n_starts = 2;
    o.sweeps = 3;
    for (double r : {0.5, 2.0}) {
        const double floor = std::min(ectx.f.pairs.lambda1(), ectx.f.pairs.mu1() / r);
        EXPECT_GE(lambda_e_lower(ectx, r, o).value, floor - o.tol);
    }
}

TEST(LambdaELower, NegativeWeightTrendsUpward) {
    const auto ectx = make_e_context(make_f_context(constant_weight_1d(-1.0, 33)));
    EOptions small, large;
    small.n_starts = large.n_starts = 1;
    small.sweeps = 1;
    large.sweeps = 6;
    const double a = lambda_e_lower(ectx, 1.0, small).value, b = lambda_e_lower(ectx, 1.0, large).value;
    EXPECT_GE(b, a);
    EXPECT_GT(b, 100.0 * ectx.f.pairs.lambda1());
}

TEST(Picone, WholeDomainGivesPrincipalValue) {
    const auto d = discretize(constant_weight_1d(0.0));
    const auto pp = principal_pairs(d);
    const auto pc = picone_constants(d, d.spec.domain.bounds);
    EXPECT_NEAR(pc.C1, pp.lambda1(), 1e-9 * pp.lambda1());
    EXPECT_NEAR(picone_upper(d, 1.0, d.spec.domain.bounds).value, pp.lambda1(), 1e-9 * pp.lambda1());
}

TEST(Picone, ShrinkingBoxesIncreaseConstant) {
    const auto d = discretize(constant_weight_1d(0.0, 129, 2.0, 3.0, 2.0, 3.0));
    double prev1 = 0.0, prev2 = 0.0;
    for (double a : {0.0, 0.1, 0.25, 0.4}) {
        Box b;
        b.x = {a, 1.0 - a};
        const auto pc = picone_constants(d, b);
        EXPECT_GT(pc.C1, prev1);
        EXPECT_GT(pc.C2, prev2);
        prev1 = pc.C1;
        prev2 = pc.C2;
    }
}

TEST(Picone, NoCertificateForNegativeWeight) {
    const auto ectx = make_e_context(make_f_context(constant_weight_1d(-1.0, 17)));
    EXPECT_TRUE(ectx.picone.empty());
    try {
        picone_upper(ectx, 1.0);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_STREQ(e.what(), "no certificate region");
    }
}

TEST(Supersolution, DecoupledEigenpair) {
    const auto d = discretize(constant_weight_1d(0.0));
    const auto pp = principal_pairs(d);
    const auto below = supersolution_check(d, pp.phi.fn, pp.psi.fn, pp.lambda1() / 2, pp.mu1() / 2, 1e-8);
    EXPECT_TRUE(below.ok);
    EXPECT_NEAR(below.margin, pp.lambda1() / 2, 1e-7);
    EXPECT_FALSE(supersolution_check(d, pp.phi.fn, pp.psi.fn, 2 * pp.lambda1(), 2 * pp.mu1(), 1e-8).ok);
    EXPECT_THROW(supersolution_check(d, pp.phi.fn, pp.psi.fn, 0.0, 1.0, 1e-8), DomainError);
}

TEST(Stationarity, DecoupledEigenpairIsSolution) {
    const auto d = discretize(constant_weight_1d(0.0));
    const auto pp = principal_pairs(d);
    const auto rep = stationarity_check(d, pp.phi.fn, pp.psi.fn, pp.mu1() / pp.lambda1(), 1e-8);
    EXPECT_TRUE(rep.is_solution);
    EXPECT_NEAR(rep.lambda, pp.lambda1(), 1e-8 * pp.lambda1());
}

TEST(Stationarity, RandomPairIsNotSolution) {
    const auto d = discretize(two_piece_1d());
    std::mt19937_64 rng(5);
    const auto rep = stationarity_check(d, random_positive(d.mesh, rng), random_positive(d.mesh, rng), 1.0, 1e-6);
    EXPECT_FALSE(rep.is_solution);
    EXPECT_GT(rep.rel_residual_u, 1e-3);
}

TEST(TraceE, NonnegativeWeightStaysBelowFloor) {
    const auto ectx = make_e_context(make_f_context(constant_weight_1d(1.0, 65, 2.0, 3.0, 2.0, 3.0)));
    EOptions o;
    o.n_starts = 3;
    o.sweeps = 4;
    const auto ec = trace_curve_e(ectx, {0.3, 1.0, 3.0}, o);
    ASSERT_EQ(ec.certificate.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        const double r = ec.lower[i].r;
        EXPECT_LE(ec.lower[i].value, std::max(ectx.f.pairs.lambda1(), ectx.f.pairs.mu1() / r) + o.tol);
        EXPECT_TRUE(std::isfinite(ec.certificate[i].value));
        EXPECT_LE(ec.lower[i].value, ec.certificate[i].value + o.tol);
    }
}
