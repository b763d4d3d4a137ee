#include <chrono>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "plapsys/errors.hpp"
#include "plapsys/nehari.hpp"
#include "support.hpp"

using namespace plapsys;
using testing_support::constant_weight_1d;
using testing_support::two_piece_1d;

class NehariSolution : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        ctx_ = new FContext(make_f_context(two_piece_1d(0.75, 65)));
        lambda_f1_ = lambda_f_star(*ctx_, 1.0, {}).value;
        lambda_ = 0.5 * (ctx_->pairs.lambda1() + lambda_f1_);
        NehariOptions o;
        o.tol = kTol;
        outcome_ = new NehariOutcome(minimize_nehari(ctx_->disc, ctx_->pairs, lambda_, lambda_, o));
    }
    static void TearDownTestSuite() {
        delete ctx_;
        delete outcome_;
    }
    static const SolveResult& sol() { return *outcome_->solution; }

    static constexpr double kTol = 1e-6;
    static inline FContext* ctx_ = nullptr;
    static inline NehariOutcome* outcome_ = nullptr;
    static inline double lambda_f1_ = 0.0;
    static inline double lambda_ = 0.0;
};

TEST_F(NehariSolution, AcceptedWithDiagnostics) {
    ASSERT_TRUE(outcome_->found()) << outcome_->failure.reason;
    const auto& s = sol();
    EXPECT_GT(lambda_f1_, ctx_->pairs.lambda1() * 1.1);
    EXPECT_LE(s.residual_u, kTol * s.scale_u);
    EXPECT_LE(s.residual_v, kTol * s.scale_v);
    EXPECT_EQ(s.positivity, Positivity::positive_interior);
    for (int k : ctx_->disc.mesh.interior_nodes) {
        EXPECT_GT(s.u(k), 0.0);
        EXPECT_GT(s.v(k), 0.0);
    }
    EXPECT_GT(std::abs(s.det_H), s.det_floor);
    const auto st = make_state(ctx_->disc, s.u, s.v, lambda_, lambda_);
    EXPECT_LE(std::abs(s.P), kTol * (std::abs(st.A) + std::abs(st.F)));
    EXPECT_LE(std::abs(s.Q), kTol * (std::abs(st.B) + std::abs(st.F)));
}

TEST_F(NehariSolution, RecomputedQuantitiesAgree) {
    ASSERT_TRUE(outcome_->found());
    const auto& s = sol();
    const double E = energy(ctx_->disc, s.u, s.v, lambda_, lambda_);
    EXPECT_NEAR(s.energy, E, 1e-12 * std::max(1.0, std::abs(E)));
    const auto [ru, rv] = verify_weak_solution(ctx_->disc, s.u, s.v, lambda_, lambda_);
    EXPECT_NEAR(s.residual_u, ru, 1e-12);
    EXPECT_NEAR(s.residual_v, rv, 1e-12);
}

TEST_F(NehariSolution, IsSupersolutionAndStationary) {
    ASSERT_TRUE(outcome_->found());
    const auto& s = sol();
    const auto sup = supersolution_check(ctx_->disc, s.u, s.v, lambda_, lambda_, 1e-5);
    EXPECT_TRUE(sup.ok);
    EXPECT_GE(sup.margin, -1e-5);
    EXPECT_TRUE(stationarity_check(ctx_->disc, s.u, s.v, 1.0, 1e-5).is_solution);
}

TEST_F(NehariSolution, WarmStartLiftsLowerBound) {
    ASSERT_TRUE(outcome_->found());
    const auto ectx = make_e_context(*ctx_);
    EOptions o;
    o.n_starts = 1;
    o.sweeps = 2;
    EXPECT_GE(lambda_e_lower(ectx, 1.0, o, {{sol().u, sol().v}}).value, lambda_ - 1e-5);
}

TEST_F(NehariSolution, PerturbationRaisesResidual) {
    ASSERT_TRUE(outcome_->found());
    const auto& s = sol();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(-1e-3, 1e-3);
    Field u = s.u;
    for (int k : ctx_->disc.mesh.interior_nodes) u(k) += U(rng) * s.u.maxCoeff();
    const auto [ru, rv] = verify_weak_solution(ctx_->disc, u, s.v, lambda_, lambda_);
    EXPECT_GE(ru, 10.0 * s.residual_u);
    EXPECT_GE(rv, 10.0 * s.residual_v);
}

TEST_F(NehariSolution, ScalingTransfersToOtherCouplings) {
    ASSERT_TRUE(outcome_->found());
    const auto& s = sol();
    const auto& spec = ctx_->disc.spec;
    for (auto [d1, d2] : std::vector<std::pair<double, double>>{{spec.alpha, spec.beta}, {5.0, 0.2}, {0.3, 7.0}}) {
        const auto [t, sc] = scale_solution(spec.c1, spec.c2, d1, d2, spec);
        const auto d = with_couplings(ctx_->disc, d1, d2);
        const auto moved = evaluate_solution(d, Field(t * s.u), Field(sc * s.v), lambda_, lambda_);
        EXPECT_LE(moved.residual_u, 10.0 * kTol * moved.scale_u);
        EXPECT_LE(moved.residual_v, 10.0 * kTol * moved.scale_v);
    }
}

TEST_F(NehariSolution, MoreStartsNeverRaiseEstimate) {
    ASSERT_TRUE(outcome_->found());
    double prev = kInf;
    for (int n : {1, 2, 4, 6}) {
        NehariOptions o;
        o.tol = kTol;
        o.n_starts = n;
        const auto out = minimize_nehari(ctx_->disc, ctx_->pairs, lambda_, lambda_, o);
        ASSERT_TRUE(out.found());
        EXPECT_LE(out.solution->n_lambda_mu, prev);
        prev = out.solution->n_lambda_mu;
    }
}

TEST_F(NehariSolution, SolutionsBelowCurveAreVerified) {
    const auto pts = trace_curve_f(*ctx_, {0.5, 1.0, 2.0}, {});
    NehariOptions o;
    o.n_starts = 2;
    const auto sols = solutions_below_curve(*ctx_, pts, 0.02, o);
    EXPECT_EQ(sols.size(), 3u);
    for (const auto& s : sols) {
        EXPECT_LE(s.residual_u, 1e-6 * s.scale_u);
        EXPECT_EQ(s.positivity, Positivity::positive_interior);
    }
}

TEST(VerifyWeakSolution, ZeroPair) {
    const auto d = discretize(two_piece_1d(0.75, 17));
    const Field z = Field::Zero(d.num_nodes());
    const auto [ru, rv] = verify_weak_solution(d, z, z, 3.0, 5.0);
    EXPECT_EQ(ru, 0.0);
    EXPECT_EQ(rv, 0.0);
}

TEST(VerifyWeakSolution, DecoupledEigenpairs) {
    const auto d = discretize(constant_weight_1d(0.0, 65, 2.0, 3.0, 2.0, 3.0));
    const auto pp = principal_pairs(d);
    const auto [ru, rv] = verify_weak_solution(d, pp.phi.fn, pp.psi.fn, pp.lambda1(), pp.mu1());
    EXPECT_LT(ru, 1e-9);
    EXPECT_LT(rv, 1e-9);
}

TEST(MinimizeNehari, NegativeWeightBelowEigenvalues) {
    const auto d = discretize(constant_weight_1d(-1.0));
    const auto pp = principal_pairs(d);
    const auto out = minimize_nehari(d, pp, pp.lambda1() / 2, pp.mu1() / 2);
    EXPECT_FALSE(out.found());
    EXPECT_NE(out.failure.reason.find("Nehari set empty"), std::string::npos);
    EXPECT_EQ(out.failure.feasible_starts, 0);
}

TEST(MinimizeNehari, SemiTrivialPairsRejected) {
    const auto d = discretize(constant_weight_1d(0.0));
    const auto pp = principal_pairs(d);
    NehariOptions o;
    o.n_starts = 1;
    o.warm = {{pp.phi.fn, Field::Zero(d.num_nodes())}, {Field::Zero(d.num_nodes()), pp.psi.fn}};
    const auto out = minimize_nehari(d, pp, pp.lambda1(), pp.mu1(), o);
    EXPECT_FALSE(out.found());
    EXPECT_NE(out.failure.reason.find("semi-trivial"), std::string::npos);
}

TEST(MinimizeNehari, RejectsNonFiniteParameters) {
    const auto d = discretize(two_piece_1d(0.75, 17));
    const auto pp = principal_pairs(d);
    EXPECT_THROW(minimize_nehari(d, pp, kInf, 1.0), DomainError);
}

namespace {

ProbeContext probe_for(const ProblemSpec& spec) { return make_probe_context(make_e_context(make_f_context(spec))); }

}  // namespace

TEST(Probe, NegativeWeightNoNontrivial) {
    const auto pc = probe_for(constant_weight_1d(-1.0));
    EXPECT_EQ(nonexistence_probe(pc.lambda1 / 2, 2 * pc.mu1, pc), ProbeClass::no_nontrivial);
    EXPECT_EQ(nonexistence_probe(2 * pc.lambda1, 2 * pc.mu1, pc), ProbeClass::inconclusive);
}

TEST(Probe, PositiveWeightNoPositive) {
    const auto pc = probe_for(constant_weight_1d(1.0));
    EXPECT_EQ(nonexistence_probe(2 * pc.lambda1, pc.mu1 / 2, pc), ProbeClass::no_positive_f_nonneg);
    EXPECT_EQ(nonexistence_probe(pc.lambda1 / 2, pc.mu1 / 2, pc), ProbeClass::inconclusive);
}

TEST(Probe, SignChangingInsideRegionIsInconclusive) {
    const auto pc = probe_for(two_piece_1d());
    EXPECT_TRUE(pc.has_certificate);
    EXPECT_EQ(nonexistence_probe(1.2 * pc.lambda1, 1.2 * pc.mu1, pc), ProbeClass::inconclusive);
    EXPECT_EQ(nonexistence_probe(1.01 * pc.C1, 1.2 * pc.mu1, pc), ProbeClass::beyond_certificate);
}

TEST(Probe, UsesNoIteration) {
    const auto pc = probe_for(constant_weight_1d(-1.0));
    const auto t0 = std::chrono::steady_clock::now();
    for (int k = 0; k < 1000; ++k) (void)nonexistence_probe(pc.lambda1 / 2, pc.mu1 / 2, pc);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(secs / 1000, 1e-3);
}
