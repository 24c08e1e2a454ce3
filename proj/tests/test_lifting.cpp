#include <gtest/gtest.h>

#include <boost/math/special_functions/binomial.hpp>

#include "heomcp/lifting.hpp"

using namespace heomcp;

namespace {
// five-point stencil derivative of Xi along the exact flow
VecX xi_dot_fd(const LiftedSystem& ls, const ReducedSystem& r, double t, double h) {
    auto x = [&](double s) { return xi_of(ls, lambda_at(r.l, r.lambda0, s)); };
    return (-x(t + 2 * h) + 8 * x(t + h) - 8 * x(t - h) + x(t - 2 * h)) / (12 * h);
}
}  // namespace

TEST(Fit, JcFactor) {
    auto r = reduced_system(jaynes_cummings(10, 1));
    auto q = fit_quadratic_form(r, r.factors[0].P);
    MatX want = MatX::Zero(2, 2);
    want(0, 0) = 0.25;
    EXPECT_LT((q.s - want).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(q.residual, 1e-9);
}

TEST(Fit, RevivingFactor) {
    for (auto init : {"zero", "stationary"}) {
        auto r = reduced_system(reviving_2level(0.5, 0.5, 1, 4, init));
        auto q = fit_quadratic_form(r, r.factors[0].P);
        EXPECT_NEAR(q.s(0, 0), 0.25, 1e-10);
        EXPECT_NEAR(q.s(0, 1), 0.0, 1e-10);
        EXPECT_NEAR(q.s(1, 1), 0.0, 1e-10);
    }
}

TEST(Fit, QuarticTargetIsRejected) {
    auto r = reduced_system(jaynes_cummings(10, 1));
    EXPECT_THROW(fit_quadratic_form(r, r.eh), NotQuadratic);
}

TEST(Fit, BathP1FormImpliesNonvanishingFactor) {
    auto r = reduced_system(bath(1.2, 0.7, 1, 0.3));
    const MatX& s = r.s_forms[0];
    auto hz = default_horizon(r);
    auto tr = propagate(r, hz.t_end, hz.dt);
    for (size_t k = 1; k < tr.t.size(); ++k) {
        double v = quadratic_value(s, r.lambda0, tr.lambda[k]);
        double P1 = r.factors[0].P(tr.lambda[k]);
        if (v > 0) EXPECT_GT(P1 * P1, 0.0);
    }
}

TEST(Lift, ClosureResidualAndGIdentity) {
    struct Case {
        ReducedSystem r;
        Poly P;
    };
    auto rb = reduced_system(bath(1.2, 0.7, 1, 0.3));
    auto rs = reduced_system(spin_boson(1, 3, 2, 0.8));
    for (auto& [r, P] : std::vector<Case>{{rb, rb.factors[1].P}, {rs, rs.factors[0].P}}) {
        auto ls = lift_polynomial(r, P);
        const int d = static_cast<int>(r.l.rows());
        const int m = P.degree();
        EXPECT_LE(ls.dim(), boost::math::binomial_coefficient<double>(d + m, m));
        auto hz = default_horizon(r, 20.0, 1000);
        for (int k = 1; k <= 1000; ++k) {
            double t = k * hz.dt;
            VecX lam = lambda_at(r.l, r.lambda0, t);
            VecX xi = xi_of(ls, lam);
            double p = P(lam);
            EXPECT_NEAR(xi(0), p - ls.c, 1e-9 * std::max(1.0, std::abs(ls.c)));
            double G = eval_G(ls, xi);
            double p0 = P(r.lambda0);
            EXPECT_NEAR(G, (p0 - ls.c) * (p0 - ls.c) - (p - ls.c) * (p - ls.c), 1e-9 * std::max(1.0, ls.c * ls.c));
            if (std::abs(p0) < 1e-12) {
                EXPECT_LE(G, 2 * ls.c * p + 1e-9 * ls.c * ls.c);
                if (std::abs(G) > 1e-9 * ls.c * ls.c) EXPECT_EQ(G > 0, p > 0 && p < 2 * ls.c);
            }
            if (k % 50 == 0) {
                VecX fd = xi_dot_fd(ls, r, t, 1e-3 * hz.dt * 50);
                VecX an = ls.L * xi;
                EXPECT_LE((fd - an).norm(), 1e-8 * std::max(1.0, an.norm())) << "t=" << t;
            }
        }
    }
}

TEST(Lift, AnchorAndAsymptoteValues) {
    auto r = reduced_system(bath(1.2, 0.7, 1, 0.3));
    auto P2 = r.factors[1].P;
    auto ls = lift_polynomial(r, P2);
    // c is the long-time value of P2
    VecX far = lambda_at(r.l, r.lambda0, 500.0);
    EXPECT_NEAR(ls.c, P2(far), 1e-9 * std::max(1.0, std::abs(ls.c)));
    EXPECT_GT(ls.c, 0.0);
    VecX xi = ls.xi0;
    xi(0) = 0;
    EXPECT_NEAR(eval_G(ls, xi), ls.xi0(0) * ls.xi0(0), 1e-14);
    EXPECT_NEAR(eval_G(ls, ls.xi0), 0.0, 1e-14);
    EXPECT_THROW(eval_G(ls, VecX::Zero(ls.dim() + 1)), std::invalid_argument);
    auto lo = lift_polynomial(r, P2, LiftSign::lower);
    EXPECT_NEAR(lo.xi0(0), -ls.xi0(0), 1e-14);
}

TEST(Lift, LinearPolynomialIsIdentityEmbedding) {
    auto r = reduced_system(jaynes_cummings(10, 1));
    Poly P = Poly::var(2, 0);
    auto ls = lift_polynomial(r, P, LiftSign::upper, 0.0);
    ASSERT_EQ(ls.dim(), 2);
    // basis {lambda2, lambda1} in map order; Xi = (lambda1, lambda2)
    VecX lam(2);
    lam << 0.3, -0.7;
    VecX xi = xi_of(ls, lam);
    EXPECT_NEAR(xi(0), 0.3, 1e-15);
    EXPECT_NEAR(xi(1), -0.7, 1e-15);
    EXPECT_LT((ls.L - r.l).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Lift, GrowingModeHasNoAsymptote) {
    auto r = reduced_system(jaynes_cummings(10, 1));
    r.l = -r.l;
    EXPECT_THROW(lift_polynomial(r, r.factors[0].P), NoAsymptote);
    EXPECT_NO_THROW(lift_polynomial(r, r.factors[0].P, LiftSign::upper, 0.1));
}

TEST(Lift, JsonDump) {
    auto r = reduced_system(bath(1.2, 0.7, 1, 0.3));
    auto ls = lift_polynomial(r, r.factors[1].P);
    auto j = lifted_to_json(ls);
    EXPECT_EQ(j["basis"].size(), static_cast<size_t>(ls.dim()));
    EXPECT_EQ(j["L"].size(), static_cast<size_t>(ls.dim()));
    EXPECT_DOUBLE_EQ(j["c"].get<double>(), ls.c);
}
