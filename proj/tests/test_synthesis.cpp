#include <gtest/gtest.h>

#include "heomcp/synthesis.hpp"

using namespace heomcp;

namespace {
Mat4 sandwich_transfer(const Terms& t) { return transfer_of_sandwich_sum(t); }
}  // namespace

TEST(Targets, ClosedFormsAndIdentityStart) {
    double g = 0.4, w = 1.7, a = 0.3;
    auto rv = target_reviving(g, w);
    auto ge = target_generalized(g, w, a);
    for (double t : {0.0, 0.3, 1.1, 4.0}) {
        EXPECT_NEAR(rv.T.at(t)(1, 1), std::exp(-g * t) * std::cos(w * t), 1e-14);
        EXPECT_NEAR(ge.T.at(t)(2, 2), std::exp(-g * t) * (1 + 2 * a * (std::cos(w * t) - 1)), 1e-14);
        EXPECT_NEAR(rv.T.at(t)(3, 3), 1.0, 1e-14);
    }
    // JC: cosh/sinh form in the over-damped regime, cos/sin form below it
    for (auto [gam, z] : std::vector<std::pair<double, double>>{{0.1, 3.0}, {1.0, 0.4}}) {
        auto jc = target_jaynes_cummings(gam, z);
        for (double t : {0.2, 1.5, 6.0}) {
            double f;
            double d2 = z * z - 2 * gam * z;
            if (d2 > 0) {
                double d = std::sqrt(d2);
                f = std::exp(-z * t / 2) * (std::cosh(d * t / 2) + z / d * std::sinh(d * t / 2));
            } else {
                double d = std::sqrt(-d2);
                f = std::exp(-z * t / 2) * (std::cos(d * t / 2) + z / d * std::sin(d * t / 2));
            }
            Mat4 T = jc.T.at(t);
            EXPECT_NEAR(T(1, 1), f, 1e-13);
            EXPECT_NEAR(T(3, 3), f * f, 1e-13);
            EXPECT_NEAR(T(3, 0), f * f - 1, 1e-13);
        }
        EXPECT_LT((jc.T.deriv0(0) - Mat4::Identity()).norm(), 1e-14);
    }
}

TEST(Targets, DerivativesMatchFiniteDifferences) {
    auto t = target_jaynes_cummings(0.7, 1.3);
    auto d = t.T.derivative();
    double h = 1e-5, s = 0.8;
    Mat4 fd = (t.T.at(s + h) - t.T.at(s - h)) / (2 * h);
    EXPECT_LT((fd - d.at(s)).cwiseAbs().maxCoeff(), 1e-8);
    // deriv0 vs repeated derivative()
    ExpPolyMat dd = t.T;
    for (int v = 0; v <= 5; ++v) {
        EXPECT_LT((dd.at(0) - t.T.deriv0(v)).cwiseAbs().maxCoeff(), 1e-12);
        dd = dd.derivative();
    }
}

TEST(Synthesis, RevivingFirstLevelIsDephasing) {
    double g = 0.6, w = 1.0;
    auto lv = solve_generator_level({target_reviving(g, w).T}, w);
    Mat4c want = Mat4c::Zero();
    want(0, 0) = -g / 2;
    want(3, 3) = g / 2;
    EXPECT_LT((lv.chi[0] - want).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(lv.residual, 1e-10);
}

TEST(Synthesis, PresetDepths) {
    struct Case {
        TargetDynamics t;
        int depth;
    };
    for (auto& c : {Case{target_reviving(0.5, 1), 2}, Case{target_generalized(0.5, 1, 0.3), 3},
                    Case{target_jaynes_cummings(1, 0.4), 3}, Case{target_jaynes_cummings(0.1, 3), 3},
                    Case{target_jaynes_cummings(0.5, 1.0), 3}}) {
        auto r = synthesize_heom(c.t);
        EXPECT_TRUE(r.terminated) << c.t.name;
        EXPECT_EQ(r.depth, c.depth) << c.t.name;
        for (double x : r.residuals) EXPECT_LE(x, 1e-10);
        // conditions v = 0..k-1 recomputed from the returned blocks
        for (double x : constraint_residuals(c.t, r.L)) EXPECT_LE(x, 1e-10);
        EXPECT_LE(verify_synthesis(r.model, c.t), 1e-8) << c.t.name;
    }
}

TEST(Synthesis, ReferenceBlocksAreFeasible) {
    for (auto t : {target_reviving(0.5, 1.2), target_generalized(0.3, 1.0, 0.2), target_jaynes_cummings(1, 0.4),
                   target_jaynes_cummings(0.1, 3)}) {
        auto pm = reference_model(t);
        for (double x : constraint_residuals(t, lower_blocks(pm))) EXPECT_LE(x, 1e-10) << t.name;
        EXPECT_LE(verify_synthesis(pm, t), 1e-8) << t.name;
    }
}

TEST(Synthesis, ReferenceGeneralizedThirdLevel) {
    double g = 0.3, w = 1.1, a = 0.2;
    auto t = target_generalized(g, w, a);
    using detail::zz;
    std::vector<std::vector<Mat4>> L{
        {sandwich_transfer((g / 2) * detail::Dz())},
        {sandwich_transfer((a * w) * detail::Dz()), sandwich_transfer(g * zz())},
        {Mat4::Zero(), sandwich_transfer((w * (1 - 2 * a)) * zz()), sandwich_transfer(g * zz())}};
    for (double x : constraint_residuals(t, L)) EXPECT_LE(x, 1e-10);
}

TEST(Synthesis, TriangularConvention) {
    auto r = synthesize_heom(target_generalized(0.5, 1.3, 0.3));
    const int n = r.model.n_levels;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Mat4 B = r.model.generator.block<4, 4>(4 * i, 4 * j);
            Mat4 want = j == i + 1 ? Mat4(1.3 * Mat4::Identity()) : Mat4(Mat4::Zero());
            EXPECT_EQ(B, want);
        }
}

TEST(Synthesis, PerturbedGeneratorDeviates) {
    auto t = target_reviving(0.5, 1);
    auto r = synthesize_heom(t);
    HeomModel m = r.model;
    m.generator(5, 1) += 1e-3;  // L21, x -> x
    EXPECT_GT(verify_synthesis(m, t), 1e-4);
}

TEST(Synthesis, NonTerminatingAndErrors) {
    auto r = synthesize_heom(target_generalized(0.5, 1, 0.3), 2);
    EXPECT_FALSE(r.terminated);
    EXPECT_EQ(r.depth, 2);
    EXPECT_THROW(synthesize_heom(target_reviving(1, 1), 0), std::invalid_argument);
    EXPECT_THROW(build_target("nope", {}), std::invalid_argument);
}

TEST(Synthesis, JsonModelRoundTrip) {
    auto r = synthesize_heom(target_jaynes_cummings(1, 0.4));
    auto j = synthesis_to_json(r);
    EXPECT_EQ(j["depth"], 3);
    auto back = model_from_json(j["model"]);
    EXPECT_LT((back.generator - r.model.generator).cwiseAbs().maxCoeff(), 1e-14);
}
