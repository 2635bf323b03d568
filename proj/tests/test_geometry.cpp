#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mchjm/fdr.hpp"
#include "mchjm/geometry.hpp"

using namespace mchjm;

namespace {

const std::vector<double> kA{0.5, 0.7, 0.9}, kSigma{0.01, 0.015, 0.02};

MultiCurveState ns_state(const std::vector<double>& a, double y0, double y1, double y2, std::vector<double> spreads) {
    MultiCurveState s;
    for (double aj : a) s.curves.push_back(ForwardCurve::analytic(nelson_siegel(y0, y1, y2, aj)));
    s.log_spreads = std::move(spreads);
    return s;
}

MultiCurveState random_state(unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-0.02, 0.02);
    return ns_state(kA, 0.03 + u(rng), u(rng), u(rng), {0.05 + u(rng), 0.08 + u(rng)});
}

// modified NS parameters with z3 in [0.1, 2] for every curve
Eigen::VectorXd ns_point(int dim, int curves, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-0.05, 0.05), pos(0.1, 2.0);
    Eigen::VectorXd z(dim);
    for (int k = 0; k < dim; ++k) z[k] = u(rng);
    for (int j = 0; j < curves; ++j) z[4 * j + 2] = pos(rng);
    return z;
}

CDVParams sample_cdv() {
    CDVParams p;
    p.sigma = {0.01, 0.015, 0.02};
    p.a = {0.5, 0.7, 0.9};
    p.beta11 = 0.02;
    p.beta12 = 0.3;
    p.beta21 = 0.03;
    p.beta23 = 0.4;
    return p;
}

MultiCurveState spread_state(double y1, double y2) {
    MultiCurveState s;
    for (int j = 0; j < 3; ++j) s.curves.push_back(ForwardCurve::analytic(QEFunction()));
    s.log_spreads = {y1, y2};
    return s;
}

VectorField spread_field(std::function<double(double, double)> f1, std::function<double(double, double)> f2) {
    return [f1, f2](const MultiCurveState& r) {
        MultiCurveState out = zero_like(r);
        out.log_spreads = {f1(r.log_spreads[0], r.log_spreads[1]), f2(r.log_spreads[0], r.log_spreads[1])};
        return out;
    };
}

double dist(const MultiCurveState& a, const MultiCurveState& b) { return state_norm(add_scaled(a, -1.0, b), default_grid()); }

}  // namespace

TEST(Verdict, Thresholds) {
    EXPECT_EQ(classify_residual(5e-7), Verdict::Consistent);
    EXPECT_EQ(classify_residual(5e-5), Verdict::Inconclusive);
    EXPECT_EQ(classify_residual(2e-4), Verdict::Inconsistent);
    EXPECT_STREQ(to_string(Verdict::Inconclusive), "inconclusive");
}

TEST(Tangency, StrategyOneIsConsistentForAnyParameters) {
    for (unsigned s : {1u, 2u, 3u}) {
        std::mt19937 rng(s);
        std::uniform_real_distribution<double> ua(0.1, 1.0), us(0.001, 0.05), ub(-0.5, 0.5);
        HWFamilyParams p{{ua(rng), ua(rng), ua(rng)}, {us(rng), us(rng), us(rng)}, {ub(rng), ub(rng)}};
        const auto fam = build_modified_ns_family(p, 1);
        EXPECT_EQ(fam.param_dim, 14);
        const auto rep = tangency_residual(fam, p.spec(), ns_point(14, 3, s + 10));
        EXPECT_LT(rep.drift_residual, 1e-6);
        for (double r : rep.diffusion_residuals) EXPECT_LT(r, 1e-6);
        EXPECT_EQ(rep.verdict, Verdict::Consistent);
    }
}

TEST(Tangency, PlainNelsonSiegelIsInconsistentWithHullWhite) {
    const auto fam = build_plain_ns_family(0.5);
    const auto rep = tangency_residual(fam, hull_white_spec({0.5}, {0.1}, {}), Eigen::Vector3d(0.03, -0.01, 0.02));
    EXPECT_GT(rep.drift_residual, 1e-2);
    EXPECT_EQ(rep.verdict, Verdict::Inconsistent);
}

TEST(Tangency, ZeroVolatilityTranslationClosedFamily) {
    // NS with fixed a is closed under x-translation; the diffusion field vanishes
    const auto rep =
        tangency_residual(build_plain_ns_family(0.5), hull_white_spec({0.5}, {0.0}, {}), Eigen::Vector3d(0.03, -0.01, 0.02));
    EXPECT_LT(rep.drift_residual, 1e-8);
    EXPECT_EQ(rep.diffusion_residuals[0], 0.0);
}

TEST(Tangency, RealizationsAreTangentToTheirOwnDynamics) {
    const Theta th = Theta::from_vector({0.53, 0.012, 0.66, 0.02, 0.41, 0.018, 0.4, 0.8});
    const auto hw = build_hw3_fdr(th, {0.02, -0.01, 0.005}, {0.001, 0.002});
    ParamFamily f1{"hw3", hw.n, 2, hw.embed};
    Eigen::VectorXd z(5);
    z << 0.4, 0.1, -0.2, 0.05, 0.3;
    const auto r1 = tangency_residual(f1, th.spec(), z);
    EXPECT_EQ(r1.verdict, Verdict::Consistent) << r1.drift_residual;

    const auto p = sample_cdv();
    const auto cdv = build_cdv_example_fdr(p, ns_state(kA, 0.02, -0.01, 0.005, {0.05, 0.08}));
    ParamFamily f2{"cdv", cdv.n, 2, cdv.embed};
    Eigen::VectorXd z2 = Eigen::VectorXd::Constant(12, 0.05);
    z2[0] = 0.3;
    // lambda^j, D^j and F D^j all lie in span{e^{-a x}, e^{-2a x}}: the 12-state
    // realization is not minimal, so its embedding is not an immersion
    EXPECT_THROW(tangency_residual(f2, cdv_example_spec(p), z2), std::domain_error);
}

TEST(Tangency, RankDeficientFamilyIsRejected) {
    ParamFamily f{"redundant", 2, 0, [](const Eigen::VectorXd& z) {
                      MultiCurveState s;
                      s.curves.push_back(ForwardCurve::analytic(QEFunction::constant(z[0] + z[1])));
                      return s;
                  }};
    EXPECT_THROW(tangency_residual(f, hull_white_spec({0.5}, {0.01}, {}), Eigen::Vector2d(0.1, 0.2)), std::domain_error);
}

TEST(Strategy2, ConsistentExactlyAtTheBetaRelation) {
    for (unsigned s : {4u, 5u}) {
        const auto rep = verify_strategy2_consistency(kA, kSigma, ns_point(12, 3, s));
        ASSERT_EQ(rep.beta.size(), 2u);
        EXPECT_NEAR(rep.beta[0], 0.015 / 0.7 - 0.01 / 0.5, 1e-15);
        EXPECT_EQ(rep.at_relation.verdict, Verdict::Consistent);
        EXPECT_LT(rep.at_relation.drift_residual, 1e-6);
        for (double r : rep.at_relation.diffusion_residuals) EXPECT_LT(r, 1e-6);
        EXPECT_EQ(rep.perturbed.verdict, Verdict::Inconsistent);
        EXPECT_GT(rep.perturbed.diffusion_residuals[0], 1e-4);
        // the drift condition holds for every beta
        EXPECT_LT(rep.perturbed.drift_residual, 1e-6);
    }
}

TEST(Strategy2, WithoutSpreadsOnlyTheCurveBlockRemains) {
    const auto rep = verify_strategy2_consistency({0.5}, {0.01}, ns_point(4, 1, 6));
    EXPECT_TRUE(rep.beta.empty());
    EXPECT_EQ(rep.at_relation.verdict, Verdict::Consistent);
}

TEST(Strategy2, FamilyShapeAndDomain) {
    HWFamilyParams p{kA, kSigma, {0.1, 0.2}};
    const auto fam = build_modified_ns_family(p, 2);
    EXPECT_EQ(fam.param_dim, 12);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(12);
    z[0] = 0.01;
    z[4] = 0.02;
    z[8] = 0.03;
    z[2] = z[6] = z[10] = 1.0;
    z[6] = 0.0;
    EXPECT_THROW(fam.point(z), std::domain_error);
    // constant curves c at z^j = (c, 0, 0, 0) (strategy 1)
    Eigen::VectorXd z1 = Eigen::VectorXd::Zero(14);
    z1[0] = 0.01;
    z1[4] = 0.02;
    z1[8] = 0.03;
    const auto g = build_modified_ns_family(p, 1).point(z1);
    for (double x : {0.0, 4.0}) EXPECT_DOUBLE_EQ(g.curves[2].value(x), 0.03);
    EXPECT_THROW(build_modified_ns_family(p, 3), std::invalid_argument);
}

TEST(LieBracket, ConstantAndSelfBracketsVanish) {
    const auto spec = hull_white_spec(kA, kSigma, {0.1, 0.2});
    const auto s = random_state(7);
    const auto sig = diffusion_field(spec, 0);
    EXPECT_LT(state_norm(lie_bracket_numeric(sig, sig, s), default_grid()), 1e-12);
    const auto mu = drift_field(spec);
    EXPECT_LT(state_norm(lie_bracket_numeric(mu, mu, s), default_grid()), 1e-6 * state_norm(mu(s), default_grid()));
    const auto c = spread_field([](double, double) { return 1.0; }, [](double, double) { return -2.0; });
    EXPECT_EQ(state_norm(lie_bracket_numeric(sig, c, s), default_grid()), 0.0);
}

TEST(LieBracket, HullWhiteDriftDiffusionBracketIsConstant) {
    const std::vector<double> beta{0.1, 0.2};
    const auto spec = hull_white_spec(kA, kSigma, beta);
    for (unsigned seed : {8u, 9u}) {
        const auto s = random_state(seed);
        const auto br = lie_bracket_numeric(drift_field(spec), diffusion_field(spec, 0), s);
        // (F sigma^j, B sigma^0 - B sigma^j)
        MultiCurveState ref;
        for (std::size_t j = 0; j < 3; ++j)
            ref.curves.push_back(ForwardCurve::analytic(QEFunction::exponential(-kA[j] * kSigma[j], -kA[j])));
        for (std::size_t j = 1; j < 3; ++j) ref.log_spreads.push_back(kSigma[0] - kSigma[j]);
        EXPECT_LT(dist(br, ref), 1e-6 * state_norm(ref, default_grid()));
    }
}

TEST(LieBracket, AntisymmetryAndJacobiIdentity) {
    const auto u = spread_field([](double, double y2) { return std::sin(y2); }, [](double, double) { return 0.5; });
    const auto v = spread_field([](double y1, double) { return std::cos(y1); }, [](double y1, double y2) { return y1 * y2; });
    const auto w = spread_field([](double, double y2) { return y2; }, [](double y1, double) { return std::sin(y1); });
    const auto s = spread_state(0.3, -0.7);
    const auto uv = lie_bracket_numeric(u, v, s);
    // hand-differentiated [u, v]
    const double y1 = 0.3, y2 = -0.7;
    MultiCurveState ref = zero_like(s);
    ref.log_spreads = {y1 * y2 * std::cos(y2) + std::sin(y1) * std::sin(y2), -y2 * std::sin(y2) - 0.5 * y1};
    const double fd_err = std::max(dist(uv, ref), 1e-12);
    EXPECT_LT(fd_err, 1e-3);
    EXPECT_LT(dist(uv, scaled(lie_bracket_numeric(v, u, s), -1.0)), 2.0 * fd_err);

    const auto j1 = lie_bracket_numeric(lie_bracket_field(u, v), w, s);
    const auto j2 = lie_bracket_numeric(lie_bracket_field(v, w), u, s);
    const auto j3 = lie_bracket_numeric(lie_bracket_field(w, u), v, s);
    EXPECT_LT(state_norm(add_scaled(add_scaled(j1, 1.0, j2), 1.0, j3), default_grid()), 10.0 * fd_err);
}

TEST(SpanDimension, HullWhiteThreeCurveIsFive) {
    const auto spec = hull_white_spec(kA, kSigma, {0.1, 0.2});
    const std::vector<VectorField> fields{drift_field(spec), diffusion_field(spec, 0)};
    for (unsigned s : {10u, 11u, 12u}) {
        const auto st = random_state(s);
        int prev = 0;
        for (int depth = 0; depth <= 3; ++depth) {
            const int dim = span_dimension_estimate(fields, st, depth);
            EXPECT_GE(dim, prev);
            prev = dim;
        }
        EXPECT_EQ(prev, 5);
    }
}

TEST(SpanDimension, ConstantDirectionExampleIsBounded) {
    const auto spec = cdv_example_spec(sample_cdv());
    std::vector<VectorField> fields{drift_field(spec)};
    for (int i = 0; i < 3; ++i) fields.push_back(diffusion_field(spec, i));
    const auto st = random_state(13);
    const int d1 = span_dimension_estimate(fields, st, 1);
    const int d2 = span_dimension_estimate(fields, st, 2);
    EXPECT_LE(d1, d2);
    EXPECT_LE(d2, 12);
    EXPECT_GE(d2, 4);
}

TEST(SpanDimension, ZeroFieldsAndDepthGuard) {
    const auto zero = spread_field([](double, double) { return 0.0; }, [](double, double) { return 0.0; });
    EXPECT_EQ(span_dimension_estimate({zero, zero}, spread_state(0.1, 0.2), 2), 0);
    EXPECT_THROW(span_dimension_estimate({zero}, spread_state(0.1, 0.2), 4), std::invalid_argument);
}

TEST(Commutation, ConstantVolatilityCommutes) {
    const auto spec = hull_white_spec(kA, kSigma, {0.1, 0.2});
    for (const auto& r : commutation_check(spec, {1, 2}, random_state(14))) EXPECT_TRUE(r.commutes) << r.k;
}

TEST(Commutation, SpreadDependentVolatilityDoesNot) {
    const auto p = sample_cdv();
    const auto st = random_state(15);
    const auto res = commutation_check(cdv_example_spec(p), {1, 2}, st);
    EXPECT_FALSE(res[0].commutes);
    EXPECT_FALSE(res[1].commutes);
    // D sigma_2[gamma_1] = beta12 e_{Y^1}, measured against |sigma_2| = sqrt(|lambda^1|^2 + (beta12 Y^1)^2)
    const auto sig2 = volatility_field(st, cdv_example_spec(p), 1);
    EXPECT_GE(res[0].max_relative_norm, p.beta12 / state_norm(sig2, default_grid()) * (1.0 - 1e-9));
}

TEST(Commutation, DependenceOnOtherSpreadOnly) {
    auto p = sample_cdv();
    p.beta12 = 0.0;
    const auto res = commutation_check(cdv_example_spec(p), {1, 2}, random_state(16));
    EXPECT_TRUE(res[0].commutes);
    EXPECT_FALSE(res[1].commutes);
    EXPECT_THROW(commutation_check(cdv_example_spec(p), {3}, random_state(16)), std::out_of_range);
}
