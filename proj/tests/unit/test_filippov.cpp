#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "generators.hpp"
#include "tanglide/filippov.hpp"
#include "tanglide/models.hpp"

using namespace tanglide;

namespace {

/// Planar system h = x2 with constant fields; a = Z+h and b = Z-h are the second components.
PiecewiseSystem planar(double zp1, double a, double zm1, double b) {
    SymbolTable s({"x1", "x2"}, {{"p1", zp1}, {"a", a}, {"q1", zm1}, {"b", b}});
    return PiecewiseSystem::parse(s, "x2", {"p1", "a"}, {"q1", "b"});
}

const Vec origin2 = Vec::Zero(2);

}  // namespace

TEST(Classify, SignTableExamples) {
    EXPECT_EQ(classify_point(planar(1, -1, 1, 1), origin2), RegionLabel::sliding);
    EXPECT_EQ(classify_point(planar(1, 2, 1, 3), origin2), RegionLabel::crossing_plus);
    EXPECT_EQ(classify_point(planar(1, -2, 1, -3), origin2), RegionLabel::crossing_minus);
    EXPECT_EQ(classify_point(planar(1, 2, 1, -3), origin2), RegionLabel::escaping);
    EXPECT_EQ(classify_point(planar(1, 0, 1, -3), origin2), RegionLabel::tangential);
    EXPECT_EQ(classify_point(planar(1, 2, 1, 3), (Vec(2) << 0.0, 0.5).finished()), RegionLabel::off_switching);
}

TEST(Classify, FoldFoldTangencySet) {
    const auto ff = make_fold_fold();
    const Vec p = (Vec(4) << 0.0, 0.3, -1.2, 0.0).finished();
    const auto c = classify_point_detail(ff.system, p);
    EXPECT_EQ(c.label, RegionLabel::tangential);
    EXPECT_EQ(c.a, 0.0);
    EXPECT_EQ(c.b, 0.0);
}

TEST(Classify, DegenerateAndSingularPointsAreErrors) {
    // Z+ vanishes at the origin while Z+h = 0 there.
    EXPECT_THROW(classify_point(planar(0, 0, 1, 1), origin2), GeometryError);
    SymbolTable s({"x1", "x2"}, {});
    const auto sys = PiecewiseSystem::parse(s, "x2^2", {"1", "1"}, {"1", "-1"});
    EXPECT_THROW(classify_point(sys, origin2), GeometryError);
    EXPECT_THROW(classify_point(planar(1, 1, 1, 1), origin2, 0.0), Error);
}

TEST(SlidingField, PlanarExampleMatchesBisection) {
    const auto sys = planar(1, -1, 1, 1);
    const Vec F = filippov_sliding_field(sys, origin2);
    const double lam = *oracle::sliding_lambda(-1.0, 1.0);
    const Vec expect = oracle::cone(sys.Zplus(origin2), sys.Zminus(origin2), lam);
    EXPECT_NEAR(F[0], 1.0, 1e-15);
    EXPECT_NEAR(F[1], 0.0, 1e-15);
    EXPECT_LE((F - expect).norm(), 1e-12);
}

TEST(SlidingField, SymmetricNormalComponentsAverage) {
    const auto sys = planar(2.5, -0.7, -1.5, 0.7);
    const Vec F = filippov_sliding_field(sys, origin2);
    const Vec avg = 0.5 * (sys.Zplus(origin2) + sys.Zminus(origin2));
    EXPECT_LE((F - avg).norm(), 1e-15);
    EXPECT_EQ(sliding_lambda(-0.7, 0.7), 0.0);
}

TEST(SlidingField, RejectsCrossingPoints) {
    EXPECT_THROW(filippov_sliding_field(planar(1, 2, 1, 3), origin2), GeometryError);
    EXPECT_THROW(filippov_sliding_field(planar(1, 0, 1, 3), origin2), GeometryError);
}

TEST(SlidingField, EscapingStillReturnsTheTangentCombination) {
    const auto sys = planar(1, 2, -1, -3);
    const Vec F = filippov_sliding_field(sys, origin2);
    EXPECT_NEAR(F[1], 0.0, 1e-15);
}

TEST(Multiplicity, FoldFoldIsTwo) {
    const auto ff = make_fold_fold();
    const Vec p = (Vec(4) << 0.0, 0.7, 0.1, 0.0).finished();
    EXPECT_EQ(contact_multiplicity(ff.system, Side::plus, p, default_jet_order(ff.system)), 2);
    EXPECT_EQ(contact_multiplicity(ff.system, Side::minus, p, default_jet_order(ff.system)), 2);
}

TEST(Multiplicity, HivCuspsAreThree) {
    const HivParams hp = hiv_default_params();
    const auto hiv = make_hiv(hp, HivChart::original);
    const auto ref = hiv_reference_quantities(hp);
    EXPECT_EQ(contact_multiplicity(hiv.system, Side::plus, ref.pc_plus, 6), 3);
    EXPECT_EQ(contact_multiplicity(hiv.system, Side::minus, ref.pc_minus, 6), 3);
    // between the cusps both fields have a fold
    Vec mid = ref.pc_plus;
    mid[2] = 0.5 * (ref.x3_plus + ref.x3_minus);
    EXPECT_EQ(contact_multiplicity(hiv.system, Side::plus, mid, 6), 2);
}

TEST(Multiplicity, TransversalIsOne) {
    EXPECT_EQ(contact_multiplicity(planar(1, 2, 1, 3), Side::plus, origin2, 4), 1);
}

TEST(Multiplicity, SaturatesWhenEveryOrderVanishes) {
    SymbolTable s({"x1", "x2"}, {});
    const auto sys = PiecewiseSystem::parse(s, "x2", {"1", "0"}, {"1", "0"});
    EXPECT_EQ(contact_multiplicity(sys, Side::plus, origin2, 5), std::nullopt);
    EXPECT_THROW(contact_multiplicity(sys, Side::plus, (Vec(2) << 0.0, 1.0).finished(), 5), GeometryError);
}

// ---------------------------------------------------------------- properties

TEST(FilippovProperty, SignTableIsExhaustive) {
    std::mt19937_64 rng(31);
    const double tol = kDefaultTol;
    for (int trial = 0; trial < 2000; ++trial) {
        double a = gen::uniform(rng, -2, 2);
        double b = gen::uniform(rng, -2, 2);
        if (std::abs(a) <= 10 * tol || std::abs(b) <= 10 * tol) continue;
        const auto label = classify_point(planar(1, a, 1, b), origin2, tol);
        const int fired = (a > tol && b > tol) + (a < -tol && b < -tol) + (a < -tol && b > tol) + (a > tol && b < -tol);
        ASSERT_EQ(fired, 1);
        const RegionLabel expect = a > 0 ? (b > 0 ? RegionLabel::crossing_plus : RegionLabel::escaping)
                                         : (b > 0 ? RegionLabel::sliding : RegionLabel::crossing_minus);
        EXPECT_EQ(label, expect) << a << " " << b;
    }
}

TEST(FilippovProperty, SlidingFieldIsTangentToSigma) {
    std::mt19937_64 rng(32);
    SymbolTable s({"x1", "x2", "x3"}, {});
    // h curved so the gradient is not a coordinate vector.
    const auto sys = PiecewiseSystem::parse(s, "x3 - 0.3*x1^2 + 0.2*x2",
                                            {"1 + x2", "-x1 + 0.5", "-1 - x1^2"}, {"x3 - 1", "2*x1", "1.5 + x2^2"});
    int checked = 0;
    for (int trial = 0; trial < 2000 && checked < 300; ++trial) {
        Vec p = gen::vec(rng, 3, -1.0, 1.0);
        p[2] = 0.3 * p[0] * p[0] - 0.2 * p[1];
        if (classify_point(sys, p) != RegionLabel::sliding) continue;
        ++checked;
        const Vec F = filippov_sliding_field(sys, p);
        const Vec g = sys.grad_h(p);
        EXPECT_LE(std::abs(g.dot(F)), 1e-12 * g.norm() * F.norm());
        const auto c = classify_point_detail(sys, p);
        const double lam = *oracle::sliding_lambda(c.a, c.b);
        EXPECT_NEAR(sliding_lambda(c.a, c.b), lam, 1e-12);
    }
    EXPECT_GT(checked, 50);
}

TEST(FilippovProperty, ChainMultiplicityMatchesClosedForm) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = gen::integer(rng, 2, 4);
        const int l = gen::integer(rng, m + 1, 6);
        const int n = gen::integer(rng, l, 7);
        const auto cp = random_chain_params(n, l, m, rng);
        const auto bundle = make_lie_chain(cp);
        // points on M_k: x_1..x_{k-1} = 0, x_k != 0, h = 0
        for (int k = 1; k <= l; ++k) {
            Vec x = gen::vec(rng, n, 0.5, 2.0);
            for (int i = 0; i < k - 1; ++i) x[i] = 0.0;
            x[n - 1] = 0.0;
            const int plus_expect = k;
            const int minus_expect = std::min(k, m);
            EXPECT_EQ(contact_multiplicity(bundle.system, Side::plus, x, n + 2), plus_expect);
            EXPECT_EQ(contact_multiplicity(bundle.system, Side::minus, x, n + 2), minus_expect);
            const auto ladder = chain_lie_ladder(cp, Side::plus, x, n + 1);
            const auto engine = lie_derivatives(bundle.system.zplus(), bundle.system.h_map(), x,
                                                static_cast<std::size_t>(n + 1));
            for (std::size_t i = 0; i < ladder.size(); ++i)
                EXPECT_NEAR(engine[i], ladder[i], 1e-12 * std::max(1.0, std::abs(ladder[i])));
        }
    }
}
