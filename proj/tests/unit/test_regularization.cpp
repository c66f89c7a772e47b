#include <gtest/gtest.h>

#include "../support/oracles.hpp"
#include "generators.hpp"
#include "tanglide/models.hpp"
#include "tanglide/regularization.hpp"

using namespace tanglide;

namespace {

const TransitionKind kAllKinds[] = {TransitionKind::smoothstep3, TransitionKind::smoothstep5, TransitionKind::bump};

/// Largest |x| on which phi^-1(phi(x)) = x holds to 1e-12 (conditioning flattens each kind near +-1).
double forward_inverse_range(TransitionKind k) {
    switch (k) {
        case TransitionKind::smoothstep3:
            return 0.999;
        case TransitionKind::smoothstep5:
            return 0.99;
        default:
            return 0.9;
    }
}

IntegratorSettings tight() {
    IntegratorSettings s;
    s.rtol = 1e-10;
    s.atol = 1e-12;
    return s;
}

}  // namespace

// ---------------------------------------------------------------- transition functions

TEST(Transition, SaturatesOutsideTheUnitInterval) {
    for (auto k : kAllKinds) {
        const TransitionFunction phi(k);
        for (double x : {-5.0, -1.0, -1.0 - 1e-12}) EXPECT_EQ(phi(x), -1.0);
        for (double x : {1.0, 1.0 + 1e-12, 7.0}) EXPECT_EQ(phi(x), 1.0);
        EXPECT_EQ(phi(0.0), 0.0);
        EXPECT_EQ(phi.derivative(2.0), 0.0);
    }
}

TEST(Transition, KnownPolynomialValues) {
    const TransitionFunction s3(TransitionKind::smoothstep3);
    const TransitionFunction s5(TransitionKind::smoothstep5);
    EXPECT_DOUBLE_EQ(s3(0.5), (1.5 - 0.125) / 2.0);
    EXPECT_DOUBLE_EQ(s5(0.5), (7.5 - 1.25 + 0.09375) / 8.0);
    EXPECT_DOUBLE_EQ(s5.derivative(0.0), 15.0 / 8.0);
}

TEST(Transition, NamesRoundTrip) {
    for (auto k : kAllKinds) {
        const TransitionFunction phi(k);
        EXPECT_EQ(TransitionFunction::from_name(phi.name()).kind(), k);
    }
    EXPECT_THROW(TransitionFunction::from_name("tanh"), Error);
}

TEST(Transition, InverseRejectsSaturatedValues) {
    const TransitionFunction phi;
    EXPECT_THROW(phi.inverse(1.0), DomainError);
    EXPECT_THROW(phi.inverse(-1.5), DomainError);
    EXPECT_EQ(phi.inverse(0.0), 0.0);
}

TEST(Transition, JetEvaluationMatchesDerivative) {
    for (auto k : kAllKinds) {
        const TransitionFunction phi(k);
        for (double x : {-0.7, 0.1, 0.55}) {
            const Dual d = phi.apply(Dual::variable(x, 1.0));
            EXPECT_NEAR(d[0], phi(x), 1e-15);
            EXPECT_NEAR(d[1], phi.derivative(x), 1e-12);
        }
    }
    const TransitionFunction bump(TransitionKind::bump);
    EXPECT_THROW(bump.apply(Jet<double>::variable(0.1, 1.0, 2)), Error);
}

TEST(TransitionProperty, OddMonotoneAndInvertible) {
    std::mt19937_64 rng(51);
    for (auto k : kAllKinds) {
        const TransitionFunction phi(k);
        const double r = forward_inverse_range(k);
        for (int trial = 0; trial < 500; ++trial) {
            const double x = gen::uniform(rng, -0.999, 0.999);
            EXPECT_EQ(phi(-x), -phi(x));
            EXPECT_GT(phi.derivative(x), 0.0);
            const double y = phi(x);
            if (std::abs(y) >= 1.0) continue;
            const double back = phi.inverse(y);
            // backward error holds on the full range
            EXPECT_LE(std::abs(phi(back) - y), 1e-13) << phi.name() << " x=" << x;
            if (std::abs(x) <= r) EXPECT_LE(std::abs(back - x), 1e-12) << phi.name() << " x=" << x;
            const double x2 = gen::uniform(rng, -0.999, 0.999);
            if (x2 > x) EXPECT_GE(phi(x2), y);
        }
    }
}

// ---------------------------------------------------------------- regularized field

TEST(Regularized, EqualsOneSideOutsideTheBand) {
    const auto ff = make_fold_fold();
    const TransitionFunction phi;
    const double eps = 0.01;
    const Vec up = (Vec(4) << 0.3, 0.1, 0.2, 0.02).finished();
    const Vec down = (Vec(4) << 0.3, 0.1, 0.2, -0.01).finished();
    EXPECT_EQ(regularized_field(ff.system, phi, eps, up), ff.system.Zplus(up));
    EXPECT_EQ(regularized_field(ff.system, phi, eps, down), ff.system.Zminus(down));
    const Vec on = (Vec(4) << 0.3, 0.1, 0.2, 0.0).finished();
    EXPECT_EQ(regularized_field(ff.system, phi, eps, on), 0.5 * (ff.system.Zplus(on) + ff.system.Zminus(on)));
    EXPECT_THROW(regularized_field(ff.system, phi, 0.0, on), Error);
}

TEST(Regularized, FoldFoldComponentwiseForm) {
    // (a_i - b_i) psi + b_i with psi = (1 + phi(w)) / 2 the weight of Z+.
    const FoldFoldParams fp;
    const auto ff = make_fold_fold(fp);
    const TransitionFunction phi;
    const double eps = 0.05;
    std::mt19937_64 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        Vec q = gen::vec(rng, 4, -1, 1);
        q[3] = gen::uniform(rng, -eps, eps);
        const double psi = 0.5 * (1.0 + phi(q[3] / eps));
        const Vec z = regularized_field(ff.system, phi, eps, q);
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(z[i], (fp.a[i] - fp.b[i]) * psi + fp.b[i], 1e-14);
        EXPECT_NEAR(z[3], q[0] * ((fp.a[3] - fp.b[3]) * psi + fp.b[3]), 1e-14);
    }
}

// ---------------------------------------------------------------- slow-fast form

TEST(SPReduce, FoldFoldChart) {
    const FoldFoldParams fp;
    const auto ff = make_fold_fold(fp);
    const TransitionFunction phi;
    const auto sp = sp_reduce(ff.system, ff.manifolds.front().manifold, phi);
    EXPECT_EQ(sp.chart().w, 3u);
    EXPECT_EQ(sp.chart().v, std::vector<std::size_t>{0});
    EXPECT_EQ(sp.chart().u, (std::vector<std::size_t>{1, 2}));
    // eps w' = v1 ((1 - phi)/2 a4 + (1 + phi)/2 b4) in the proof's weighting
    const double eps = 0.1;
    for (double w : {-0.8, 0.0, 0.4}) {
        const Vec z = sp.pack((Vec(2) << 0.2, -0.3).finished(), (Vec(1) << 0.7).finished(), w);
        const Vec r = sp.slow_rhs(z, eps);
        const double p = phi(w);
        EXPECT_NEAR(r[3], 0.7 * (0.5 * (1 - p) * fp.a[3] + 0.5 * (1 + p) * fp.b[3]), 1e-14);
        EXPECT_NEAR(r[0], 0.5 * (1 - p) * fp.a[1] + 0.5 * (1 + p) * fp.b[1], 1e-14);
    }
}

TEST(SPReduce, HivFastEquation) {
    const HivParams hp = hiv_default_params();
    const auto hiv = make_hiv(hp, HivChart::adapted);
    const auto sp = sp_reduce(hiv.system, hiv.manifold("M2").manifold, TransitionFunction());
    EXPECT_EQ(sp.chart().w, 0u);
    EXPECT_EQ(sp.chart().v, std::vector<std::size_t>{1});
    EXPECT_EQ(sp.chart().u, std::vector<std::size_t>{2});
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 20; ++trial) {
        const double eps = gen::uniform(rng, 1e-3, 0.1);
        const double u = gen::uniform(rng, 1.4, 2.5), v = gen::uniform(rng, -0.1, 0.1), w = gen::uniform(rng, -2, 2);
        const Vec r = sp.slow_rhs(sp.pack(Vec::Constant(1, u), Vec::Constant(1, v), w), eps);
        EXPECT_NEAR(r[2], v - hp.alpha * eps * w, 1e-14);
    }
}

TEST(SPReduce, LayerProblemFreezesSlowVariables) {
    const auto ff = make_fold_fold();
    const auto sp = sp_reduce(ff.system, ff.manifolds.front().manifold, TransitionFunction());
    const Vec z = sp.pack((Vec(2) << 0.2, -0.3).finished(), (Vec(1) << 0.5).finished(), 0.3);
    const Vec r = sp.layer_rhs(z);
    EXPECT_EQ(r.head(3), Vec::Zero(3));
    EXPECT_NEAR(r[3], sp.residual<double>(z.head(2), z.segment(2, 1), 0.3), 1e-15);
}

TEST(SPReduce, RejectsNonAdaptedCoordinates) {
    const auto hiv = make_hiv(hiv_default_params(), HivChart::original);
    EXPECT_THROW(sp_reduce(hiv.system, hiv.manifold("M2").manifold, TransitionFunction()), GeometryError);
}

TEST(SPProperty, FastAndSlowSystemsAreTimeRescalings) {
    const auto ff = make_fold_fold();
    for (double eps : {1e-1, 1e-2}) {
        const auto sp = sp_reduce(ff.system, ff.manifolds.front().manifold, TransitionFunction());
        const Vec z0 = sp.pack((Vec(2) << 0.1, 0.2).finished(), (Vec(1) << 0.05).finished(), 0.2);
        const double T = 0.05;
        const auto slow = integrate_field([&](const Vec& z) { return Vec(sp.slow_rhs(z, eps).cwiseQuotient(
                                                                   (Vec(4) << 1, 1, 1, eps).finished())); },
                                          z0, 0.0, T, tight());
        const auto fast = integrate_field([&](const Vec& z) { return sp.fast_rhs(z, eps); }, z0, 0.0, T / eps, tight());
        EXPECT_LE((slow.back().x - fast.back().x).norm(), 1e-8) << "eps " << eps;
    }
}

// ---------------------------------------------------------------- S^tan

TEST(Stan, SymmetricFoldFoldHasZeroGraph) {
    FoldFoldParams fp;
    fp.a = {1.3, 1, 1, 1};
    fp.b = {-1.3, 2, 0, -1};
    const auto ff = make_fold_fold(fp);
    const auto sp = sp_reduce(ff.system, ff.manifolds.front().manifold, TransitionFunction());
    const auto s = stan_graph(sp, ff.manifolds.front().manifold, (Vec(2) << 0.4, -0.2).finished());
    EXPECT_EQ(s.lambda_star, 0.0);
    EXPECT_EQ(s.w_star, 0.0);
    const Vec red = reduced_field_on_stan(sp, ff.manifolds.front().manifold, (Vec(2) << 0.4, -0.2).finished());
    EXPECT_NEAR(red[0], 0.5 * (1 + 2), 1e-15);
    EXPECT_NEAR(red[1], 0.5 * (1 + 0), 1e-15);
}

TEST(Stan, FoldFoldGraphAndReducedField) {
    const FoldFoldParams fp;
    const auto ff = make_fold_fold(fp);
    const auto& m = ff.manifolds.front();
    for (auto k : kAllKinds) {
        const TransitionFunction phi(k);
        const auto sp = sp_reduce(ff.system, m.manifold, phi);
        const Vec u = (Vec(2) << -0.6, 0.9).finished();
        const auto s = stan_graph(sp, m.manifold, u);
        const double lam = -1.0 + 2.0 * std::abs(fp.a[0]) / (std::abs(fp.a[0]) + std::abs(fp.b[0]));
        EXPECT_NEAR(s.lambda_star, lam, 1e-15);
        EXPECT_NEAR(phi(s.w_star), lam, 1e-13);
        EXPECT_LE(std::abs(s.K), 1e-10);
        EXPECT_LE(s.v_block, 1e-10);
        const Vec red = reduced_field_on_stan(sp, m.manifold, u);
        const Vec ztan = m.ztan_oracle((Vec(4) << 0, u[0], u[1], 0).finished());
        EXPECT_NEAR(red[0], ztan[1], 1e-13);
        EXPECT_NEAR(red[1], ztan[2], 1e-13);
    }
}

TEST(Stan, HivGraphAndReducedField) {
    const HivParams hp = hiv_default_params();
    const auto hiv = make_hiv(hp, HivChart::adapted);
    const auto& m = hiv.manifold("M2");
    const auto sp = sp_reduce(hiv.system, m.manifold, TransitionFunction());
    std::mt19937_64 rng(54);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec p = m.sample(rng);
        const Vec u = Vec::Constant(1, p[2]);
        const auto s = stan_graph(sp, m.manifold, u);
        EXPECT_LE(std::abs(s.K), 1e-10);
        EXPECT_LE(s.v_block, 1e-10);
        EXPECT_NEAR(reduced_field_on_stan(sp, m.manifold, u)[0], hiv_ztan_y_chart(hp, p[2]),
                    1e-10 * std::max(1.0, std::abs(hiv_ztan_y_chart(hp, p[2]))));
        // The closed-form graph argument is the Z- cone weight (1 - lambda*)/2 rather than lambda*.
        EXPECT_NEAR(hiv_stan_argument(hp, p[2]), 0.5 * (1.0 - s.lambda_star), 1e-12);
    }
}

TEST(Stan, RequiresCase1) {
    FoldFoldParams fp;
    fp.a = {1, 1, 1, 1};
    fp.b = {1, 1, 1, 1};
    const auto ff = make_fold_fold(fp);
    const auto sp = sp_reduce(ff.system, ff.manifolds.front().manifold, TransitionFunction());
    EXPECT_THROW(stan_graph(sp, ff.manifolds.front().manifold, Vec::Zero(2)), GeometryError);
}

TEST(NormalHyperbolicity, VanishesOnStanOnly) {
    const auto ff = make_fold_fold();
    const auto& m = ff.manifolds.front();
    const auto sp = sp_reduce(ff.system, m.manifold, TransitionFunction());
    EXPECT_EQ(normal_hyperbolicity_residual(sp, m.manifold, (Vec(2) << 0.1, 0.2).finished()), 0.0);
    // off M: v1 = x1 != 0 gives Z-_4 - Z+_4 = (b4 - a4) x1 != 0 unless a4 = b4
    FoldFoldParams fp;
    fp.b[3] = 2.0;
    const auto ff2 = make_fold_fold(fp);
    const auto sp2 = sp_reduce(ff2.system, ff2.manifolds.front().manifold, TransitionFunction());
    EXPECT_NE(normal_hyperbolicity_residual_at(sp2, (Vec(2) << 0.1, 0.2).finished(), Vec::Constant(1, 0.5), 0.1), 0.0);
}

TEST(NormalHyperbolicity, HivMatchesDualDerivativeOfK) {
    const auto hiv = make_hiv(hiv_default_params(), HivChart::adapted);
    const auto& m = hiv.manifold("M2");
    const auto sp = sp_reduce(hiv.system, m.manifold, TransitionFunction());
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec u = Vec::Constant(1, m.sample(rng)[2]);
        const auto s = stan_graph(sp, m.manifold, u);
        const Dual k = sp.residual(u, Vec::Zero(1), Dual::variable(s.w_star, 1.0));
        const double r = normal_hyperbolicity_residual(sp, m.manifold, u);
        EXPECT_LE(std::abs(r), 1e-12);
        EXPECT_NEAR(r, k.coefficient(1), 1e-14);
    }
}

// ---------------------------------------------------------------- conjugacy

TEST(Conjugacy, FoldFoldIdentity) {
    const auto ff = make_fold_fold();
    const auto& m = ff.manifolds.front();
    const auto sp = sp_reduce(ff.system, m.manifold, TransitionFunction());
    const auto s = tight();
    const auto rep = verify_conjugacy(sp, m.manifold, (Vec(4) << 0, 0.2, -0.1, 0).finished(), 1.0, s);
    EXPECT_FALSE(rep.truncated);
    EXPECT_EQ(rep.times.size(), 101u);
    EXPECT_LE(rep.max_deviation, 10 * s.rtol);
}

TEST(Conjugacy, HivIdentity) {
    const auto hiv = make_hiv(hiv_default_params(), HivChart::adapted);
    const auto& m = hiv.manifold("M2");
    const auto sp = sp_reduce(hiv.system, m.manifold, TransitionFunction());
    const auto s = tight();
    const auto rep = verify_conjugacy(sp, m.manifold, hiv.reference_point, 1.0, s);
    EXPECT_FALSE(rep.truncated);
    EXPECT_LE(rep.max_deviation, 10 * s.rtol);
}

TEST(Conjugacy, ZeroHorizon) {
    const auto ff = make_fold_fold();
    const auto& m = ff.manifolds.front();
    const auto sp = sp_reduce(ff.system, m.manifold, TransitionFunction());
    const auto rep = verify_conjugacy(sp, m.manifold, Vec::Zero(4), 0.0, tight());
    EXPECT_EQ(rep.max_deviation, 0.0);
}
