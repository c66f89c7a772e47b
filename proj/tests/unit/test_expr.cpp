#include <gtest/gtest.h>

#include <cmath>

#include "generators.hpp"
#include "tanglide/expr.hpp"
#include "tanglide/jet.hpp"

using namespace tanglide;

namespace {

SymbolTable fold_symbols() { return SymbolTable({"x1", "x2", "x3", "x4"}, {{"a4", 2.0}}); }

SymbolTable generic_symbols() { return SymbolTable({"x1", "x2", "x3"}, {{"p1", 0.7}, {"p2", -1.3}}); }

double eval_plain(const Expr& e, const SymbolTable& s, std::vector<double> x) {
    return evaluate<double>(e, std::span<const double>(x), s.param_values());
}

}  // namespace

TEST(Parse, ProductOfParameterAndVariable) {
    const auto e = Expr::parse("a4*x1", fold_symbols());
    const auto& r = e.root();
    ASSERT_EQ(r.kind, NodeKind::mul);
    EXPECT_EQ(r.lhs->kind, NodeKind::parameter);
    EXPECT_EQ(r.lhs->name, "a4");
    EXPECT_EQ(r.rhs->kind, NodeKind::variable);
    EXPECT_EQ(r.rhs->name, "x1");
    EXPECT_EQ(r.rhs->index, 0u);
}

TEST(Parse, SwitchingFunctionFreeNames) {
    SymbolTable s({"x1", "x2", "x3"}, {{"C_T", 2.4}});
    const auto e = Expr::parse("x1 + x2 - C_T", s);
    EXPECT_EQ(e.free_names(), (std::vector<std::string>{"x1", "x2", "C_T"}));
}

TEST(Parse, UnbalancedCallReportsOffset) {
    try {
        Expr::parse("sin(", generic_symbols());
        FAIL() << "expected a syntax error";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
}

TEST(Parse, UnknownIdentifierIsNamed) {
    try {
        Expr::parse("x1 + zeta", generic_symbols());
        FAIL() << "expected an unknown identifier error";
    } catch (const UnknownIdentifierError& e) {
        EXPECT_EQ(e.name(), "zeta");
        EXPECT_EQ(e.offset(), 5u);
    }
}

TEST(Parse, RejectsMalformedInput) {
    const auto s = generic_symbols();
    EXPECT_THROW(Expr::parse("", s), SyntaxError);
    EXPECT_THROW(Expr::parse("x1 +", s), SyntaxError);
    EXPECT_THROW(Expr::parse("(x1", s), SyntaxError);
    EXPECT_THROW(Expr::parse("x1 x2", s), SyntaxError);
    EXPECT_THROW(Expr::parse("x1^x2", s), SyntaxError);
    EXPECT_THROW(Expr::parse("x1^1.5", s), SyntaxError);
    EXPECT_THROW(Expr::parse("tan(x1)", s), UnknownIdentifierError);
}

TEST(Parse, PowerAndPowCallAgree) {
    const auto s = generic_symbols();
    const auto a = Expr::parse("x1^3", s);
    const auto b = Expr::parse("pow(x1, 3)", s);
    EXPECT_EQ(eval_plain(a, s, {1.7, 0, 0}), eval_plain(b, s, {1.7, 0, 0}));
}

TEST(Parse, PrecedenceAndAssociativity) {
    const auto s = generic_symbols();
    EXPECT_DOUBLE_EQ(eval_plain(Expr::parse("2 + 3*4", s), s, {0, 0, 0}), 14.0);
    EXPECT_DOUBLE_EQ(eval_plain(Expr::parse("8 - 3 - 2", s), s, {0, 0, 0}), 3.0);
    EXPECT_DOUBLE_EQ(eval_plain(Expr::parse("8/4/2", s), s, {0, 0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(eval_plain(Expr::parse("-x1^2", s), s, {3, 0, 0}), -9.0);
    EXPECT_DOUBLE_EQ(eval_plain(Expr::parse("(2^3)^2", s), s, {0, 0, 0}), 64.0);
    // exponents are integer literals, so a chained power is rejected rather than guessed
    EXPECT_THROW(Expr::parse("2^3^2", s), SyntaxError);
}

TEST(SymbolTableTest, RejectsDuplicatesAndNonFinite) {
    EXPECT_THROW(SymbolTable({"x1", "x1"}, {}), Error);
    EXPECT_THROW(SymbolTable({"x1"}, {{"x1", 1.0}}), Error);
    EXPECT_THROW(SymbolTable({"x1"}, {{"a", std::nan("")}}), Error);
    const SymbolTable s({"x1"}, {{"a", 1.0}});
    EXPECT_EQ(s.with_param("a", 3.0).param("a"), 3.0);
    EXPECT_THROW(s.with_param("b", 3.0), Error);
}

TEST(Evaluate, SwitchingFunctionVanishes) {
    SymbolTable s({"x1", "x2"}, {{"C_T", 3.0}});
    EXPECT_EQ(eval_plain(Expr::parse("x1+x2-C_T", s), s, {2.0, 1.0}), 0.0);
}

TEST(Evaluate, LinearJet) {
    const auto s = fold_symbols();
    const auto e = Expr::parse("a4*x1", s);
    std::vector<Dual> x{Dual::variable(0.0, 1.0), Dual(0.0), Dual(0.0), Dual(0.0)};
    const Dual r = evaluate<Dual>(e, std::span<const Dual>(x), s.param_values());
    EXPECT_EQ(r[0], 0.0);
    EXPECT_EQ(r[1], 2.0);
}

TEST(Evaluate, SquareOfAffineJet) {
    SymbolTable s({"x1"}, {});
    const auto e = Expr::parse("x1*x1", s);
    std::vector<Jet<double>> x{Jet<double>(std::vector<double>{3.0, 1.0, 0.0})};
    const auto r = evaluate<Jet<double>>(e, std::span<const Jet<double>>(x), s.param_values());
    ASSERT_EQ(r.order(), 2u);
    EXPECT_EQ(r[0], 9.0);
    EXPECT_EQ(r[1], 6.0);
    EXPECT_EQ(r[2], 1.0);
}

TEST(Evaluate, DomainErrorsCarryOffsets) {
    SymbolTable s({"x1"}, {});
    try {
        eval_plain(Expr::parse("1 + log(x1)", s), s, {-1.0});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.offset(), 4u);
    }
    try {
        eval_plain(Expr::parse("2/x1", s), s, {0.0});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.offset(), 1u);
    }
    EXPECT_THROW(eval_plain(Expr::parse("sqrt(x1)", s), s, {-2.0}), DomainError);
}

TEST(Printer, RoundTripKnownCases) {
    const auto s = generic_symbols();
    for (const char* src : {"x1 - (x2 - x3)", "(x1 + x2)*x3", "-(x1 + x2)", "x1/(x2*x3)", "(-x1)^2", "-x1^2",
                            "sin(x1)*cos(x2 + p1)", "x1 - -2"}) {
        const auto e = Expr::parse(src, s);
        const auto printed = e.to_string();
        const auto again = Expr::parse(printed, s);
        EXPECT_EQ(again.to_string(), printed) << src;
        const std::vector<double> x{0.3, -1.1, 0.8};
        EXPECT_EQ(eval_plain(again, s, x), eval_plain(e, s, x)) << src << " printed as " << printed;
    }
}

// ---------------------------------------------------------------- properties

TEST(ExprProperty, PrintParsePrintIsFixedPoint) {
    std::mt19937_64 rng(11);
    const auto s = generic_symbols();
    for (int trial = 0; trial < 300; ++trial) {
        const auto src = gen::smooth_expression(rng, 3, gen::integer(rng, 0, 4));
        const auto first = Expr::parse(src, s).to_string();
        const auto second = Expr::parse(first, s).to_string();
        EXPECT_EQ(first, second) << "source: " << src;
    }
}

TEST(ExprProperty, PlainValueEqualsJetConstantTerm) {
    std::mt19937_64 rng(12);
    const auto s = generic_symbols();
    for (int trial = 0; trial < 300; ++trial) {
        const auto e = Expr::parse(gen::smooth_expression(rng, 3, gen::integer(rng, 0, 4)), s);
        const auto p = gen::vec(rng, 3);
        std::vector<double> xd{p[0], p[1], p[2]};
        std::vector<Jet<double>> xj;
        for (double v : xd) xj.push_back(Jet<double>::variable(v, gen::uniform(rng, -1, 1), 3));
        const double plain = evaluate<double>(e, std::span<const double>(xd), s.param_values());
        const auto jet = evaluate<Jet<double>>(e, std::span<const Jet<double>>(xj), s.param_values());
        EXPECT_EQ(plain, jet[0]) << e.to_string();
    }
}

TEST(ExprProperty, FirstOrderCoefficientMatchesCentralDifference) {
    std::mt19937_64 rng(13);
    const auto s = generic_symbols();
    for (int trial = 0; trial < 300; ++trial) {
        const auto e = Expr::parse(gen::smooth_expression(rng, 3, gen::integer(rng, 1, 3)), s);
        const auto p = gen::vec(rng, 3, -1.0, 1.0);
        const auto dir = gen::vec(rng, 3, -1.0, 1.0);
        std::vector<Dual> xj;
        for (int i = 0; i < 3; ++i) xj.push_back(Dual::variable(p[i], dir[i]));
        const double exact = evaluate<Dual>(e, std::span<const Dual>(xj), s.param_values()).coefficient(1);
        const double h = 1e-5;
        auto at = [&](double t) {
            std::vector<double> x{p[0] + t * dir[0], p[1] + t * dir[1], p[2] + t * dir[2]};
            return evaluate<double>(e, std::span<const double>(x), s.param_values());
        };
        const double fd = (at(h) - at(-h)) / (2.0 * h);
        EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::abs(exact))) << e.to_string();
    }
}
