#include <gtest/gtest.h>

#include <cstdlib>

#include "tanglide/scenario.hpp"

using namespace tanglide;
using nlohmann::json;

namespace {

std::string offending_key(const json& j) {
    try {
        auto c = parse_config(j);
        if (c.command.empty()) c.command = "verify";
        validate_config(c);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST(Config, MinimalBuiltin) {
    const auto c = parse_config(json{{"model", {{"builtin", "fold_fold"}}}});
    EXPECT_EQ(c.model.builtin, "fold_fold");
    EXPECT_EQ(c.T, 1.0);
    EXPECT_EQ(c.eps, std::vector<double>{1e-2});
    EXPECT_TRUE(c.initial.empty());
}

TEST(Config, NamesTheOffendingKey) {
    const json model{{"builtin", "fold_fold"}};
    EXPECT_EQ(offending_key(json{{"model", model}, {"eps", {-1}}}), "eps[0]");
    EXPECT_EQ(offending_key(json{{"model", model}, {"eps", {1e-2, 0}}}), "eps[1]");
    EXPECT_EQ(offending_key(json{{"model", model}, {"rtol", 0}}), "rtol");
    EXPECT_EQ(offending_key(json{{"model", model}, {"T", -1}}), "T");
    EXPECT_EQ(offending_key(json{{"model", model}, {"phi", "tanh"}}), "phi");
    EXPECT_EQ(offending_key(json{{"model", model}, {"rtl", 1e-3}}), "rtl");
    EXPECT_EQ(offending_key(json{{"model", model}, {"initial", "origin"}}), "initial");
    EXPECT_EQ(offending_key(json{{"eps", 1}}), "model");
    EXPECT_EQ(offending_key(json{{"model", {{"builtin", "fold_fold"}, {"h", "x1"}}}}), "model");
    EXPECT_EQ(offending_key(json{{"model", {{"states", {"x1"}}, {"h", "x1"}}}}), "model.zplus");
    EXPECT_EQ(offending_key(json{{"model", model}, {"command", "plot"}}), "command");
}

TEST(Config, AcceptsListsOfPoints) {
    const auto c = parse_config(json{{"model", {{"builtin", "fold_fold"}}}, {"initial", {{0, 0, 0, 0}, {0, 1, 1, 0}}}});
    ASSERT_EQ(c.initial.size(), 2u);
    EXPECT_EQ(c.initial[1][2], 1.0);
}

TEST(BuildModel, BuiltinsAndOverrides) {
    ModelSpec s;
    s.builtin = "fold_fold";
    s.params["a1"] = 5.0;
    const auto ff = build_model(s);
    EXPECT_EQ(ff.system.Zplus(Vec::Zero(4))[0], 5.0);
    s.params["z9"] = 1.0;
    EXPECT_THROW(build_model(s), ConfigError);
    ModelSpec h;
    h.builtin = "hiv";
    h.params["C_T"] = 10.0;
    EXPECT_THROW(build_model(h), ConstraintError);
    h.builtin = "measles";
    EXPECT_THROW(build_model(h), ConfigError);
    ModelSpec c;
    c.builtin = "lie_chain";
    c.params = {{"n", 6}, {"l", 5}, {"m", 3}};
    EXPECT_EQ(build_model(c).system.dim(), 6u);
}

TEST(BuildModel, InlineModel) {
    ModelSpec s;
    s.states = {"x1", "x2"};
    s.inline_params = {{"c", 2.0}};
    s.h = "x2";
    s.zplus = {"c", "-1"};
    s.zminus = {"c", "1"};
    const auto b = build_model(s);
    EXPECT_TRUE(b.manifolds.empty());
    EXPECT_EQ(b.system.Zminus(Vec::Zero(2))[0], 2.0);
    s.zplus = {"c"};
    EXPECT_THROW(build_model(s), ConfigError);
}

TEST(Output, SeventeenDigitsRoundTrip) {
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        EXPECT_EQ(std::strtod(format_double(x).c_str(), nullptr), x);
    }
    EXPECT_EQ(format_double(-0.0), "0");
}

TEST(Threads, EnvironmentCap) {
    ::setenv("TANGLIDE_THREADS", "3", 1);
    EXPECT_EQ(sweep_threads(), 3u);
    ::setenv("TANGLIDE_THREADS", "zero", 1);
    EXPECT_GE(sweep_threads(), 1u);
    ::unsetenv("TANGLIDE_THREADS");
}
