#include <gtest/gtest.h>

#include <random>

#include "opplab/shell.hpp"
#include "oracles.hpp"

using namespace opplab;

namespace {

long brute(const QuadForm& f, double a, double b, double r) {
    long box = static_cast<long>(std::ceil(r * f.sqrt_positive_inverse.cwiseAbs().rowwise().sum().maxCoeff())) + 1;
    return oracle::count_shell(f.matrix, f.sqrt_positive, f.shift, a, b, r, box);
}

QuadForm parse(const char* s) { return form_from_json(nlohmann::json::parse(s)); }

}  // namespace

TEST(CountShell, SmallExamples) {
    QuadForm f = diagonal_form({1, -1});
    auto c1 = count_shell({f, -0.5, 0.5, 2});
    EXPECT_EQ(c1.count_lo, 9u);
    EXPECT_EQ(c1.count_hi, 9u);
    auto c2 = count_shell({f, 0.5, 3.5, 2});
    EXPECT_EQ(c2.count_lo, 6u);
    EXPECT_EQ(c2.count_hi, 6u);
    for (const char* js : {R"J({"diag":[1,-1]})J", R"J({"diag":[1,"sqrt(2)",-1]})J", R"J({"entries":[[2,1],[1,-3]]})J"}) {
        auto c = count_shell({parse(js), -0.25, 0.75, 0});
        EXPECT_EQ(c.count_lo, 1u);
    }
}

TEST(CountShell, AgreesWithBruteForce) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<QuadForm> forms{
        diagonal_form({1, -1}),
        diagonal_form({1, std::sqrt(2.0), -std::sqrt(3.0)}),
        parse(R"J({"entries":[[2,1,0],[1,-1,"1/2"],[0,"1/2",-3]]})J"),
        parse(R"J({"entries":[[0,1],[1,0]],"shift":["1/3","-1/4"]})J"),
        parse(R"J({"diag":[1,1,-1,-1],"shift":["1/2",0,0,"1/3"]})J"),
    };
    for (int trial = 0; trial < 60; ++trial) {
        const QuadForm& f = forms[static_cast<std::size_t>(trial) % forms.size()];
        double a = u(rng), b = a + std::fabs(u(rng)) + 0.1;
        double r = 1 + 4 * std::fabs(u(rng)) / 3;
        auto c = count_shell({f, a, b, r});
        long ref = brute(f, a, b, r);
        EXPECT_LE(c.count_lo, static_cast<std::uint64_t>(ref)) << f.tag << " a=" << a << " b=" << b << " r=" << r;
        EXPECT_GE(c.count_hi, static_cast<std::uint64_t>(ref)) << f.tag << " a=" << a << " b=" << b << " r=" << r;
        if (f.exact.all_rational) EXPECT_EQ(c.count_lo, c.count_hi);
    }
}

TEST(CountShell, IntegerBoundariesAreStrict) {
    QuadForm f = diagonal_form({1, 1, -1});
    for (double r : {2.0, 3.0, 5.0}) {
        auto c = count_shell({f, -1, 1, r});
        EXPECT_EQ(c.count_lo, c.count_hi);
        EXPECT_EQ(static_cast<long>(c.count_lo), brute(f, -1, 1, r));
    }
}

TEST(CountShell, ReflectionSymmetry) {
    QuadForm f = parse(R"J({"entries":[[2,1,0],[1,-1,0],[0,0,-3]]})J");
    QuadForm g = scaled(f, -1);
    for (double a : {-2.0, -0.5, 1.0}) {
        auto c1 = count_shell({g, a, a + 2.5, 4});
        auto c2 = count_shell({f, -(a + 2.5), -a, 4});
        EXPECT_EQ(c1.count_lo, c2.count_lo);
    }
}

TEST(CountShell, Monotonicity) {
    QuadForm f = diagonal_form({1, std::sqrt(2.0), -1});
    std::uint64_t prev = 0;
    for (double r = 1; r <= 9; r += 1) {
        auto c = count_shell({f, -1, 1, r});
        EXPECT_GE(c.count_lo, prev);
        prev = c.count_lo;
    }
    EXPECT_LE(count_shell({f, -1, 1, 6}).count_lo, count_shell({f, -1, 2, 6}).count_lo);
    EXPECT_LE(count_shell({f, -1, 1, 6}).count_lo, count_shell({f, -2, 1, 6}).count_lo);
}

TEST(CountShell, ThreadCountIndependent) {
    QuadForm f = diagonal_form({1, std::sqrt(2.0), 1, -std::sqrt(3.0), -1});
    auto c1 = count_shell({f, -1, 1, 6}, kDefaultCountBudget, 1);
    auto c4 = count_shell({f, -1, 1, 6}, kDefaultCountBudget, 4);
    EXPECT_EQ(c1.count_lo, c4.count_lo);
    EXPECT_EQ(c1.count_hi, c4.count_hi);
}

TEST(CountShell, BudgetExhaustion) {
    QuadForm f = diagonal_form({1, 1, 1, -1, -1});
    EXPECT_THROW(count_shell({f, -1, 1, 50}, 10), BoxTooLarge);
}

TEST(ShellVolume, QuadratureExample) {
    QuadForm f = diagonal_form({1, -1});
    auto v = shell_volume({f, -0.5, 0.5, 2}, VolumeMethod::quadrature);
    // oracle: x2 integrated in closed form along x1
    auto len = [](double x) {
        double hi = std::sqrt(std::min(4.0, x * x + 0.5));
        double lo = x * x - 0.5 > 0 ? std::sqrt(x * x - 0.5) : 0.0;
        return 2 * std::max(0.0, hi - std::min(lo, hi));
    };
    double ref = oracle::trapezoid(len, -2, 2, 400000);
    EXPECT_NEAR(v.volume, ref, 1e-5);
    EXPECT_NEAR(v.volume, 4.433, 0.01);
    EXPECT_EQ(v.ci, 0.0);
}

TEST(ShellVolume, TrivialCases) {
    EXPECT_EQ(shell_volume({diagonal_form({1, 1}), 5, 6, 1}).volume, 0.0);
    EXPECT_EQ(shell_volume({diagonal_form({1, -1}), -1, 1, 0}).volume, 0.0);
    EXPECT_THROW(shell_volume({parse(R"J({"entries":[[1,"1/2",0,0],["1/2",-1,0,0],[0,0,1,0],[0,0,0,-1]]})J"), -1, 1, 2},
                              VolumeMethod::quadrature),
                 MethodUnavailable);
}

TEST(ShellVolume, MethodsAgree) {
    std::vector<ShellSpec> specs{
        {diagonal_form({1, std::sqrt(2.0), -std::sqrt(3.0)}), -1, 2, 3},
        {parse(R"J({"entries":[[2,1,0],[1,-1,0],[0,0,-3]]})J"), -1, 1, 4},
        {diagonal_form({1, std::sqrt(2.0), 1, -std::sqrt(3.0), -1}), -1, 1, 5},
        {diagonal_form({1, 2, 3}), 1, 5, 2},
    };
    for (const auto& s : specs) {
        auto q = shell_volume(s, VolumeMethod::quadrature);
        auto m = shell_volume(s, VolumeMethod::montecarlo, 2000000, 5);
        EXPECT_GT(m.ci, 0);
        EXPECT_NEAR(q.volume, m.volume, 4 * m.ci + 1e-9) << s.form.tag;
    }
}

TEST(ShellVolume, MonteCarloDeterministic) {
    ShellSpec s{diagonal_form({1, std::sqrt(2.0), -1}), -1, 1, 4};
    auto a = shell_volume(s, VolumeMethod::montecarlo, 100000, 9, 1);
    auto b = shell_volume(s, VolumeMethod::montecarlo, 100000, 9, 3);
    EXPECT_EQ(a.volume, b.volume);
    EXPECT_EQ(a.ci, b.ci);
}

TEST(RelativeRemainder, Example) {
    auto c = relative_remainder({diagonal_form({1, -1}), -0.5, 0.5, 2});
    EXPECT_EQ(c.count_lo, 9u);
    EXPECT_NEAR(c.delta, (9 - c.volume) / c.volume, 1e-12);
    EXPECT_NEAR(c.delta, 1.03, 0.01);
    EXPECT_THROW(relative_remainder({diagonal_form({1, 1}), 5, 6, 1}), ZeroVolume);
}

TEST(RelativeRemainder, ExactRectangle) {
    // Q = diag(1) on the line: points m in (a,b) with |m| <= r; volume 2*(sqrt(b)-sqrt(a))
    // with a = 0.25, b = 6.25, r = 3 the count is 4 (m = +-1, +-2) and volume 2*(2.5-0.5) = 4.
    auto c = relative_remainder({diagonal_form({1}), 0.25, 6.25, 3});
    EXPECT_EQ(c.count_lo, 4u);
    EXPECT_NEAR(c.delta, 0.0, 1e-12);
}

TEST(Lambda, BallClosedForm) {
    EXPECT_NEAR(lambda_coefficient(diagonal_form({1, 1, -1}), LambdaMethod::cone_param, Region::ball), M_PI * std::sqrt(2.0), 1e-12);
}

TEST(Lambda, BoxMethodsAgree) {
    QuadForm f = diagonal_form({1, 1, -1});
    double cone = lambda_coefficient(f, LambdaMethod::cone_param);
    double fd = lambda_coefficient(f, LambdaMethod::finite_difference);
    EXPECT_NEAR(cone, 2 * M_PI, 1e-8);
    EXPECT_NEAR(fd, cone, 0.02 * cone);
    QuadForm g = diagonal_form({1, std::sqrt(2.0), 1, -std::sqrt(3.0), -1});
    double c5 = lambda_coefficient(g, LambdaMethod::cone_param);
    double f5 = lambda_coefficient(g, LambdaMethod::finite_difference);
    EXPECT_NEAR(f5, c5, 0.02 * c5);
}

TEST(Lambda, Degenerate) {
    EXPECT_THROW(lambda_coefficient(diagonal_form({1, -1}), LambdaMethod::cone_param), DivergentIntegral);
    EXPECT_EQ(lambda_coefficient(diagonal_form({1, 2, 3}), LambdaMethod::cone_param), 0.0);
}

TEST(ShellVolume, StabilizesToLambda) {
    QuadForm f = diagonal_form({1, std::sqrt(2.0), -1});
    double lam = lambda_coefficient(f, LambdaMethod::cone_param);
    double r = 40;
    auto v = shell_volume({f, -0.5, 0.5, r}, VolumeMethod::montecarlo, 4000000, 3);
    EXPECT_NEAR(v.volume / (1.0 * r), lam, 4 * v.ci / r + 0.01 * lam);
}
