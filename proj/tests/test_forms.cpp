#include <gtest/gtest.h>

#include <random>

#include "opplab/forms.hpp"
#include "oracles.hpp"

using namespace opplab;

namespace {

double maxabs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

void expect_invariants(const QuadForm& f) {
    Mat q2 = f.matrix * f.matrix;
    Mat id = Mat::Identity(f.dim, f.dim);
    EXPECT_LE(maxabs(f.positive_part * f.positive_part - q2), 1e-12 * maxabs(q2));
    EXPECT_LE(maxabs(f.reflection * f.reflection - id), 1e-12);
    EXPECT_LE(maxabs(f.sqrt_positive * f.sqrt_positive - f.positive_part), 1e-12 * maxabs(f.positive_part));
    EXPECT_LE(maxabs(f.reflection * f.matrix - f.matrix * f.reflection), 1e-12 * maxabs(f.matrix));
    EXPECT_LE(maxabs(f.reflection * f.positive_part - f.matrix), 1e-12 * maxabs(f.matrix));
    double prod = 1;
    for (int i = 0; i < f.dim; ++i) prod *= std::fabs(f.eigenvalues(i));
    EXPECT_NEAR(f.det_abs, prod, 1e-12 * prod);
    EXPECT_GT(f.q0, 0);
    for (int i = 1; i < f.dim; ++i) EXPECT_GE(std::fabs(f.eigenvalues(i - 1)), std::fabs(f.eigenvalues(i)));
}

}  // namespace

TEST(Decompose, DiagonalTwoByTwo) {
    QuadForm f = diagonal_form({2, -3});
    EXPECT_EQ(f.p, 1);
    EXPECT_EQ(f.q_neg, 1);
    EXPECT_DOUBLE_EQ(f.positive_part(0, 0), 2);
    EXPECT_DOUBLE_EQ(f.positive_part(1, 1), 3);
    EXPECT_DOUBLE_EQ(f.sqrt_positive(0, 0), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(f.sqrt_positive(1, 1), std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(f.reflection(1, 1), -1);
    EXPECT_DOUBLE_EQ(f.q0, 2);
    EXPECT_DOUBLE_EQ(f.q_max, 3);
    EXPECT_DOUBLE_EQ(f.det_abs, 6);
    expect_invariants(f);
}

TEST(Decompose, OffDiagonalSwap) {
    Mat m(2, 2);
    m << 0, 1, 1, 0;
    QuadForm f = decompose(m);
    EXPECT_NEAR(f.eigenvalues(0), 1, 1e-15);
    EXPECT_NEAR(f.eigenvalues(1), -1, 1e-15);
    EXPECT_LE(maxabs(f.positive_part - Mat::Identity(2, 2)), 1e-15);
    EXPECT_LE(maxabs(f.reflection - m), 1e-15);
    expect_invariants(f);
}

TEST(Decompose, FiveDimensionalIrrational) {
    QuadForm f = diagonal_form({1, std::sqrt(2.0), 1, -std::sqrt(3.0), -1});
    EXPECT_EQ(f.p, 3);
    EXPECT_EQ(f.q_neg, 2);
    EXPECT_DOUBLE_EQ(f.q0, 1);
    EXPECT_DOUBLE_EQ(f.q_max, std::sqrt(3.0));
    expect_invariants(f);
}

TEST(Decompose, Errors) {
    Mat m(2, 2);
    m << 1, 2, 2.001, 1;
    EXPECT_THROW(decompose(m), NotSymmetric);
    EXPECT_THROW(diagonal_form({1, 1e-12}), DegenerateForm);
    EXPECT_THROW(diagonal_form({1, 0}), DegenerateForm);
}

TEST(Decompose, RandomFormsAgainstEigenSolver) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        int d = 2 + trial % 7;
        Mat a = oracle::random_symmetric(d, rng);
        Eigen::SelfAdjointEigenSolver<Mat> es(a);
        Vec ref = es.eigenvalues();
        if (ref.cwiseAbs().minCoeff() < 1e-6) continue;
        QuadForm f = decompose(a);
        expect_invariants(f);
        std::vector<double> x(f.eigenvalues.data(), f.eigenvalues.data() + d), y(ref.data(), ref.data() + d);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        for (int i = 0; i < d; ++i) EXPECT_NEAR(x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)], 1e-12 * (1 + std::fabs(y[static_cast<std::size_t>(i)])));
        // eigen residual
        EXPECT_LE((a * f.eigenvectors - f.eigenvectors * f.eigenvalues.asDiagonal()).norm(), 1e-12 * a.norm());
    }
}

TEST(Decompose, ScalingAndConjugation) {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        int d = 2 + trial % 5;
        Mat a = oracle::random_symmetric(d, rng);
        if (Eigen::SelfAdjointEigenSolver<Mat>(a).eigenvalues().cwiseAbs().minCoeff() < 1e-3) continue;
        QuadForm f = decompose(a);
        QuadForm g = decompose(a * 3.5);
        for (int i = 0; i < d; ++i) EXPECT_NEAR(g.eigenvalues(i), 3.5 * f.eigenvalues(i), 1e-11);
        EXPECT_LE(maxabs(g.reflection - f.reflection), 1e-11);
        Mat u = oracle::random_orthogonal(d, rng);
        Mat c = u * a * u.transpose();
        c = (c + c.transpose()) / 2;
        QuadForm h = decompose(c);
        std::vector<double> x(f.eigenvalues.data(), f.eigenvalues.data() + d), y(h.eigenvalues.data(), h.eigenvalues.data() + d);
        std::sort(x.begin(), x.end());
        std::sort(y.begin(), y.end());
        for (int i = 0; i < d; ++i) EXPECT_NEAR(x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)], 1e-10);
    }
}

TEST(Rationality, Examples) {
    auto r1 = classify_rationality(diagonal_form({1, -1}), 10);
    EXPECT_EQ(r1.rationality_hint, RationalityHint::integer_entries);
    ASSERT_TRUE(r1.scale_to_integer);
    EXPECT_EQ(r1.scale_to_integer->num, 1);

    auto r2 = classify_rationality(form_from_json(nlohmann::json::parse(R"J({"diag":["1/2","-3/2"]})J")), 10);
    EXPECT_EQ(r2.rationality_hint, RationalityHint::rational_entries);
    ASSERT_TRUE(r2.scale_to_integer);
    EXPECT_EQ(r2.scale_to_integer->num, 2);

    auto r3 = classify_rationality(form_from_json(nlohmann::json::parse(R"J({"diag":[1,"-sqrt(2)"]})J")), 1000000);
    EXPECT_EQ(r3.rationality_hint, RationalityHint::irrational_or_unknown);
    EXPECT_FALSE(r3.scale_to_integer);
}

TEST(Rationality, SqrtTwoHasNoSmallDenominator) {
    // oracle: no q <= 10^6 brings q*sqrt(2) within the reconstruction tolerance
    const long double s2 = std::sqrt(2.0L);
    long double best = 1;
    for (long q = 1; q <= 1000000; ++q) {
        long double e = std::fabs(q * s2 - std::round(q * s2)) / q;
        best = std::min(best, e);
    }
    EXPECT_GT(best, 1e-14L);
    EXPECT_FALSE(reconstruct_rational(std::sqrt(2.0), 1000000));
}

TEST(Rationality, ProportionalFlag) {
    auto r = classify_rationality(diagonal_form({std::sqrt(2.0), -2 * std::sqrt(2.0)}), 1000);
    EXPECT_EQ(r.rationality_hint, RationalityHint::irrational_or_unknown);
    EXPECT_TRUE(r.proportional_rational);
}

TEST(FormJson, WhitelistAndShift) {
    auto f = form_from_json(nlohmann::json::parse(R"J({"diag":[1,"sqrt(2)",1,"-sqrt(3)",-1]})J"));
    EXPECT_EQ(f.dim, 5);
    EXPECT_DOUBLE_EQ(f.matrix(1, 1), std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(f.matrix(3, 3), -std::sqrt(3.0));
    EXPECT_EQ(f.tag, "diag(1,sqrt(2),1,-sqrt(3),-1)");
    EXPECT_TRUE(f.entry_exact(0, 0));
    EXPECT_FALSE(f.entry_exact(1, 1));
    auto g = form_from_json(nlohmann::json::parse(R"J({"dim":2,"entries":[[0,"1/2"],["1/2",0]],"shift":["1/3",0]})J"));
    EXPECT_TRUE(g.exact.all_rational);
    EXPECT_EQ(g.exact.scale, 2);
    EXPECT_TRUE(g.exact.shift_rational);
    EXPECT_EQ(g.exact.shift_den, 3);
    auto h = form_from_json(nlohmann::json::parse(R"J({"diag":["golden",-1]})J"));
    EXPECT_NEAR(h.matrix(0, 0), 1.6180339887498949, 1e-16);
    EXPECT_THROW(form_from_json(nlohmann::json::parse(R"J({"diag":["pi",1]})J")), ParseError);
    EXPECT_THROW(form_from_json(nlohmann::json::parse(R"J({"entries":[[1,2]]})J")), ParseError);
    EXPECT_THROW(form_from_json(nlohmann::json::parse(R"J([1,2])J")), ParseError);
    EXPECT_THROW(form_from_json(nlohmann::json::parse(R"J({"entries":[[1,2],[3,1]]})J")), NotSymmetric);
}

TEST(FormJson, BestRationalConvergents) {
    Frac f = best_rational(M_PI, 1000);
    EXPECT_EQ(f.num, 355);
    EXPECT_EQ(f.den, 113);
    Frac g = best_rational(-0.75, 100);
    EXPECT_EQ(g.num, -3);
    EXPECT_EQ(g.den, 4);
}
