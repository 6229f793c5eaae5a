#include <gtest/gtest.h>

#include <random>

#include "opplab/calibration.hpp"
#include "opplab/orbit.hpp"

using namespace opplab;

namespace {

QuadForm irrational5() { return diagonal_form({1, std::sqrt(2.0), 1, -std::sqrt(3.0), -1}); }
QuadForm split5() { return diagonal_form({1, -1, 1, -1, 1}); }

QuadForm random_indefinite(int d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    std::normal_distribution<double> g(0, 1);
    for (;;) {
        Mat A(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) A(i, j) = g(rng);
        Eigen::HouseholderQR<Mat> qr(A);
        Mat O = qr.householderQ();
        Vec ev(d);
        for (int i = 0; i < d; ++i) ev(i) = (i % 2 == 0 ? 1 : -1) * u(rng);
        Mat M = O * ev.asDiagonal() * O.transpose();
        return decompose((M + M.transpose()) / 2);
    }
}

// Shortest vector of a 2-D lattice by Lagrange reduction.
double lagrange_min2(Eigen::Vector2d b1, Eigen::Vector2d b2) {
    for (;;) {
        if (b2.squaredNorm() < b1.squaredNorm()) std::swap(b1, b2);
        double mu = std::round(b1.dot(b2) / b1.squaredNorm());
        if (mu == 0) break;
        b2 -= mu * b1;
    }
    return b1.squaredNorm();
}

}  // namespace

TEST(OrbitParamsTest, DeterminantsAndGroupLaw) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ur(1, 20), ut(-3, 3);
    for (int d : {1, 2, 3, 4}) {
        QuadForm f = random_indefinite(d, rng);
        auto p = OrbitParams::make(f, 1, 0);
        EXPECT_NEAR(std::fabs(p.A_Q.determinant()), 1.0, 1e-10);
        EXPECT_NEAR(std::fabs(lambda_q_generators(f).determinant()), 1.0, 1e-10);
        for (int k = 0; k < 5; ++k) {
            double r = ur(rng), t = ut(rng);
            EXPECT_NEAR(std::fabs(OrbitParams::make(f, r, t).generators().determinant()), 1.0, 1e-9);
        }
    }
    for (int k = 0; k < 100; ++k) {
        double r = ur(rng), t = ut(rng);
        Mat2 lhs = d_mat(r) * u_mat(t), rhs = u_mat(t * r * r) * d_mat(r);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14 * std::max(1.0, r * r * std::fabs(t)));
    }
}

TEST(OrbitParamsTest, HIdentity) {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> ui(-6, 6);
    std::uniform_real_distribution<double> ur(1, 10), ut(-2, 2);
    for (int d : {1, 2, 3, 5}) {
        QuadForm f = random_indefinite(d, rng);
        for (int k = 0; k < 20; ++k) {
            double r = ur(rng), t = ut(rng);
            Mat G = OrbitParams::make(f, r, t).generators();
            Vec m(d), n(d), mn(2 * d);
            for (int j = 0; j < d; ++j) {
                m(j) = ui(rng);
                n(j) = ui(rng);
            }
            mn << m, n;
            double direct = orbit_H(f, r, t, m, n);
            EXPECT_NEAR(direct, (G * mn).squaredNorm(), 1e-10 * std::max(1.0, direct));
        }
    }
    QuadForm f = diagonal_form({1, -1});
    Vec m(2), n(2);
    m << 2, -1;
    n << 3, 1;
    EXPECT_NEAR(orbit_H(f, 1, 0, m, n), m.squaredNorm() + n.squaredNorm(), 1e-14);
}

TEST(OrbitLattice, TrivialExample) {
    auto L = build_orbit_lattice(diagonal_form({1}), 1, 0);
    EXPECT_EQ(L.rank(), 2);
    auto mp = successive_minima(L);
    EXPECT_NEAR(mp.minima[0], 1, 1e-12);
    EXPECT_NEAR(mp.minima[1], 1, 1e-12);
}

TEST(OrbitLattice, SelfDualityAndMinimaSize) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ur(1, 12), ut(0.05, 2);
    for (int k = 0; k < 50; ++k) {
        int d = 2 + k % 2;
        QuadForm f = random_indefinite(d, rng);
        double r = ur(rng), t = ut(rng);
        auto a = successive_minima(build_orbit_lattice(f, r, t)).minima;
        auto b = successive_minima(dual_orbit_lattice(f, r, t)).minima;
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-9 * std::max(1.0, a[j]));
        // vectors with n = 0 have length at least r/sqrt(q); the two branches
        // merge into sqrt(q0)/r once q0 >= 1 and r > q
        EXPECT_GE(a[0], std::min(std::sqrt(f.q0) / r, r / std::sqrt(f.q_max)) * (1 - 1e-12));
        if (f.q0 >= 1 && r > f.q_max) EXPECT_GE(a[0], std::sqrt(f.q0) / r * (1 - 1e-12));
    }
}

TEST(OrbitLattice, DualProductCalibrated) {
    const double c = calibrated("orbit_dual_product_c");
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> ur(1, 12), ut(0.05, 2);
    for (int k = 0; k < 30; ++k) {
        int d = 2 + k % 2;
        QuadForm f = random_indefinite(d, rng);
        auto M = successive_minima(build_orbit_lattice(f, ur(rng), ut(rng))).minima;
        const std::size_t n = M.size();
        for (std::size_t j = 0; j < n; ++j) {
            double prod = M[j] * M[n - 1 - j];
            EXPECT_GE(prod, 1 / c);
            EXPECT_LE(prod, c);
        }
    }
}

TEST(Gamma, IntervalShrinkAndSupProperty) {
    QuadForm f = irrational5();
    auto wide = gamma_scan(f, 8, 0.25, 2, 0.45, 96, 8);
    auto narrow = gamma_scan(f, 8, 0.5, 1, 0.45, 96, 8);
    EXPECT_LE(narrow.gamma, wide.gamma * (1 + 1e-12));
    const double e = 1 / (0.5 - 0.45);
    for (double a : wide.alpha_d) EXPECT_GE(std::pow(wide.gamma, e) * std::pow(8.0, 5), a * (1 - 1e-9));
    EXPECT_GE(wide.argmax_t, 0.25);
    EXPECT_LE(wide.argmax_t, 2);
    EXPECT_THROW(gamma_scan(f, 8, 0.5, 2, 0.3, 16, 0), InvalidArgument);
    EXPECT_THROW(gamma_scan(f, 8, 2, 0.5, 0.45, 16, 0), InvalidArgument);
}

TEST(Gamma, IrrationalDecaysRationalResonates) {
    std::vector<double> irr, rat;
    for (double r : {4.0, 8.0, 16.0, 32.0}) {
        irr.push_back(gamma_scan(irrational5(), r, 0.5, 2, 0.45, 96, 10).gamma);
        rat.push_back(gamma_scan(split5(), r, 0.5, 2, 0.45, 96, 10).gamma);
    }
    for (std::size_t i = 1; i < irr.size(); ++i) EXPECT_LT(irr[i], irr[i - 1]);
    // t = pi/2 gives t' = 1 and Lambda_t contains r^{-1}-short vectors in every coordinate
    for (double r : {8.0, 16.0, 32.0}) {
        double a = orbit_alpha_d(split5(), r, kPi / 2) * std::pow(r, -5);
        EXPECT_NEAR(a, 1.0, 1e-9);
        EXPECT_GE(gamma_scan(split5(), r, kPi / 2 * 0.99, kPi / 2 * 1.01, 0.45, 3, 0).gamma, 0.99);
    }
    for (double g : rat) EXPECT_GE(g, 0.5);
}

TEST(Phi, Examples) {
    QuadForm f = diagonal_form({1, -1, 1});
    for (double s : {1.0, 1.5, 4.0}) EXPECT_NEAR(phi_envelope(f, s), std::pow(s, 3), 1e-12 * std::pow(s, 3));
    QuadForm g = diagonal_form({4, -9, 0.25});
    for (double s : {3.0, 5.0}) EXPECT_NEAR(phi_envelope(g, s), std::pow(s, 3) / std::sqrt(9.0), 1e-12 * std::pow(s, 3));
    // minima of Q+^{1/2} Z^3 are 0.5, 2, 3
    EXPECT_NEAR(phi_envelope(g, 1.0), 1.0 / 3.0 * 4 * 9, 1e-12);
    EXPECT_THROW(phi_envelope(g, 0), InvalidArgument);
}

TEST(Phi, EnvelopeCalibrated) {
    const double C = calibrated("phi_envelope_C");
    std::mt19937_64 rng(15);
    for (int k = 0; k < 6; ++k) {
        QuadForm f = random_indefinite(2 + k % 2, rng);
        for (double s : {1.0, 2.0, 5.0}) {
            double sup = 0;
            for (int i = 0; i < 24; ++i) {
                double t = 0.05 + 1.95 * i / 23.0;
                Mat G = diagonal_action(d_mat(s) * u_mat(t), f.dim) * lambda_q_generators(f);
                auto al = alpha_profile(LatticeBasis::from_generators(G)).alpha;
                sup = std::max(sup, al[static_cast<std::size_t>(f.dim)]);
            }
            EXPECT_LE(sup, C * phi_envelope(f, s)) << "s=" << s;
        }
    }
}

TEST(Tau, IdentitiesAndSandwich) {
    for (double a : {1.0, 2.0, 10.0, 100.0}) EXPECT_NEAR(tau_hat(2, a), 1, 1e-10);
    for (int i = 0; i < 20; ++i) {
        double a = std::pow(100.0, i / 19.0);
        EXPECT_NEAR(tau_hat(4, a), 0.5 * (a * a + 1 / (a * a)), 1e-10 * a * a);
        for (double l : {3.0, 4.0, 6.0}) {
            double v = tau_hat(l, a), up = std::pow(a, l - 2);
            EXPECT_GE(v, c_lambda(l) * up * (1 - 1e-12));
            EXPECT_LE(v, up * (1 + 1e-12));
        }
    }
    EXPECT_NEAR(c_lambda(4), 0.5, 1e-15);
    EXPECT_NEAR(c_lambda(3), 2 / kPi, 1e-15);
    EXPECT_THROW(tau_hat(4, 0.5), InvalidArgument);
}

TEST(Tau, TableMonotone) {
    std::vector<double> as;
    for (int i = 0; i < 30; ++i) as.push_back(std::pow(50.0, i / 29.0));
    for (double l : {2.5, 3.0, 6.0}) {
        auto tab = tau_table(l, as);
        EXPECT_NEAR(tab.samples.front().second, 1, 1e-12);
        for (std::size_t i = 1; i < tab.samples.size(); ++i) EXPECT_GT(tab.samples[i].second, tab.samples[i - 1].second);
    }
}

TEST(KAverage, ConstantAndSphericalFunctions) {
    auto Z2 = LatticeBasis::from_generators(Mat::Identity(2, 2));
    EXPECT_EQ(k_average([](const LatticeBasis&) { return 1.0; }, 7, Z2), 1.0);
    for (double l : {3.0, 4.0, 6.0})
        for (double a : {1.5, 3.0, 6.0}) {
            auto f = [l](const LatticeBasis& L) { return std::pow(L.generators.col(0).norm(), -l); };
            EXPECT_NEAR(k_average(f, a, Z2), tau_hat(l, a), 1e-8 * tau_hat(l, a));
        }
    EXPECT_THROW(k_average([](const LatticeBasis&) { return 1.0; }, 2, Z2, 32), InvalidArgument);
}

TEST(KAverage, RotationInvariance) {
    std::mt19937_64 rng(16);
    std::normal_distribution<double> g(0, 1);
    Mat B(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) B(i, j) = g(rng);
    B /= std::pow(std::fabs(B.determinant()), 0.25);
    auto f = [](const LatticeBasis& L) { return std::pow(L.generators.col(0).norm(), -3.0) + L.generators.col(2).squaredNorm(); };
    auto D = LatticeBasis::from_generators(B);
    auto Dk = LatticeBasis::from_generators(diagonal_action(k_mat(0.37), 2) * B);
    double x = k_average(f, 2.5, D), y = k_average(f, 2.5, Dk);
    EXPECT_NEAR(x, y, 1e-8 * x);
}

TEST(GmSlope, AgreesWithLagrangeOracle) {
    // alpha(d_a k Z^4) = m^{-2}, m the shortest vector of d_a k Z^2
    auto Z4 = LatticeBasis::from_generators(Mat::Identity(4, 4));
    for (double a : {2.0, 8.0}) {
        const int N = 1 << 16;
        long double s = 0;
        for (int i = 0; i < N; ++i) {
            Mat2 g = d_mat(a) * k_mat(2 * kPi * i / N);
            s += std::pow(1 / lagrange_min2(g.col(0), g.col(1)), 1.2);
        }
        double oracle = static_cast<double>(s / N);
        double v = k_average(alpha_power(1.2), a, Z4);
        EXPECT_NEAR(v, oracle, 2e-3 * oracle) << "a=" << a;
    }
}

TEST(GmSlope, FitAndIntercept) {
    auto Z4 = LatticeBasis::from_generators(Mat::Identity(4, 4));
    auto fit = gm_slope_check(Z4, 1.2, {2, 4, 8, 16});
    ASSERT_EQ(fit.average.size(), 4u);
    for (std::size_t i = 1; i < fit.average.size(); ++i) EXPECT_GT(fit.average[i], fit.average[i - 1]);
    // local slopes decrease towards beta d - 2 = 0.4
    double s1 = std::log(fit.average[1] / fit.average[0]) / std::log(2.0);
    double s3 = std::log(fit.average[3] / fit.average[2]) / std::log(2.0);
    EXPECT_LT(s3, s1);
    EXPECT_GT(s3, 0.4);
    EXPECT_TRUE(std::isfinite(fit.intercept));
    EXPECT_LE(fit.intercept, std::log(calibrated("gm_intercept_R")));
    EXPECT_THROW(gm_slope_check(Z4, 0.9, {2, 4, 8, 16}), InvalidArgument);
    EXPECT_THROW(gm_slope_check(Z4, 1.2, {2, 4, 8}), InvalidArgument);
}

TEST(CompactApprox, ExamplesAndCalibratedBound) {
    QuadForm f = irrational5();
    EXPECT_NEAR(compact_approx_check(f, 8, 0), 1.0, 1e-9);
    EXPECT_NEAR(std::atan(1.0), kPi / 4, 1e-15);
    EXPECT_THROW(compact_approx_check(f, 8, 2.5), InvalidArgument);
    EXPECT_THROW(compact_approx_check(f, 1, 0.5), InvalidArgument);
    const double C = calibrated("compact_ratio_C");
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> ur(1.5, 16), ut(-2, 2);
    for (int k = 0; k < 50; ++k) {
        QuadForm g = random_indefinite(2 + k % 2, rng);
        EXPECT_LE(compact_approx_check(g, ur(rng), ut(rng)), 10 * C);
    }
}

TEST(IntegralAverage, ToyIsFinite) {
    QuadForm f = decompose((Mat(2, 2) << 2, 1, 1, -1).finished());
    SmoothedWindow w(-1, 1, 0.25);
    auto ia = integral_average_check(f, 4, 1.0, w, 1.2);
    EXPECT_TRUE(std::isfinite(ia.lhs));
    EXPECT_TRUE(std::isfinite(ia.rhs));
    EXPECT_GT(ia.lhs, 0);
    EXPECT_GT(ia.rhs, 0);
    EXPECT_THROW(integral_average_check(f, 1.1, 1.0, w, 1.2), InvalidArgument);
}

TEST(IntegralAverage, IrrationalFiveCalibratedAndDoubling) {
    const double R = calibrated("integral_average_R");
    QuadForm f = irrational5();
    SmoothedWindow w(-1, 1, 0.25);
    auto a8 = integral_average_check(f, 8, 3.0, w, 0.45);
    auto a16 = integral_average_check(f, 16, 3.0, w, 0.45);
    EXPECT_LE(a16.lhs, R * a16.rhs);
    EXPECT_EQ(a16.v_points, 243);
    double growth = a16.lhs / a8.lhs;
    EXPECT_LE(growth, 8 * (a16.gamma / a8.gamma) * 1.2);
}
