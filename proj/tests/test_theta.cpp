#include <gtest/gtest.h>

#include <complex>
#include <random>

#include "opplab/calibration.hpp"
#include "opplab/theta.hpp"
#include "oracles.hpp"

using namespace opplab;

namespace {

// Direct box summation in long double.
std::complex<long double> brute_theta(const QuadForm& f, double r, double t, const Vec& v, long box) {
    const int d = f.dim;
    std::vector<long> lo(static_cast<std::size_t>(d), -box), hi(static_cast<std::size_t>(d), box);
    std::complex<long double> s = 0;
    oracle::for_box(lo, hi, [&](const std::vector<long>& m) {
        long double qp = 0, q = 0, lin = 0;
        for (int i = 0; i < d; ++i) {
            lin += m[static_cast<std::size_t>(i)] * static_cast<long double>(v(i)) / r;
            for (int k = 0; k < d; ++k) {
                long double mm = static_cast<long double>(m[static_cast<std::size_t>(i)]) * m[static_cast<std::size_t>(k)];
                qp += mm * f.positive_part(i, k);
                q += mm * f.matrix(i, k);
            }
        }
        s += std::exp(-qp / (static_cast<long double>(r) * r)) * std::exp(std::complex<long double>(0, t * q + lin));
    });
    return s;
}

QuadForm rotated(const std::vector<double>& eig, std::mt19937_64& rng) {
    const int d = static_cast<int>(eig.size());
    Mat U = oracle::random_orthogonal(d, rng);
    Vec e = Eigen::Map<const Vec>(eig.data(), d);
    Mat Q = U * e.asDiagonal() * U.transpose();
    return decompose(0.5 * (Q + Q.transpose()));
}

double jacobi3() {
    double s = 0;
    for (int m = -40; m <= 40; ++m) s += std::exp(-static_cast<double>(m) * m);
    return s;
}

}  // namespace

TEST(Kernel, MassSupportAndTransform) {
    for (int n : {2, 4, 8, 12}) {
        for (double s : {0.1, 1.0, 3.0}) {
            SmoothingKernel k(n, s);
            EXPECT_EQ(k.cdf(-s), 0.0);
            EXPECT_EQ(k.cdf(s), 1.0);
            EXPECT_EQ(k.density(s * 1.0000001), 0.0);
            EXPECT_NEAR(k.cdf(0), 0.5, 1e-13);
            double mass = oracle::trapezoid([&](double x) { return k.density(x); }, -s, s, 20000);
            EXPECT_NEAR(mass, 1.0, 1e-6);
            for (double x = -s; x <= s; x += s / 37) EXPECT_GE(k.density(x), 0.0);
            for (double t : {0.3, 2.0, 7.5, 40.0}) {
                double ft = oracle::trapezoid([&](double x) { return k.density(x) * std::cos(t * x); }, -s, s, 40000);
                EXPECT_NEAR(k.fourier(t), ft, 1e-6) << "n=" << n << " s=" << s << " t=" << t;
            }
        }
    }
    // derivative of the cdf is the density
    SmoothingKernel k(8, 0.5);
    for (double x = -0.45; x < 0.45; x += 0.05) EXPECT_NEAR((k.cdf(x + 1e-6) - k.cdf(x - 1e-6)) / 2e-6, k.density(x), 1e-5);
    EXPECT_THROW(SmoothingKernel(1, 1.0), InvalidArgument);
    EXPECT_THROW(SmoothingKernel(8, 0.0), InvalidArgument);
}

TEST(Window, PlateauSandwichAndMass) {
    SmoothedWindow win(-0.5, 1.5, 0.2);
    EXPECT_DOUBLE_EQ(window_eval(win, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(window_fourier(win, 0.0).real(), 2.0);
    for (double x = -1.0; x <= 2.0; x += 1e-3) {
        double g = win.eval(x);
        double lo = (x >= -0.3 && x <= 1.3) ? 1.0 : 0.0;
        double hi = (x >= -0.7 && x <= 1.7) ? 1.0 : 0.0;
        EXPECT_GE(g, lo);
        EXPECT_LE(g, hi);
    }
    double mass = oracle::trapezoid([&](double x) { return win.eval(x); }, -0.7, 1.7, 50000);
    EXPECT_NEAR(mass, 2.0, 1e-8);
    EXPECT_THROW(SmoothedWindow(0, 1, 0.5), InvalidArgument);
    EXPECT_THROW(SmoothedWindow(1, 0, 0.1), InvalidArgument);
}

TEST(Window, FourierAgainstQuadratureAndDecay) {
    for (int n : {4, 8}) {
        SmoothedWindow win(-0.3, 0.6, 0.1, n);
        for (double t = 1.0; t <= 1e4; t *= 1.3) {
            cplx g = window_fourier(win, t);
            double bound = std::min(0.9, 2.0 / t) * std::min(1.0, std::pow(n / (0.1 * t), n));
            EXPECT_LE(std::abs(g), bound * (1 + 1e-12)) << "t=" << t;
        }
        for (double t : {1.0, 17.0, 230.0, 4100.0}) {
            long pts = 400000;
            double re = oracle::trapezoid([&](double x) { return win.eval(x) * std::cos(t * x); }, -0.4, 0.7, pts);
            double im = oracle::trapezoid([&](double x) { return win.eval(x) * std::sin(t * x); }, -0.4, 0.7, pts);
            cplx g = window_fourier(win, t);
            EXPECT_NEAR(g.real(), re, 1e-8) << "t=" << t;
            EXPECT_NEAR(g.imag(), im, 1e-8) << "t=" << t;
        }
    }
}

TEST(SmoothedBoxTest, FactorizationIdentity) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (const QuadForm& f : {diagonal_form({1, -1}), diagonal_form({2, std::sqrt(3.0), -0.5}), rotated({1.3, -0.7, 2.1}, rng)}) {
        for (int sign : {1, -1}) {
            for (double eps : {0.01, 0.05, 0.11}) {
                double r = 3.0;
                SmoothedBox box(f, r, eps, sign);
                for (int k = 0; k < 400; ++k) {
                    Vec y(f.dim);
                    for (int j = 0; j < f.dim; ++j) y(j) = 1.3 * u(rng);
                    Vec x = r * f.sqrt_positive_inverse * y;
                    double lhs = box.smoothed_indicator(x);
                    double rhs = box.chi(x) * std::exp(-x.dot(f.positive_part * x) / (r * r));
                    EXPECT_NEAR(lhs, rhs, 1e-12);
                }
            }
        }
    }
    EXPECT_THROW(SmoothedBox(diagonal_form({1, -1}), 1.0, 0.2, 1), InvalidArgument);
}

TEST(Theta, SpecExamples) {
    QuadForm one = diagonal_form({1});
    Vec v0 = Vec::Zero(1);
    ThetaEval th = theta_sum(one, 1.0, 0.0, v0);
    EXPECT_NEAR(th.value.real(), 1.7726372, 1e-7);
    EXPECT_NEAR(th.value.real(), jacobi3(), 1e-14);
    EXPECT_LE(th.truncation_bound, 1e-15);
    // origin dominates for small r
    EXPECT_NEAR(theta_sum(one, 0.05, 0.0, v0).value.real(), 1.0, 1e-15);
    EXPECT_NEAR(theta_sum(diagonal_form({1, -2, 3}), 0.1, 0.0, Vec::Zero(3)).value.real(), 1.0, 1e-15);

    cplx ti = theta_integral(one, 1.0, 0.0, v0);
    EXPECT_NEAR(ti.real(), std::sqrt(kPi), 1e-14);
    EXPECT_NEAR(std::abs(th.value - ti), 1.83e-4, 5e-7);
}

TEST(Theta, AgreesWithBruteForce) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    std::vector<QuadForm> forms{diagonal_form({1, -1}), diagonal_form({std::sqrt(2.0), -1, 0.7}), rotated({1.0, -1.5}, rng),
                                rotated({0.8, -1.2, 1.7}, rng)};
    for (const QuadForm& f : forms) {
        for (double r : {0.7, 1.5, 2.5}) {
            for (double t : {0.0, 0.13, -0.41, 1.7}) {
                Vec v(f.dim);
                for (int j = 0; j < f.dim; ++j) v(j) = u(rng);
                ThetaEval th = theta_sum(f, r, t, v);
                long box = static_cast<long>(std::ceil(9.0 * r / std::sqrt(f.q0))) + 2;
                auto b = brute_theta(f, r, t, v, box);
                double err = std::abs(std::complex<double>(static_cast<double>(b.real()), static_cast<double>(b.imag())) - th.value);
                EXPECT_LE(err, th.truncation_bound + 1e-12 * std::abs(th.value) + 1e-13) << th.method << " r=" << r << " t=" << t;
            }
        }
    }
}

TEST(Theta, PeriodicityAndConjugation) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (const QuadForm& f : {diagonal_form({1, -std::sqrt(2.0)}), rotated({1.1, -0.6, 0.9}, rng)}) {
        for (int k = 0; k < 6; ++k) {
            double r = 1 + std::fabs(u(rng)), t = u(rng);
            Vec v(f.dim);
            for (int j = 0; j < f.dim; ++j) v(j) = u(rng);
            cplx base = theta_sum(f, r, t, v).value;
            for (int j = 0; j < f.dim; ++j) {
                Vec w = v;
                w(j) += 2 * kPi * r;
                EXPECT_NEAR(std::abs(theta_sum(f, r, t, w).value - base), 0.0, 1e-11);
            }
            cplx lhs = theta_sum(f, r, -t, v).value;
            cplx rhs = std::conj(theta_sum(f, r, t, -v).value);
            EXPECT_NEAR(std::abs(lhs - rhs), 0.0, 1e-12);
        }
    }
}

TEST(ThetaIntegral, ProductAndQuadrature) {
    std::mt19937_64 rng(17);
    QuadForm f = rotated({1.4, -0.8, 2.2}, rng);
    double r = 1.7, t = 0.37;
    cplx prod{1, 0};
    for (int j = 0; j < 3; ++j) {
        double s = f.eigenvalues(j);
        prod *= std::sqrt(kPi / (std::fabs(s) * cplx(1.0 / (r * r), -t * (s > 0 ? 1.0 : -1.0))));
    }
    EXPECT_NEAR(std::abs(theta_integral(f, r, t, Vec::Zero(3)) - prod), 0.0, 1e-13);

    // d=1 with a phase: trapezoid oracle of exp(-a x^2 + i(b x^2 + c x))
    for (double q : {1.0, -2.0}) {
        QuadForm one = diagonal_form({q});
        for (double tt : {0.0, 0.2, -0.35}) {
            Vec v(1);
            v(0) = 0.8;
            double rr = 1.3;
            double a = std::fabs(q) / (rr * rr), b = tt * q, c = v(0) / rr;
            double L = std::sqrt(40 / a);
            double re = oracle::trapezoid([&](double x) { return std::exp(-a * x * x) * std::cos(b * x * x + c * x); }, -L, L, 200000);
            double im = oracle::trapezoid([&](double x) { return std::exp(-a * x * x) * std::sin(b * x * x + c * x); }, -L, L, 200000);
            cplx ti = theta_integral(one, rr, tt, v);
            EXPECT_NEAR(ti.real(), re, 1e-9);
            EXPECT_NEAR(ti.imag(), im, 1e-9);
        }
    }
}

TEST(Poisson, SpecExamples) {
    QuadForm one = diagonal_form({1});
    EXPECT_NEAR(poisson_residual(one, 1.0, 0.0, Vec::Zero(1), 0), 1.83e-4, 5e-7);
    EXPECT_LT(poisson_residual(one, 1.0, 0.0, Vec::Zero(1), 3), 1e-12);
    EXPECT_LT(poisson_residual(diagonal_form({1, -1}), 2.0, 0.3, Vec::Zero(2), 5), 1e-8);
    EXPECT_THROW(poisson_residual(one, 2.0, 0.6, Vec::Zero(1), 1), InvalidArgument);
}

TEST(Poisson, DecreasesUntilFloor) {
    std::mt19937_64 rng(23);
    std::vector<QuadForm> forms{diagonal_form({1, -1}), diagonal_form({0.6, std::sqrt(3.0)}), rotated({1.2, -0.9}, rng)};
    for (const QuadForm& f : forms) {
        for (double r : {1.0, 1.8}) {
            double t = 0.4 / r;
            Vec v(2);
            v << 0.7, -1.9;
            double prev = poisson_residual(f, r, t, v, 0);
            for (int n = 1; n <= 6; ++n) {
                double cur = poisson_residual(f, r, t, v, n);
                if (prev > 1e-12) EXPECT_LE(cur, prev * (1 + 1e-9)) << "n=" << n;
                prev = cur;
            }
            EXPECT_LT(prev, 1e-10);
        }
    }
}

TEST(Psi, SpecExamples) {
    SeriesEval p = psi_majorant(diagonal_form({1}), 1.0, 0.0);
    EXPECT_NEAR(p.value, 3.1422, 5e-5);
    EXPECT_NEAR(p.value, jacobi3() * jacobi3(), 1e-12);
    std::mt19937_64 rng(2);
    for (const QuadForm& f : {diagonal_form({1, -1}), rotated({1.5, -0.7}, rng)})
        for (double r : {0.5, 1.0, 3.0})
            for (double t : {0.0, 0.2, 1.1}) EXPECT_GE(psi_majorant(f, r, t).value, 1.0);
}

TEST(Psi, AgreesWithBruteForce) {
    std::mt19937_64 rng(31);
    std::vector<QuadForm> forms{diagonal_form({1, -std::sqrt(2.0)}), rotated({1.3, -0.6}, rng)};
    for (const QuadForm& f : forms) {
        for (double r : {0.8, 1.6}) {
            for (double t : {0.0, 0.25, -0.9}) {
                SeriesEval p = psi_majorant(f, r, t);
                const Mat& P = f.positive_inverse;
                Mat B = (2 * t / kPi) * f.matrix;
                long box = 14;
                long double s = 0;
                oracle::for_box({-box, -box, -box, -box}, {box, box, box, box}, [&](const std::vector<long>& z) {
                    Vec m(2), n(2);
                    m << z[0], z[1];
                    n << z[2], z[3];
                    Vec dvec = m - B * n;
                    double h = r * r * dvec.dot(P * dvec) + n.dot(f.positive_part * n) / (r * r);
                    s += std::exp(-static_cast<long double>(h));
                });
                EXPECT_NEAR(p.value, static_cast<double>(s), p.truncation_bound + 1e-11 * p.value) << p.method << " r=" << r << " t=" << t;
            }
        }
    }
}

TEST(Psi, SupBoundCalibrated) {
    const double C = calibrated("theta_psi_sup_C");
    std::mt19937_64 rng(41);
    std::vector<QuadForm> forms{diagonal_form({1, -1}), diagonal_form({0.5, std::sqrt(2.0), -1.3}), rotated({1.1, -0.8}, rng)};
    for (const QuadForm& f : forms) {
        double detp = f.det_abs;
        for (double r : {1.0, 2.0, 4.0}) {
            for (double t : {0.0, 0.07, 0.31, 0.77}) {
                int grid = f.diagonal ? 48 : 12;
                double sup = theta_sup_grid(f, r, t, grid);
                double rhs = C / std::sqrt(detp) * std::pow(r, f.dim) * psi_majorant(f, r, t).value;
                EXPECT_LE(sup * sup, rhs) << "r=" << r << " t=" << t;
            }
        }
    }
}

TEST(Theta, EnvelopeCalibrated) {
    const double C = calibrated("theta_envelope_C");
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<QuadForm> forms{diagonal_form({1, -1}), diagonal_form({1.5, -std::sqrt(2.0), 1}), rotated({1.2, -1.7}, rng)};
    for (const QuadForm& f : forms) {
        for (double r : {1.0, 1.5, 2.5}) {
            for (double frac : {0.0, 0.3, -0.6, 0.95}) {
                double t = frac / r;
                for (int k = 0; k < 5; ++k) {
                    Vec v(f.dim);
                    for (int j = 0; j < f.dim; ++j) v(j) = 2 * kPi * r * u(rng);
                    double diff = std::abs(theta_sum(f, r, t, v).value - theta_integral(f, r, t, v));
                    EXPECT_LE(diff, C * theta_envelope(f, r, t, v)) << "r=" << r << " t=" << t;
                }
            }
        }
    }
}

TEST(SmoothedDiscrepancy, ExampleReproducible) {
    ShellSpec s{diagonal_form({1, -1}), -0.5, 0.5, 4.0};
    auto a = smoothed_discrepancy(s, 0.1, 0.1, 1);
    auto b = smoothed_discrepancy(s, 0.1, 0.1, 1);
    EXPECT_TRUE(std::isfinite(a.value));
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.method, "quadrature");
    // quadrature against a fine tensor trapezoid oracle
    SmoothedBox box(s.form, s.r, 0.1, 1);
    SmoothedWindow g = SmoothedWindow::unchecked(-0.6, 0.6, 0.1);
    long n = 1600;
    double c = 1.2, h = 2 * c / n, sum = 0;
    for (long i = 0; i <= n; ++i) {
        for (long j = 0; j <= n; ++j) {
            double y1 = -c + h * i, y2 = -c + h * j;
            double wgt = (i == 0 || i == n ? 0.5 : 1.0) * (j == 0 || j == n ? 0.5 : 1.0);
            sum += wgt * box.edge.eval(y1) * box.edge.eval(y2) * g.eval(16 * (y1 * y1 - y2 * y2));
        }
    }
    EXPECT_NEAR(a.integral, 16 * h * h * sum, 1e-5 * a.integral);
}

TEST(SmoothedDiscrepancy, SandwichAndBracket) {
    std::mt19937_64 rng(47);
    std::vector<ShellSpec> specs{{diagonal_form({1, -1}), -0.5, 0.5, 4.0},
                                 {diagonal_form({1, -std::sqrt(2.0)}), -0.8, 1.1, 5.0},
                                 {rotated({1.0, -1.3}, rng), -1.0, 0.7, 4.5},
                                 {diagonal_form({1, 1, -std::sqrt(3.0)}), -0.6, 1.4, 3.5}};
    for (const ShellSpec& s : specs) {
        for (double eps : {0.1, 0.03}) {
            double w = 0.05;
            auto plus = smoothed_discrepancy(s, eps, w, 1);
            auto minus = smoothed_discrepancy(s, eps, w, -1);
            double N = static_cast<double>(count_shell(s).count_lo);
            double vol = shell_volume(s).volume;
            double slack = 1e-6 * vol + plus.integral_ci + minus.integral_ci;
            EXPECT_LE(minus.lattice_sum - plus.integral - slack, N - vol);
            EXPECT_GE(plus.lattice_sum - minus.integral + slack, N - vol);
            // integrand sandwich between sharp inner and outer regions
            ShellSpec outer{s.form, s.a - 2 * w, s.b + 2 * w, s.r * (1 + 2 * eps)};
            ShellSpec inner{s.form, s.a + 2 * w, s.b - 2 * w, s.r * (1 - 2 * eps)};
            EXPECT_LE(plus.integral, shell_volume(outer).volume * (1 + 1e-6) + plus.integral_ci);
            EXPECT_GE(minus.integral, shell_volume(inner).volume * (1 - 1e-6) - minus.integral_ci);
            EXPECT_LE(plus.lattice_sum, static_cast<double>(count_shell(outer).count_hi) + 1e-9);
            EXPECT_GE(minus.lattice_sum, static_cast<double>(count_shell(inner).count_lo) - 1e-9);
        }
    }
}

TEST(SmoothedDiscrepancy, SharpLimit) {
    ShellSpec s{diagonal_form({1, -1}), -0.5, 0.5, 4.0};
    double N_closed = static_cast<double>(count_shell({s.form, s.a, s.b, s.r}).count_lo);
    ShellSpec strict{s.form, s.a, s.b, s.r * (1 - 1e-9)};
    double N_open = static_cast<double>(count_shell(strict).count_lo);
    double vol = shell_volume(s).volume;
    auto plus = smoothed_discrepancy(s, 1e-3, 1e-3, 1);
    auto minus = smoothed_discrepancy(s, 1e-3, 1e-3, -1);
    // no values of Q within 1e-3 of the half-integer endpoints
    EXPECT_DOUBLE_EQ(plus.lattice_sum, N_closed);
    EXPECT_DOUBLE_EQ(minus.lattice_sum, N_open);
    ShellSpec outer{s.form, s.a - 2e-3, s.b + 2e-3, s.r * (1 + 2e-3)};
    ShellSpec inner{s.form, s.a + 2e-3, s.b - 2e-3, s.r * (1 - 2e-3)};
    double band = shell_volume(outer).volume - shell_volume(inner).volume;
    EXPECT_NEAR(plus.value, N_closed - vol, band);
    EXPECT_NEAR(minus.value, N_open - vol, band);
}

TEST(GaussianLatticeSum, SandwichCalibrated) {
    std::mt19937_64 rng(53);
    std::normal_distribution<double> nd(0, 1);
    for (int d = 1; d <= 4; ++d) {
        const double Cd = calibrated("gaussian_sum_C" + std::to_string(d));
        for (int trial = 0; trial < 12; ++trial) {
            Mat B(d, d);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) B(i, j) = 0.7 * nd(rng);
            if (std::fabs(B.determinant()) < 0.1) {
                --trial;
                continue;
            }
            LatticeBasis L = LatticeBasis::from_generators(B);
            std::uint64_t H = count_sup_box(L);
            for (double eps : {1.0, 0.4, 0.1}) {
                SeriesEval s = gaussian_lattice_sum(L, eps);
                EXPECT_GE(s.value, std::exp(-eps) * static_cast<double>(H));
                EXPECT_LE(s.value, Cd * std::pow(eps, -0.5 * d) * static_cast<double>(H));
            }
        }
    }
}

TEST(GaussianLatticeSum, ExamplesAndOracle) {
    Mat I = Mat::Identity(2, 2);
    LatticeBasis Z2 = LatticeBasis::from_generators(I);
    EXPECT_EQ(count_sup_box(Z2), 1u);
    EXPECT_NEAR(gaussian_lattice_sum(Z2, 1.0).value, jacobi3() * jacobi3(), 1e-11);
    Mat half = 0.5 * I;
    EXPECT_EQ(count_sup_box(LatticeBasis::from_generators(half)), 9u);
    Mat B(2, 2);
    B << 0.6, 0.2, -0.1, 0.45;
    LatticeBasis L = LatticeBasis::from_generators(B);
    long double s = 0;
    std::uint64_t h = 0;
    oracle::for_box({-60, -60}, {60, 60}, [&](const std::vector<long>& c) {
        Vec v = B * Vec((Vec(2) << c[0], c[1]).finished());
        s += std::exp(-0.3L * v.squaredNorm());
        if (v.cwiseAbs().maxCoeff() < 1.0) ++h;
    });
    EXPECT_NEAR(gaussian_lattice_sum(L, 0.3).value, static_cast<double>(s), 1e-9);
    EXPECT_EQ(count_sup_box(L), h);
}
