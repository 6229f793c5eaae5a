#ifndef OPPLAB_ORBIT_HPP
#define OPPLAB_ORBIT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "forms.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "theta.hpp"

namespace opplab {

using Mat2 = Eigen::Matrix2d;

inline Mat2 d_mat(double r) {
    Mat2 m;
    m << r, 0, 0, 1.0 / r;
    return m;
}

// [[1, -s], [0, 1]]
inline Mat2 u_mat(double s) {
    Mat2 m;
    m << 1, -s, 0, 1;
    return m;
}

// [[cos, -sin], [sin, cos]]
inline Mat2 k_mat(double theta) {
    Mat2 m;
    m << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return m;
}

// g acting on (R^2)^d, pairs at coordinates (2j, 2j+1).
inline Mat diagonal_action(const Mat2& g, int d) {
    Mat out = Mat::Zero(2 * d, 2 * d);
    for (int j = 0; j < d; ++j) out.block(2 * j, 2 * j, 2, 2) = g;
    return out;
}

inline double t_prime(double t) { return 2.0 * t / kPi; }

struct OrbitParams {
    QuadForm form;
    double r = 1, t = 0, tprime = 0;
    Mat2 dr, ut;
    Mat T;    // (u, v) -> (u1, v1, ..., ud, vd)
    Mat A_Q;  // diag(Q+^{-1/2}, S Q+^{1/2})
    double r_Q = 1, r_0 = 1;

    static OrbitParams make(const QuadForm& f, double r, double t) {
        require(r >= 1, "r must be at least 1");
        OrbitParams p;
        const int d = f.dim;
        p.form = f;
        p.r = r;
        p.t = t;
        p.tprime = t_prime(t);
        p.dr = d_mat(r);
        p.ut = u_mat(p.tprime);
        p.T = Mat::Zero(2 * d, 2 * d);
        for (int j = 0; j < d; ++j) {
            p.T(2 * j, j) = 1;
            p.T(2 * j + 1, d + j) = 1;
        }
        p.A_Q = Mat::Zero(2 * d, 2 * d);
        p.A_Q.topLeftCorner(d, d) = f.sqrt_positive_inverse;
        p.A_Q.bottomRightCorner(d, d) = f.reflection * f.sqrt_positive;
        p.r_Q = std::sqrt(f.q_max);
        p.r_0 = r / p.r_Q;
        return p;
    }

    Mat generators() const { return diagonal_action(dr * ut, form.dim) * T * A_Q; }
};

// Generators of Lambda_Q = T A_Q Z^{2d}.
inline Mat lambda_q_generators(const QuadForm& f) {
    auto p = OrbitParams::make(f, 1.0, 0.0);
    return p.T * p.A_Q;
}

// H_t(m, n) = r^2 Q+^{-1}[m - t' Q n] + r^-2 Q+[n].
inline double orbit_H(const QuadForm& f, double r, double t, const Vec& m, const Vec& n) {
    Vec dvec = m - t_prime(t) * (f.matrix * n);
    return r * r * dvec.dot(f.positive_inverse * dvec) + n.dot(f.positive_part * n) / (r * r);
}

inline LatticeBasis build_orbit_lattice(const QuadForm& form, double r, double t) {
    return LatticeBasis::from_generators(OrbitParams::make(form, r, t).generators());
}

// Lambda'_t = d_r u_t T A_Q J_S Z^{2d}, J_S = [[0, -S], [S, 0]].
inline LatticeBasis dual_orbit_lattice(const QuadForm& form, double r, double t) {
    const int d = form.dim;
    Mat J = Mat::Zero(2 * d, 2 * d);
    J.topRightCorner(d, d) = -form.reflection;
    J.bottomLeftCorner(d, d) = form.reflection;
    return LatticeBasis::from_generators(OrbitParams::make(form, r, t).generators() * J);
}

// alpha_d(Lambda_t) by the minima surrogate.
inline double orbit_alpha_d(const QuadForm& form, double r, double t, std::uint64_t budget = kDefaultEnumBudget) {
    auto mp = successive_minima(build_orbit_lattice(form, r, t), nullptr, budget);
    return alpha_from_minima(mp.minima).alpha[static_cast<std::size_t>(form.dim)];
}

// ---------------------------------------------------------------------------
// gamma scan

struct GammaScan {
    double T_minus = 0, T_plus = 0, beta = 0, r = 0;
    std::vector<double> grid;
    std::vector<double> alpha_d;  // at grid points
    double gamma = 0.0;
    double argmax_t = 0.0;
    double alpha_max = 0.0;
    double resolution = 0.0;  // largest log-grid ratio minus one
    int refine_steps = 0;
};

namespace detail {

inline GammaScan gamma_scan_unchecked(const QuadForm& form, double r, double T_minus, double T_plus, double beta, int grid_n, int refine,
                                      std::uint64_t budget, unsigned threads) {
    require(T_minus > 0 && T_minus < T_plus, "need 0 < T_minus < T_plus");
    require(grid_n >= 2, "grid needs at least two points");
    GammaScan g;
    g.T_minus = T_minus;
    g.T_plus = T_plus;
    g.beta = beta;
    g.r = r;
    g.refine_steps = refine;
    const double ratio = std::pow(T_plus / T_minus, 1.0 / (grid_n - 1));
    g.resolution = ratio - 1;
    g.grid.resize(static_cast<std::size_t>(grid_n));
    for (int i = 0; i < grid_n; ++i) g.grid[static_cast<std::size_t>(i)] = i == grid_n - 1 ? T_plus : T_minus * std::pow(ratio, i);
    g.alpha_d.assign(static_cast<std::size_t>(grid_n), 0.0);
    parallel_for(grid_n, threads, [&](std::int64_t i) {
        g.alpha_d[static_cast<std::size_t>(i)] = orbit_alpha_d(form, r, g.grid[static_cast<std::size_t>(i)], budget);
    });
    std::size_t best = static_cast<std::size_t>(std::max_element(g.alpha_d.begin(), g.alpha_d.end()) - g.alpha_d.begin());
    g.alpha_max = g.alpha_d[best];
    g.argmax_t = g.grid[best];
    // golden-section search on the neighbouring cells
    if (refine > 0) {
        double lo = g.grid[best == 0 ? 0 : best - 1], hi = g.grid[std::min(best + 1, g.grid.size() - 1)];
        const double phi = 0.5 * (std::sqrt(5.0) - 1);
        double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
        double f1 = orbit_alpha_d(form, r, x1, budget), f2 = orbit_alpha_d(form, r, x2, budget);
        auto record = [&](double x, double f) {
            if (f > g.alpha_max) {
                g.alpha_max = f;
                g.argmax_t = x;
            }
        };
        record(x1, f1);
        record(x2, f2);
        for (int k = 0; k < refine; ++k) {
            if (f1 >= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = orbit_alpha_d(form, r, x1, budget);
                record(x1, f1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = orbit_alpha_d(form, r, x2, budget);
                record(x2, f2);
            }
        }
    }
    g.gamma = std::pow(std::pow(r, -form.dim) * g.alpha_max, 0.5 - beta);
    return g;
}

}  // namespace detail

// gamma = sup over t in [T_minus, T_plus] of (r^-d alpha_d(Lambda_t))^{1/2 - beta}.
inline GammaScan gamma_scan(const QuadForm& form, double r, double T_minus, double T_plus, double beta, int grid_n = 256, int refine = 12,
                            std::uint64_t budget = kDefaultEnumBudget, unsigned threads = 0) {
    require(beta > 2.0 / form.dim && beta < 0.5, "beta must lie in (2/d, 1/2)");
    require(r >= 1, "r must be at least 1");
    return detail::gamma_scan_unchecked(form, r, T_minus, T_plus, beta, grid_n, refine, budget, threads);
}

// ---------------------------------------------------------------------------
// a priori envelope

// phi_Q(s) = s^d |det Q|^{-1/2} prod_{N_j > s} (N_j / s)^2 with N_j the minima
// of Q+^{1/2} Z^d.
inline double phi_envelope(const QuadForm& form, double s) {
    require(s > 0, "s must be positive");
    auto mp = successive_minima(LatticeBasis::from_generators(form.sqrt_positive));
    double v = std::pow(s, form.dim) / std::sqrt(form.det_abs);
    for (double N : mp.minima)
        if (N > s) v *= (N / s) * (N / s);
    return v;
}

// ---------------------------------------------------------------------------
// tau functions

// (1/2pi) int_0^{2pi} |cos|^{lambda-2}
inline double c_lambda(double lambda) {
    require(lambda > 1, "c(lambda) needs lambda > 1");
    return std::exp(std::lgamma(0.5 * (lambda - 1)) - std::lgamma(0.5 * lambda)) / std::sqrt(kPi);
}

// (1/2pi) int_0^{2pi} (a^2 cos^2 + a^-2 sin^2)^{lambda/2 - 1}
inline double tau_hat(double lambda, double a, double tol = 1e-13) {
    require(a >= 1, "a must be at least 1");
    require(tol > 0, "tol must be positive");
    const double e = 0.5 * lambda - 1;
    if (e == 0.0) return 1.0;
    auto f = [&](double th) {
        double c = std::cos(th), s = std::sin(th);
        return std::pow(a * a * c * c + s * s / (a * a), e);
    };
    // quarter period by symmetry; split where the two terms balance
    double mid = std::atan(a * a);
    const double rel = std::max(1e-15, std::min(1e-6, tol));
    double i1 = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, 0.0, mid, 12, rel);
    double i2 = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, mid, 0.5 * kPi, 12, rel);
    return (i1 + i2) * 2.0 / kPi;
}

struct TauTable {
    double lambda = 0.0;
    std::vector<std::pair<double, double>> samples;
    double quadrature_tol = 0.0;
};

inline TauTable tau_table(double lambda, const std::vector<double>& a_values, double tol = 1e-13) {
    TauTable t;
    t.lambda = lambda;
    t.quadrature_tol = tol;
    for (double a : a_values) t.samples.emplace_back(a, tau_hat(lambda, a, tol));
    return t;
}

using LatticeFunction = std::function<double(const LatticeBasis&)>;

struct KAverage {
    double value = 0.0;
    int nodes = 0;
    double last_change = 0.0;
};

// Trapezoid average over theta of f(d_a k_theta Delta), doubling until the
// change is below tol or 2^14 nodes.
inline KAverage k_average_detail(const LatticeFunction& f, double a, const LatticeBasis& delta, int quad_n = 64, double tol = 1e-9,
                                 int max_nodes = 1 << 14, unsigned threads = 0) {
    require(quad_n >= 64, "quad_n must be at least 64");
    require(delta.ambient() % 2 == 0, "lattice must live in (R^2)^d");
    const int d = delta.ambient() / 2;
    auto value_at = [&](double th) {
        Mat g = diagonal_action(d_mat(a) * k_mat(th), d) * delta.generators;
        return f(LatticeBasis::from_generators(g));
    };
    auto sample = [&](int n, int offset_step) {
        // nodes 2 pi (offset_step * i + offset) / n
        std::vector<double> vals(static_cast<std::size_t>(n / offset_step));
        parallel_for(static_cast<std::int64_t>(vals.size()), threads, [&](std::int64_t i) {
            double k = offset_step == 1 ? static_cast<double>(i) : 2.0 * static_cast<double>(i) + 1.0;
            vals[static_cast<std::size_t>(i)] = value_at(2 * kPi * k / n);
        });
        return pairwise_sum(vals, 0, vals.size());
    };
    KAverage out;
    int n = quad_n;
    double sum = sample(n, 1);
    double avg = sum / n;
    for (;;) {
        if (2 * n > max_nodes) break;
        double add = sample(2 * n, 2);
        sum += add;
        n *= 2;
        double next = sum / n;
        out.last_change = std::fabs(next - avg);
        avg = next;
        if (out.last_change <= tol * std::max(1.0, std::fabs(avg))) break;
    }
    out.value = avg;
    out.nodes = n;
    return out;
}

inline double k_average(const LatticeFunction& f, double a, const LatticeBasis& delta, int quad_n = 64) {
    return k_average_detail(f, a, delta, quad_n).value;
}

// alpha(Lambda)^beta by the minima surrogate.
inline LatticeFunction alpha_power(double beta) {
    return [beta](const LatticeBasis& L) { return std::pow(alpha_profile(L).alpha_max, beta); };
}

struct SlopeFit {
    double slope = 0.0, intercept = 0.0;
    std::vector<double> a, average;
};

// Least squares of log A_{d_a}(alpha^beta)(Delta) against log a.
inline SlopeFit gm_slope_check(const LatticeBasis& delta, double beta, const std::vector<double>& a_list, int quad_n = 64) {
    const int d = delta.ambient() / 2;
    require(delta.ambient() % 2 == 0, "lattice must live in (R^2)^d");
    require(beta * d > 2, "need beta d > 2");
    require(a_list.size() >= 4, "need at least four values of a");
    for (std::size_t i = 1; i < a_list.size(); ++i) require(a_list[i] > a_list[i - 1], "a_list must increase");
    SlopeFit fit;
    fit.a = a_list;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(a_list.size());
    for (double a : a_list) {
        double v = k_average(alpha_power(beta), a, delta, quad_n);
        fit.average.push_back(v);
        double x = std::log(a), y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

// ---------------------------------------------------------------------------
// compact approximation

// max_j alpha_j(d_r u_t Lambda_Q) / alpha_j(d_r k_theta Lambda_Q), theta = arctan t,
// unipotent taken with the raw parameter t.
inline double compact_approx_check(const QuadForm& form, double r, double t) {
    require(std::fabs(t) <= 2, "need |t| <= 2");
    require(r > 1, "need r > 1");
    const int d = form.dim;
    Mat LQ = lambda_q_generators(form);
    Mat gu = diagonal_action(d_mat(r) * u_mat(t), d) * LQ;
    Mat gk = diagonal_action(d_mat(r) * k_mat(std::atan(t)), d) * LQ;
    auto au = alpha_profile(LatticeBasis::from_generators(gu)).alpha;
    auto ak = alpha_profile(LatticeBasis::from_generators(gk)).alpha;
    double worst = 0.0;
    for (std::size_t j = 1; j < au.size(); ++j) worst = std::max(worst, au[j] / ak[j]);
    return worst;
}

// ---------------------------------------------------------------------------
// integral averages

struct IntegralAverage {
    double lhs = 0.0;
    double rhs = 0.0;
    double g_hat_max = 0.0;
    double C_Q = 0.0;
    double gamma = 0.0;
    int t_points = 0;
    int v_points = 0;
};

// lhs = int_I sup_v |theta_v(t) g^_w(t)| dt over a 3^d v-grid;
// rhs = g^_I C_Q gamma_{I,beta}(r) r^{d-2} without the calibrated factor.
inline IntegralAverage integral_average_check(const QuadForm& form, double r, double t0, const SmoothedWindow& win, double beta,
                                              int t_points = 0, int gamma_grid = 128, unsigned threads = 0) {
    const int d = form.dim;
    const double rQ = std::sqrt(form.q_max);
    require(r > rQ, "need r > r_Q");
    require(beta * d > 2, "need beta d > 2");
    IntegralAverage out;
    const double lo = t0 - 2, hi = t0 + 2;
    if (t_points <= 0) t_points = static_cast<int>(std::ceil(40.0 * r * r * form.q_max)) + 1;
    out.t_points = t_points;
    out.v_points = static_cast<int>(std::pow(3, d));
    const double period = 2 * kPi * r;
    std::vector<double> vals(static_cast<std::size_t>(t_points));
    std::vector<double> ghat(static_cast<std::size_t>(t_points));
    parallel_for(t_points, threads, [&](std::int64_t i) {
        double t = lo + (hi - lo) * static_cast<double>(i) / (t_points - 1);
        double g = std::abs(win.fourier(t));
        ghat[static_cast<std::size_t>(i)] = g;
        double sup = 0.0;
        if (form.diagonal) {
            sup = 1.0;
            for (int j = 0; j < d; ++j) {
                QuadForm one = diagonal_form({form.matrix(j, j)});
                double best = 0.0;
                for (int k = 0; k < 3; ++k) {
                    Vec vj(1);
                    vj(0) = period * k / 3.0;
                    best = std::max(best, std::abs(theta_sum(one, r, t, vj, 1e-14).value));
                }
                sup *= best;
            }
        } else {
            std::vector<int> idx(static_cast<std::size_t>(d), 0);
            for (;;) {
                Vec v(d);
                for (int j = 0; j < d; ++j) v(j) = period * idx[static_cast<std::size_t>(j)] / 3.0;
                sup = std::max(sup, std::abs(theta_sum(form, r, t, v, 1e-14, kDefaultThetaBudget, 1).value));
                int j = 0;
                while (j < d && idx[static_cast<std::size_t>(j)] == 2) idx[static_cast<std::size_t>(j++)] = 0;
                if (j == d) break;
                ++idx[static_cast<std::size_t>(j)];
            }
        }
        vals[static_cast<std::size_t>(i)] = sup * g;
    });
    // trapezoid in t
    const double h = (hi - lo) / (t_points - 1);
    vals.front() *= 0.5;
    vals.back() *= 0.5;
    out.lhs = h * pairwise_sum(vals, 0, vals.size());
    out.g_hat_max = *std::max_element(ghat.begin(), ghat.end());
    out.C_Q = rQ * rQ * std::pow(form.det_abs, -0.25 - 0.5 * beta);
    // gamma over I; positive t only enters through |t| for the orbit
    double glo = std::max(std::fabs(lo), 1e-3), ghi = std::max(std::fabs(hi), glo * 1.0001);
    if (lo < 0 && hi > 0) glo = 1e-3;
    out.gamma = detail::gamma_scan_unchecked(form, r, std::min(glo, ghi), std::max(glo, ghi), beta, gamma_grid, 8, kDefaultEnumBudget, threads).gamma;
    out.rhs = out.g_hat_max * out.C_Q * out.gamma * std::pow(r, d - 2);
    return out;
}

}  // namespace opplab

#endif
