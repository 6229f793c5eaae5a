#ifndef OPPLAB_DIOPHANTINE_HPP
#define OPPLAB_DIOPHANTINE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "forms.hpp"
#include "orbit.hpp"
#include "parallel.hpp"

namespace opplab {

struct DioApprox {
    std::int64_t best_m = 0;
    IMat best_M;
    double delta = 0.0;
    std::int64_t R = 0;
};

namespace detail {

inline double round_residual(const Mat& A, double m) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            double x = m * A(i, j);
            double e = x - std::nearbyint(x);
            s += e * e;
        }
    return std::sqrt(s);
}

}  // namespace detail

// min over 0 < m <= R of ||round(mA) - mA||_F; smallest m on ties.
inline DioApprox dio_min(const Mat& A, std::int64_t R, unsigned threads = 0) {
    require(R >= 1, "R must be at least 1");
    require(A.size() > 0 && A.allFinite(), "A must be a finite nonempty matrix");
    const std::int64_t chunk = 4096;
    const std::int64_t tasks = (R + chunk - 1) / chunk;
    std::vector<std::pair<double, std::int64_t>> best(static_cast<std::size_t>(tasks), {std::numeric_limits<double>::infinity(), 0});
    parallel_for(tasks, threads, [&](std::int64_t k) {
        auto& b = best[static_cast<std::size_t>(k)];
        for (std::int64_t m = k * chunk + 1; m <= std::min(R, (k + 1) * chunk); ++m) {
            double e = detail::round_residual(A, static_cast<double>(m));
            if (e < b.first) b = {e, m};
        }
    });
    DioApprox out;
    out.R = R;
    out.delta = std::numeric_limits<double>::infinity();
    for (const auto& b : best)
        if (b.first < out.delta) {
            out.delta = b.first;
            out.best_m = b.second;
        }
    Mat mA = static_cast<double>(out.best_m) * A;
    out.best_M = mA.unaryExpr([](double x) { return std::nearbyint(x); }).cast<std::int64_t>();
    return out;
}

// beta_{t;r} = alpha_d(Lambda_t) r^{-d} |det Q|^{1/2}, minima surrogate.
inline double beta_characteristic(const QuadForm& form, double r, double t, std::uint64_t budget = kDefaultEnumBudget) {
    require(r >= 1, "r must be at least 1");
    return orbit_alpha_d(form, r, t, budget) * std::pow(r, -form.dim) * std::sqrt(form.det_abs);
}

struct DioLemmaCheck {
    bool vacuous = false;
    bool passed = true;
    double beta = 0.0;
    double R_t = 0.0;
    double delta_observed = 0.0;
    double bound = 0.0;
    std::int64_t best_m = 0;
};

// R_t = 1/beta_{t;r}; dio_min(t'Q, ceil R_t) must lie below R_t r^{-2} d^{1/2}.
// Vacuous when beta_{t;r} <= r^{-2}.
inline DioLemmaCheck dio_lemma_check(const QuadForm& form, double r, double t) {
    DioLemmaCheck c;
    c.beta = beta_characteristic(form, r, t);
    c.R_t = 1.0 / c.beta;
    c.bound = c.R_t / (r * r) * std::sqrt(static_cast<double>(form.dim));
    if (c.beta <= 1.0 / (r * r)) {
        c.vacuous = true;
        return c;
    }
    auto ap = dio_min(t_prime(t) * form.matrix, static_cast<std::int64_t>(std::ceil(c.R_t - 1e-12)));
    c.delta_observed = ap.delta;
    c.best_m = ap.best_m;
    c.passed = c.delta_observed < c.bound;
    return c;
}

struct DioType {
    double kappa_hat = 0.0;
    double A_hat = 0.0;
    std::int64_t R_min = 1, R_max = 0;
    bool in_range = false;  // kappa_hat in (0, 1)
    std::vector<std::int64_t> record_m;
    std::vector<double> record_delta;
    std::vector<double> residuals;  // log delta - envelope at the records, all >= 0
    std::vector<double> delta;      // delta(m), m = 1..R_max
    double grid_resolution = 0.0;
};

namespace detail {

// inf over t in [1, 2] of ||round(m t Q) - m t Q||_F: 65-point grid, then the
// exact minimizer of the quadratic with frozen roundings around each node.
inline double dio_inf_t(const Mat& Q, double m, int grid = 65) {
    double best = std::numeric_limits<double>::infinity();
    double qq = Q.squaredNorm();
    const double h = 1.0 / (grid - 1);
    for (int i = 0; i < grid; ++i) {
        double t = 1.0 + h * i;
        best = std::min(best, round_residual(Q, m * t));
        Mat K = (m * t * Q).unaryExpr([](double x) { return std::nearbyint(x); });
        double ts = (K.array() * Q.array()).sum() / (m * qq);
        ts = std::clamp(ts, std::max(1.0, t - h), std::min(2.0, t + h));
        best = std::min(best, round_residual(Q, m * ts));
    }
    return best;
}

}  // namespace detail

// Lower-envelope fit of delta(m) >= A m^{-kappa} through the record minima.
inline DioType dio_type_fit(const QuadForm& form, std::int64_t R_max, unsigned threads = 0) {
    require(R_max >= 16, "R_max must be at least 16");
    DioType out;
    out.R_max = R_max;
    out.grid_resolution = 1.0 / 64.0;
    out.delta.assign(static_cast<std::size_t>(R_max), 0.0);
    parallel_for(R_max, threads, [&](std::int64_t i) {
        out.delta[static_cast<std::size_t>(i)] = detail::dio_inf_t(form.matrix, static_cast<double>(i + 1));
    });
    double rec = std::numeric_limits<double>::infinity();
    for (std::int64_t m = 1; m <= R_max; ++m) {
        double v = out.delta[static_cast<std::size_t>(m - 1)];
        if (v < 1e-12) throw RationalDegenerate("delta(" + std::to_string(m) + ") vanishes; the form is rational");
        if (v < rec) {
            rec = v;
            out.record_m.push_back(m);
            out.record_delta.push_back(v);
        }
    }
    const std::size_t n = out.record_m.size();
    if (n >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double x = std::log(static_cast<double>(out.record_m[i])), y = std::log(out.record_delta[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double dn = static_cast<double>(n);
        out.kappa_hat = -(dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    }
    double logA = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        logA = std::min(logA, std::log(out.record_delta[i]) + out.kappa_hat * std::log(static_cast<double>(out.record_m[i])));
    out.A_hat = std::exp(logA) * (1 - 1e-12);
    for (std::size_t i = 0; i < n; ++i)
        out.residuals.push_back(std::log(out.record_delta[i]) - (std::log(out.A_hat) - out.kappa_hat * std::log(static_cast<double>(out.record_m[i]))));
    out.R_min = out.record_m.empty() ? 1 : out.record_m.front();
    out.in_range = out.kappa_hat > 0 && out.kappa_hat < 1;
    return out;
}

// sup over a t-grid in [T_minus, T] of alpha_d r^{-d} |det Q|^{-1/2}, against
// A^{-1} max(T_minus^{kappa+1}, T^kappa) r^{-2+2 kappa}.
struct DioTypeAlphaCheck {
    double sup = 0.0;
    double bound = 0.0;
};

inline DioTypeAlphaCheck dio_type_alpha_check(const QuadForm& form, const DioType& type, double r, double T_minus, double T, int grid_n = 64) {
    require(T_minus > 0 && T_minus < T, "need 0 < T_minus < T");
    DioTypeAlphaCheck c;
    auto g = detail::gamma_scan_unchecked(form, r, T_minus, T, 0.0, grid_n, 8, kDefaultEnumBudget, 0);
    c.sup = g.alpha_max * std::pow(r, -form.dim) / std::sqrt(form.det_abs);
    c.bound = std::max(std::pow(T_minus, type.kappa_hat + 1), std::pow(T, type.kappa_hat)) * std::pow(r, -2 + 2 * type.kappa_hat) / type.A_hat;
    return c;
}

struct RhoPoint {
    double T_minus = 0.0, T_plus = 0.0, gamma = 0.0;
    double gamma_term = 0.0, c_term = 0.0, value = 0.0;
};

struct RhoReport {
    double r = 0.0, b_minus_a = 0.0, beta = 0.0, varsigma = 0.0;
    double c_Q = 0.0;
    std::vector<RhoPoint> grid;
    double rho = 0.0;
    double argmin_T_minus = 0.0;
};

// inf over a log grid of T_- in [1/r + r^{-1/s}, 1] of
// L1^d (gamma_{[T_-,T_+],beta}(r) L2 + c_Q (b-a)* T_-^s) with
// L1 = max(1, |log T_-|), L2 = max(1, log((b-a)*/T_-^s)),
// T_+ = max(2, h(T_-) T_-^{-s}), h = (s log(T_- q^{-1/2}) (b-a)*)^2.
inline RhoReport rho_eval(const QuadForm& form, double r, double b_minus_a, double beta, int grid_n = 12, int gamma_grid = 64,
                          unsigned threads = 0) {
    const int d = form.dim;
    require(b_minus_a > 0, "b - a must be positive");
    require(beta > 2.0 / d && beta < 0.5, "beta must lie in (2/d, 1/2)");
    require(grid_n >= 2, "grid needs at least two points");
    RhoReport rep;
    rep.r = r;
    rep.b_minus_a = b_minus_a;
    rep.beta = beta;
    const double s = d * (0.5 - beta);
    rep.varsigma = s;
    rep.c_Q = std::pow(form.det_abs, 0.25 - 0.5 * beta);
    const double lo = 1.0 / r + std::pow(r, -1.0 / s);
    require(lo < 1.0, "r too small for a nonempty T_minus grid");
    const double ba = std::min(b_minus_a, 1.0);
    const double q = form.q_max;
    rep.grid.resize(static_cast<std::size_t>(grid_n));
    for (int i = 0; i < grid_n; ++i) {
        RhoPoint& p = rep.grid[static_cast<std::size_t>(i)];
        p.T_minus = lo * std::pow(1.0 / lo, static_cast<double>(i) / (grid_n - 1));
        double h = std::pow(s * std::log(p.T_minus / std::sqrt(q)) * ba, 2);
        p.T_plus = std::max(2.0, h * std::pow(p.T_minus, -s));
        p.gamma = gamma_scan(form, r, p.T_minus, p.T_plus, beta, gamma_grid, 8, kDefaultEnumBudget, threads).gamma;
        double L1 = std::max(1.0, std::fabs(std::log(p.T_minus)));
        double L2 = std::max(1.0, std::log(ba / std::pow(p.T_minus, s)));
        double w = std::pow(L1, d);
        p.gamma_term = w * p.gamma * L2;
        p.c_term = w * rep.c_Q * ba * std::pow(p.T_minus, s);
        p.value = p.gamma_term + p.c_term;
    }
    auto it = std::min_element(rep.grid.begin(), rep.grid.end(), [](const RhoPoint& a, const RhoPoint& b) { return a.value < b.value; });
    rep.rho = it->value;
    rep.argmin_T_minus = it->T_minus;
    return rep;
}

}  // namespace opplab

#endif
