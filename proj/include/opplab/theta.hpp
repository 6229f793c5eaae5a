#ifndef OPPLAB_THETA_HPP
#define OPPLAB_THETA_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/constants/constants.hpp>
#include <boost/math/special_functions/binomial.hpp>
#include <boost/math/special_functions/factorials.hpp>

#include "enumerate.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "shell.hpp"

namespace opplab {

using cplx = std::complex<double>;

inline constexpr double kPi = boost::math::constants::pi<double>();
inline constexpr std::uint64_t kDefaultThetaBudget = 200000000ULL;

// ---------------------------------------------------------------------------
// Kernels and windows

// n-fold convolution of the uniform density on [-scale/n, scale/n].
struct SmoothingKernel {
    int order = 8;
    double scale = 1.0;
    // (-1)^k C(n,k) / n! and (-1)^k C(n,k) / (n-1)!
    std::vector<double> cdf_coef, pdf_coef;

    SmoothingKernel() : SmoothingKernel(8, 1.0) {}
    SmoothingKernel(int n, double s) : order(n), scale(s) {
        require(n >= 2 && n <= 16, "kernel order must lie in [2, 16]");
        require(s > 0 && std::isfinite(s), "kernel scale must be positive");
        const unsigned un = static_cast<unsigned>(n);
        for (unsigned k = 0; k <= un; ++k) {
            double c = boost::math::binomial_coefficient<double>(un, k) * (k % 2 ? -1.0 : 1.0);
            cdf_coef.push_back(c / boost::math::factorial<double>(un));
            pdf_coef.push_back(c / boost::math::factorial<double>(un - 1));
        }
    }

    double half_width() const { return scale / order; }

    // Irwin-Hall variable on [0, n].
    double to_ih(double x) const { return x / (2 * half_width()) + 0.5 * order; }

    static double ipow(double x, int n) {
        double r = 1.0;
        for (int i = 0; i < n; ++i) r *= x;
        return r;
    }

    double ih_cdf(double y) const {
        if (y <= 0) return 0.0;
        if (y >= order) return 1.0;
        if (y > 0.5 * order) return 1.0 - ih_cdf(order - y);
        double s = 0.0;
        const int top = static_cast<int>(y);
        for (int k = 0; k <= top; ++k) s += cdf_coef[static_cast<std::size_t>(k)] * ipow(y - k, order);
        return std::clamp(s, 0.0, 1.0);
    }

    double ih_pdf(double y) const {
        if (y <= 0 || y >= order) return 0.0;
        if (y > 0.5 * order) y = order - y;
        double s = 0.0;
        const int top = static_cast<int>(y);
        for (int k = 0; k <= top; ++k) s += pdf_coef[static_cast<std::size_t>(k)] * ipow(y - k, order - 1);
        return std::max(0.0, s);
    }

    double density(double x) const { return ih_pdf(to_ih(x)) / (2 * half_width()); }
    double cdf(double x) const { return ih_cdf(to_ih(x)); }

    // (sin(h t) / (h t))^n with h = scale / n.
    double fourier(double t) const {
        double u = half_width() * t;
        double s = std::fabs(u) < 1e-4 ? 1.0 - u * u / 6.0 : std::sin(u) / u;
        return ipow(s, order);
    }
};

// g_w = I_[a,b] * k_w.
struct SmoothedWindow {
    double a = 0, b = 1, w = 0.1;
    SmoothingKernel kernel;

    SmoothedWindow() = default;
    SmoothedWindow(double a_, double b_, double w_, int order = 8) : a(a_), b(b_), w(w_), kernel(order, w_) {
        require(a < b, "window needs a < b");
        require(w > 0 && w < 0.5 * (b - a), "window width must satisfy 0 < w < (b-a)/2");
    }

    // No plateau condition; used for inner windows whose width may be below 2w.
    static SmoothedWindow unchecked(double a, double b, double w, int order = 8) {
        require(w > 0, "window width must be positive");
        SmoothedWindow s;
        s.a = a;
        s.b = b;
        s.w = w;
        s.kernel = SmoothingKernel(order, w);
        return s;
    }

    double eval(double x) const {
        if (b <= a || x <= a - w || x >= b + w) return 0.0;
        if (x >= a + w && x <= b - w) return 1.0;
        return std::clamp(kernel.cdf(x - a) - kernel.cdf(x - b), 0.0, 1.0);
    }

    // integral of g_w(x) e^{itx} dx
    cplx fourier(double t) const {
        if (t == 0.0) return {b - a, 0.0};
        cplx ind = (std::exp(cplx(0, t * b)) - std::exp(cplx(0, t * a))) / cplx(0, t);
        return ind * kernel.fourier(t);
    }
};

inline double window_eval(const SmoothedWindow& win, double x) { return win.eval(x); }
inline cplx window_fourier(const SmoothedWindow& win, double t) { return win.fourier(t); }

// Cutoff equal to 1 on |u| <= 2 and 0 on |u| >= 3.
inline double bump(double u) {
    static const SmoothedWindow phi(-2.5, 2.5, 0.5);
    return phi.eval(u);
}

// chi_{+-eps,r}(x) = I^eps_{1+-eps}(L x / r) * bump(|L x/r|^2 / d) * exp(|L x / r|^2).
struct SmoothedBox {
    double epsilon = 0.1;
    int sign = 1;
    double r = 1.0;
    Mat L;
    SmoothedWindow edge;

    SmoothedBox(const QuadForm& form, double r_, double eps, int sign_, int order = 8) : epsilon(eps), sign(sign_), r(r_), L(form.sqrt_positive) {
        require(eps > 0 && eps < 1.0 / 9.0, "epsilon must lie in (0, 1/9)");
        require(sign == 1 || sign == -1, "sign must be +1 or -1");
        require(r > 0, "r must be positive");
        double c = 1 + sign * eps;
        edge = SmoothedWindow(-c, c, eps, order);
    }

    Vec scaled(const Vec& x) const { return L * x / r; }

    double indicator_scaled(const Vec& y) const {
        double p = 1.0;
        for (int j = 0; j < y.size() && p > 0; ++j) p *= edge.eval(y(j));
        return p;
    }

    // I^eps_{1+-eps}(L x / r)
    double smoothed_indicator(const Vec& x) const { return indicator_scaled(scaled(x)); }

    double chi(const Vec& x) const {
        Vec y = scaled(x);
        double n2 = y.squaredNorm();
        return indicator_scaled(y) * bump(n2 / static_cast<double>(y.size())) * std::exp(n2);
    }
};

// ---------------------------------------------------------------------------
// Theta sums

struct ThetaEval {
    cplx value{0, 0};
    double truncation_bound = 0.0;
    double r = 0, t = 0;
    Vec v;
    cplx z{0, 0};  // r^-2 + i t
    std::uint64_t terms = 0;
    std::string method;
};

struct SeriesEval {
    double value = 0.0;
    double truncation_bound = 0.0;
    std::uint64_t terms = 0;
    std::string method;
};

namespace detail {

// sum_{|m| > M} exp(-a m^2) for either sign of m.
inline double gauss_tail_1d(double a, double M) {
    return std::sqrt(kPi / a) * std::erfc(std::sqrt(a) * M);
}

// smallest M with the two-sided tail below tol
inline std::int64_t gauss_cutoff_1d(double a, double tol) {
    double M = std::sqrt(std::max(0.0, -std::log(tol) / a));
    while (gauss_tail_1d(a, M) > tol) M *= 1.25;
    while (M >= 1 && gauss_tail_1d(a, M - 1) <= tol) M -= 1;
    return static_cast<std::int64_t>(std::ceil(M));
}

// Given truncated factors P_j with |true_j - P_j| <= e_j.
inline double product_error(const std::vector<double>& abs_parts, const std::vector<double>& errs) {
    double with = 1.0, without = 1.0;
    for (std::size_t j = 0; j < abs_parts.size(); ++j) {
        with *= abs_parts[j] + errs[j];
        without *= abs_parts[j];
    }
    return std::max(0.0, with - without);
}

// sum over m of exp(-a m^2 + i (b m^2 + c m)), |m| <= M, tails first.
inline cplx theta_1d(double a, double b, double c, std::int64_t M) {
    cplx s{0, 0};
    for (std::int64_t k = M; k >= 1; --k) {
        double kk = static_cast<double>(k);
        double g = std::exp(-a * kk * kk);
        double ph = b * kk * kk;
        s += g * (std::exp(cplx(0, ph + c * kk)) + std::exp(cplx(0, ph - c * kk)));
    }
    return s + 1.0;
}

// Squared-norm radius R2 for sum_{G[x] > R2} exp(-G[x]) <= tol.
inline double gaussian_radius(const FinckePohst& fp, double tol) {
    double logprod = 0.0;
    for (double q : fp.qd) logprod += std::log1p(std::sqrt(2 * kPi / q));
    return std::max(0.0, 2 * (logprod - std::log(tol)));
}

inline double gaussian_tail(const FinckePohst& fp, double R2) {
    double logprod = 0.0;
    for (double q : fp.qd) logprod += std::log1p(std::sqrt(2 * kPi / q));
    return std::exp(logprod - 0.5 * R2);
}

// Rough lattice point count of {G[x] <= R2}.
inline double ellipsoid_points(const FinckePohst& fp, double R2) {
    double lv = 0.0;
    double R = std::sqrt(R2);
    for (double q : fp.qd) lv += std::log(2 * R / std::sqrt(q) + 1);
    return std::exp(lv);
}

// Sums f(x, G[x]) over G[x] <= R2, parallel over the outer coordinate,
// reduced pairwise in index order.
template <class T, class F>
T ellipsoid_sum(const FinckePohst& fp, double R2, std::uint64_t budget, unsigned threads, std::uint64_t& visited, F&& f) {
    std::int64_t top = fp.top_bound(R2);
    std::vector<T> parts(static_cast<std::size_t>(2 * top + 1), T{});
    std::atomic<std::uint64_t> count{0};
    parallel_for(2 * top + 1, threads, [&](std::int64_t i) {
        T acc{};
        std::uint64_t local = fp.enumerate(R2, i - top, [&](const std::vector<std::int64_t>& x, double g) { acc += f(x, g); });
        if (count.fetch_add(local) + local > budget) throw BudgetExceeded("ellipsoid enumeration exceeded " + std::to_string(budget) + " points");
        parts[static_cast<std::size_t>(i)] = acc;
    });
    visited = count.load();
    return pairwise_sum(parts, 0, parts.size());
}

inline void check_budget(double estimate, std::uint64_t budget, const std::string& what) {
    if (estimate > 4.0 * static_cast<double>(budget))
        throw BudgetExceeded(what + ": about " + std::to_string(static_cast<long long>(estimate)) + " points exceed budget " + std::to_string(budget));
}

// eigen-pairs (s_j |q_j|) of Q with coordinates u = U^T w
struct EigenFrame {
    Vec lambda;
    Mat U;
};

inline EigenFrame eigen_frame(const QuadForm& f) {
    if (f.diagonal) return {f.matrix.diagonal(), Mat::Identity(f.dim, f.dim)};
    return {f.eigenvalues, f.eigenvectors};
}

}  // namespace detail

// theta_v(t) = sum_m exp(-r^-2 Q+[m] + i t Q[m] + i <m, v/r>).
inline ThetaEval theta_sum(const QuadForm& form, double r, double t, const Vec& v, double tol = 1e-16,
                           std::uint64_t budget = kDefaultThetaBudget, unsigned threads = 0) {
    require(r > 0 && std::isfinite(r), "r must be positive");
    require(tol > 0, "tol must be positive");
    const int d = form.dim;
    require(v.size() == d, "v must have the form's dimension");
    ThetaEval out;
    out.r = r;
    out.t = t;
    out.v = v;
    out.z = cplx(1.0 / (r * r), t);
    if (form.diagonal) {
        const double tol_j = tol / (2.0 * d);
        std::vector<double> absp, errs;
        cplx prod{1, 0};
        for (int j = 0; j < d; ++j) {
            double q = form.matrix(j, j);
            double a = std::fabs(q) / (r * r);
            std::int64_t M = detail::gauss_cutoff_1d(a, tol_j);
            cplx s = detail::theta_1d(a, t * q, v(j) / r, M);
            prod *= s;
            absp.push_back(std::abs(s));
            errs.push_back(detail::gauss_tail_1d(a, static_cast<double>(M)));
            out.terms += static_cast<std::uint64_t>(2 * M + 1);
        }
        out.value = prod;
        out.truncation_bound = detail::product_error(absp, errs);
        out.method = "factorized";
        return out;
    }
    Mat G = form.positive_part / (r * r);
    FinckePohst fp = FinckePohst::from_gram(G);
    double R2 = detail::gaussian_radius(fp, tol);
    detail::check_budget(detail::ellipsoid_points(fp, R2) * 0.25, budget, "theta_sum");
    const Mat& Q = form.matrix;
    Vec u = v / r;
    out.value = detail::ellipsoid_sum<cplx>(fp, R2, budget, threads, out.terms, [&](const std::vector<std::int64_t>& x, double g) {
        double qx = 0.0, lin = 0.0;
        for (int i = 0; i < d; ++i) {
            double xi = static_cast<double>(x[static_cast<std::size_t>(i)]);
            lin += xi * u(i);
            double row = 0.0;
            for (int k = 0; k < d; ++k) row += Q(i, k) * static_cast<double>(x[static_cast<std::size_t>(k)]);
            qx += xi * row;
        }
        return std::exp(-g) * std::exp(cplx(0, t * qx + lin));
    });
    out.truncation_bound = detail::gaussian_tail(fp, R2);
    out.method = "enumerated";
    return out;
}

// Closed form of the integral of exp(-A[x] + i<x, v/r>), A = r^-2 Q+ - i t Q,
// one principal square root per eigen-pair.
inline cplx theta_integral(const QuadForm& form, double r, double t, const Vec& v) {
    require(r > 0 && std::isfinite(r), "r must be positive");
    require(v.size() == form.dim, "v must have the form's dimension");
    auto fr = detail::eigen_frame(form);
    Vec w = fr.U.transpose() * (v / (2 * r));
    cplx pref{1, 0}, expo{0, 0};
    for (int j = 0; j < form.dim; ++j) {
        double lam = fr.lambda(j);
        cplx alpha = cplx(std::fabs(lam) / (r * r), -t * lam);
        pref *= std::sqrt(kPi / alpha);
        expo += w(j) * w(j) / alpha;
    }
    return pref * std::exp(-expo);
}

// Poisson term det(A/pi)^{-1/2} exp(-A^{-1}[pi n - v/(2r)]).
inline cplx poisson_term(const QuadForm& form, double r, double t, const Vec& v, const Eigen::VectorXi& n) {
    Vec shifted = kPi * n.cast<double>() * (2 * r) - v;  // (2r)(pi n - v/(2r))
    return theta_integral(form, r, t, shifted);
}

inline double poisson_residual(const QuadForm& form, double r, double t, const Vec& v, int n_terms, double tol = 1e-16,
                               std::uint64_t budget = kDefaultThetaBudget) {
    require(std::fabs(t) < 1.0 / r, "poisson_residual needs |t| < 1/r");
    require(n_terms >= 0, "n_terms must be nonnegative");
    const int d = form.dim;
    ThetaEval th = theta_sum(form, r, t, v, tol, budget, 1);
    cplx series{0, 0};
    if (form.diagonal) {
        series = 1.0;
        for (int j = 0; j < d; ++j) {
            QuadForm one = diagonal_form({form.matrix(j, j)});
            Vec vj(1);
            vj(0) = v(j);
            cplx s{0, 0};
            for (int k = n_terms; k >= -n_terms; --k) {
                Eigen::VectorXi n(1);
                n(0) = k;
                s += poisson_term(one, r, t, vj, n);
            }
            series *= s;
        }
    } else {
        Eigen::VectorXi n = Eigen::VectorXi::Constant(d, -n_terms);
        for (;;) {
            series += poisson_term(form, r, t, v, n);
            int i = 0;
            while (i < d && n(i) == n_terms) n(i++) = -n_terms;
            if (i == d) break;
            ++n(i);
        }
    }
    return std::abs(th.value - series);
}

// psi(r,t) = sum_{m,n} exp(-H_t(m,n)),
// H_t(m,n) = r^2 Q+^{-1}[m - (2/pi) t Q n] + r^-2 Q+[n].
inline SeriesEval psi_majorant(const QuadForm& form, double r, double t, double tol = 1e-14,
                               std::uint64_t budget = kDefaultThetaBudget, unsigned threads = 0) {
    require(r > 0 && std::isfinite(r), "r must be positive");
    require(tol > 0, "tol must be positive");
    const int d = form.dim;
    SeriesEval out;
    const double tp = 2 * t / kPi;
    if (form.diagonal) {
        std::vector<double> parts, errs;
        const double tol_j = tol / (2.0 * d);
        for (int j = 0; j < d; ++j) {
            double q = form.matrix(j, j), aq = std::fabs(q);
            double am = r * r / aq;   // inner Gaussian in m
            double an = aq / (r * r);  // outer Gaussian in n
            double inner_max = 1.0 + std::sqrt(kPi / am);
            std::int64_t N = detail::gauss_cutoff_1d(an, 0.5 * tol_j / inner_max);
            double Mr = std::sqrt(std::max(0.0, -std::log(0.25 * tol_j) / am)) + 1.0;
            while (2 * (std::exp(-am * Mr * Mr) + 0.5 * detail::gauss_tail_1d(am, Mr)) > 0.25 * tol_j) Mr *= 1.25;
            double inner_tail = 2 * (std::exp(-am * Mr * Mr) + 0.5 * detail::gauss_tail_1d(am, Mr));
            double s = 0.0, outer_mass = 0.0;
            for (std::int64_t n = N; n >= -N; --n) {
                double nn = static_cast<double>(n);
                double c = tp * q * nn;
                double wn = std::exp(-an * nn * nn);
                outer_mass += wn;
                std::int64_t lo = static_cast<std::int64_t>(std::ceil(c - Mr)), hi = static_cast<std::int64_t>(std::floor(c + Mr));
                double inner = 0.0;
                for (std::int64_t m = lo; m <= hi; ++m) {
                    double dm = static_cast<double>(m) - c;
                    inner += std::exp(-am * dm * dm);
                }
                s += wn * inner;
                out.terms += static_cast<std::uint64_t>(std::max<std::int64_t>(0, hi - lo + 1));
            }
            parts.push_back(s);
            errs.push_back(detail::gauss_tail_1d(an, static_cast<double>(N)) * inner_max + outer_mass * inner_tail);
        }
        out.value = 1.0;
        for (double p : parts) out.value *= p;
        out.truncation_bound = detail::product_error(parts, errs);
        out.method = "factorized";
        return out;
    }
    // 2d-dimensional Gram matrix in (m, n)
    const Mat& P = form.positive_inverse;
    Mat B = tp * form.matrix;
    Mat H(2 * d, 2 * d);
    H.topLeftCorner(d, d) = r * r * P;
    H.topRightCorner(d, d) = -r * r * P * B;
    H.bottomLeftCorner(d, d) = -r * r * B.transpose() * P;
    H.bottomRightCorner(d, d) = r * r * B.transpose() * P * B + form.positive_part / (r * r);
    H = 0.5 * (H + H.transpose()).eval();
    FinckePohst fp = FinckePohst::from_gram(H);
    double R2 = detail::gaussian_radius(fp, tol);
    detail::check_budget(detail::ellipsoid_points(fp, R2) * 0.1, budget, "psi_majorant");
    out.value = detail::ellipsoid_sum<double>(fp, R2, budget, threads, out.terms,
                                              [](const std::vector<std::int64_t>&, double g) { return std::exp(-g); });
    out.truncation_bound = detail::gaussian_tail(fp, R2);
    out.method = "enumerated";
    return out;
}

// Explicit right side of the theta approximation estimate without its
// constant: |z|^{-d/2} (exp(-Re(1/z)) + |det Q|^{-1/2} [|Q+^{-1/2} v| > pi r / sqrt(q)]),
// z = r^-2 + i t, q the largest |eigenvalue|.
inline double theta_envelope(const QuadForm& form, double r, double t, const Vec& v) {
    cplx z(1.0 / (r * r), t);
    double base = std::pow(std::abs(z), -0.5 * form.dim);
    double far = (form.sqrt_positive_inverse * v).norm() > kPi * r / std::sqrt(form.q_max) ? 1.0 / std::sqrt(form.det_abs) : 0.0;
    return base * (std::exp(-(1.0 / z).real()) + far);
}

// max over a uniform v-grid of one period (grid points per coordinate).
inline double theta_sup_grid(const QuadForm& form, double r, double t, int grid, double tol = 1e-14) {
    require(grid >= 1, "grid must be positive");
    const int d = form.dim;
    const double period = 2 * kPi * r;
    if (form.diagonal) {
        double prod = 1.0;
        for (int j = 0; j < d; ++j) {
            QuadForm one = diagonal_form({form.matrix(j, j)});
            double best = 0.0;
            for (int g = 0; g < grid; ++g) {
                Vec vj(1);
                vj(0) = period * g / grid;
                best = std::max(best, std::abs(theta_sum(one, r, t, vj, tol).value));
            }
            prod *= best;
        }
        return prod;
    }
    double best = 0.0;
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (;;) {
        Vec v(d);
        for (int j = 0; j < d; ++j) v(j) = period * idx[static_cast<std::size_t>(j)] / grid;
        best = std::max(best, std::abs(theta_sum(form, r, t, v, tol, kDefaultThetaBudget, 1).value));
        int i = 0;
        while (i < d && idx[static_cast<std::size_t>(i)] == grid - 1) idx[static_cast<std::size_t>(i++)] = 0;
        if (i == d) break;
        ++idx[static_cast<std::size_t>(i)];
    }
    return best;
}

// ---------------------------------------------------------------------------
// Smoothed discrepancy

struct SmoothedDiscrepancy {
    double value = 0.0;     // V - W
    double lattice_sum = 0.0;
    double integral = 0.0;
    double integral_ci = 0.0;
    std::uint64_t points = 0;
    std::string method;
};

namespace detail {

// Smoothed integrand in y = L x / r coordinates.
struct SmoothedIntegrand {
    SmoothedWindow box_edge, value_window;
    Mat R;  // reflection
    double r2 = 1;

    double eval(const Vec& y) const {
        double p = 1.0;
        for (int j = 0; j < y.size() && p > 0; ++j) p *= box_edge.eval(y(j));
        if (p == 0.0) return 0.0;
        return p * value_window.eval(r2 * y.dot(R * y));
    }
};

// Spline knots of a window.
inline std::vector<double> window_knots(const SmoothedWindow& win) {
    std::vector<double> k;
    const double h = win.kernel.half_width();
    for (int i = 0; i <= win.kernel.order; ++i) {
        k.push_back(win.a - win.w + 2 * h * i);
        k.push_back(win.b - win.w + 2 * h * i);
    }
    return k;
}

// Real roots of A u^2 + B u + C = 0.
inline void quadratic_roots(double A, double B, double C, std::vector<double>& out) {
    if (std::fabs(A) < 1e-14) {
        if (std::fabs(B) > 1e-14) out.push_back(-C / B);
        return;
    }
    double disc = B * B - 4 * A * C;
    if (disc < 0) return;
    double sq = std::sqrt(disc);
    double qq = -0.5 * (B + (B >= 0 ? sq : -sq));
    if (qq != 0.0) out.push_back(C / qq);
    out.push_back(qq / A);
}

inline double gk21_pieces(const std::function<double(double)>& f, std::vector<double> pts, double lo, double hi, bool adaptive) {
    pts.push_back(lo);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    double prev = lo;
    for (double p : pts) {
        if (p <= prev) continue;
        if (p > hi) p = hi;
        if (p - prev > 1e-15 && f(0.5 * (prev + p)) != 0.0) {
            // a spline piece vanishing at its midpoint lies outside the support
            total += adaptive ? boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, prev, p, 5, 1e-9)
                              : boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, prev, p, 0);
        }
        prev = p;
        if (prev >= hi) break;
    }
    return total;
}

// Integral over [-c, c]^d (d <= 2) of the smoothed integrand. Each inner
// piece between spline knots and knot preimages is a polynomial of degree
// below the Kronrod exactness; the outer breakpoints are the collisions of
// inner breakpoints.
inline double smoothed_integral_quadrature(const SmoothedIntegrand& f, int d, double c) {
    const std::vector<double> bk = window_knots(f.box_edge);
    std::vector<double> gk;
    for (double k : window_knots(f.value_window)) gk.push_back(k / f.r2);
    if (d == 1) {
        const double A = f.R(0, 0);
        std::vector<double> pts = bk;
        for (double k : gk) quadratic_roots(A, 0.0, -k, pts);
        Vec y(1);
        return gk21_pieces([&](double u) { y(0) = u; return f.eval(y); }, pts, -c, c, false);
    }
    const double A = f.R(0, 0), B2 = 2 * f.R(0, 1), C2 = f.R(1, 1);
    auto inner = [&](double u2) {
        double e2 = f.box_edge.eval(u2);
        if (e2 == 0.0) return 0.0;
        std::vector<double> pts = bk;
        for (double k : gk) quadratic_roots(A, B2 * u2, C2 * u2 * u2 - k, pts);
        auto g = [&](double u1) {
            double e1 = f.box_edge.eval(u1);
            if (e1 == 0.0) return 0.0;
            return e1 * f.value_window.eval(f.r2 * (A * u1 * u1 + B2 * u1 * u2 + C2 * u2 * u2));
        };
        return e2 * gk21_pieces(g, pts, -c, c, false);
    };
    // outer breakpoints: box knots, g-knot through box knot, births of g-knot roots
    std::vector<double> pts = bk;
    for (double k : gk) {
        for (double b : bk) quadratic_roots(C2, B2 * b, A * b * b - k, pts);
        // discriminant of the inner quadratic in u1 vanishes
        quadratic_roots(B2 * B2 - 4 * A * C2, 0.0, 4 * A * k, pts);
    }
    return gk21_pieces(inner, pts, -c, c, true);
}

}  // namespace detail

// sign = +1: box 1+eps and window [a-w, b+w] (majorant of the sharp
// indicator); sign = -1: box 1-eps and window [a+w, b-w] (minorant).
inline SmoothedDiscrepancy smoothed_discrepancy(const ShellSpec& spec, double eps, double w, int sign, int order = 8,
                                                std::uint64_t mc_samples = 4000000, std::uint64_t seed = 1,
                                                std::uint64_t budget = kDefaultThetaBudget, unsigned threads = 0) {
    require(eps > 0 && eps < 1.0 / 9.0, "epsilon must lie in (0, 1/9)");
    require(w > 0 && 2 * w < spec.b - spec.a, "w must satisfy 0 < 2w < b - a");
    require(sign == 1 || sign == -1, "sign must be +1 or -1");
    require(spec.r > 0, "r must be positive");
    const QuadForm& f = spec.form;
    const int d = f.dim;
    const double r = spec.r;
    SmoothedBox box(f, r, eps, sign, order);
    detail::SmoothedIntegrand integrand;
    integrand.box_edge = box.edge;
    integrand.value_window = SmoothedWindow::unchecked(spec.a - sign * w, spec.b + sign * w, w, order);
    integrand.R = f.reflection;
    integrand.r2 = r * r;
    const double c = 1 + sign * eps + eps;  // support of the box edge

    SmoothedDiscrepancy out;
    // lattice sum over m + xi with |L (m + xi)|_inf <= r c
    FinckePohst fp = FinckePohst::from_gram(f.positive_part);
    Vec xi = f.shift;
    double rad = std::sqrt(static_cast<double>(d)) * r * c + std::sqrt(f.q_max) * xi.norm();
    double R2 = rad * rad * (1 + 1e-9);
    detail::check_budget(detail::ellipsoid_points(fp, R2) * 0.5, budget, "smoothed_discrepancy");
    out.lattice_sum = detail::ellipsoid_sum<double>(fp, R2, budget, threads, out.points, [&](const std::vector<std::int64_t>& m, double) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x(i) = static_cast<double>(m[static_cast<std::size_t>(i)]) + xi(i);
        return integrand.eval(f.sqrt_positive * x / r);
    });
    const double jac = std::pow(r, d) / std::sqrt(f.det_abs);
    if (d <= 2) {
        out.integral = jac * detail::smoothed_integral_quadrature(integrand, d, c);
        out.method = "quadrature";
    } else {
        // stratified on the last coordinate, counter-based streams
        const std::uint64_t per = std::max<std::uint64_t>(2, mc_samples / kStrata);
        std::vector<double> mean(kStrata), var(kStrata);
        parallel_for(kStrata, threads, [&](std::int64_t s) {
            CounterRng rng(seed, static_cast<std::uint64_t>(s));
            Vec y(d);
            double sum = 0, sum2 = 0;
            for (std::uint64_t k = 0; k < per; ++k) {
                for (int j = 0; j < d - 1; ++j) y(j) = c * (2 * rng.uniform() - 1);
                y(d - 1) = c * (-1 + 2 * (static_cast<double>(s) + rng.uniform()) / kStrata);
                double val = integrand.eval(y);
                sum += val;
                sum2 += val * val;
            }
            double mu = sum / static_cast<double>(per);
            mean[static_cast<std::size_t>(s)] = mu;
            var[static_cast<std::size_t>(s)] = std::max(0.0, sum2 / static_cast<double>(per) - mu * mu) / static_cast<double>(per - 1);
        });
        const double cell = jac * std::pow(2 * c, d) / kStrata;
        out.integral = cell * pairwise_sum(mean, 0, mean.size());
        out.integral_ci = 1.96 * cell * std::sqrt(pairwise_sum(var, 0, var.size()));
        out.method = "montecarlo";
    }
    out.value = out.lattice_sum - out.integral;
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian lattice sums

namespace detail {

inline Mat reduced_generators(const LatticeBasis& basis) { return lll_reduce(basis).basis.generators; }

}  // namespace detail

// sum over v in the lattice of exp(-eps |v|^2).
inline SeriesEval gaussian_lattice_sum(const LatticeBasis& basis, double eps, double tol = 1e-12,
                                       std::uint64_t budget = kDefaultThetaBudget, unsigned threads = 0) {
    require(eps > 0, "eps must be positive");
    Mat cols = detail::reduced_generators(basis);
    Mat G = eps * (cols.transpose() * cols);
    FinckePohst fp = FinckePohst::from_gram(G);
    SeriesEval out;
    double R2 = detail::gaussian_radius(fp, tol);
    detail::check_budget(detail::ellipsoid_points(fp, R2) * 0.5, budget, "gaussian_lattice_sum");
    out.value = detail::ellipsoid_sum<double>(fp, R2, budget, threads, out.terms, [](const std::vector<std::int64_t>&, double g) { return std::exp(-g); });
    out.truncation_bound = detail::gaussian_tail(fp, R2);
    out.method = "enumerated";
    return out;
}

// #{v in the lattice : |v|_inf < 1}, origin included.
inline std::uint64_t count_sup_box(const LatticeBasis& basis, std::uint64_t budget = kDefaultThetaBudget) {
    Mat cols = detail::reduced_generators(basis);
    FinckePohst fp = FinckePohst::from_gram(cols.transpose() * cols);
    double R2 = static_cast<double>(basis.ambient()) * (1 + 1e-12);
    detail::check_budget(detail::ellipsoid_points(fp, R2), budget, "count_sup_box");
    std::uint64_t visited = 0;
    return detail::ellipsoid_sum<std::uint64_t>(fp, R2, budget, 1, visited, [&](const std::vector<std::int64_t>& x, double) -> std::uint64_t {
        Vec v = Vec::Zero(cols.rows());
        for (int i = 0; i < cols.cols(); ++i) v += static_cast<double>(x[static_cast<std::size_t>(i)]) * cols.col(i);
        return v.cwiseAbs().maxCoeff() < 1.0 ? 1 : 0;
    });
}

}  // namespace opplab

#endif
