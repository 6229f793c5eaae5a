#ifndef OPPLAB_SOLVER_HPP
#define OPPLAB_SOLVER_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "enumerate.hpp"
#include "errors.hpp"
#include "forms.hpp"
#include "lattice.hpp"
#include "orbit.hpp"
#include "parallel.hpp"

namespace opplab {

inline constexpr double kDefaultEta = 0.01;

// Solution size bound |det Q| q^{4d/(d-4)+eta} with unit constant; NaN for d < 5.
inline double size_bound_formula(const QuadForm& form, double eta = kDefaultEta) {
    const int d = form.dim;
    if (d < 5) return std::numeric_limits<double>::quiet_NaN();
    return form.det_abs * std::pow(form.q_max, 4.0 * d / (d - 4) + eta);
}

struct SolutionCert {
    IVec m;
    double value = 0.0;
    double size = 0.0;  // Q+[m]
    double norm = 0.0;
    std::string method;  // "enumeration" or "resonant"
    double bound_eval = 0.0;
    double epsilon = 0.0;
    std::uint64_t nodes = 0;
    // resonant route only
    double t0 = 0.0, alpha_d = 0.0, gamma = 0.0;
    double sublattice_det = 0.0, bd_bound = 0.0, radius2 = 0.0;
    IVec partner;  // the m of (m, n) with <m, n> = 0
    bool fallback = false;
};

namespace detail {

inline void fill_cert(SolutionCert& c, const QuadForm& form, const IVec& m) {
    Vec x = m.cast<double>();
    c.m = m;
    c.value = form.value(x);
    c.size = form.positive_value(x);
    c.norm = x.norm();
}

struct Candidate {
    double size = 0.0;
    IVec m;
};

// larger size loses; equal sizes resolved by lexicographically larger vector
inline bool better_candidate(const Candidate& a, const Candidate& b) {
    double tol = 1e-12 * std::max(1.0, std::max(a.size, b.size));
    if (std::fabs(a.size - b.size) > tol) return a.size < b.size;
    return lex_less(b.m, a.m);
}

}  // namespace detail

// First nonzero m in increasing Q+[m] with |Q[m]| < epsilon; within a shell of
// equal Q+ the sign-normalized lexicographically largest vector wins.
inline SolutionCert find_small_solution(const QuadForm& form, double epsilon, double size_cap,
                                        std::uint64_t budget = kDefaultEnumBudget, unsigned threads = 0) {
    require(epsilon > 0, "epsilon must be positive");
    require(form.dim >= 2, "dimension must be at least 2");
    require(size_cap > 0, "size_cap must be positive");
    const int d = form.dim;
    FinckePohst fp = FinckePohst::from_gram(form.positive_part);
    double R2 = std::min(size_cap, form.positive_part.diagonal().minCoeff());
    std::uint64_t nodes = 0;
    for (;;) {
        const std::int64_t top = fp.top_bound(R2);
        std::vector<std::optional<detail::Candidate>> best(static_cast<std::size_t>(top + 1));
        std::vector<std::uint64_t> visited(static_cast<std::size_t>(top + 1), 0);
        parallel_for(top + 1, threads, [&](std::int64_t k) {
            auto& b = best[static_cast<std::size_t>(k)];
            visited[static_cast<std::size_t>(k)] = fp.enumerate(R2, k, [&](const std::vector<std::int64_t>& x, double) {
                IVec v(d);
                bool zero = true;
                for (int i = 0; i < d; ++i) {
                    v(i) = x[static_cast<std::size_t>(i)];
                    zero = zero && v(i) == 0;
                }
                if (zero) return;
                Vec xv = v.cast<double>();
                if (std::fabs(form.value(xv)) >= epsilon) return;
                detail::Candidate c{form.positive_value(xv), detail::sign_normalized(v)};
                if (!b || detail::better_candidate(c, *b)) b = c;
            });
        });
        std::optional<detail::Candidate> win;
        for (std::size_t k = 0; k < best.size(); ++k) {
            nodes += visited[k];
            if (best[k] && (!win || detail::better_candidate(*best[k], *win))) win = best[k];
        }
        if (win) {
            SolutionCert c;
            detail::fill_cert(c, form, win->m);
            c.method = "enumeration";
            c.epsilon = epsilon;
            c.bound_eval = size_bound_formula(form);
            c.nodes = nodes;
            return c;
        }
        if (nodes > budget) throw BudgetExceeded("enumeration budget exhausted at Q+ <= " + std::to_string(R2));
        if (R2 >= size_cap) throw NotFoundWithinCap("no m with |Q[m]| < epsilon and Q+[m] <= " + std::to_string(size_cap));
        R2 = std::min(size_cap, 2.0 * R2);
    }
}

// Exact values for d <= 8, Minkowski's bound 4 / omega_d^{2/d} beyond.
inline double hermite_constant(int d) {
    require(d >= 1, "dimension must be positive");
    static const double pow_d[] = {1.0, 4.0 / 3.0, 2.0, 4.0, 8.0, 64.0 / 3.0, 64.0, 256.0};
    if (d <= 8) return std::pow(pow_d[d - 1], 1.0 / d);
    const double log_omega = 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
    return 4.0 * std::exp(-2.0 * log_omega / d);
}

// gamma_d (2 Tr A^2)^{(d-1)/2} (det Lambda)^2, A in orthonormal coordinates of the lattice span.
inline double birch_davenport_bound(const Mat& A, double det_lattice) {
    require(A.rows() == A.cols() && A.rows() >= 1, "A must be square");
    const int d = static_cast<int>(A.rows());
    double tr = (A * A).trace();
    return hermite_constant(d) * std::pow(2.0 * tr, 0.5 * (d - 1)) * det_lattice * det_lattice;
}

struct ResonantOptions {
    double epsilon = 1.0;
    int grid_n = 64;
    int refine = 12;
    std::uint64_t budget = kDefaultEnumBudget;
    bool fallback = true;
    unsigned threads = 0;
};

// Scan t for the argmax of alpha_d(Lambda_t) at r = r_cap, take the span of the
// first d minima witnesses (m, n) and search it for <m, n> = 0 with n != 0
// in growing Lambda_t-balls up to the Birch-Davenport radius.
inline SolutionCert resonant_solution(const QuadForm& form, double r_cap, double t_lo, double t_hi, double beta,
                                      const ResonantOptions& opt = {}) {
    const int d = form.dim;
    require(d >= 5, "resonant_solution needs d >= 5");
    require(form.indefinite(), "form must be indefinite");
    require(r_cap > 1, "r_cap must exceed 1");
    require(t_lo > 0 && t_lo < t_hi, "need 0 < t_lo < t_hi");
    require(opt.epsilon > 0, "epsilon must be positive");
    auto scan = detail::gamma_scan_unchecked(form, r_cap, t_lo, t_hi, beta, opt.grid_n, opt.refine, opt.budget, opt.threads);
    const double t0 = scan.argmax_t;
    LatticeBasis lat = build_orbit_lattice(form, r_cap, t0);
    MinimaProfile mp = successive_minima(lat, nullptr, opt.budget);
    IMat W(2 * d, d);
    for (int j = 0; j < d; ++j) W.col(j) = mp.witnesses[static_cast<std::size_t>(j)];
    Mat B = lat.generators * W.cast<double>();
    Mat G = B.transpose() * B;
    // 2<m, n> as an integer form on the coefficient vector c
    IMat Mi = W.topRows(d).transpose() * W.bottomRows(d);
    IMat A2 = Mi + Mi.transpose();
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success) throw NumericalBreakdown("witness Gram matrix not positive definite");
    Mat L = llt.matrixL();
    Mat Aon = 0.5 * A2.cast<double>();
    Mat Aorth = L.triangularView<Eigen::Lower>().solve(L.triangularView<Eigen::Lower>().solve(Aon).transpose()).transpose();
    const double det_sub = std::sqrt(G.determinant());

    SolutionCert cert;
    cert.t0 = t0;
    cert.alpha_d = scan.alpha_max;
    cert.gamma = scan.gamma;
    cert.sublattice_det = det_sub;
    cert.bd_bound = birch_davenport_bound(Aorth, det_sub);
    cert.epsilon = opt.epsilon;
    cert.bound_eval = size_bound_formula(form);
    cert.method = "resonant";

    FinckePohst fp = FinckePohst::from_gram(G);
    double R2 = G.diagonal().minCoeff();
    const double R2_max = cert.bd_bound;
    std::uint64_t nodes = 0;
    struct Hit {
        double absval = 0.0, size = 0.0;
        IVec n, m;
    };
    for (;;) {
        const std::int64_t top = fp.top_bound(R2);
        std::vector<std::optional<Hit>> best(static_cast<std::size_t>(top + 1));
        std::vector<std::uint64_t> visited(static_cast<std::size_t>(top + 1), 0);
        auto better = [](const Hit& a, const Hit& b) {
            if (a.absval != b.absval) return a.absval < b.absval;
            if (a.size != b.size) return a.size < b.size;
            return detail::lex_less(b.n, a.n);
        };
        parallel_for(top + 1, opt.threads, [&](std::int64_t k) {
            auto& b = best[static_cast<std::size_t>(k)];
            visited[static_cast<std::size_t>(k)] = fp.enumerate(R2, k, [&](const std::vector<std::int64_t>& x, double) {
                IVec c(d);
                for (int i = 0; i < d; ++i) c(i) = x[static_cast<std::size_t>(i)];
                IVec N = W * c;
                IVec m = N.head(d), n = N.tail(d);
                if (n.isZero() || m.dot(n) != 0) return;
                Vec nv = n.cast<double>();
                double v = std::fabs(form.value(nv));
                if (v >= opt.epsilon) return;
                IVec sn = detail::sign_normalized(n);
                Hit h{v, form.positive_value(nv), sn, sn == n ? m : IVec(-m)};
                if (!b || better(h, *b)) b = h;
            });
        });
        std::optional<Hit> win;
        for (std::size_t k = 0; k < best.size(); ++k) {
            nodes += visited[k];
            if (best[k] && (!win || better(*best[k], *win))) win = best[k];
        }
        if (win) {
            detail::fill_cert(cert, form, win->n);
            cert.partner = win->m;
            cert.radius2 = R2;
            cert.nodes = nodes;
            if (cert.m.isZero() || !(std::fabs(cert.value) < opt.epsilon))
                throw NumericalBreakdown("resonant certificate violates n != 0 or |Q[n]| < epsilon");
            return cert;
        }
        if (R2 >= R2_max || nodes > opt.budget) break;
        R2 = std::min(R2_max, 2.0 * R2);
    }
    if (!opt.fallback)
        throw NoResonance("no <m, n> = 0 with |Q[n]| < epsilon in the resonant sublattice at t0 = " + std::to_string(t0));
    double cap = std::isfinite(cert.bound_eval) ? cert.bound_eval : 1e6;
    SolutionCert e = find_small_solution(form, opt.epsilon, cap, opt.budget, opt.threads);
    e.t0 = cert.t0;
    e.alpha_d = cert.alpha_d;
    e.gamma = cert.gamma;
    e.sublattice_det = cert.sublattice_det;
    e.bd_bound = cert.bd_bound;
    e.nodes += nodes;
    e.fallback = true;
    return e;
}

struct GapStats {
    double r = 0.0, c0 = 0.0;
    double lo = 0.0, hi = 0.0;  // value window
    std::vector<double> values;
    double d_r = 0.0;
    std::uint64_t work = 0;
};

namespace detail {

inline void dedupe_sorted(std::vector<double>& v, double tol) {
    std::sort(v.begin(), v.end());
    std::size_t w = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (w == 0 || v[i] - v[w - 1] > tol) v[w++] = v[i];
    v.resize(w);
}

}  // namespace detail

// V(r) = {Q[m] : m in C_{r/c0}} in [-c0 r^2, c0 r^2], d(r) = largest gap.
// For definite forms the window is the upper half [c0 r^2 / 2, c0 r^2]
// (sign-flipped for negative forms): near zero the gaps never close.
inline GapStats value_gaps(const QuadForm& form, double r, double c0, std::uint64_t budget = 2000000000ULL) {
    require(r > 0 && c0 > 0, "r and c0 must be positive");
    const int d = form.dim;
    GapStats g;
    g.r = r;
    g.c0 = c0;
    const double R = r / c0, top = c0 * r * r;
    if (form.indefinite()) {
        g.lo = -top;
        g.hi = top;
    } else if (form.p > 0) {
        g.lo = 0.5 * top;
        g.hi = top;
    } else {
        g.lo = -top;
        g.hi = -0.5 * top;
    }
    const double tol = 1e-9;
    std::vector<double> vals;
    if (form.diagonal) {
        std::vector<double> lo_rest(static_cast<std::size_t>(d + 1), 0.0), hi_rest(static_cast<std::size_t>(d + 1), 0.0);
        std::vector<std::int64_t> X(static_cast<std::size_t>(d));
        for (int i = d - 1; i >= 0; --i) {
            double q = form.matrix(i, i);
            X[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(R / std::sqrt(std::fabs(q)) + 1e-12));
            double ext = q * static_cast<double>(X[static_cast<std::size_t>(i)] * X[static_cast<std::size_t>(i)]);
            lo_rest[static_cast<std::size_t>(i)] = lo_rest[static_cast<std::size_t>(i + 1)] + std::min(0.0, ext);
            hi_rest[static_cast<std::size_t>(i)] = hi_rest[static_cast<std::size_t>(i + 1)] + std::max(0.0, ext);
        }
        std::vector<double> cur{0.0};
        for (int i = 0; i < d; ++i) {
            double q = form.matrix(i, i);
            std::vector<double> next;
            const std::int64_t Xi = X[static_cast<std::size_t>(i)];
            g.work += cur.size() * static_cast<std::uint64_t>(Xi + 1);
            if (g.work > budget) throw BudgetExceeded("value set exceeds the budget");
            for (double s : cur)
                for (std::int64_t x = 0; x <= Xi; ++x) {
                    double v = s + q * static_cast<double>(x * x);
                    if (v + lo_rest[static_cast<std::size_t>(i + 1)] > g.hi + tol) continue;
                    if (v + hi_rest[static_cast<std::size_t>(i + 1)] < g.lo - tol) continue;
                    next.push_back(v);
                }
            detail::dedupe_sorted(next, tol);
            cur.swap(next);
        }
        vals = std::move(cur);
    } else {
        FinckePohst fp = FinckePohst::from_gram(form.positive_part);
        const double R2 = d * R * R;
        const std::int64_t top_b = fp.top_bound(R2);
        for (std::int64_t k = 0; k <= top_b; ++k) {
            g.work += fp.enumerate(R2, k, [&](const std::vector<std::int64_t>& x, double) {
                Vec xv(d);
                for (int i = 0; i < d; ++i) xv(i) = static_cast<double>(x[static_cast<std::size_t>(i)]);
                if ((form.sqrt_positive * xv).cwiseAbs().maxCoeff() > R * (1 + 1e-12)) return;
                double v = form.value(xv);
                if (v >= g.lo - tol && v <= g.hi + tol) vals.push_back(v);
            });
            if (g.work > budget) throw BudgetExceeded("box enumeration exceeds the budget");
        }
    }
    vals.erase(std::remove_if(vals.begin(), vals.end(), [&](double v) { return v < g.lo - tol || v > g.hi + tol; }), vals.end());
    detail::dedupe_sorted(vals, tol);
    g.values = std::move(vals);
    g.d_r = g.values.size() < 2 ? std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 1; i < g.values.size(); ++i) g.d_r = std::max(g.d_r, g.values[i] - g.values[i - 1]);
    return g;
}

// value_gaps over increasing r; aborts on an increase of d(r).
inline std::vector<GapStats> gap_sweep(const QuadForm& form, const std::vector<double>& rs, double c0,
                                       std::uint64_t budget = 2000000000ULL) {
    require(std::is_sorted(rs.begin(), rs.end()), "radii must be increasing");
    std::vector<GapStats> out;
    for (double r : rs) {
        out.push_back(value_gaps(form, r, c0, budget));
        if (out.size() >= 2 && out.back().d_r > out[out.size() - 2].d_r + 1e-12)
            throw MonotonicityViolation("d(r) increased from " + std::to_string(out[out.size() - 2].d_r) + " at r = " +
                                        std::to_string(out[out.size() - 2].r) + " to " + std::to_string(out.back().d_r) +
                                        " at r = " + std::to_string(r));
    }
    return out;
}

struct TheoremConstants {
    double eta = kDefaultEta;
    double kappa = 0.0;
    double delta = 0.05;  // in (0, 1/10)
    double beta = 0.45;
};

struct BoundReport {
    int d = 0;
    double size_exponent = 0.0;  // 4d/(d-4) + eta
    double size_bound = 0.0;
    double norm_bound = 0.0;     // epsilon^{-d+1-2d/(d-4)-eta}
    double nu0 = 0.0, nu1 = 0.0, nu2 = 0.0;
    double hermite = 0.0;
    std::optional<double> actual_size;
    std::optional<double> ratio;
};

inline BoundReport bound_report(const QuadForm& form, double epsilon, const TheoremConstants& k,
                                const std::optional<SolutionCert>& cert = std::nullopt) {
    const int d = form.dim;
    require(d >= 5, "bounds need d >= 5");
    require(epsilon > 0, "epsilon must be positive");
    require(k.eta > 0, "eta must be positive");
    BoundReport b;
    b.d = d;
    b.size_exponent = 4.0 * d / (d - 4) + k.eta;
    b.size_bound = size_bound_formula(form, k.eta);
    b.norm_bound = std::pow(epsilon, -d + 1 - 2.0 * d / (d - 4) - k.eta);
    b.nu0 = (1 - k.kappa) * (1 - (4 + k.delta) / d);
    b.nu1 = 2 * (1 - k.kappa) / (d + 1 + k.kappa);
    b.nu2 = 1.0 / ((d + 1 + k.kappa) * (0.5 - k.beta));
    b.hermite = hermite_constant(d);
    if (cert) {
        b.actual_size = cert->size;
        b.ratio = cert->size / b.size_bound;
    }
    return b;
}

}  // namespace opplab

#endif
