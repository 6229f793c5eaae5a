#ifndef OPPLAB_SHELL_HPP
#define OPPLAB_SHELL_HPP

#include <algorithm>
#include <array>
#include <functional>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "enumerate.hpp"
#include "forms.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace opplab {

struct ShellSpec {
    QuadForm form;
    double a = -1.0;
    double b = 1.0;
    double r = 1.0;
    double c0 = 0.125;

    bool admissible() const { return std::fabs(a) + std::fabs(b) < c0 * r * r; }
};

struct CountResult {
    std::uint64_t count_lo = 0;
    std::uint64_t count_hi = 0;
    double volume = 0.0;
    double volume_ci = 0.0;
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::string volume_method;
    std::uint64_t work = 0;
};

enum class VolumeMethod { quadrature, montecarlo, automatic };

struct VolumeResult {
    double volume = 0.0;
    double ci = 0.0;
    std::string method;
    std::uint64_t samples = 0;
};

inline constexpr std::uint64_t kDefaultCountBudget = 2000000000ULL;
inline constexpr int kStrata = 64;

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
    double lo, hi;
};

// {y : alpha y^2 + 2 beta y + c < 0} as a list of disjoint intervals.
inline void sublevel(double alpha, double beta, double c, std::vector<Interval>& out) {
    out.clear();
    if (alpha == 0.0) {
        if (beta == 0.0) {
            if (c < 0) out.push_back({-kInf, kInf});
            return;
        }
        double root = -c / (2.0 * beta);
        if (beta > 0) out.push_back({-kInf, root});
        else out.push_back({root, kInf});
        return;
    }
    double disc = beta * beta - alpha * c;
    if (disc <= 0) {
        if (alpha < 0) out.push_back({-kInf, kInf});
        return;
    }
    double sq = std::sqrt(disc);
    double qq = -(beta + (beta >= 0 ? sq : -sq));
    double r1 = qq / alpha;
    double r2 = qq != 0.0 ? c / qq : -beta / alpha;
    if (r1 > r2) std::swap(r1, r2);
    if (alpha > 0) {
        out.push_back({r1, r2});
    } else {
        out.push_back({-kInf, r1});
        out.push_back({r2, kInf});
    }
}

inline void intersect(const std::vector<Interval>& x, const std::vector<Interval>& y, std::vector<Interval>& out) {
    out.clear();
    for (const auto& u : x)
        for (const auto& v : y) {
            double lo = std::max(u.lo, v.lo), hi = std::min(u.hi, v.hi);
            if (lo <= hi) out.push_back({lo, hi});
        }
    std::sort(out.begin(), out.end(), [](const Interval& p, const Interval& q) { return p.lo < q.lo; });
}

// Coordinates are permuted so that index 0 is the line coordinate handled in
// closed form; the remaining ones are enumerated outermost-last.
struct ShellGeometry {
    int d = 0;
    std::vector<int> perm;
    Mat Lp, Qp, Qplus_p;
    Vec xi;
    std::vector<double> bound;  // |y_k| <= bound[k] on the box
    double r = 0, a = 0, b = 0;
    double box_guard = 0, value_guard = 0;
    FinckePohst fp;
    double R2 = 0;
    // exact data in permuted order
    bool exact_values = false;
    IMat Ap;
    std::int64_t scale = 1, shift_den = 1;
    IVec shift_num;
    std::vector<int> slot;        // slot[j] = permuted index of original coordinate j
    std::vector<char> exact_box;  // diagonal form with rational entry on that row
    std::vector<Frac> diag_exact;
    BigRational a_exact, b_exact, r2_exact;
};

inline ShellGeometry make_geometry(const ShellSpec& s) {
    const QuadForm& f = s.form;
    ShellGeometry g;
    g.d = f.dim;
    g.r = s.r;
    g.a = s.a;
    g.b = s.b;
    g.box_guard = kGuardBand * std::max(1.0, s.r);
    g.value_guard = kGuardBand * std::max({1.0, std::fabs(s.a), std::fabs(s.b)});
    const int d = f.dim;
    std::vector<double> ext(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) ext[static_cast<std::size_t>(i)] = s.r * f.sqrt_positive_inverse.row(i).cwiseAbs().sum();
    g.perm.resize(static_cast<std::size_t>(d));
    std::iota(g.perm.begin(), g.perm.end(), 0);
    // widest coordinate innermost, then decreasing extent outward
    std::stable_sort(g.perm.begin(), g.perm.end(), [&](int i, int j) { return ext[static_cast<std::size_t>(i)] > ext[static_cast<std::size_t>(j)]; });
    g.Lp.resize(d, d);
    g.Qp.resize(d, d);
    g.Qplus_p.resize(d, d);
    g.xi.resize(d);
    g.bound.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) {
        int pk = g.perm[static_cast<std::size_t>(k)];
        g.xi(k) = f.shift(pk);
        g.bound[static_cast<std::size_t>(k)] = ext[static_cast<std::size_t>(pk)] * (1 + 1e-12) + 1e-12;
        for (int j = 0; j < d; ++j) {
            g.Lp(j, k) = f.sqrt_positive(j, pk);
            g.Qp(j, k) = f.matrix(g.perm[static_cast<std::size_t>(j)], pk);
            g.Qplus_p(j, k) = f.positive_part(g.perm[static_cast<std::size_t>(j)], pk);
        }
    }
    g.fp = FinckePohst::from_gram(g.Qplus_p);
    g.R2 = d * s.r * s.r * (1 + 1e-9) + 1e-12;
    g.exact_values = f.exact.all_rational && f.exact.shift_rational;
    g.a_exact = BigRational(s.a);
    g.b_exact = BigRational(s.b);
    g.r2_exact = BigRational(s.r) * BigRational(s.r);
    g.shift_den = f.exact.shift_rational ? f.exact.shift_den : 1;
    g.shift_num = IVec::Zero(d);
    g.slot.assign(static_cast<std::size_t>(d), 0);
    for (int k = 0; k < d; ++k) {
        g.slot[static_cast<std::size_t>(g.perm[static_cast<std::size_t>(k)])] = k;
        if (f.exact.shift_rational) g.shift_num(k) = f.exact.shift_num(g.perm[static_cast<std::size_t>(k)]);
    }
    if (g.exact_values) {
        g.scale = f.exact.scale;
        g.Ap.resize(d, d);
        for (int k = 0; k < d; ++k)
            for (int j = 0; j < d; ++j) g.Ap(j, k) = f.exact.integer(g.perm[static_cast<std::size_t>(j)], g.perm[static_cast<std::size_t>(k)]);
    }
    // Row j of L_Q is tied to coordinate j only for diagonal forms.
    g.exact_box.assign(static_cast<std::size_t>(d), 0);
    g.diag_exact.assign(static_cast<std::size_t>(d), Frac{0, 1});
    if (f.diagonal && f.exact.shift_rational) {
        for (int j = 0; j < d; ++j) {
            const auto& e = f.exact.entries[static_cast<std::size_t>(j * d + j)];
            if (e) {
                g.exact_box[static_cast<std::size_t>(j)] = 1;
                g.diag_exact[static_cast<std::size_t>(j)] = *e;
            }
        }
    }
    return g;
}

enum class PointStatus { out, in, ambiguous };

// y: permuted real coordinates (m + xi), m: permuted integers.
inline PointStatus classify_point(const ShellGeometry& g, const double* y, const std::int64_t* m) {
    const int d = g.d;
    bool amb = false;
    bool zero = true;
    for (int k = 0; k < d; ++k) zero = zero && y[k] == 0.0;
    for (int j = 0; j < d && !zero; ++j) {
        double v = 0.0;
        for (int k = 0; k < d; ++k) v += g.Lp(j, k) * y[k];
        double av = std::fabs(v);
        if (av <= g.r - g.box_guard) continue;
        if (av > g.r + g.box_guard) return PointStatus::out;
        // row j of L_Q acts on original coordinate j: find its permuted slot
        if (g.exact_box[static_cast<std::size_t>(j)]) {
            int slot = g.slot[static_cast<std::size_t>(j)];
            const Frac& q = g.diag_exact[static_cast<std::size_t>(j)];
            BigRational yy = BigRational(BigInt(m[slot]) * BigInt(g.shift_den) + BigInt(g.shift_num(slot)), BigInt(g.shift_den));
            BigRational lhs = abs(q.big()) * yy * yy;
            if (lhs > g.r2_exact) return PointStatus::out;
            continue;
        }
        amb = true;
    }
    double val = 0.0;
    for (int j = 0; j < d; ++j) {
        double row = 0.0;
        for (int k = 0; k < d; ++k) row += g.Qp(j, k) * y[k];
        val += y[j] * row;
    }
    bool near_a = std::fabs(val - g.a) <= g.value_guard;
    bool near_b = std::fabs(val - g.b) <= g.value_guard;
    if (!near_a && !near_b) {
        if (!(val > g.a && val < g.b)) return PointStatus::out;
    } else if (g.exact_values) {
        BigInt n = 0;
        std::vector<BigInt> z(static_cast<std::size_t>(d));
        for (int k = 0; k < d; ++k) z[static_cast<std::size_t>(k)] = BigInt(m[k]) * BigInt(g.shift_den) + BigInt(g.shift_num(k));
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) n += z[static_cast<std::size_t>(j)] * BigInt(g.Ap(j, k)) * z[static_cast<std::size_t>(k)];
        BigRational exact_val(n, BigInt(g.scale) * BigInt(g.shift_den) * BigInt(g.shift_den));
        if (!(exact_val > g.a_exact && exact_val < g.b_exact)) return PointStatus::out;
    } else {
        amb = true;
    }
    return amb ? PointStatus::ambiguous : PointStatus::in;
}


// Counts the integer points on one line (all coordinates but slot 0 fixed).
struct LineCounter {
    const ShellGeometry& g;
    std::vector<Interval> box, below_b, above_a, tmp, cells;
    std::vector<std::int64_t> cand;
    std::vector<double> yv;
    std::vector<std::int64_t> mv;

    explicit LineCounter(const ShellGeometry& geo)
        : g(geo), yv(static_cast<std::size_t>(geo.d)), mv(static_cast<std::size_t>(geo.d)) {}

    // Real solution set along the line; returns false if the line misses the box.
    // `all_boundary` is set when a box row is tied independently of y0.
    bool line_cells(const double* y, bool& all_boundary, double& vertex, bool& near_tangent) {
        const int d = g.d;
        all_boundary = false;
        double lo = -kInf, hi = kInf;
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 1; k < d; ++k) s += g.Lp(j, k) * y[k];
            double c = g.Lp(j, 0);
            if (c != 0.0) {
                double u = (-g.r - s) / c, v = (g.r - s) / c;
                if (u > v) std::swap(u, v);
                lo = std::max(lo, u);
                hi = std::min(hi, v);
            } else {
                if (std::fabs(s) > g.r + g.box_guard) return false;
                if (std::fabs(s) >= g.r - g.box_guard) all_boundary = true;
            }
        }
        if (lo > hi + 1e-7) return false;
        if (lo > hi) std::swap(lo, hi);
        double alpha = g.Qp(0, 0), beta = 0.0, gamma = 0.0;
        for (int k = 1; k < d; ++k) beta += g.Qp(0, k) * y[k];
        for (int j = 1; j < d; ++j) {
            double row = 0.0;
            for (int k = 1; k < d; ++k) row += g.Qp(j, k) * y[k];
            gamma += y[j] * row;
        }
        sublevel(alpha, beta, gamma - g.b, below_b);
        sublevel(-alpha, -beta, g.a - gamma, above_a);
        intersect(below_b, above_a, tmp);
        box.assign(1, Interval{lo, hi});
        intersect(tmp, box, cells);
        near_tangent = false;
        vertex = 0.0;
        if (alpha != 0.0) {
            vertex = -beta / alpha;
            double fv = gamma - beta * beta / alpha;
            near_tangent = std::fabs(fv - g.a) <= 1e-6 * std::max(1.0, std::fabs(g.a)) ||
                           std::fabs(fv - g.b) <= 1e-6 * std::max(1.0, std::fabs(g.b));
            near_tangent = near_tangent && vertex >= lo - 1 && vertex <= hi + 1;
        }
        if (all_boundary) {
            cells.assign(1, Interval{lo, hi});
        }
        return true;
    }

    // Adds (in, ambiguous) counts for the line through y[1..] (permuted).
    void count(const double* y, const std::int64_t* m, std::uint64_t& in, std::uint64_t& amb, std::uint64_t& work) {
        bool all_boundary = false, tangent = false;
        double vertex = 0.0;
        ++work;
        if (!line_cells(y, all_boundary, vertex, tangent)) return;
        const double xi0 = g.xi(0);
        cand.clear();
        std::vector<std::pair<std::int64_t, std::int64_t>> interior;
        for (const auto& c : cells) {
            std::int64_t mlo = static_cast<std::int64_t>(std::floor(c.lo - xi0));
            std::int64_t mhi = static_cast<std::int64_t>(std::ceil(c.hi - xi0));
            if (all_boundary || mhi - mlo < 5) {
                for (std::int64_t t = mlo; t <= mhi; ++t) cand.push_back(t);
            } else {
                interior.emplace_back(mlo + 2, mhi - 2);
                for (std::int64_t t = mlo; t < mlo + 2; ++t) cand.push_back(t);
                for (std::int64_t t = mhi - 1; t <= mhi; ++t) cand.push_back(t);
            }
        }
        if (tangent) {
            std::int64_t v0 = static_cast<std::int64_t>(std::floor(vertex - xi0));
            for (std::int64_t t = v0 - 1; t <= v0 + 2; ++t) cand.push_back(t);
        }
        for (const auto& iv : interior) in += static_cast<std::uint64_t>(iv.second - iv.first + 1);
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
        const int d = g.d;
        for (int k = 1; k < d; ++k) {
            yv[static_cast<std::size_t>(k)] = y[k];
            mv[static_cast<std::size_t>(k)] = m[k];
        }
        for (std::int64_t t : cand) {
            bool covered = false;
            for (const auto& iv : interior) covered = covered || (t >= iv.first && t <= iv.second);
            if (covered) continue;
            ++work;
            mv[0] = t;
            yv[0] = static_cast<double>(t) + xi0;
            PointStatus st = classify_point(g, yv.data(), mv.data());
            if (st == PointStatus::in) ++in;
            else if (st == PointStatus::ambiguous) ++amb;
        }
    }

    // Lebesgue measure of the solution set on the line.
    double length(const double* y) {
        bool all_boundary = false, tangent = false;
        double vertex = 0.0;
        if (!line_cells(y, all_boundary, vertex, tangent)) return 0.0;
        double total = 0.0;
        for (const auto& c : cells) total += c.hi - c.lo;
        return total;
    }
};

// Integer range for permuted slot k given the partial ellipsoid data.
struct OuterRange {
    std::int64_t lo, hi;
};

inline OuterRange slot_range(const ShellGeometry& g, int k, double center, double rem) {
    double w = rem > 0 ? std::sqrt(rem / g.fp.qd[static_cast<std::size_t>(k)]) : 0.0;
    double B = g.bound[static_cast<std::size_t>(k)];
    double lo = std::max(center - w, -B) - g.xi(k);
    double hi = std::min(center + w, B) - g.xi(k);
    if (rem < 0) return {1, 0};
    return {static_cast<std::int64_t>(std::ceil(lo - 1e-9)), static_cast<std::int64_t>(std::floor(hi + 1e-9))};
}

struct CountTotals {
    std::uint64_t in = 0, amb = 0, work = 0;
};

// Enumerates slots d-1..1 (slot d-1 fixed to `top`) and counts each line.
inline CountTotals count_task(const ShellGeometry& g, std::int64_t top, std::atomic<std::uint64_t>& work_total,
                              std::uint64_t budget) {
    const int d = g.d;
    CountTotals tot;
    LineCounter lc(g);
    std::vector<double> y(static_cast<std::size_t>(d), 0.0), partial(static_cast<std::size_t>(d + 1), 0.0);
    std::vector<std::int64_t> m(static_cast<std::size_t>(d), 0);
    std::uint64_t flushed = 0;
    auto flush = [&] {
        std::uint64_t now = work_total.fetch_add(tot.work - flushed) + (tot.work - flushed);
        flushed = tot.work;
        if (now > budget) throw BoxTooLarge("pruned candidate count exceeds budget " + std::to_string(budget));
    };
    if (d == 1) {
        lc.count(y.data(), m.data(), tot.in, tot.amb, tot.work);
        flush();
        return tot;
    }
    // recursive descent over slots k = d-1 .. 1
    auto descend = [&](auto&& self, int k) -> void {
        std::size_t ks = static_cast<std::size_t>(k);
        double c = 0.0;
        for (int j = k + 1; j < d; ++j) c -= g.fp.mu(k, j) * y[static_cast<std::size_t>(j)];
        double rem = g.R2 - partial[ks + 1];
        OuterRange rg = slot_range(g, k, c, rem);
        if (k == d - 1) {
            if (top < rg.lo || top > rg.hi) return;
            rg = {top, top};
        }
        for (std::int64_t v = rg.lo; v <= rg.hi; ++v) {
            m[ks] = v;
            y[ks] = static_cast<double>(v) + g.xi(k);
            double diff = y[ks] - c;
            partial[ks] = partial[ks + 1] + g.fp.qd[ks] * diff * diff;
            if (k == 1) {
                lc.count(y.data(), m.data(), tot.in, tot.amb, tot.work);
                if (tot.work - flushed > 65536) flush();
            } else {
                self(self, k - 1);
            }
        }
    };
    descend(descend, d - 1);
    flush();
    return tot;
}

}  // namespace detail

// Counts m in Z^d with ||L_Q(m+xi)||_inf <= r and a < Q[m+xi] < b.
inline CountResult count_shell(const ShellSpec& s, std::uint64_t budget = kDefaultCountBudget, unsigned threads = 0) {
    require(s.r >= 0, "r must be nonnegative");
    require(s.a < s.b, "a must be below b");
    detail::ShellGeometry g = detail::make_geometry(s);
    const int d = g.d;
    std::int64_t top_lo = 0, top_hi = 0;
    if (d > 1) {
        auto rg = detail::slot_range(g, d - 1, 0.0, g.R2);
        top_lo = rg.lo;
        top_hi = rg.hi;
    }
    std::int64_t ntasks = top_hi - top_lo + 1;
    std::vector<detail::CountTotals> parts(static_cast<std::size_t>(std::max<std::int64_t>(ntasks, 0)));
    std::atomic<std::uint64_t> work{0};
    parallel_for(ntasks, threads, [&](std::int64_t i) {
        parts[static_cast<std::size_t>(i)] = detail::count_task(g, top_lo + i, work, budget);
    });
    CountResult res;
    for (const auto& p : parts) {
        res.count_lo += p.in;
        res.count_hi += p.in + p.amb;
        res.work += p.work;
    }
    return res;
}

// ------------------------------------------------------------------ volume

namespace detail {

// Line-conditional Monte Carlo: outer coordinates uniform on their bounding
// box, the line coordinate integrated exactly.
inline VolumeResult volume_montecarlo(const ShellSpec& s, std::uint64_t budget, std::uint64_t seed, unsigned threads) {
    VolumeResult out;
    out.method = "montecarlo";
    if (s.r == 0.0) return out;
    ShellGeometry g = make_geometry(s);
    const int d = g.d;
    if (d == 1) {
        LineCounter lc(g);
        double y = 0.0;
        out.volume = lc.length(&y);
        out.method = "montecarlo(exact-line)";
        return out;
    }
    double outer_vol = 1.0;
    for (int k = 1; k < d; ++k) outer_vol *= 2.0 * g.bound[static_cast<std::size_t>(k)];
    std::uint64_t per = std::max<std::uint64_t>(2, budget / kStrata);
    std::vector<double> mean(kStrata), var(kStrata);
    parallel_for(kStrata, threads, [&](std::int64_t st) {
        CounterRng rng(seed, static_cast<std::uint64_t>(st));
        LineCounter lc(g);
        std::vector<double> y(static_cast<std::size_t>(d), 0.0);
        const double Bt = g.bound[static_cast<std::size_t>(d - 1)];
        const double w = 2.0 * Bt / kStrata;
        double m1 = 0.0, m2 = 0.0;  // Welford
        for (std::uint64_t i = 0; i < per; ++i) {
            for (int k = 1; k < d - 1; ++k) {
                double B = g.bound[static_cast<std::size_t>(k)];
                y[static_cast<std::size_t>(k)] = -B + 2.0 * B * rng.uniform();
            }
            y[static_cast<std::size_t>(d - 1)] = -Bt + w * (static_cast<double>(st) + rng.uniform());
            double len = lc.length(y.data());
            double delta = len - m1;
            m1 += delta / static_cast<double>(i + 1);
            m2 += delta * (len - m1);
        }
        mean[static_cast<std::size_t>(st)] = m1;
        var[static_cast<std::size_t>(st)] = m2 / static_cast<double>(per - 1);
    });
    double vsum = 0.0, varsum = 0.0;
    for (int st = 0; st < kStrata; ++st) {
        vsum += mean[static_cast<std::size_t>(st)];
        varsum += var[static_cast<std::size_t>(st)] / static_cast<double>(per);
    }
    double cell = outer_vol / kStrata;
    out.volume = cell * vsum;
    out.ci = 1.96 * cell * std::sqrt(varsum);
    out.samples = per * kStrata;
    return out;
}

// Normalized cube-ball volumes: G(p, rho) = vol{y in [-1,1]^p : |y| <= rho},
// g(p, rho) = dG/drho.
inline double cube_ball_G(int p, double rho);
inline double cube_ball_g(int p, double rho);

inline double gk_integrate(const std::function<double(double)>& f, double lo, double hi, const std::vector<double>& breaks, double tol,
                           unsigned depth = 12) {
    std::vector<double> pts{lo};
    for (double b : breaks)
        if (b > lo && b < hi) pts.push_back(b);
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i + 1] <= pts[i]) continue;
        total += boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, pts[i], pts[i + 1], depth, tol);
    }
    return total;
}

inline double cube_ball_G(int p, double rho) {
    if (rho <= 0) return 0.0;
    if (p == 0) return 1.0;
    if (p == 1) return 2.0 * std::min(rho, 1.0);
    if (rho * rho >= p) return std::pow(2.0, p);
    if (p == 2) {
        if (rho <= 1) return M_PI * rho * rho;
        return 4.0 * (std::sqrt(rho * rho - 1.0) + rho * rho * (M_PI / 4.0 - std::acos(1.0 / rho)));
    }
    double m = std::min(1.0, rho);
    std::vector<double> br;
    for (int k = 1; k < p; ++k)
        if (rho * rho > k) br.push_back(std::sqrt(rho * rho - k));
    std::vector<double> breaks;
    for (double b : br) { breaks.push_back(b); breaks.push_back(-b); }
    auto f = [&](double y) { return cube_ball_G(p - 1, std::sqrt(std::max(0.0, rho * rho - y * y))); };
    return gk_integrate(f, -m, m, breaks, 1e-11);
}

inline double cube_ball_g(int p, double rho) {
    if (rho <= 0) return 0.0;
    if (p == 1) return rho < 1.0 ? 2.0 : 0.0;
    if (rho * rho >= p) return 0.0;
    if (p == 2) {
        if (rho <= 1) return 2.0 * M_PI * rho;
        return 8.0 * rho * (M_PI / 4.0 - std::acos(1.0 / rho));
    }
    if (p == 3) {
        // slices y = const: full circles while rho^2 - y^2 <= 1, clipped arcs up to 2
        const double c = rho * rho;
        const double ymax = std::min(1.0, rho);
        if (c <= 1) return 4.0 * M_PI * c;
        const double k = c - 1;
        const double y2 = std::min(ymax, std::sqrt(k));
        const double y1 = c > 2 ? std::sqrt(c - 2) : 0.0;
        double full = 2.0 * std::max(0.0, ymax - y2);
        auto I = [&](double y) {
            if (y >= std::sqrt(k)) return (rho - 1.0) * M_PI / 2.0;
            double w = std::sqrt(std::max(0.0, k - y * y));
            double last = w > 0 ? std::atan(y / (rho * w)) : (y > 0 ? M_PI / 2 : 0.0);
            return y * std::atan(w) - std::asin(std::min(1.0, y / std::sqrt(k))) + rho * last;
        };
        double arcs = y2 > y1 ? 2.0 * (M_PI / 4.0 * (y2 - y1) - (I(y2) - I(y1))) : 0.0;
        return 2.0 * M_PI * rho * full + 8.0 * rho * arcs;
    }
    double m = std::min(1.0, rho);
    std::vector<double> breaks;
    for (int k = 1; k < p; ++k)
        if (rho * rho > k) { breaks.push_back(std::sqrt(rho * rho - k)); breaks.push_back(-std::sqrt(rho * rho - k)); }
    auto f = [&](double y) {
        double s = std::sqrt(std::max(0.0, rho * rho - y * y));
        if (s == 0.0) return 0.0;
        return cube_ball_g(p - 1, s) * rho / s;
    };
    return gk_integrate(f, -m, m, breaks, 1e-11);
}

// Volume of {y in [-1,1]^d : a' < |y+|^2 - |y-|^2 < b'} for signature (p,q),
// integrating the density of U = |y+|^2 - |y-|^2 over (a', b').
inline double signature_cube_volume(int p, int q, double a, double b) {
    if (p == 0) return signature_cube_volume(q, 0, -b, -a);
    auto sq = [](double x) { return std::sqrt(std::max(0.0, x)); };
    if (q == 0) return cube_ball_G(p, sq(b)) - cube_ball_G(p, sq(a));
    if (p + q <= 3) {
        // difference of cube-ball volumes; the density below is singular for p = 1
        std::vector<double> breaks;
        for (int k = 1; k <= std::max(p, q); ++k) {
            breaks.push_back(std::sqrt(static_cast<double>(k)));
            if (k - b > 0) breaks.push_back(std::sqrt(k - b));
            if (k - a > 0) breaks.push_back(std::sqrt(k - a));
        }
        if (-a > 0) breaks.push_back(std::sqrt(-a));
        if (-b > 0) breaks.push_back(std::sqrt(-b));
        auto f = [&](double s) {
            double gq = cube_ball_g(q, s);
            if (gq == 0.0) return 0.0;
            return gq * (cube_ball_G(p, sq(s * s + b)) - cube_ball_G(p, sq(s * s + a)));
        };
        return gk_integrate(f, 0.0, std::sqrt(static_cast<double>(q)), breaks, 1e-9);
    }
    if (p == 1) return signature_cube_volume(q, p, -b, -a);
    a = std::max(a, -static_cast<double>(q));
    b = std::min(b, static_cast<double>(p));
    if (a >= b) return 0.0;
    auto density = [&](double U) {
        std::vector<double> breaks;
        for (int k = 1; k <= std::max(p, q); ++k) {
            breaks.push_back(std::sqrt(static_cast<double>(k)));
            if (k - U > 0) breaks.push_back(std::sqrt(k - U));
        }
        double lo = U < 0 ? std::sqrt(-U) : 0.0;
        auto f = [&](double s) {
            double rho = std::sqrt(std::max(0.0, s * s + U));
            if (rho == 0.0) return 0.0;
            double gq = cube_ball_g(q, s);
            if (gq == 0.0) return 0.0;
            return gq * cube_ball_g(p, rho) / (2.0 * rho);
        };
        if (lo >= std::sqrt(static_cast<double>(q))) return 0.0;
        return gk_integrate(f, lo, std::sqrt(static_cast<double>(q)), breaks, 1e-11, 10);
    };
    std::vector<double> breaks;
    for (int k = -q; k <= p; ++k) breaks.push_back(k);
    return gk_integrate(density, a, b, breaks, 1e-9, 10);
}

// Nested adaptive quadrature of the exact line length (d <= 3).
inline double volume_nested(const ShellSpec& s) {
    ShellGeometry g = make_geometry(s);
    const int d = g.d;
    LineCounter lc(g);
    std::vector<double> y(static_cast<std::size_t>(d), 0.0);
    if (d == 1) return lc.length(y.data());
    if (d == 2) {
        double B = g.bound[1];
        auto f = [&](double u) { y[1] = u; return lc.length(y.data()); };
        return gk_integrate(f, -B, B, {}, 1e-9);
    }
    double B1 = g.bound[1], B2 = g.bound[2];
    auto outer = [&](double v) {
        y[2] = v;
        auto inner = [&](double u) { y[1] = u; return lc.length(y.data()); };
        return gk_integrate(inner, -B1, B1, {}, 1e-8, 8);
    };
    return gk_integrate(outer, -B2, B2, {}, 1e-7, 8);
}

}  // namespace detail

// Volume of {x : ||L_Q x||_inf <= r, a < Q[x] < b}.
inline VolumeResult shell_volume(const ShellSpec& s, VolumeMethod method = VolumeMethod::automatic,
                                 std::uint64_t budget = 10000000, std::uint64_t seed = 1, unsigned threads = 0) {
    require(s.a < s.b, "a must be below b");
    require(s.r >= 0, "r must be nonnegative");
    const QuadForm& f = s.form;
    bool reducible = f.diagonal || f.dim <= 3;
    if (method == VolumeMethod::automatic) method = reducible ? VolumeMethod::quadrature : VolumeMethod::montecarlo;
    VolumeResult out;
    if (s.r == 0.0) {
        out.method = method == VolumeMethod::quadrature ? "quadrature" : "montecarlo";
        return out;
    }
    if (method == VolumeMethod::montecarlo) return detail::volume_montecarlo(s, budget, seed, threads);
    if (!reducible) throw MethodUnavailable("quadrature needs a diagonal form or d <= 3");
    out.method = "quadrature";
    if (f.diagonal) {
        double r2 = s.r * s.r;
        double unit = detail::signature_cube_volume(f.p, f.q_neg, s.a / r2, s.b / r2);
        out.volume = std::pow(s.r, f.dim) / std::sqrt(f.det_abs) * unit;
    } else {
        out.volume = detail::volume_nested(s);
    }
    return out;
}

// Relative remainder from count_lo and the volume.
inline CountResult relative_remainder(const ShellSpec& s, VolumeMethod method = VolumeMethod::automatic,
                                      std::uint64_t volume_budget = 10000000, std::uint64_t seed = 1,
                                      std::uint64_t count_budget = kDefaultCountBudget, unsigned threads = 0) {
    VolumeResult v = shell_volume(s, method, volume_budget, seed, threads);
    if (!(v.volume > 0.0)) throw ZeroVolume("shell volume is zero");
    CountResult c = count_shell(s, count_budget, threads);
    c.volume = v.volume;
    c.volume_ci = v.ci;
    c.volume_method = v.method;
    c.delta = std::fabs((static_cast<double>(c.count_lo) - v.volume) / v.volume);
    return c;
}

// ---------------------------------------------------------- light cone

enum class LambdaMethod { cone_param, finite_difference };
enum class Region { box, ball };

inline double unit_sphere_area(int k) {
    // surface measure of S^{k-1} in R^k
    return 2.0 * std::pow(M_PI, k / 2.0) / std::tgamma(k / 2.0);
}

inline double lambda_coefficient(const QuadForm& f, LambdaMethod method, Region region = Region::box,
                                 std::uint64_t budget = 4000000, std::uint64_t seed = 1, unsigned threads = 0) {
    if (f.dim < 3) throw DivergentIntegral("light-cone coefficient diverges for d < 3");
    if (!f.indefinite()) return 0.0;
    const int p = f.p, q = f.q_neg, d = f.dim;
    if (region == Region::ball) {
        if (method != LambdaMethod::cone_param) throw MethodUnavailable("ball region supported by cone-param only");
        double c = f.q_max;
        if (!f.diagonal || f.q0 < c * (1 - 1e-12)) throw MethodUnavailable("ball region needs |eigenvalues| all equal");
        // cone |y+| = |y-| = s inside |y| <= sqrt(c)
        return std::pow(c, -d / 2.0) * unit_sphere_area(p) * unit_sphere_area(q) * std::pow(c / 2.0, (d - 2) / 2.0) /
               (2.0 * (d - 2));
    }
    if (method == LambdaMethod::cone_param) {
        if (!f.diagonal) throw MethodUnavailable("cone-param needs a diagonal form");
        double top = std::sqrt(static_cast<double>(std::min(p, q)));
        std::vector<double> breaks;
        for (int k = 1; k <= std::max(p, q); ++k) breaks.push_back(std::sqrt(static_cast<double>(k)));
        auto integrand = [&](double s) {
            if (s <= 0) return 0.0;
            return detail::cube_ball_g(p, s) * detail::cube_ball_g(q, s) / (2.0 * s);
        };
        return detail::gk_integrate(integrand, 0.0, top, breaks, 1e-10) / std::sqrt(f.det_abs);
    }
    // finite difference on the unit box, Richardson in h
    auto slab = [&](double h) {
        ShellSpec s{f, -h, h, 1.0};
        VolumeMethod vm = (f.diagonal || d <= 3) ? VolumeMethod::quadrature : VolumeMethod::montecarlo;
        return shell_volume(s, vm, budget, seed, threads).volume / (2.0 * h);
    };
    double h = 0.02;
    double f1 = slab(h), f2 = slab(h / 2);
    return 2.0 * f2 - f1;
}

}  // namespace opplab

#endif
