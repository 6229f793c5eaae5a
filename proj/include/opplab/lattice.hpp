#ifndef OPPLAB_LATTICE_HPP
#define OPPLAB_LATTICE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"
#include "forms.hpp"
#include "parallel.hpp"

namespace opplab {

inline constexpr std::uint64_t kDefaultEnumBudget = 50000000;

// Columns of `generators` span the lattice.
struct LatticeBasis {
    Mat generators;
    Mat gram;
    double det_lattice = 0.0;

    int rank() const { return static_cast<int>(generators.cols()); }
    int ambient() const { return static_cast<int>(generators.rows()); }

    static LatticeBasis from_generators(const Mat& g);
};

namespace detail {

// Exact rational generators when every entry reconstructs with a small denominator.
inline std::optional<std::vector<std::vector<BigRational>>> rational_columns(const Mat& g) {
    std::vector<std::vector<BigRational>> cols(static_cast<std::size_t>(g.cols()), std::vector<BigRational>(static_cast<std::size_t>(g.rows())));
    for (int c = 0; c < g.cols(); ++c)
        for (int r = 0; r < g.rows(); ++r) {
            auto fr = reconstruct_rational(g(r, c), 1000000);
            if (!fr) return std::nullopt;
            cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = BigRational(fr->num, fr->den);
        }
    return cols;
}

// det of the Gram matrix of rational columns by Gaussian elimination.
inline BigRational exact_gram_det(const std::vector<std::vector<BigRational>>& cols) {
    const std::size_t k = cols.size();
    std::vector<std::vector<BigRational>> G(k, std::vector<BigRational>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            for (std::size_t t = 0; t < cols[i].size(); ++t) G[i][j] += cols[i][t] * cols[j][t];
    BigRational det = 1;
    for (std::size_t c = 0; c < k; ++c) {
        std::size_t p = c;
        while (p < k && G[p][c] == 0) ++p;
        if (p == k) return 0;
        if (p != c) {
            std::swap(G[p], G[c]);
            det = -det;
        }
        det *= G[c][c];
        for (std::size_t r = c + 1; r < k; ++r) {
            BigRational f = G[r][c] / G[c][c];
            for (std::size_t t = c; t < k; ++t) G[r][t] -= f * G[c][t];
        }
    }
    return det;
}

}  // namespace detail

inline LatticeBasis LatticeBasis::from_generators(const Mat& g) {
    require(g.cols() >= 1 && g.rows() >= g.cols(), "need 1 <= rank <= ambient dimension");
    require(g.allFinite(), "generators must be finite");
    LatticeBasis b;
    b.generators = g;
    b.gram = g.transpose() * g;
    // modified Gram-Schmidt in long double; relative projection norms decide independence
    const int k = static_cast<int>(g.cols()), n = static_cast<int>(g.rows());
    std::vector<std::vector<long double>> q(static_cast<std::size_t>(k), std::vector<long double>(static_cast<std::size_t>(n)));
    long double logdet = 0, min_rel = 1;
    for (int c = 0; c < k; ++c) {
        auto& v = q[static_cast<std::size_t>(c)];
        long double len = 0;
        for (int r = 0; r < n; ++r) {
            v[static_cast<std::size_t>(r)] = g(r, c);
            len += v[static_cast<std::size_t>(r)] * v[static_cast<std::size_t>(r)];
        }
        for (int p = 0; p < c; ++p) {
            const auto& w = q[static_cast<std::size_t>(p)];
            long double d = 0;
            for (int r = 0; r < n; ++r) d += v[static_cast<std::size_t>(r)] * w[static_cast<std::size_t>(r)];
            for (int r = 0; r < n; ++r) v[static_cast<std::size_t>(r)] -= d * w[static_cast<std::size_t>(r)];
        }
        long double nr = 0;
        for (int r = 0; r < n; ++r) nr += v[static_cast<std::size_t>(r)] * v[static_cast<std::size_t>(r)];
        nr = std::sqrt(nr);
        len = std::sqrt(len);
        if (!(len > 0)) throw InvalidArgument("generators are linearly dependent");
        min_rel = std::min(min_rel, nr / len);
        if (nr > 0) {
            logdet += std::log(nr);
            for (int r = 0; r < n; ++r) v[static_cast<std::size_t>(r)] /= nr;
        }
    }
    if (min_rel > 1e-8L) {
        b.det_lattice = static_cast<double>(std::exp(logdet));
        return b;
    }
    // ill-conditioned in floating point: decide exactly for rational input
    auto rc = detail::rational_columns(g);
    if (rc) {
        BigRational d = detail::exact_gram_det(*rc);
        if (d > 0) {
            b.det_lattice = std::sqrt(static_cast<double>(d));
            return b;
        }
    } else if (min_rel > 1e-15L) {
        b.det_lattice = static_cast<double>(std::exp(logdet));
        return b;
    }
    throw InvalidArgument("generators are linearly dependent");
}

struct LllResult {
    LatticeBasis basis;
    IMat transform;  // reduced generators = original generators * transform
    std::string path = "float";
};

struct MinimaProfile {
    std::vector<double> minima;
    std::vector<IVec> witnesses;  // coordinates relative to the input generators
    std::uint64_t nodes = 0;
};

enum class AlphaMode { minima_surrogate, exact_small };

inline std::string to_string(AlphaMode m) { return m == AlphaMode::exact_small ? "exact-small" : "minima-surrogate"; }

struct AlphaProfile {
    std::vector<double> alpha;  // alpha[0] = 1
    double alpha_max = 1.0;
    int argmax = 0;
    AlphaMode mode = AlphaMode::minima_surrogate;
};

inline double unit_ball_volume(int n) { return std::pow(M_PI, 0.5 * n) / boost::math::tgamma(0.5 * n + 1.0); }
inline double minkowski_lower(int n) { return std::pow(2.0, n) / (boost::math::tgamma(n + 1.0) * unit_ball_volume(n)); }
inline double minkowski_upper(int n) { return std::pow(2.0, n) / unit_ball_volume(n); }

namespace detail {

inline std::int64_t checked_add_mul(std::int64_t a, std::int64_t q, std::int64_t b) {
    std::int64_t prod = 0, out = 0;
    if (__builtin_mul_overflow(q, b, &prod) || __builtin_sub_overflow(a, prod, &out))
        throw NumericalBreakdown("coefficient overflow during reduction");
    return out;
}

inline std::int64_t round_coeff(long double x) {
    if (!(std::fabs(x) < 4e18L)) throw NumericalBreakdown("size-reduction coefficient out of range");
    return static_cast<std::int64_t>(std::llround(x));
}

inline std::int64_t round_coeff(const BigRational& x) {
    BigRational h = x + BigRational(1, 2);
    BigInt n = numerator(h), d = denominator(h);
    BigInt q = n / d;
    if (n < 0 && q * d != n) q -= 1;
    if (abs(q) > BigInt(4000000000000000000LL)) throw NumericalBreakdown("size-reduction coefficient out of range");
    return static_cast<std::int64_t>(q);
}

template <class T>
T abs_value(const T& x) { return x < T(0) ? T(-x) : x; }

// LLL on explicit column vectors with coefficient tracking. Swaps between
// positions boundary-1 and boundary are suppressed, so the span of the
// first `boundary` vectors is preserved.
template <class T>
struct Lll {
    int n = 0, k = 0;
    std::vector<std::vector<T>> b, bstar, mu;
    std::vector<T> bs;
    std::vector<std::vector<std::int64_t>> u;  // u[i] = coordinates of b_i in the input basis

    Lll(std::vector<std::vector<T>> cols, std::vector<std::vector<std::int64_t>> coords)
        : n(cols.empty() ? 0 : static_cast<int>(cols[0].size())), k(static_cast<int>(cols.size())), b(std::move(cols)),
          u(std::move(coords)) {
        bstar.assign(static_cast<std::size_t>(k), std::vector<T>(static_cast<std::size_t>(n)));
        mu.assign(static_cast<std::size_t>(k), std::vector<T>(static_cast<std::size_t>(k)));
        bs.assign(static_cast<std::size_t>(k), T(0));
    }

    static T dot(const std::vector<T>& x, const std::vector<T>& y) {
        T s(0);
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
        return s;
    }

    void check(int i) const {
        if constexpr (std::is_floating_point_v<T>) {
            T len = dot(b[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
            if (!(bs[static_cast<std::size_t>(i)] > 1e-400L) || !(bs[static_cast<std::size_t>(i)] > 1e-34L * len))
                throw NumericalBreakdown("Gram-Schmidt norm collapsed");
        } else {
            if (!(bs[static_cast<std::size_t>(i)] > T(0))) throw NumericalBreakdown("dependent vectors in exact reduction");
        }
    }

    void gso(int from) {
        for (int i = from; i < k; ++i) {
            auto& bi = bstar[static_cast<std::size_t>(i)];
            bi = b[static_cast<std::size_t>(i)];
            for (int j = 0; j < i; ++j) {
                T m = dot(b[static_cast<std::size_t>(i)], bstar[static_cast<std::size_t>(j)]) / bs[static_cast<std::size_t>(j)];
                mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m;
                const auto& bj = bstar[static_cast<std::size_t>(j)];
                for (int t = 0; t < n; ++t) bi[static_cast<std::size_t>(t)] -= m * bj[static_cast<std::size_t>(t)];
            }
            bs[static_cast<std::size_t>(i)] = dot(bi, bi);
            check(i);
        }
    }

    void size_reduce(int i, int j) {
        T m = mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        if (!(abs_value(m) > T(51) / T(100))) return;
        std::int64_t q = round_coeff(m);
        T tq(q);
        auto& bi = b[static_cast<std::size_t>(i)];
        const auto& bj = b[static_cast<std::size_t>(j)];
        for (int t = 0; t < n; ++t) bi[static_cast<std::size_t>(t)] -= tq * bj[static_cast<std::size_t>(t)];
        auto& ui = u[static_cast<std::size_t>(i)];
        const auto& uj = u[static_cast<std::size_t>(j)];
        for (std::size_t t = 0; t < ui.size(); ++t) ui[t] = checked_add_mul(ui[t], q, uj[t]);
        for (int l = 0; l < j; ++l)
            mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] -= tq * mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
        mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= tq;
    }

    void run(double delta, int boundary = -1) {
        if (k == 0) return;
        gso(0);
        T dl(0);
        if constexpr (std::is_floating_point_v<T>) {
            dl = static_cast<T>(delta);
        } else {
            auto fr = best_rational(delta, 1000000);
            dl = T(fr.num) / T(fr.den);
        }
        int i = 1;
        std::uint64_t steps = 0;
        while (i < k) {
            if (++steps > 50000000ULL) throw NumericalBreakdown("reduction did not terminate");
            for (int j = i - 1; j >= 0; --j) size_reduce(i, j);
            if (i == boundary) {
                ++i;
                continue;
            }
            T m = mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(i - 1)];
            if (bs[static_cast<std::size_t>(i)] < (dl - m * m) * bs[static_cast<std::size_t>(i - 1)]) {
                std::swap(b[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i - 1)]);
                std::swap(u[static_cast<std::size_t>(i)], u[static_cast<std::size_t>(i - 1)]);
                gso(i - 1);
                i = std::max(i - 1, 1);
            } else {
                ++i;
            }
        }
        // final full size reduction
        for (int a = 1; a < k; ++a)
            for (int j = a - 1; j >= 0; --j) size_reduce(a, j);
    }
};

inline std::vector<std::vector<std::int64_t>> identity_coords(int k) {
    std::vector<std::vector<std::int64_t>> u(static_cast<std::size_t>(k), std::vector<std::int64_t>(static_cast<std::size_t>(k), 0));
    for (int i = 0; i < k; ++i) u[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1;
    return u;
}

inline std::vector<std::vector<long double>> float_columns(const Mat& g) {
    std::vector<std::vector<long double>> cols(static_cast<std::size_t>(g.cols()), std::vector<long double>(static_cast<std::size_t>(g.rows())));
    for (int c = 0; c < g.cols(); ++c)
        for (int r = 0; r < g.rows(); ++r) cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = g(r, c);
    return cols;
}

inline IMat coords_to_imat(const std::vector<std::vector<std::int64_t>>& u) {
    const int k = static_cast<int>(u.size());
    IMat m(k, k);
    for (int c = 0; c < k; ++c)
        for (int r = 0; r < k; ++r) m(r, c) = u[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
    return m;
}

inline std::vector<std::vector<std::int64_t>> imat_to_coords(const IMat& m) {
    std::vector<std::vector<std::int64_t>> u(static_cast<std::size_t>(m.cols()), std::vector<std::int64_t>(static_cast<std::size_t>(m.rows())));
    for (int c = 0; c < m.cols(); ++c)
        for (int r = 0; r < m.rows(); ++r) u[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = m(r, c);
    return u;
}

// Columns of g*transform in long double.
inline std::vector<std::vector<long double>> apply_transform(const Mat& g, const IMat& t) {
    std::vector<std::vector<long double>> cols(static_cast<std::size_t>(t.cols()), std::vector<long double>(static_cast<std::size_t>(g.rows()), 0.0L));
    for (int c = 0; c < t.cols(); ++c)
        for (int j = 0; j < t.rows(); ++j) {
            if (t(j, c) == 0) continue;
            long double coef = static_cast<long double>(t(j, c));
            for (int r = 0; r < g.rows(); ++r) cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] += coef * g(r, j);
        }
    return cols;
}

// LLL on columns of g (long double, exact rational fallback); returns the transform.
inline std::pair<IMat, std::string> lll_transform(const Mat& g, double delta, const IMat* start = nullptr, int boundary = -1) {
    const int k = static_cast<int>(g.cols());
    IMat t0 = start ? *start : IMat::Identity(k, k);
    try {
        Lll<long double> l(apply_transform(g, t0), imat_to_coords(t0));
        l.run(delta, boundary);
        return {coords_to_imat(l.u), "float"};
    } catch (const NumericalBreakdown&) {
        auto rc = rational_columns(g);
        if (!rc) throw;
        std::vector<std::vector<BigRational>> cols(static_cast<std::size_t>(k), std::vector<BigRational>(static_cast<std::size_t>(g.rows())));
        for (int c = 0; c < k; ++c)
            for (int j = 0; j < k; ++j)
                for (int r = 0; r < g.rows(); ++r)
                    cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] += BigRational(t0(j, c)) * (*rc)[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
        Lll<BigRational> l(cols, imat_to_coords(t0));
        l.run(delta, boundary);
        return {coords_to_imat(l.u), "exact-rational"};
    }
}

// Gram-Schmidt data of explicit columns in long double.
struct Gso {
    int k = 0;
    std::vector<std::vector<long double>> mu;
    std::vector<long double> bs;

    static Gso of(const std::vector<std::vector<long double>>& cols) {
        Gso g;
        g.k = static_cast<int>(cols.size());
        const std::size_t n = cols.empty() ? 0 : cols[0].size();
        std::vector<std::vector<long double>> bstar(cols.size(), std::vector<long double>(n));
        g.mu.assign(cols.size(), std::vector<long double>(cols.size(), 0.0L));
        g.bs.assign(cols.size(), 0.0L);
        for (std::size_t i = 0; i < cols.size(); ++i) {
            bstar[i] = cols[i];
            for (std::size_t j = 0; j < i; ++j) {
                long double d = 0;
                for (std::size_t t = 0; t < n; ++t) d += cols[i][t] * bstar[j][t];
                long double m = d / g.bs[j];
                g.mu[i][j] = m;
                for (std::size_t t = 0; t < n; ++t) bstar[i][t] -= m * bstar[j][t];
            }
            long double s = 0;
            for (std::size_t t = 0; t < n; ++t) s += bstar[i][t] * bstar[i][t];
            if (!(s > 0)) throw NumericalBreakdown("Gram-Schmidt norm collapsed");
            g.bs[i] = s;
        }
        return g;
    }
};

// Schnorr-Euchner enumeration of integer x with |sum x_i b_i|^2 <= R2.
// With suffix >= 1, only vectors with some nonzero x_i, i >= suffix, are
// reported; suffix == 0 excludes the zero vector; suffix < 0 reports all.
struct Enumerator {
    const Gso& g;
    int suffix;
    std::uint64_t budget;
    std::uint64_t nodes = 0;
    std::vector<std::int64_t> x;
    std::vector<long double> partial;

    Enumerator(const Gso& gs, int suffix_start, std::uint64_t node_budget)
        : g(gs), suffix(suffix_start), budget(node_budget), x(static_cast<std::size_t>(gs.k), 0), partial(static_cast<std::size_t>(gs.k + 1), 0.0L) {}

    bool suffix_zero(int from) const {
        for (int i = from; i < g.k; ++i)
            if (x[static_cast<std::size_t>(i)] != 0) return false;
        return true;
    }

    // visit(x, norm2) may lower R2.
    template <class Visit>
    void level(int lv, long double& R2, Visit& visit) {
        long double c = 0;
        for (int i = lv + 1; i < g.k; ++i) c -= static_cast<long double>(x[static_cast<std::size_t>(i)]) * g.mu[static_cast<std::size_t>(i)][static_cast<std::size_t>(lv)];
        const long double bsl = g.bs[static_cast<std::size_t>(lv)];
        const long double base = partial[static_cast<std::size_t>(lv + 1)];
        auto slack = [&] { return R2 * (1.0L + 1e-12L) - base; };
        if (slack() < 0) return;
        std::int64_t v0 = static_cast<std::int64_t>(std::llround(c));
        std::int64_t up = v0, down = v0 - 1;
        bool up_open = true, down_open = true;
        while (up_open || down_open) {
            std::int64_t v;
            // next candidate in order of distance to the center
            if (up_open && (!down_open || std::fabs(static_cast<long double>(up) - c) <= std::fabs(static_cast<long double>(down) - c))) {
                v = up++;
            } else {
                v = down--;
            }
            long double dist = static_cast<long double>(v) - c;
            long double p = base + dist * dist * bsl;
            if (p > R2 * (1.0L + 1e-12L)) {
                if (v >= v0) up_open = false;
                else down_open = false;
                continue;
            }
            if (++nodes > budget) throw BudgetExceeded("enumeration node budget exhausted");
            x[static_cast<std::size_t>(lv)] = v;
            partial[static_cast<std::size_t>(lv)] = p;
            if (suffix > 0 && lv == suffix && suffix_zero(suffix)) continue;
            if (lv == 0) {
                if (suffix >= 0 && suffix_zero(std::max(suffix, 0))) continue;
                visit(x, p, R2);
            } else {
                level(lv - 1, R2, visit);
            }
        }
        x[static_cast<std::size_t>(lv)] = 0;
    }

    template <class Visit>
    void run(long double R2, Visit&& visit) {
        if (g.k == 0) return;
        level(g.k - 1, R2, visit);
    }
};

inline IVec sign_normalized(IVec v) {
    for (int i = 0; i < v.size(); ++i) {
        if (v(i) == 0) continue;
        if (v(i) < 0) v = -v;
        break;
    }
    return v;
}

inline bool lex_less(const IVec& a, const IVec& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return a(i) < b(i);
    return false;
}

inline BigInt big_gcd(BigInt a, BigInt b) {
    a = abs(a);
    b = abs(b);
    while (b != 0) {
        BigInt t = a % b;
        a = b;
        b = t;
    }
    return a;
}

inline void ext_gcd(const BigInt& a, const BigInt& b, BigInt& g, BigInt& x, BigInt& y) {
    BigInt old_r = a, r = b, old_s = 1, s = 0, old_t = 0, t = 1;
    while (r != 0) {
        BigInt q = old_r / r;
        BigInt tmp = old_r - q * r; old_r = r; r = tmp;
        tmp = old_s - q * s; old_s = s; s = tmp;
        tmp = old_t - q * t; old_t = t; t = tmp;
    }
    if (old_r < 0) {
        old_r = -old_r;
        old_s = -old_s;
        old_t = -old_t;
    }
    g = old_r;
    x = old_s;
    y = old_t;
}

// Unimodular V (k x k) whose first j columns span the saturation of the
// column span of W (k x j, full column rank) inside Z^k.
inline IMat saturation_completion(const std::vector<IVec>& W, int k) {
    const int j = static_cast<int>(W.size());
    std::vector<std::vector<BigInt>> A(static_cast<std::size_t>(k), std::vector<BigInt>(static_cast<std::size_t>(j)));
    std::vector<std::vector<BigInt>> V(static_cast<std::size_t>(k), std::vector<BigInt>(static_cast<std::size_t>(k), 0));
    for (int r = 0; r < k; ++r) {
        V[static_cast<std::size_t>(r)][static_cast<std::size_t>(r)] = 1;
        for (int c = 0; c < j; ++c) A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = W[static_cast<std::size_t>(c)](r);
    }
    for (int c = 0; c < j; ++c) {
        for (int r = c + 1; r < k; ++r) {
            BigInt b = A[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (b == 0) continue;
            BigInt a = A[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
            BigInt g, x, y;
            ext_gcd(a, b, g, x, y);
            BigInt ag = a / g, bg = b / g;
            for (int t = 0; t < j; ++t) {
                BigInt rc = A[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)], rr = A[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)];
                A[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)] = x * rc + y * rr;
                A[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] = -bg * rc + ag * rr;
            }
            for (int t = 0; t < k; ++t) {
                BigInt vc = V[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)], vr = V[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)];
                V[static_cast<std::size_t>(t)][static_cast<std::size_t>(c)] = ag * vc + bg * vr;
                V[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] = -y * vc + x * vr;
            }
        }
        if (A[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] == 0) throw InvalidArgument("witnesses are dependent");
    }
    // pairwise Gauss reduction; columns < j only use columns < j
    int sweeps = 0;
    auto dot = [&](int a, int b) {
        BigInt s = 0;
        for (int t = 0; t < k; ++t) s += V[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] * V[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
        return s;
    };
    for (bool changed = true; changed && sweeps++ < 1000;) {
        changed = false;
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) {
                if (a == b || (a < j && b >= j)) continue;
                BigInt nb = dot(b, b);
                if (nb == 0) continue;
                BigInt ab = dot(a, b);
                BigInt mu = (2 * ab + nb) / (2 * nb);
                if (2 * ab + nb < 0 && (2 * ab + nb) % (2 * nb) != 0) mu -= 1;
                if (mu == 0) continue;
                for (int t = 0; t < k; ++t)
                    V[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] -= mu * V[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)];
                changed = true;
            }
    }
    const BigInt big = BigInt(1) << 40;
    bool large = false;
    for (int r = 0; r < k && !large; ++r)
        for (int c = 0; c < k; ++c)
            if (abs(V[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) > big) large = true;
    if (large) {
        // exact LLL in Z^k; no swap across position j keeps the saturated span
        std::vector<std::vector<BigRational>> cols(static_cast<std::size_t>(k), std::vector<BigRational>(static_cast<std::size_t>(k)));
        for (int c = 0; c < k; ++c)
            for (int r = 0; r < k; ++r) cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = BigRational(V[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]);
        Lll<BigRational> l(std::move(cols), std::vector<std::vector<std::int64_t>>(static_cast<std::size_t>(k)));
        l.run(0.75, j);
        for (int c = 0; c < k; ++c)
            for (int r = 0; r < k; ++r)
                V[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = boost::multiprecision::numerator(l.b[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)]);
    }
    IMat out(k, k);
    const BigInt lim = BigInt(4000000000000000000LL);
    for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) {
            const BigInt& v = V[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            if (abs(v) > lim) throw NumericalBreakdown("completion coefficients overflow");
            out(r, c) = static_cast<std::int64_t>(v);
        }
    return out;
}

// Unimodular V (n x n) with V e_0 = z for primitive z; Euclid on the entries,
// so |V| stays bounded by max |z|.
inline IMat primitive_completion(IVec a) {
    const int n = static_cast<int>(a.size());
    IMat V = IMat::Identity(n, n);
    for (;;) {
        int p = -1;
        for (int i = 0; i < n; ++i)
            if (a(i) != 0 && (p < 0 || std::llabs(a(i)) < std::llabs(a(p)))) p = i;
        if (p < 0) throw InvalidArgument("zero vector has no completion");
        bool done = true;
        for (int i = 0; i < n; ++i) {
            if (i == p || a(i) == 0) continue;
            std::int64_t q = a(i) / a(p);
            a(i) -= q * a(p);
            V.col(p) += q * V.col(i);
            if (a(i) != 0) done = false;
        }
        if (done) {
            if (std::llabs(a(p)) != 1) throw InvalidArgument("vector is not primitive");
            V.col(p) *= a(p);
            if (p != 0) V.col(0).swap(V.col(p));
            return V;
        }
    }
}

// Given unimodular T whose first `span` columns span a saturated sublattice,
// returns T' = T diag(I, U) whose first span+1 columns span the saturation of
// that sublattice plus w.
inline IMat extend_primitive(const IMat& T, const IVec& w, int span) {
    const int k = static_cast<int>(T.rows());
    Vec yf = T.cast<double>().fullPivLu().solve(w.cast<double>());
    IVec y(k);
    for (int i = 0; i < k; ++i) y(i) = static_cast<std::int64_t>(std::llround(yf(i)));
    if (T * y != w) throw NumericalBreakdown("witness coordinates are not integral in the working basis");
    IVec z = y.tail(k - span);
    std::int64_t g = 0;
    for (int i = 0; i < z.size(); ++i) g = std::gcd(g, std::llabs(z(i)));
    if (g == 0) throw InvalidArgument("witness lies in the current span");
    z /= g;
    IMat U = IMat::Identity(k, k);
    U.bottomRightCorner(k - span, k - span) = primitive_completion(z);
    return T * U;
}

inline long double norm2_of(const Mat& gens, const IVec& c) {
    long double s = 0;
    for (int r = 0; r < gens.rows(); ++r) {
        long double v = 0;
        for (int j = 0; j < gens.cols(); ++j) v += static_cast<long double>(gens(r, j)) * static_cast<long double>(c(j));
        s += v * v;
    }
    return s;
}

// Effective generators E with |E c| = F(B c) for the norm F(v)^2 = v^T H v.
inline Mat effective_generators(const LatticeBasis& basis, const Mat* H) {
    if (!H) return basis.generators;
    require(H->rows() == basis.ambient() && H->cols() == basis.ambient(), "norm matrix has wrong size");
    Eigen::LLT<Mat> llt(*H);
    if (llt.info() != Eigen::Success) throw InvalidArgument("custom norm matrix must be positive definite");
    Mat U = llt.matrixU();
    return U * basis.generators;
}

// Bareiss determinant of a small integer matrix.
inline BigInt bareiss_det(std::vector<std::vector<BigInt>> a) {
    const std::size_t n = a.size();
    BigInt sign = 1, prev = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a[k][k] == 0) {
            std::size_t p = k + 1;
            while (p < n && a[p][k] == 0) ++p;
            if (p == n) return 0;
            std::swap(a[k], a[p]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
        prev = a[k][k];
    }
    return n == 0 ? BigInt(1) : sign * a[n - 1][n - 1];
}

// Bareiss in 128-bit arithmetic; nullopt on overflow.
inline std::optional<__int128> bareiss_det_small(std::vector<std::vector<__int128>> a) {
    const std::size_t n = a.size();
    __int128 sign = 1, prev = 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (a[k][k] == 0) {
            std::size_t p = k + 1;
            while (p < n && a[p][k] == 0) ++p;
            if (p == n) return __int128(0);
            std::swap(a[k], a[p]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < n; ++i)
            for (std::size_t j = k + 1; j < n; ++j) {
                __int128 x, y, z;
                if (__builtin_mul_overflow(a[i][j], a[k][k], &x) || __builtin_mul_overflow(a[i][k], a[k][j], &y) ||
                    __builtin_sub_overflow(x, y, &z))
                    return std::nullopt;
                a[i][j] = z / prev;
            }
        prev = a[k][k];
    }
    return n == 0 ? __int128(1) : sign * a[n - 1][n - 1];
}

// Index of the lattice spanned by the columns of X (k x l integer) in its saturation:
// the gcd of all l x l minors (0 when the columns are dependent).
inline BigInt saturation_index(const std::vector<IVec>& X, int k) {
    const int l = static_cast<int>(X.size());
    std::vector<int> rows(static_cast<std::size_t>(l));
    std::iota(rows.begin(), rows.end(), 0);
    BigInt g = 0;
    for (;;) {
        std::vector<std::vector<__int128>> m(static_cast<std::size_t>(l), std::vector<__int128>(static_cast<std::size_t>(l)));
        for (int a = 0; a < l; ++a)
            for (int b = 0; b < l; ++b) m[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = X[static_cast<std::size_t>(b)](rows[static_cast<std::size_t>(a)]);
        auto small = bareiss_det_small(m);
        BigInt minor;
        if (small) {
            __int128 v = *small < 0 ? -*small : *small;
            minor = BigInt(static_cast<std::uint64_t>(v >> 64)) << 64;
            minor += BigInt(static_cast<std::uint64_t>(v));
        } else {
            std::vector<std::vector<BigInt>> mb(static_cast<std::size_t>(l), std::vector<BigInt>(static_cast<std::size_t>(l)));
            for (int a = 0; a < l; ++a)
                for (int b = 0; b < l; ++b) mb[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = X[static_cast<std::size_t>(b)](rows[static_cast<std::size_t>(a)]);
            minor = bareiss_det(std::move(mb));
        }
        g = big_gcd(g, minor);
        if (g == 1) return g;
        int i = l - 1;
        while (i >= 0 && rows[static_cast<std::size_t>(i)] == k - l + i) --i;
        if (i < 0) break;
        ++rows[static_cast<std::size_t>(i)];
        for (int t = i + 1; t < l; ++t) rows[static_cast<std::size_t>(t)] = rows[static_cast<std::size_t>(t - 1)] + 1;
    }
    return g;
}

// Euclidean determinant of the lattice spanned by gens*X (columns of X).
inline long double sublattice_det(const Mat& gram, const std::vector<IVec>& X) {
    const int l = static_cast<int>(X.size());
    Mat G(l, l);
    for (int a = 0; a < l; ++a)
        for (int b = 0; b < l; ++b) {
            Vec xa = X[static_cast<std::size_t>(a)].cast<double>(), xb = X[static_cast<std::size_t>(b)].cast<double>();
            G(a, b) = xa.dot(gram * xb);
        }
    double d = G.determinant();
    return d > 0 ? std::sqrt(static_cast<long double>(d)) : 0.0L;
}

}  // namespace detail

inline LllResult lll_reduce(const LatticeBasis& basis, double delta = 0.99) {
    require(delta > 0.25 && delta < 1.0, "delta must lie in (0.25, 1)");
    auto [t, path] = detail::lll_transform(basis.generators, delta);
    LllResult res;
    res.transform = t;
    res.path = path;
    Mat g = basis.generators * t.cast<double>();
    res.basis = LatticeBasis::from_generators(g);
    return res;
}

// Exact successive minima for the Euclidean norm or F(v)^2 = v^T H v.
inline MinimaProfile successive_minima(const LatticeBasis& basis, const Mat* H = nullptr,
                                       std::uint64_t budget = kDefaultEnumBudget) {
    const int k = basis.rank();
    require(k <= 12, "successive minima need rank <= 12");
    Mat E = detail::effective_generators(basis, H);
    MinimaProfile prof;
    std::vector<IVec> W;
    IMat T = IMat::Identity(k, k);
    for (int j = 0; j < k; ++j) {
        IMat start = j == 0 ? IMat::Identity(k, k) : detail::extend_primitive(T, W.back(), j - 1);
        T = detail::lll_transform(E, 0.99, &start, j).first;
        auto cols = detail::apply_transform(E, T);
        detail::Gso gs = detail::Gso::of(cols);
        long double R2 = 0;
        for (int i = j; i < k; ++i) {
            long double s = 0;
            for (long double v : cols[static_cast<std::size_t>(i)]) s += v * v;
            R2 = i == j ? s : std::min(R2, s);
        }
        long double best = R2;
        std::vector<IVec> ties;
        detail::Enumerator en(gs, j, budget > prof.nodes ? budget - prof.nodes : 0);
        auto visit = [&](const std::vector<std::int64_t>& x, long double p, long double& bound) {
            if (p < best * (1.0L - 1e-9L)) {
                best = p;
                ties.clear();
            }
            if (p <= best * (1.0L + 1e-9L)) {
                IVec xv(k);
                for (int i = 0; i < k; ++i) xv(i) = x[static_cast<std::size_t>(i)];
                ties.push_back(detail::sign_normalized(T * xv));
                bound = std::min(bound, best * (1.0L + 1e-9L));
            }
        };
        en.run(R2, visit);
        prof.nodes += en.nodes;
        if (ties.empty()) throw NumericalBreakdown("enumeration found no vector outside the current span");
        // drop near-ties that lost to a later improvement
        long double exact_best = -1;
        for (const auto& c : ties) {
            long double n2 = detail::norm2_of(E, c);
            if (exact_best < 0 || n2 < exact_best) exact_best = n2;
        }
        IVec pick;
        bool have = false;
        for (const auto& c : ties) {
            long double n2 = detail::norm2_of(E, c);
            if (n2 > exact_best * (1.0L + 1e-9L)) continue;
            if (!have || detail::lex_less(c, pick)) {
                pick = c;
                have = true;
            }
        }
        W.push_back(pick);
        prof.witnesses.push_back(pick);
        prof.minima.push_back(static_cast<double>(std::sqrt(detail::norm2_of(E, pick))));
    }
    return prof;
}

inline AlphaProfile alpha_from_minima(const std::vector<double>& minima) {
    AlphaProfile a;
    a.alpha.push_back(1.0);
    double prod = 1.0;
    for (double m : minima) {
        prod *= m;
        a.alpha.push_back(1.0 / prod);
    }
    for (std::size_t l = 0; l < a.alpha.size(); ++l)
        if (a.alpha[l] > a.alpha_max) {
            a.alpha_max = a.alpha[l];
            a.argmax = static_cast<int>(l);
        }
    return a;
}

namespace detail {

inline double binomial(int n, int r) {
    double c = 1;
    for (int i = 0; i < r; ++i) c = c * (n - i) / (i + 1);
    return c;
}

// Best 1/det over saturated l-sublattices spanned by short primitive vectors
// with coefficients in [-box, box] relative to a reduced basis.
inline double alpha_exact_small(const LatticeBasis& basis, int l, int box, std::uint64_t budget) {
    const int k = basis.rank();
    if (l == 0) return 1.0;
    if (l == k) return 1.0 / basis.det_lattice;
    IMat T = lll_transform(basis.generators, 0.99).first;
    Mat gens = basis.generators * T.cast<double>();
    Mat gram = gens.transpose() * gens;
    std::vector<std::pair<long double, IVec>> pool;
    std::vector<long> lo(static_cast<std::size_t>(k), -box);
    IVec x = IVec::Constant(k, -box);
    std::uint64_t work = 0;
    for (;;) {
        if (++work > budget) throw BudgetExceeded("coefficient box too large");
        IVec s = sign_normalized(x);
        bool canonical = (s == x) && x.cwiseAbs().maxCoeff() > 0;
        if (canonical) {
            std::int64_t g = 0;
            for (int i = 0; i < k; ++i) g = std::gcd(g, x(i));
            if (g == 1) {
                Vec xd = x.cast<double>();
                pool.emplace_back(static_cast<long double>(xd.dot(gram * xd)), x);
            }
        }
        int i = 0;
        while (i < k && x(i) == box) x(i++) = -box;
        if (i == k) break;
        ++x(i);
    }
    std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return lex_less(a.second, b.second);
    });
    // minima witnesses of the reduced basis are always candidates
    MinimaProfile mp = successive_minima(LatticeBasis::from_generators(gens), nullptr, budget);
    std::vector<IVec> cand;
    for (int i = 0; i < l; ++i) cand.push_back(mp.witnesses[static_cast<std::size_t>(i)]);
    int N = l;
    while (N < static_cast<int>(pool.size()) && binomial(N + 1, l) <= 20000.0) ++N;
    for (int i = 0; i < N && i < static_cast<int>(pool.size()); ++i) cand.push_back(pool[static_cast<std::size_t>(i)].second);
    double best = 0.0;
    const int M = static_cast<int>(cand.size());
    std::vector<int> idx(static_cast<std::size_t>(l));
    std::iota(idx.begin(), idx.end(), 0);
    for (;;) {
        if (++work > budget) throw BudgetExceeded("subset enumeration budget exhausted");
        std::vector<IVec> X;
        for (int i : idx) X.push_back(cand[static_cast<std::size_t>(i)]);
        BigInt ind = saturation_index(X, k);
        if (ind != 0) {
            long double d = sublattice_det(gram, X) / static_cast<long double>(ind);
            if (d > 0) best = std::max(best, static_cast<double>(1.0L / d));
        }
        int i = l - 1;
        while (i >= 0 && idx[static_cast<std::size_t>(i)] == M - l + i) --i;
        if (i < 0) break;
        ++idx[static_cast<std::size_t>(i)];
        for (int t = i + 1; t < l; ++t) idx[static_cast<std::size_t>(t)] = idx[static_cast<std::size_t>(t - 1)] + 1;
    }
    return best;
}

}  // namespace detail

inline double alpha_characteristic(const LatticeBasis& basis, int l, AlphaMode mode = AlphaMode::minima_surrogate,
                                   std::uint64_t budget = kDefaultEnumBudget) {
    const int k = basis.rank();
    require(l >= 0 && l <= k, "l must lie in [0, rank]");
    if (mode == AlphaMode::exact_small) {
        require(k <= 6, "exact-small mode needs rank <= 6");
        return detail::alpha_exact_small(basis, l, 3, budget);
    }
    if (l == 0) return 1.0;
    auto mp = successive_minima(basis, nullptr, budget);
    return alpha_from_minima(mp.minima).alpha[static_cast<std::size_t>(l)];
}

inline AlphaProfile alpha_profile(const LatticeBasis& basis, AlphaMode mode = AlphaMode::minima_surrogate,
                                  std::uint64_t budget = kDefaultEnumBudget) {
    if (mode == AlphaMode::minima_surrogate) {
        auto a = alpha_from_minima(successive_minima(basis, nullptr, budget).minima);
        a.mode = mode;
        return a;
    }
    AlphaProfile a;
    a.mode = mode;
    for (int l = 0; l <= basis.rank(); ++l) {
        a.alpha.push_back(alpha_characteristic(basis, l, mode, budget));
        if (a.alpha.back() > a.alpha_max) {
            a.alpha_max = a.alpha.back();
            a.argmax = l;
        }
    }
    return a;
}

// Generators D with B^T D = I (the dual inside the span of B).
inline LatticeBasis dual_lattice(const LatticeBasis& basis) {
    Mat d = basis.generators * basis.gram.inverse();
    if (basis.rank() == basis.ambient()) d = basis.generators.transpose().inverse();
    return LatticeBasis::from_generators(d);
}

// Number of lattice vectors v with F(v) <= mu (origin included).
inline std::uint64_t count_in_ball(const LatticeBasis& basis, double mu, std::uint64_t budget = kDefaultEnumBudget,
                                   unsigned threads = 0, const Mat* H = nullptr) {
    require(mu >= 0, "mu must be nonnegative");
    const int k = basis.rank();
    Mat E = detail::effective_generators(basis, H);
    IMat T = detail::lll_transform(E, 0.99).first;
    auto cols = detail::apply_transform(E, T);
    detail::Gso gs = detail::Gso::of(cols);
    const long double R2 = static_cast<long double>(mu) * mu;
    const long double bs_top = gs.bs[static_cast<std::size_t>(k - 1)];
    std::int64_t top = static_cast<std::int64_t>(std::floor(std::sqrt(R2 * (1.0L + 1e-12L) / bs_top)));
    std::vector<std::uint64_t> parts(static_cast<std::size_t>(2 * top + 1), 0);
    std::atomic<std::uint64_t> nodes{0};
    parallel_for(2 * top + 1, threads, [&](std::int64_t i) {
        std::int64_t v = i - top;
        long double p = static_cast<long double>(v) * v * bs_top;
        if (p > R2 * (1.0L + 1e-12L)) return;
        if (k == 1) {
            parts[static_cast<std::size_t>(i)] = 1;
            return;
        }
        // enumerate the remaining levels with the top coordinate fixed
        detail::Enumerator en(gs, -1, budget);
        en.x[static_cast<std::size_t>(k - 1)] = v;
        en.partial[static_cast<std::size_t>(k - 1)] = p;
        std::uint64_t cnt = 0;
        long double bound = R2;
        auto visit = [&](const std::vector<std::int64_t>&, long double, long double&) { ++cnt; };
        en.level(k - 2, bound, visit);
        parts[static_cast<std::size_t>(i)] = cnt;
        if (nodes.fetch_add(en.nodes) + en.nodes > budget) throw BudgetExceeded("enumeration node budget exhausted");
    });
    std::uint64_t total = 0;
    for (auto c : parts) total += c;
    return total;
}

// Integer sublattices of Z^n given by generator columns.
namespace intlat {

using Gens = std::vector<IVec>;

// Basis of the lattice generated by possibly dependent integer columns.
inline Gens basis_of(const Gens& gens, int n) {
    std::vector<std::vector<BigInt>> cols;
    for (const auto& g : gens) {
        std::vector<BigInt> c(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) c[static_cast<std::size_t>(i)] = g(i);
        cols.push_back(c);
    }
    Gens out;
    std::size_t start = 0;
    for (int row = 0; row < n && start < cols.size(); ++row) {
        // gcd-combine column entries in this row into cols[start]
        for (std::size_t c = start + 1; c < cols.size(); ++c) {
            BigInt b = cols[c][static_cast<std::size_t>(row)];
            if (b == 0) continue;
            BigInt a = cols[start][static_cast<std::size_t>(row)];
            BigInt g, x, y;
            detail::ext_gcd(a, b, g, x, y);
            BigInt ag = a / g, bg = b / g;
            for (int i = 0; i < n; ++i) {
                BigInt u = cols[start][static_cast<std::size_t>(i)], v = cols[c][static_cast<std::size_t>(i)];
                cols[start][static_cast<std::size_t>(i)] = x * u + y * v;
                cols[c][static_cast<std::size_t>(i)] = -bg * u + ag * v;
            }
        }
        if (cols[start][static_cast<std::size_t>(row)] != 0) ++start;
    }
    for (std::size_t c = 0; c < start; ++c) {
        IVec v(n);
        for (int i = 0; i < n; ++i) v(i) = static_cast<std::int64_t>(cols[c][static_cast<std::size_t>(i)]);
        out.push_back(v);
    }
    return out;
}

// Primitive lattice span(gens) cap Z^n.
inline Gens saturate(const Gens& gens, int n) {
    Gens b = basis_of(gens, n);
    IMat V = detail::saturation_completion(b, n);
    Gens out;
    for (std::size_t j = 0; j < b.size(); ++j) out.push_back(V.col(static_cast<int>(j)));
    return out;
}

inline Gens sum(const Gens& a, const Gens& b, int n) {
    Gens all = a;
    all.insert(all.end(), b.begin(), b.end());
    return basis_of(all, n);
}

// Basis of the intersection of the lattices generated by a and b.
inline Gens intersection(const Gens& a, const Gens& b, int n) {
    // kernel of [A | -B] via column reduction with a tracked transform
    const int m = static_cast<int>(a.size() + b.size());
    std::vector<std::vector<BigInt>> cols(static_cast<std::size_t>(m), std::vector<BigInt>(static_cast<std::size_t>(n)));
    std::vector<std::vector<BigInt>> tr(static_cast<std::size_t>(m), std::vector<BigInt>(static_cast<std::size_t>(m), 0));
    for (int c = 0; c < m; ++c) {
        const IVec& v = c < static_cast<int>(a.size()) ? a[static_cast<std::size_t>(c)] : b[static_cast<std::size_t>(c) - a.size()];
        int sg = c < static_cast<int>(a.size()) ? 1 : -1;
        for (int i = 0; i < n; ++i) cols[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)] = sg * v(i);
        tr[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)] = 1;
    }
    std::size_t start = 0;
    for (int row = 0; row < n && start < cols.size(); ++row) {
        for (std::size_t c = start + 1; c < cols.size(); ++c) {
            BigInt bb = cols[c][static_cast<std::size_t>(row)];
            if (bb == 0) continue;
            BigInt aa = cols[start][static_cast<std::size_t>(row)];
            BigInt g, x, y;
            detail::ext_gcd(aa, bb, g, x, y);
            BigInt ag = aa / g, bg = bb / g;
            for (int i = 0; i < n; ++i) {
                BigInt u = cols[start][static_cast<std::size_t>(i)], v = cols[c][static_cast<std::size_t>(i)];
                cols[start][static_cast<std::size_t>(i)] = x * u + y * v;
                cols[c][static_cast<std::size_t>(i)] = -bg * u + ag * v;
            }
            for (int i = 0; i < m; ++i) {
                BigInt u = tr[start][static_cast<std::size_t>(i)], v = tr[c][static_cast<std::size_t>(i)];
                tr[start][static_cast<std::size_t>(i)] = x * u + y * v;
                tr[c][static_cast<std::size_t>(i)] = -bg * u + ag * v;
            }
        }
        if (cols[start][static_cast<std::size_t>(row)] != 0) ++start;
    }
    Gens out;
    for (std::size_t c = start; c < cols.size(); ++c) {
        IVec v = IVec::Zero(n);
        for (std::size_t j = 0; j < a.size(); ++j)
            for (int i = 0; i < n; ++i) v(i) += static_cast<std::int64_t>(tr[c][j]) * a[j](i);
        out.push_back(v);
    }
    return basis_of(out, n);
}

inline double det(const Gens& g) {
    if (g.empty()) return 1.0;
    const int l = static_cast<int>(g.size());
    Mat G(l, l);
    for (int i = 0; i < l; ++i)
        for (int j = 0; j < l; ++j) G(i, j) = static_cast<double>(g[static_cast<std::size_t>(i)].dot(g[static_cast<std::size_t>(j)]));
    return std::sqrt(std::max(0.0, G.determinant()));
}

}  // namespace intlat

inline nlohmann::json basis_to_json(const LatticeBasis& b) {
    nlohmann::json cols = nlohmann::json::array();
    for (int c = 0; c < b.rank(); ++c) {
        nlohmann::json col = nlohmann::json::array();
        for (int r = 0; r < b.ambient(); ++r) col.push_back(b.generators(r, c));
        cols.push_back(col);
    }
    return {{"generators", cols}};
}

// {"generators": [[col0...], [col1...]]} with whitelisted scalar entries.
inline LatticeBasis basis_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("generators") || !j["generators"].is_array() || j["generators"].empty())
        throw ParseError("basis needs a nonempty \"generators\" array of columns");
    const auto& cols = j["generators"];
    const std::size_t n = cols[0].is_array() ? cols[0].size() : 0;
    if (n == 0) throw ParseError("generator columns must be nonempty arrays");
    Mat g(static_cast<int>(n), static_cast<int>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (!cols[c].is_array() || cols[c].size() != n) throw ParseError("generator columns must share one length");
        for (std::size_t r = 0; r < n; ++r) g(static_cast<int>(r), static_cast<int>(c)) = parse_scalar(cols[c][r]).value;
    }
    return LatticeBasis::from_generators(g);
}

}  // namespace opplab

#endif
