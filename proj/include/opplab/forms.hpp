#ifndef OPPLAB_FORMS_HPP
#define OPPLAB_FORMS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_dec_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include "errors.hpp"

namespace opplab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using BigRational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline constexpr double kSymmetryTol = 1e-12;
inline constexpr double kDegenerateTol = 1e-10;
inline constexpr double kGuardBand = 1e-9;

// ---------------------------------------------------------------- fractions

struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    BigRational big() const { return BigRational(BigInt(num), BigInt(den)); }
};

// Last continued-fraction convergent of x whose denominator is <= cap.
inline Frac best_rational(double x, std::int64_t cap) {
    if (!std::isfinite(x)) return {0, 1};
    bool neg = x < 0;
    double y = std::fabs(x);
    // p_{k-1}/q_{k-1}, p_k/q_k
    long double p0 = 1, q0 = 0, p1 = std::floor(y), q1 = 1;
    long double frac = y - std::floor(y);
    for (int it = 0; it < 64 && frac > 1e-300; ++it) {
        long double inv = 1.0L / frac;
        long double a = std::floor(inv);
        long double p2 = a * p1 + p0, q2 = a * q1 + q0;
        if (q2 > static_cast<long double>(cap) || p2 > 9.0e18L) break;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
        frac = inv - a;
        if (std::fabs(static_cast<double>(p1 / q1) - y) == 0.0) break;
    }
    Frac f{static_cast<std::int64_t>(p1), static_cast<std::int64_t>(q1)};
    if (neg) f.num = -f.num;
    return f;
}

// Accepts x as rational only if the reconstruction is within a few ulps.
inline std::optional<Frac> reconstruct_rational(double x, std::int64_t cap) {
    Frac f = best_rational(x, cap);
    double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(x));
    if (std::fabs(f.value() - x) <= tol) return f;
    return std::nullopt;
}

inline std::int64_t checked_lcm(std::int64_t a, std::int64_t b) {
    std::int64_t g = std::gcd(a, b);
    __int128 l = static_cast<__int128>(a / g) * b;
    if (l > static_cast<__int128>(1) << 62) throw NumericalBreakdown("denominator overflow");
    return static_cast<std::int64_t>(l);
}

// ----------------------------------------------------------- exact entries

// A scalar parsed from input: its double value plus the exact rational, when
// the literal denotes one.
struct Scalar {
    double value = 0.0;
    std::optional<Frac> exact;
    std::string text;
};

namespace detail {

using Dec = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<30>>;

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\n");
    auto e = s.find_last_not_of(" \t\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool is_integer_literal(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '+' || s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<long>(i), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::optional<Frac> decimal_to_frac(const std::string& s) {
    // plain decimal literal without exponent: exact rational with 10^k denominator
    std::string t = s;
    bool neg = false;
    if (!t.empty() && (t[0] == '-' || t[0] == '+')) { neg = t[0] == '-'; t = t.substr(1); }
    auto dot = t.find('.');
    if (t.find_first_of("eE") != std::string::npos) return std::nullopt;
    std::string digits = dot == std::string::npos ? t : t.substr(0, dot) + t.substr(dot + 1);
    std::size_t scale = dot == std::string::npos ? 0 : t.size() - dot - 1;
    if (digits.empty() || !is_integer_literal(digits) || digits.size() > 17 || scale > 17) return std::nullopt;
    std::int64_t num = std::stoll(digits);
    std::int64_t den = 1;
    for (std::size_t k = 0; k < scale; ++k) den *= 10;
    std::int64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    return Frac{neg ? -num / g : num / g, den / g};
}

}  // namespace detail

// Whitelisted literals: numbers, "p/q", decimal strings, "sqrt(k)", "golden",
// each optionally negated.
inline Scalar parse_scalar(const nlohmann::json& j) {
    Scalar s;
    if (j.is_number_integer()) {
        s.value = static_cast<double>(j.get<std::int64_t>());
        s.exact = Frac{j.get<std::int64_t>(), 1};
        s.text = std::to_string(j.get<std::int64_t>());
        return s;
    }
    if (j.is_number()) {
        s.value = j.get<double>();
        s.exact = reconstruct_rational(s.value, 1000000);
        std::ostringstream os;
        os.precision(17);
        os << s.value;
        s.text = os.str();
        return s;
    }
    if (!j.is_string()) throw ParseError("form entry must be a number or a whitelisted string");
    std::string raw = detail::trim(j.get<std::string>());
    s.text = raw;
    std::string body = raw;
    bool neg = false;
    if (!body.empty() && body[0] == '-') { neg = true; body = detail::trim(body.substr(1)); }
    detail::Dec v;
    if (body == "golden") {
        v = (detail::Dec(1) + boost::multiprecision::sqrt(detail::Dec(5))) / 2;
    } else if (body.rfind("sqrt(", 0) == 0 && body.back() == ')') {
        std::string arg = detail::trim(body.substr(5, body.size() - 6));
        if (!detail::is_integer_literal(arg) || arg[0] == '-') throw ParseError("sqrt argument must be a nonnegative integer: " + raw);
        std::int64_t k = std::stoll(arg);
        v = boost::multiprecision::sqrt(detail::Dec(k));
        auto root = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(k))));
        if (root * root == k) s.exact = Frac{root, 1};
    } else if (auto slash = body.find('/'); slash != std::string::npos) {
        std::string p = detail::trim(body.substr(0, slash)), q = detail::trim(body.substr(slash + 1));
        if (!detail::is_integer_literal(p) || !detail::is_integer_literal(q)) throw ParseError("bad fraction literal: " + raw);
        std::int64_t pn = std::stoll(p), qn = std::stoll(q);
        if (qn == 0) throw ParseError("zero denominator: " + raw);
        if (qn < 0) { pn = -pn; qn = -qn; }
        std::int64_t g = std::gcd(pn, qn);
        s.exact = Frac{pn / g, qn / g};
        v = detail::Dec(pn) / detail::Dec(qn);
    } else if (auto f = detail::decimal_to_frac(body)) {
        s.exact = f;
        v = detail::Dec(f->num) / detail::Dec(f->den);
    } else {
        throw ParseError("entry not in whitelist {number, p/q, sqrt(k), golden}: " + raw);
    }
    if (neg) {
        v = -v;
        if (s.exact) s.exact->num = -s.exact->num;
    }
    s.value = static_cast<double>(v);
    return s;
}

// ------------------------------------------------------------------ Jacobi

struct EigenSystem {
    Vec values;   // sorted by |value| descending, positives first on ties
    Mat vectors;  // columns
    int sweeps = 0;
};

inline EigenSystem jacobi_eigen(const Mat& input, int max_sweeps = 100) {
    const Eigen::Index n = input.rows();
    Mat a = input;
    Mat v = Mat::Identity(n, n);
    double scale = a.norm();
    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-17 * scale || off == 0.0) break;
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                double apq = a(p, q);
                if (apq == 0.0) continue;
                double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
        double ai = std::fabs(a(i, i)), aj = std::fabs(a(j, j));
        if (ai != aj) return ai > aj;
        return a(i, i) > a(j, j);
    });
    EigenSystem es;
    es.values.resize(n);
    es.vectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        es.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        es.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
    }
    es.sweeps = sweep;
    return es;
}

// --------------------------------------------------------------- QuadForm

// Exact data for the boundary-tie path. entry(i,j) is set when the entry is
// rational; `integer` = scale * Q when every entry is.
struct ExactData {
    std::vector<std::optional<Frac>> entries;
    std::vector<std::optional<Frac>> shift;
    bool all_rational = false;
    std::int64_t scale = 1;  // lcm of entry denominators
    IMat integer;
    bool shift_rational = false;
    std::int64_t shift_den = 1;
    IVec shift_num;
};

class QuadForm {
public:
    Mat matrix;
    int dim = 0;
    Vec eigenvalues;
    Mat eigenvectors;
    int p = 0, q_neg = 0;
    double q0 = 0, q_max = 0, det_abs = 0;
    Mat positive_part, sqrt_positive, reflection;
    Mat positive_inverse, sqrt_positive_inverse;
    Vec shift;
    std::string tag;
    ExactData exact;
    bool diagonal = false;

    double value(const Vec& x) const { return x.dot(matrix * x); }
    double positive_value(const Vec& x) const { return x.dot(positive_part * x); }
    bool indefinite() const { return p > 0 && q_neg > 0; }
    bool has_shift() const { return shift.size() > 0 && shift.cwiseAbs().maxCoeff() > 0.0; }
    bool entry_exact(int i, int j) const { return exact.entries[static_cast<std::size_t>(i * dim + j)].has_value(); }
};

namespace detail {

inline void fill_exact(QuadForm& f) {
    ExactData& e = f.exact;
    e.all_rational = std::all_of(e.entries.begin(), e.entries.end(), [](const auto& x) { return x.has_value(); });
    if (e.all_rational) {
        std::int64_t l = 1;
        for (const auto& x : e.entries) l = checked_lcm(l, x->den);
        e.scale = l;
        e.integer.resize(f.dim, f.dim);
        for (int i = 0; i < f.dim; ++i)
            for (int j = 0; j < f.dim; ++j) {
                const Frac& fr = *e.entries[static_cast<std::size_t>(i * f.dim + j)];
                e.integer(i, j) = fr.num * (l / fr.den);
            }
    }
    e.shift_rational = std::all_of(e.shift.begin(), e.shift.end(), [](const auto& x) { return x.has_value(); });
    if (e.shift_rational) {
        std::int64_t l = 1;
        for (const auto& x : e.shift) l = checked_lcm(l, x->den);
        e.shift_den = l;
        e.shift_num.resize(f.dim);
        for (int i = 0; i < f.dim; ++i) e.shift_num(i) = e.shift[static_cast<std::size_t>(i)]->num * (l / e.shift[static_cast<std::size_t>(i)]->den);
    }
}

}  // namespace detail

// Builds a QuadForm. `entries_exact`/`shift_exact` may be empty, in which
// case exactness is inferred from the doubles.
inline QuadForm decompose(const Mat& matrix, const Vec& shift = Vec(),
                          std::vector<std::optional<Frac>> entries_exact = {},
                          std::vector<std::optional<Frac>> shift_exact = {}, std::string tag = "") {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) throw InvalidArgument("form matrix must be square and nonempty");
    if (!matrix.allFinite()) throw InvalidArgument("form matrix has non-finite entries");
    const int d = static_cast<int>(matrix.rows());
    double mx = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (std::fabs(matrix(i, j) - matrix(j, i)) > kSymmetryTol * mx)
                throw NotSymmetric("entries (" + std::to_string(i) + "," + std::to_string(j) + ") differ");
    QuadForm f;
    f.dim = d;
    f.matrix = (matrix + matrix.transpose()) / 2.0;
    f.tag = std::move(tag);
    EigenSystem es = jacobi_eigen(f.matrix);
    f.eigenvalues = es.values;
    f.eigenvectors = es.vectors;
    double lmax = es.values.cwiseAbs().maxCoeff();
    double lmin = es.values.cwiseAbs().minCoeff();
    if (!(lmin >= kDegenerateTol * lmax) || lmax == 0.0) throw DegenerateForm("smallest |eigenvalue| " + std::to_string(lmin) + " below threshold");
    f.q0 = lmin;
    f.q_max = lmax;
    f.det_abs = 1.0;
    for (int i = 0; i < d; ++i) {
        f.det_abs *= std::fabs(es.values(i));
        (es.values(i) > 0 ? f.p : f.q_neg) += 1;
    }
    f.diagonal = true;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j && f.matrix(i, j) != 0.0) f.diagonal = false;
    Vec absl = es.values.cwiseAbs();
    Vec sgn = es.values.unaryExpr([](double x) { return x > 0 ? 1.0 : -1.0; });
    const Mat& V = es.vectors;
    if (f.diagonal) {
        // keep exact diagonal structure
        f.positive_part = f.matrix.cwiseAbs();
        f.sqrt_positive = f.positive_part.cwiseSqrt();
        f.reflection = Mat::Zero(d, d);
        f.positive_inverse = Mat::Zero(d, d);
        f.sqrt_positive_inverse = Mat::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            f.reflection(i, i) = f.matrix(i, i) > 0 ? 1.0 : -1.0;
            f.positive_inverse(i, i) = 1.0 / f.positive_part(i, i);
            f.sqrt_positive_inverse(i, i) = 1.0 / f.sqrt_positive(i, i);
        }
    } else {
        f.positive_part = V * absl.asDiagonal() * V.transpose();
        f.sqrt_positive = V * absl.cwiseSqrt().asDiagonal() * V.transpose();
        f.reflection = V * sgn.asDiagonal() * V.transpose();
        f.positive_inverse = V * absl.cwiseInverse().asDiagonal() * V.transpose();
        f.sqrt_positive_inverse = V * absl.cwiseSqrt().cwiseInverse().asDiagonal() * V.transpose();
    }
    f.shift = shift.size() == 0 ? Vec::Zero(d) : shift;
    if (f.shift.size() != d) throw InvalidArgument("shift length differs from dimension");
    if (entries_exact.empty()) {
        entries_exact.resize(static_cast<std::size_t>(d * d));
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) entries_exact[static_cast<std::size_t>(i * d + j)] = reconstruct_rational(f.matrix(i, j), 1000000);
    }
    if (shift_exact.empty()) {
        shift_exact.resize(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) shift_exact[static_cast<std::size_t>(i)] = reconstruct_rational(f.shift(i), 1000000);
    }
    f.exact.entries = std::move(entries_exact);
    f.exact.shift = std::move(shift_exact);
    detail::fill_exact(f);
    return f;
}

inline QuadForm diagonal_form(const std::vector<double>& diag) {
    Vec v = Eigen::Map<const Vec>(diag.data(), static_cast<Eigen::Index>(diag.size()));
    return decompose(Mat(v.asDiagonal()));
}

inline QuadForm with_shift(const QuadForm& f, const Vec& shift) {
    return decompose(f.matrix, shift, f.exact.entries, {}, f.tag);
}

inline QuadForm scaled(const QuadForm& f, double c) {
    return decompose(f.matrix * c, f.shift, {}, {}, f.tag);
}

// ------------------------------------------------------------ rationality

enum class RationalityHint { integer_entries, rational_entries, irrational_or_unknown };

inline const char* to_string(RationalityHint h) {
    switch (h) {
        case RationalityHint::integer_entries: return "integer-entries";
        case RationalityHint::rational_entries: return "rational-entries";
        default: return "irrational-or-unknown";
    }
}

struct SpectralReport {
    RationalityHint rationality_hint = RationalityHint::irrational_or_unknown;
    std::optional<Frac> scale_to_integer;
    // Set when the entry ratios reconstruct although the entries do not,
    // i.e. the form is a real multiple of an integer form.
    bool proportional_rational = false;
    std::string norm = "frobenius";
};

inline SpectralReport classify_rationality(const QuadForm& f, std::int64_t denominator_cap) {
    require(denominator_cap >= 1, "denominator_cap must be >= 1");
    SpectralReport rep;
    const int d = f.dim;
    std::int64_t l = 1;
    bool ok = true;
    for (int i = 0; i < d && ok; ++i)
        for (int j = 0; j < d && ok; ++j) {
            std::optional<Frac> fr = f.exact.entries[static_cast<std::size_t>(i * d + j)];
            if (!fr) fr = reconstruct_rational(f.matrix(i, j), denominator_cap);
            if (!fr || fr->den > denominator_cap) { ok = false; break; }
            l = checked_lcm(l, fr->den);
            if (l > denominator_cap) ok = false;
        }
    if (ok) {
        rep.scale_to_integer = Frac{l, 1};
        rep.rationality_hint = l == 1 ? RationalityHint::integer_entries : RationalityHint::rational_entries;
        rep.proportional_rational = true;
        return rep;
    }
    double ref = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (std::fabs(f.matrix(i, j)) > std::fabs(ref)) ref = f.matrix(i, j);
    bool prop = true;
    for (int i = 0; i < d && prop; ++i)
        for (int j = 0; j < d && prop; ++j) {
            double ratio = f.matrix(i, j) / ref;
            auto fr = reconstruct_rational(ratio, denominator_cap);
            if (!fr) prop = false;
        }
    rep.proportional_rational = prop;
    return rep;
}

// ------------------------------------------------------------------- JSON

inline QuadForm form_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("form must be a JSON object");
    std::vector<Scalar> entries;
    int d = 0;
    std::string tag;
    if (j.contains("diag")) {
        const auto& dg = j.at("diag");
        if (!dg.is_array() || dg.empty()) throw ParseError("diag must be a nonempty array");
        d = static_cast<int>(dg.size());
        entries.assign(static_cast<std::size_t>(d * d), Scalar{0.0, Frac{0, 1}, "0"});
        std::string t = "diag(";
        for (int i = 0; i < d; ++i) {
            entries[static_cast<std::size_t>(i * d + i)] = parse_scalar(dg[static_cast<std::size_t>(i)]);
            t += (i ? "," : "") + entries[static_cast<std::size_t>(i * d + i)].text;
        }
        tag = t + ")";
    } else if (j.contains("entries")) {
        const auto& rows = j.at("entries");
        if (!rows.is_array() || rows.empty()) throw ParseError("entries must be a nonempty array of rows");
        d = static_cast<int>(rows.size());
        if (j.contains("dim") && j.at("dim").get<int>() != d) throw ParseError("dim does not match entries");
        entries.resize(static_cast<std::size_t>(d * d));
        std::string t = "[";
        for (int i = 0; i < d; ++i) {
            const auto& row = rows[static_cast<std::size_t>(i)];
            if (!row.is_array() || static_cast<int>(row.size()) != d) throw ParseError("entries must be a square array");
            t += i ? ",[" : "[";
            for (int k = 0; k < d; ++k) {
                entries[static_cast<std::size_t>(i * d + k)] = parse_scalar(row[static_cast<std::size_t>(k)]);
                t += (k ? "," : "") + entries[static_cast<std::size_t>(i * d + k)].text;
            }
            t += "]";
        }
        tag = t + "]";
    } else {
        throw ParseError("form needs \"diag\" or \"entries\"");
    }
    if (j.contains("tag")) tag = j.at("tag").get<std::string>();
    Mat m(d, d);
    std::vector<std::optional<Frac>> ex(static_cast<std::size_t>(d * d));
    for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k) {
            m(i, k) = entries[static_cast<std::size_t>(i * d + k)].value;
            ex[static_cast<std::size_t>(i * d + k)] = entries[static_cast<std::size_t>(i * d + k)].exact;
        }
    Vec shift = Vec::Zero(d);
    std::vector<std::optional<Frac>> sx(static_cast<std::size_t>(d), Frac{0, 1});
    if (j.contains("shift")) {
        const auto& s = j.at("shift");
        if (!s.is_array() || static_cast<int>(s.size()) != d) throw ParseError("shift must have length dim");
        for (int i = 0; i < d; ++i) {
            Scalar sc = parse_scalar(s[static_cast<std::size_t>(i)]);
            shift(i) = sc.value;
            sx[static_cast<std::size_t>(i)] = sc.exact;
        }
    }
    return decompose(m, shift, ex, sx, tag);
}

inline QuadForm load_form(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open form file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed form file " + path + ": " + e.what());
    }
    return form_from_json(j);
}

inline nlohmann::json form_to_json(const QuadForm& f) {
    nlohmann::json j;
    j["dim"] = f.dim;
    j["tag"] = f.tag;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < f.dim; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < f.dim; ++k) row.push_back(f.matrix(i, k));
        rows.push_back(row);
    }
    j["entries"] = rows;
    if (f.has_shift()) j["shift"] = std::vector<double>(f.shift.data(), f.shift.data() + f.dim);
    j["signature"] = {f.p, f.q_neg};
    j["q0"] = f.q0;
    j["q_max"] = f.q_max;
    j["det_abs"] = f.det_abs;
    return j;
}

}  // namespace opplab

#endif
