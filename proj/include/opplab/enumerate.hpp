#ifndef OPPLAB_ENUMERATE_HPP
#define OPPLAB_ENUMERATE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace opplab {

// Fincke-Pohst data for a positive definite Gram matrix G:
//   G[x] = sum_i qd[i] * (x_i + sum_{j>i} mu(i,j) x_j)^2.
// Coordinate n-1 is enumerated first.
struct FinckePohst {
    int n = 0;
    std::vector<double> qd;
    Eigen::MatrixXd mu;

    static FinckePohst from_gram(const Eigen::MatrixXd& gram) {
        FinckePohst fp;
        fp.n = static_cast<int>(gram.rows());
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success) throw NumericalBreakdown("Gram matrix not positive definite");
        Eigen::MatrixXd r = llt.matrixU();
        fp.qd.resize(static_cast<std::size_t>(fp.n));
        fp.mu = Eigen::MatrixXd::Zero(fp.n, fp.n);
        for (int i = 0; i < fp.n; ++i) {
            fp.qd[static_cast<std::size_t>(i)] = r(i, i) * r(i, i);
            for (int j = i + 1; j < fp.n; ++j) fp.mu(i, j) = r(i, j) / r(i, i);
        }
        return fp;
    }

    // Integer range of the outermost coordinate for radius^2 R2.
    std::int64_t top_bound(double R2) const {
        return static_cast<std::int64_t>(std::floor(std::sqrt(std::max(0.0, R2) / qd[static_cast<std::size_t>(n - 1)]) + 1e-9));
    }

    // Calls f(x, G[x]) for every integer x with G[x] <= R2 and x_{n-1} = top.
    // Returns the number of points visited.
    template <class F>
    std::uint64_t enumerate(double R2, std::int64_t top, F&& f) const {
        std::vector<std::int64_t> x(static_cast<std::size_t>(n), 0);
        std::vector<double> center(static_cast<std::size_t>(n), 0.0), partial(static_cast<std::size_t>(n + 1), 0.0);
        std::vector<std::int64_t> hi(static_cast<std::size_t>(n), 0);
        const double slack = 1e-12 * std::max(1.0, R2);
        std::uint64_t visited = 0;
        int k = n - 1;
        partial[static_cast<std::size_t>(n)] = 0.0;
        auto set_range = [&](int lvl) -> bool {
            std::size_t l = static_cast<std::size_t>(lvl);
            double c = 0.0;
            for (int j = lvl + 1; j < n; ++j) c -= mu(lvl, j) * static_cast<double>(x[static_cast<std::size_t>(j)]);
            center[l] = c;
            double rem = R2 - partial[l + 1] + slack;
            if (rem < 0) return false;
            double w = std::sqrt(rem / qd[l]);
            std::int64_t lo = static_cast<std::int64_t>(std::ceil(c - w));
            hi[l] = static_cast<std::int64_t>(std::floor(c + w));
            if (lvl == n - 1) {
                if (top < lo || top > hi[l]) return false;
                x[l] = top;
                hi[l] = top;
            } else {
                if (lo > hi[l]) return false;
                x[l] = lo;
            }
            return true;
        };
        if (!set_range(k)) return 0;
        for (;;) {
            std::size_t l = static_cast<std::size_t>(k);
            if (x[l] > hi[l]) {
                ++k;
                if (k >= n) break;
                ++x[static_cast<std::size_t>(k)];
                continue;
            }
            double diff = static_cast<double>(x[l]) - center[l];
            partial[l] = partial[l + 1] + qd[l] * diff * diff;
            if (k == 0) {
                ++visited;
                if (partial[0] <= R2 + slack) f(x, partial[0]);
                ++x[0];
                continue;
            }
            --k;
            if (!set_range(k)) {
                ++k;
                ++x[static_cast<std::size_t>(k)];
            }
        }
        return visited;
    }
};

}  // namespace opplab

#endif
