#pragma once

// Shared helpers for the test suites. The oracles here (cofactor determinant,
// grid/golden scalar search, Student-t CDF) are written independently of the
// library code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "subpix/linalg.hpp"
#include "subpix/rng.hpp"

namespace testsupport {

using subpix::Matrix;
using subpix::Vector;

inline Vector random_vector(subpix::RngStream& rng, int p) {
    Vector v(p);
    for (int i = 0; i < p; ++i) v(i) = rng.normal();
    return v;
}

inline Matrix random_matrix(subpix::RngStream& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

inline Matrix random_spd(subpix::RngStream& rng, int p, double ridge = 0.5) {
    const Matrix a = random_matrix(rng, p, p);
    return a * a.transpose() + ridge * Matrix::Identity(p, p);
}

// SPD matrix with a prescribed condition number via a random orthogonal basis.
inline Matrix random_spd_with_condition(subpix::RngStream& rng, int p,
                                        double condition) {
    const Matrix a = random_matrix(rng, p, p);
    const Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
    Vector eigs(p);
    for (int i = 0; i < p; ++i)
        eigs(i) = std::pow(condition, static_cast<double>(i) / (p - 1));
    return q * eigs.asDiagonal() * q.transpose();
}

// Random invertible matrix with moderate condition, for affine invariance.
inline Matrix random_invertible(subpix::RngStream& rng, int p) {
    const Matrix a = random_matrix(rng, p, p);
    const Matrix q1 = Eigen::HouseholderQR<Matrix>(a).householderQ();
    const Matrix b = random_matrix(rng, p, p);
    const Matrix q2 = Eigen::HouseholderQR<Matrix>(b).householderQ();
    Vector vals(p);
    for (int i = 0; i < p; ++i)
        vals(i) = 0.5 + 2.5 * (i / std::max(1.0, p - 1.0));
    return q1 * vals.asDiagonal() * q2.transpose();
}

// Cofactor-expansion determinant, O(n!), usable up to 4x4.
inline double naive_det(const Matrix& m) {
    const auto n = m.rows();
    if (n == 1) return m(0, 0);
    double det = 0.0;
    double sign = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        Matrix minor(n - 1, n - 1);
        for (Eigen::Index i = 1; i < n; ++i) {
            Eigen::Index col = 0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == k) continue;
                minor(i - 1, col++) = m(i, j);
            }
        }
        det += sign * m(0, k) * naive_det(minor);
        sign = -sign;
    }
    return det;
}

inline double rel_gap(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

struct ScalarMin {
    double x = 0.0;
    double value = std::numeric_limits<double>::infinity();
};

// Dense grid followed by golden-section refinement around the best cell.
inline ScalarMin grid_golden_min(const std::function<double(double)>& f,
                                 double lo, double hi, long cells,
                                 int golden_iters = 140) {
    ScalarMin best;
    for (long k = 0; k <= cells; ++k) {
        const double x = lo + (hi - lo) * static_cast<double>(k) / cells;
        const double v = f(x);
        if (v < best.value) best = {x, v};
    }
    const double step = (hi - lo) / cells;
    double a = std::max(lo, best.x - step);
    double b = std::min(hi, best.x + step);
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < golden_iters; ++k) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - kInvPhi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + kInvPhi * (b - a); f2 = f(x2);
        }
    }
    if (f1 < best.value) best = {x1, f1};
    if (f2 < best.value) best = {x2, f2};
    return best;
}

// Regularized incomplete beta via Lentz's continued fraction.
inline double beta_inc(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const bool flip = x > (a + 1.0) / (a + b + 2.0);
    if (flip) {
        std::swap(a, b);
        x = 1.0 - x;
    }
    const double log_front = a * std::log(x) + b * std::log(1.0 - x) -
                             std::log(a) -
                             (std::lgamma(a) + std::lgamma(b) -
                              std::lgamma(a + b));
    constexpr double kTiny = 1e-300;
    double c = 1.0, d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < 400; ++m) {
        const double m2 = 2.0 * m;
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + num / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + num / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-14) break;
    }
    const double result = std::exp(log_front) * h;
    return flip ? 1.0 - result : result;
}

// CDF of the Student-t distribution with dof degrees of freedom.
inline double student_t_cdf(double x, double dof) {
    const double w = dof / (dof + x * x);
    const double half_tail = 0.5 * beta_inc(0.5 * dof, 0.5, w);
    return x >= 0.0 ? 1.0 - half_tail : half_tail;
}

// Two-sided Kolmogorov-Smirnov statistic against a reference CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i + 1) / n));
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    }
    return d;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double correlation(const std::vector<double>& a,
                          const std::vector<double>& b) {
    const double ma = mean_of(a), mb = mean_of(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace testsupport
