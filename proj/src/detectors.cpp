#include "subpix/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace subpix::detect {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(const TrainingSummary& ts, const Vector& y, const Vector& t) {
    if (y.size() != ts.p)
        throw DimensionMismatch("detector: pixel length does not match p");
    if (t.size() != ts.p)
        throw DimensionMismatch("detector: target length does not match p");
}

// Whitened target energy t^T S^{-1} t; a signature with no energy is a
// configuration error, not evidence.
double target_energy(const TrainingSummary& ts, const Vector& t) {
    const double energy = t.dot(ts.scatter_inv * t);
    if (!std::isfinite(energy) || !(energy > 1e-300))
        throw ZeroVector("detector: target signature has zero energy");
    return energy;
}

// Real roots of a x^2 + b x + c, numerically stable split.
int solve_quadratic(double a, double b, double c, double roots[2]) {
    if (a == 0.0) {
        if (b == 0.0) return 0;
        roots[0] = -c / b;
        return 1;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return 0;
    const double s = std::sqrt(disc);
    const double q = -0.5 * (b + std::copysign(s, b));
    roots[0] = q / a;
    if (q != 0.0) {
        roots[1] = c / q;
        return 2;
    }
    roots[1] = 0.0;
    return 2;
}

double golden_min(const std::function<double(double)>& f, double lo, double hi,
                  int iters) {
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < iters; ++k) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 <= f2 ? x1 : x2;
}

struct Candidate {
    double param = 0.0;
    double value = kInf;
};

void consider(Candidate& best, double param,
              const std::function<double(double)>& f) {
    const double v = f(param);
    if (std::isfinite(param) && v < best.value) best = {param, v};
}

// Accept the stationary root only if it is a local minimum; otherwise fall
// back to a bracketed scalar search in log beta.
Candidate minimize_with_fallback(const std::function<double(double)>& obj_beta,
                                 const std::vector<double>& beta_candidates) {
    Candidate best;
    for (double b : beta_candidates)
        if (b > 0.0) consider(best, b, obj_beta);

    bool need_fallback = !std::isfinite(best.value);
    if (!need_fallback) {
        const double h = std::max(1e-7, 1e-7 * best.param);
        const double tol = 1e-10 * (1.0 + std::abs(best.value));
        if (obj_beta(best.param + h) < best.value - tol ||
            obj_beta(best.param - h) < best.value - tol)
            need_fallback = true;
    }
    if (need_fallback) {
        const auto in_log = [&](double u) { return obj_beta(std::exp(u)); };
        const double u =
            golden_min(in_log, std::log(1e-8), std::log(1e8), 160);
        consider(best, std::exp(u), obj_beta);
    }
    if (!std::isfinite(best.param))
        throw NoConvergence("detector: scalar minimization failed");
    return best;
}

}  // namespace

TrainingSummary summarize(const Matrix& samples) {
    TrainingSummary ts;
    ts.p = static_cast<int>(samples.rows());
    ts.n = static_cast<int>(samples.cols());
    auto sc = linalg::scatter(samples);
    ts.mean = std::move(sc.mean);
    ts.scatter = std::move(sc.scatter);
    const auto llt = linalg::cholesky(ts.scatter);
    ts.scatter_inv = llt.solve(Matrix::Identity(ts.p, ts.p));
    ts.scatter_inv =
        (0.5 * (ts.scatter_inv + ts.scatter_inv.transpose())).eval();
    ts.whitener = linalg::inv_sqrt(ts.scatter);
    return ts;
}

double glr_objective(const TrainingSummary& ts, const Vector& y,
                     const Vector& t, double alpha, double beta) {
    check_inputs(ts, y, t);
    if (!(beta > 0.0)) return kInf;
    const Vector d = (y - alpha * t) / beta - ts.mean;
    const double q = d.dot(ts.scatter_inv * d);
    const double c = ts.n / (ts.n + 1.0);
    return ts.p * std::log(beta) + 0.5 * (ts.n + 1.0) * std::log1p(c * q);
}

DetectionOutcome kelly(const TrainingSummary& ts, const Vector& y,
                       const Vector& t) {
    check_inputs(ts, y, t);
    const double energy = target_energy(ts, t);
    const Vector centered = y - ts.mean;
    const Vector sit = ts.scatter_inv * t;
    const double gain = centered.dot(sit);
    const double q = centered.dot(ts.scatter_inv * centered);
    const double c = ts.n / (ts.n + 1.0);
    DetectionOutcome out;
    out.alpha_hat = gain / energy;
    out.beta_hat = 1.0;
    out.statistic = c * gain * gain / ((1.0 + c * q) * energy);
    return out;
}

double additive_log_glr(const TrainingSummary& ts, const Vector& y,
                        const Vector& t) {
    return -std::log1p(-kelly(ts, y, t).statistic);
}

DetectionOutcome acute(const TrainingSummary& ts, const Vector& y,
                       const Vector& t) {
    check_inputs(ts, y, t);
    target_energy(ts, t);
    const Vector a = ts.whitener * (y - ts.mean);
    const Vector b = ts.whitener * (t - ts.mean);
    const double qa = a.squaredNorm();
    const double qab = a.dot(b);
    const double qb = b.squaredNorm();
    const double n1 = ts.n + 1.0;
    const double c = ts.n / n1;
    const double p = ts.p;

    // Stationarity of p ln(1-alpha) + ((n+1)/2) ln[1 + c |a - alpha b|^2 /
    // (1-alpha)^2] cleared of denominators: a quadratic in alpha.
    const double c2 = -p * (1.0 + c * qb);
    const double c1 = 2.0 * p * (1.0 + c * qab) + n1 * c * (qb - qab);
    const double c0 = -p * (1.0 + c * qa) + n1 * c * (qa - qab);

    const auto objective = [&](double alpha) {
        return glr_objective(ts, y, t, alpha, 1.0 - alpha);
    };
    const auto obj_beta = [&](double beta) {
        return glr_objective(ts, y, t, 1.0 - beta, beta);
    };

    double roots[2];
    const int count = solve_quadratic(c2, c1, c0, roots);
    std::vector<double> betas = {1.0};  // the H0 point keeps the GLR >= 1
    for (int k = 0; k < count; ++k)
        if (std::isfinite(roots[k]) && roots[k] < 1.0)
            betas.push_back(1.0 - roots[k]);

    const Candidate best = minimize_with_fallback(obj_beta, betas);
    DetectionOutcome out;
    out.beta_hat = best.param;
    out.alpha_hat = 1.0 - best.param;
    out.statistic = (2.0 / n1) * (objective(0.0) - best.value);
    return out;
}

DetectionOutcome spade(const TrainingSummary& ts, const Vector& y,
                       const Vector& t) {
    check_inputs(ts, y, t);
    const double energy = target_energy(ts, t);
    const Vector sit = ts.scatter_inv * t;
    const Vector s = ts.whitener * t;
    const double s2 = s.squaredNorm();
    const Vector wy = ts.whitener * y;
    const Vector wz = ts.whitener * ts.mean;
    const Vector u = wy - s * (s.dot(wy) / s2);
    const Vector v = wz - s * (s.dot(wz) / s2);
    const double qu = u.squaredNorm();
    const double quv = u.dot(v);
    const double qv = v.squaredNorm();
    const double n1 = ts.n + 1.0;
    const double c = ts.n / n1;
    const double p = ts.p;

    const auto alpha_ls = [&](double beta) {
        return (y - beta * ts.mean).dot(sit) / energy;
    };
    const auto obj_beta = [&](double beta) {
        return glr_objective(ts, y, t, alpha_ls(beta), beta);
    };

    // d/dbeta of p ln beta + ((n+1)/2) ln[1 + c |u - beta v|^2 / beta^2],
    // cleared of beta^3: one sign change, hence a unique positive root.
    const double c2 = p * (1.0 + c * qv);
    const double c1 = c * quv * (n1 - 2.0 * p);
    const double c0 = -c * qu * (n1 - p);

    double roots[2];
    const int count = solve_quadratic(c2, c1, c0, roots);
    std::vector<double> betas = {1.0};  // beta = 1 slice nests the additive GLR
    for (int k = 0; k < count; ++k)
        if (std::isfinite(roots[k]) && roots[k] > 0.0) betas.push_back(roots[k]);

    const Candidate best = minimize_with_fallback(obj_beta, betas);
    DetectionOutcome out;
    out.beta_hat = best.param;
    out.alpha_hat = alpha_ls(best.param);
    out.statistic =
        (2.0 / n1) * (glr_objective(ts, y, t, 0.0, 1.0) - best.value);
    return out;
}

double profile_glr(const Vector& y, const Matrix& Z, const Vector& t,
                   dist::ModelKind kind, dist::Family family, double nu) {
    const dist::JointSample js{y, Z};
    const double n1 = static_cast<double>(Z.cols()) + 1.0;
    // Extreme nuisance values can push the pooled scatter past double
    // conditioning; treat those points as arbitrarily bad fits.
    const auto pll = [&](double alpha, double beta) {
        try {
            return dist::profile_log_likelihood(js, t, alpha, beta, nu, family);
        } catch (const NotPositiveDefinite&) {
            return -kInf;
        }
    };
    const double base = pll(0.0, 1.0);

    double best = base;
    switch (kind) {
        case dist::ModelKind::additive: {
            const auto neg = [&](double alpha) { return -pll(alpha, 1.0); };
            const double ah = golden_min(neg, -1e6, 1e6, 200);
            best = pll(ah, 1.0);
            break;
        }
        case dist::ModelKind::replacement: {
            const auto neg = [&](double u) {
                const double beta = std::exp(u);
                return -pll(1.0 - beta, beta);
            };
            const double uh = golden_min(neg, std::log(1e-6), std::log(1e6), 160);
            best = -neg(uh);
            break;
        }
        case dist::ModelKind::mixed: {
            // neg_profile(beta) = -max_alpha pll(alpha, beta)
            const auto neg_profile = [&](double beta) {
                const auto neg = [&](double alpha) { return -pll(alpha, beta); };
                const double ah = golden_min(neg, -1e6, 1e6, 150);
                return -pll(ah, beta);
            };
            const auto outer = [&](double u) {
                return neg_profile(std::exp(u));
            };
            const double uh = golden_min(outer, std::log(1e-6), std::log(1e6), 140);
            best = -neg_profile(std::exp(uh));
            break;
        }
    }
    best = std::max(best, base);  // the H0 point is always feasible
    return (2.0 / n1) * (best - base);
}

double gaussian_glr(const Vector& y, const Matrix& Z, const Vector& t,
                    dist::ModelKind kind) {
    return profile_glr(y, Z, t, kind, dist::Family::gaussian, 0.0);
}

}  // namespace subpix::detect
