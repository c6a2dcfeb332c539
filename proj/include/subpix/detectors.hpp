#pragma once

#include "subpix/distributions.hpp"
#include "subpix/linalg.hpp"

// The three GLR statistics: generalized Kelly (additive model), ACUTE
// (replacement model, beta = 1 - alpha) and SPADE (mixed model, beta free),
// plus the generic GLR objective they all minimize and a profile-likelihood
// route used for equivalence testing.
namespace subpix::detect {

// Sufficient statistics of one training set, computed once and shared across
// many pixels under test.
struct TrainingSummary {
    Vector mean;        // sample mean of the training columns
    Matrix scatter;     // centered scatter S
    Matrix scatter_inv; // S^{-1}
    Matrix whitener;    // symmetric S^{-1/2}
    int n = 0;
    int p = 0;
};

struct DetectionOutcome {
    double statistic = 0.0;  // monotone GLR score; ACUTE/SPADE report
                             // (2/(n+1)) ln GLR, Kelly its [0,1) form
    double alpha_hat = 0.0;
    double beta_hat = 1.0;
};

TrainingSummary summarize(const Matrix& samples);

// Log of the GLR denominator integrand at (alpha, beta):
//   p ln beta + ((n+1)/2) ln[1 + (n/(n+1)) q(alpha, beta)]
// with q the whitened quadratic form of (y - alpha t)/beta - mean. The
// numerator term is the same call at alpha = 0, beta = 1. Returns +infinity
// for beta <= 0.
double glr_objective(const TrainingSummary& ts, const Vector& y,
                     const Vector& t, double alpha, double beta);

DetectionOutcome kelly(const TrainingSummary& ts, const Vector& y,
                       const Vector& t);
DetectionOutcome acute(const TrainingSummary& ts, const Vector& y,
                       const Vector& t);
DetectionOutcome spade(const TrainingSummary& ts, const Vector& y,
                       const Vector& t);

// Additive-model GLR in the (2/(n+1)) ln form; the beta = 1 slice the mixed
// model statistic must dominate.
double additive_log_glr(const TrainingSummary& ts, const Vector& y,
                        const Vector& t);

// (2/(n+1)) ln GLR computed by numerically extremizing the concentrated
// likelihood of dist::profile_log_likelihood over the model's nuisance set.
// Slow; used for equivalence testing against the closed forms.
double profile_glr(const Vector& y, const Matrix& Z, const Vector& t,
                   dist::ModelKind kind, dist::Family family, double nu);

// The Gaussian route of the same ratio.
double gaussian_glr(const Vector& y, const Matrix& Z, const Vector& t,
                    dist::ModelKind kind);

}  // namespace subpix::detect
