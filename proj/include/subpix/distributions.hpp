#pragma once

#include "subpix/linalg.hpp"
#include "subpix/rng.hpp"

// Sampling and density evaluation for the joint matrix-variate t and Gaussian
// background laws, plus the concentrated (profile) log-likelihoods the
// detectors are built from.
namespace subpix::dist {

enum class Family { student, gaussian };
enum class ModelKind { additive, replacement, mixed };
enum class Hypothesis { h0, h1 };

// Background law of a single spectrum: mean mu, covariance sigma, and for the
// student family the degrees of freedom nu (> 2 so that sigma really is the
// covariance).
struct BackgroundModel {
    Vector mu;
    Matrix sigma;
    double nu = 0.0;
    Family family = Family::student;
};

// Target mixing scenario. The factories keep the per-kind beta ties intact:
// additive pins beta = 1, replacement pins beta = 1 - alpha.
struct Scenario {
    Vector t;
    double alpha = 0.0;
    double beta = 1.0;
    ModelKind model = ModelKind::additive;
    Hypothesis hypothesis = Hypothesis::h0;

    static Scenario additive(Vector t, double alpha, Hypothesis h);
    static Scenario replacement(Vector t, double alpha, Hypothesis h);
    static Scenario mixed(Vector t, double alpha, double beta, Hypothesis h);
};

// One pixel under test plus its training matrix.
struct JointSample {
    Vector y;
    Matrix Z;
};

// ln Gamma_p(a) = (p(p-1)/4) ln pi + sum_i ln Gamma(a + (1-i)/2).
double multivariate_gamma_log(int p, double a);

void validate(const BackgroundModel& model);

// Draws [z0, Z] jointly from the background law (all n+1 columns share the
// mean mu and, under the student family, one Wishart mixing matrix), then
// forms y = z0 under H0 and y = alpha t + beta z0 under H1.
JointSample sample_joint(const BackgroundModel& model, const Scenario& scenario,
                         int n, RngStream& rng);

// Same sampler with the symmetric covariance root cached across draws.
class JointSampler {
public:
    explicit JointSampler(BackgroundModel model);
    JointSample sample(const Scenario& scenario, int n, RngStream& rng) const;
    const BackgroundModel& model() const { return model_; }

private:
    BackgroundModel model_;
    Matrix sigma_sqrt_;
};

// Joint log density of (y, Z) under the scenario's hypothesis, normalizing
// constant included. Returns -infinity when beta <= 0 so scalar minimizers
// stay total on the open boundary.
double log_pdf(const JointSample& sample, const BackgroundModel& model,
               const Scenario& scenario);

// Log of the density maximized over both mu and sigma, at fixed (alpha, beta).
// The H0 value is the (alpha = 0, beta = 1) point. Requires n > p.
double profile_log_likelihood(const JointSample& sample, const Vector& target,
                              double alpha, double beta, double nu,
                              Family family);

}  // namespace subpix::dist
