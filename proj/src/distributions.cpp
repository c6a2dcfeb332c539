#include "subpix/distributions.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace subpix::dist {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ln C of the joint matrix-t density with m = n + 1 columns, the (nu-2)
// scale-matrix contribution included so the density integrates to one.
double log_matrix_t_constant(int p, int n, double nu) {
    const double m = n + 1.0;
    return multivariate_gamma_log(p, 0.5 * (nu + n + p)) -
           0.5 * p * m * std::log(M_PI) -
           multivariate_gamma_log(p, 0.5 * (nu + p - 1.0)) -
           0.5 * p * m * std::log(nu - 2.0);
}

void check_dims(const JointSample& sample, const BackgroundModel& model,
                const Scenario& scenario) {
    const auto p = sample.y.size();
    if (sample.Z.rows() != p)
        throw DimensionMismatch("log_pdf: y and Z band counts differ");
    if (model.mu.size() != p)
        throw DimensionMismatch("log_pdf: model mean has wrong length");
    if (model.sigma.rows() != p || model.sigma.cols() != p)
        throw DimensionMismatch("log_pdf: covariance has wrong shape");
    if (scenario.hypothesis == Hypothesis::h1 && scenario.t.size() != p)
        throw DimensionMismatch("log_pdf: target signature has wrong length");
}

}  // namespace

double multivariate_gamma_log(int p, double a) {
    if (p < 1) throw DomainError("multivariate_gamma_log: p must be >= 1");
    if (!(a > 0.5 * (p - 1)))
        throw DomainError(
            "multivariate_gamma_log: argument must exceed (p-1)/2");
    double sum = 0.25 * p * (p - 1) * std::log(M_PI);
    for (int i = 1; i <= p; ++i) sum += std::lgamma(a + 0.5 * (1.0 - i));
    return sum;
}

void validate(const BackgroundModel& model) {
    if (model.mu.size() < 1)
        throw DimensionMismatch("background model: empty mean");
    if (model.sigma.rows() != model.mu.size() ||
        model.sigma.cols() != model.mu.size())
        throw DimensionMismatch("background model: covariance shape mismatch");
    if (model.family == Family::student && !(model.nu > 2.0))
        throw DomainError(
            "background model: nu must exceed 2 for the student family");
}

Scenario Scenario::additive(Vector t, double alpha, Hypothesis h) {
    Scenario s;
    s.t = std::move(t);
    s.alpha = alpha;
    s.beta = 1.0;
    s.model = ModelKind::additive;
    s.hypothesis = h;
    return s;
}

Scenario Scenario::replacement(Vector t, double alpha, Hypothesis h) {
    if (!(alpha < 1.0))
        throw DomainError(
            "replacement scenario: alpha must stay below 1 so beta = 1 - "
            "alpha is positive");
    Scenario s;
    s.t = std::move(t);
    s.alpha = alpha;
    s.beta = 1.0 - alpha;
    s.model = ModelKind::replacement;
    s.hypothesis = h;
    return s;
}

Scenario Scenario::mixed(Vector t, double alpha, double beta, Hypothesis h) {
    if (!(beta > 0.0))
        throw DomainError("mixed scenario: beta must be positive");
    Scenario s;
    s.t = std::move(t);
    s.alpha = alpha;
    s.beta = beta;
    s.model = ModelKind::mixed;
    s.hypothesis = h;
    return s;
}

JointSampler::JointSampler(BackgroundModel model) : model_(std::move(model)) {
    validate(model_);
    sigma_sqrt_ = linalg::sqrt_spd(model_.sigma);
}

JointSample JointSampler::sample(const Scenario& scenario, int n,
                                 RngStream& rng) const {
    const auto p = model_.mu.size();
    if (n <= p)
        throw DomainError("sample_joint: needs n > p training samples");
    if (scenario.hypothesis == Hypothesis::h1 && scenario.t.size() != p)
        throw DimensionMismatch("sample_joint: target length mismatch");
    if (scenario.hypothesis == Hypothesis::h1 && !(scenario.beta > 0.0))
        throw DomainError("sample_joint: beta must be positive");

    Matrix noise(p, n + 1);
    for (Eigen::Index j = 0; j < n + 1; ++j)
        for (Eigen::Index i = 0; i < p; ++i) noise(i, j) = rng.normal();

    Matrix draw;
    if (model_.family == Family::student) {
        // Bartlett factor of a Wishart(nu + p - 1, I) draw.
        const double dof = model_.nu + p - 1.0;
        Matrix bart = Matrix::Zero(p, p);
        for (Eigen::Index i = 0; i < p; ++i) {
            bart(i, i) = std::sqrt(rng.chi_square(dof - i));
            for (Eigen::Index j = 0; j < i; ++j) bart(i, j) = rng.normal();
        }
        const Matrix wishart = bart * bart.transpose();
        draw = std::sqrt(model_.nu - 2.0) *
               (sigma_sqrt_ * linalg::inv_sqrt(wishart)) * noise;
    } else {
        draw = sigma_sqrt_ * noise;
    }
    draw.colwise() += model_.mu;

    JointSample out;
    out.Z = draw.rightCols(n);
    if (scenario.hypothesis == Hypothesis::h1) {
        out.y = scenario.alpha * scenario.t + scenario.beta * draw.col(0);
    } else {
        out.y = draw.col(0);
    }
    return out;
}

JointSample sample_joint(const BackgroundModel& model, const Scenario& scenario,
                         int n, RngStream& rng) {
    return JointSampler(model).sample(scenario, n, rng);
}

double log_pdf(const JointSample& sample, const BackgroundModel& model,
               const Scenario& scenario) {
    validate(model);
    check_dims(sample, model, scenario);
    const int p = static_cast<int>(sample.y.size());
    const int n = static_cast<int>(sample.Z.cols());
    const double m = n + 1.0;

    double alpha = 0.0, beta = 1.0;
    if (scenario.hypothesis == Hypothesis::h1) {
        alpha = scenario.alpha;
        beta = scenario.beta;
        if (!(beta > 0.0)) return kNegInf;
    }

    Matrix resid(p, n + 1);
    resid.col(0) = (sample.y - alpha * scenario.t) / beta - model.mu;
    resid.rightCols(n) = sample.Z.colwise() - model.mu;

    const auto llt = linalg::cholesky(model.sigma);
    const double ld_sigma =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const Matrix white = llt.matrixL().solve(resid);

    double value;
    if (model.family == Family::student) {
        const double nu = model.nu;
        Matrix inner = Matrix::Identity(p, p) +
                       white * white.transpose() / (nu - 2.0);
        inner = (0.5 * (inner + inner.transpose())).eval();
        value = log_matrix_t_constant(p, n, nu) - 0.5 * m * ld_sigma -
                0.5 * (nu + n + p) * linalg::logdet(inner);
    } else {
        value = -0.5 * p * m * std::log(2.0 * M_PI) - 0.5 * m * ld_sigma -
                0.5 * white.squaredNorm();
    }
    if (scenario.hypothesis == Hypothesis::h1) value -= p * std::log(beta);
    return value;
}

double profile_log_likelihood(const JointSample& sample, const Vector& target,
                              double alpha, double beta, double nu,
                              Family family) {
    const int p = static_cast<int>(sample.y.size());
    const int n = static_cast<int>(sample.Z.cols());
    if (sample.Z.rows() != p)
        throw DimensionMismatch("profile_log_likelihood: y/Z band mismatch");
    if (target.size() != p)
        throw DimensionMismatch("profile_log_likelihood: target length");
    if (n <= p)
        throw DomainError("profile_log_likelihood: requires n > p");
    if (family == Family::student && !(nu > 2.0))
        throw DomainError("profile_log_likelihood: nu must exceed 2");
    if (!(beta > 0.0)) return kNegInf;

    const double m = n + 1.0;
    const Vector ytilde = (sample.y - alpha * target) / beta;

    // Scatter of the n+1 centered columns, P_perp applied in expanded form.
    const Vector total = ytilde + sample.Z.rowwise().sum();
    Matrix g = ytilde * ytilde.transpose() + sample.Z * sample.Z.transpose() -
               total * total.transpose() / m;
    g = (0.5 * (g + g.transpose())).eval();
    const double ld = linalg::logdet(g);

    if (family == Family::student) {
        const double gamma_factor = (nu + p - 1.0) / ((nu - 2.0) * m);
        const double log_c_prime =
            log_matrix_t_constant(p, n, nu) -
            0.5 * p * m * std::log(gamma_factor) -
            0.5 * p * (nu + n + p) * std::log((nu + n + p) / (nu + p - 1.0));
        return log_c_prime - 0.5 * m * ld - p * std::log(beta);
    }
    const double log_c_prime =
        -0.5 * p * m * std::log(2.0 * M_PI) + 0.5 * p * m * std::log(m) -
        0.5 * p * m;
    return log_c_prime - 0.5 * m * ld - p * std::log(beta);
}

}  // namespace subpix::dist
