#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "subpix/distributions.hpp"
#include "support.hpp"

using namespace subpix;
using namespace testsupport;
namespace dist = subpix::dist;

namespace {

dist::BackgroundModel student_model(Vector mu, Matrix sigma, double nu) {
    return {std::move(mu), std::move(sigma), nu, dist::Family::student};
}

dist::BackgroundModel gaussian_model(Vector mu, Matrix sigma) {
    return {std::move(mu), std::move(sigma), 0.0, dist::Family::gaussian};
}

// Joint max of log_pdf over (mu, sigma) evaluated at the stationary pair the
// concentration is built on; must reproduce profile_log_likelihood exactly.
double log_pdf_at_stationary_point(const dist::JointSample& js,
                                   const Vector& t, double alpha, double beta,
                                   double nu, dist::Family family) {
    const int p = static_cast<int>(js.y.size());
    const int n = static_cast<int>(js.Z.cols());
    const Vector ytilde = (js.y - alpha * t) / beta;
    const Vector mu_hat = (ytilde + js.Z.rowwise().sum()) / (n + 1.0);
    Matrix centered(p, n + 1);
    centered.col(0) = ytilde - mu_hat;
    centered.rightCols(n) = js.Z.colwise() - mu_hat;
    const Matrix scatter = centered * centered.transpose();
    Matrix sigma_hat;
    if (family == dist::Family::student) {
        const double gamma_factor = (nu + p - 1.0) / ((nu - 2.0) * (n + 1.0));
        sigma_hat = gamma_factor * scatter;
    } else {
        sigma_hat = scatter / (n + 1.0);
    }
    const dist::BackgroundModel model{mu_hat, sigma_hat, nu, family};
    const auto scen = dist::Scenario::mixed(t, alpha, beta, dist::Hypothesis::h1);
    return dist::log_pdf(js, model, scen);
}

}  // namespace

TEST_CASE("multivariate gamma log: closed values and domain") {
    CHECK(std::abs(dist::multivariate_gamma_log(1, 1.0)) < 1e-14);
    CHECK(dist::multivariate_gamma_log(1, 0.5) ==
          doctest::Approx(0.5 * std::log(M_PI)).epsilon(1e-12));
    // Gamma_2(2) = pi^{1/2} Gamma(2) Gamma(3/2) = pi/2
    CHECK(dist::multivariate_gamma_log(2, 2.0) ==
          doctest::Approx(std::log(M_PI / 2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(dist::multivariate_gamma_log(2, 0.5), DomainError);
    CHECK_THROWS_AS(dist::multivariate_gamma_log(1, 0.0), DomainError);
}

TEST_CASE("scenario factories keep the beta ties") {
    Vector t = Vector::Ones(3);
    const auto add = dist::Scenario::additive(t, 0.3, dist::Hypothesis::h1);
    CHECK(add.beta == 1.0);
    const auto rep = dist::Scenario::replacement(t, 0.3, dist::Hypothesis::h1);
    CHECK(rep.beta == doctest::Approx(0.7));
    CHECK_THROWS_AS(dist::Scenario::replacement(t, 1.2, dist::Hypothesis::h1),
                    DomainError);
    CHECK_THROWS_AS(dist::Scenario::mixed(t, 0.1, -0.5, dist::Hypothesis::h1),
                    DomainError);
}

TEST_CASE("log_pdf: H1 at alpha=0, beta=1 equals H0 exactly") {
    RngStream rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        const int p = 3, n = 7;
        const auto model = student_model(random_vector(rng, p),
                                         random_spd(rng, p), 4.5);
        const Vector t = random_vector(rng, p);
        dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};
        const auto h0 = dist::Scenario::mixed(t, 0.7, 0.4, dist::Hypothesis::h0);
        const auto h1 = dist::Scenario::mixed(t, 0.0, 1.0, dist::Hypothesis::h1);
        CHECK(dist::log_pdf(js, model, h0) ==
              doctest::Approx(dist::log_pdf(js, model, h1)).epsilon(1e-14));
    }
}

TEST_CASE("log_pdf: scalar evaluation of the p=1, n=1 density") {
    dist::JointSample js{Vector::Zero(1), Matrix::Zero(1, 1)};
    const auto model = student_model(Vector::Zero(1), Matrix::Identity(1, 1), 3.0);
    const auto scen = dist::Scenario::additive(Vector::Ones(1), 0.0,
                                               dist::Hypothesis::h0);
    const double by_library = dist::log_pdf(js, model, scen);
    // ln[C (1+0)^{-(nu+2)/2}] with C = Gamma(2.5) / (pi Gamma(1.5))
    const double by_hand =
        std::lgamma(2.5) - std::log(M_PI) - std::lgamma(1.5);
    CHECK(std::abs(by_library - by_hand) < 1e-12);
}

TEST_CASE("log_pdf: scaling the data by c shifts the value by -p(n+1) ln c") {
    RngStream rng(12);
    const int p = 3, n = 6;
    const Vector mu = random_vector(rng, p);
    const Matrix sigma = random_spd(rng, p);
    const Vector t = random_vector(rng, p);
    dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};

    for (dist::Family family : {dist::Family::student, dist::Family::gaussian}) {
        const dist::BackgroundModel model{mu, sigma, 5.0, family};
        const auto scen =
            dist::Scenario::mixed(t, 0.4, 0.9, dist::Hypothesis::h1);
        const double base = dist::log_pdf(js, model, scen);
        const double c = 1.7;
        const dist::BackgroundModel scaled_model{c * mu, c * c * sigma, 5.0,
                                                 family};
        const dist::JointSample scaled{c * js.y, c * js.Z};
        const auto scaled_scen =
            dist::Scenario::mixed((c * t).eval(), 0.4, 0.9, dist::Hypothesis::h1);
        const double shifted = dist::log_pdf(scaled, scaled_model, scaled_scen);
        CHECK(shifted - base ==
              doctest::Approx(-p * (n + 1.0) * std::log(c)).epsilon(1e-10));
    }
}

TEST_CASE("log_pdf: beta -> 0+ yields -infinity, not an exception") {
    dist::JointSample js{Vector::Zero(2), Matrix::Identity(2, 3)};
    const auto model = student_model(Vector::Zero(2), Matrix::Identity(2, 2), 4.0);
    dist::Scenario scen =
        dist::Scenario::mixed(Vector::Ones(2), 0.2, 1.0, dist::Hypothesis::h1);
    scen.beta = 0.0;
    CHECK(std::isinf(dist::log_pdf(js, model, scen)));
    CHECK(dist::log_pdf(js, model, scen) < 0.0);
}

TEST_CASE("log_pdf integrates to one at p=1, n=1") {
    // 2-D composite Simpson over a grid capturing essentially all the mass.
    const auto integrate = [](const dist::BackgroundModel& model,
                              double half_width, int cells) {
        const auto scen = dist::Scenario::additive(Vector::Ones(1), 0.0,
                                                   dist::Hypothesis::h0);
        const double h = 2.0 * half_width / cells;
        const auto weight = [cells](int k) {
            if (k == 0 || k == cells) return 1.0;
            return k % 2 == 1 ? 4.0 : 2.0;
        };
        double sum = 0.0;
        dist::JointSample js{Vector(1), Matrix(1, 1)};
        for (int i = 0; i <= cells; ++i) {
            js.y(0) = -half_width + i * h;
            double row = 0.0;
            for (int j = 0; j <= cells; ++j) {
                js.Z(0, 0) = -half_width + j * h;
                row += weight(j) * std::exp(dist::log_pdf(js, model, scen));
            }
            sum += weight(i) * row;
        }
        return sum * h * h / 9.0;
    };

    const double student_mass = integrate(
        student_model(Vector::Zero(1), Matrix::Identity(1, 1), 5.0), 40.0, 800);
    CHECK(std::abs(student_mass - 1.0) < 1e-3);

    const double gaussian_mass = integrate(
        gaussian_model(Vector::Constant(1, 0.3), Matrix::Constant(1, 1, 1.69)),
        14.0, 400);
    CHECK(std::abs(gaussian_mass - 1.0) < 1e-6);
}

TEST_CASE("profile log likelihood equals log_pdf at the stationary pair") {
    RngStream rng(13);
    for (int rep = 0; rep < 10; ++rep) {
        const int p = 3, n = 9;
        dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};
        const Vector t = random_vector(rng, p);
        const double alpha = rng.normal();
        const double beta = 0.5 + rng.uniform();
        for (double nu : {3.0, 7.5}) {
            const double profile = dist::profile_log_likelihood(
                js, t, alpha, beta, nu, dist::Family::student);
            const double direct = log_pdf_at_stationary_point(
                js, t, alpha, beta, nu, dist::Family::student);
            CHECK(std::abs(profile - direct) < 1e-10 * std::abs(profile));
        }
        const double profile_g = dist::profile_log_likelihood(
            js, t, alpha, beta, 0.0, dist::Family::gaussian);
        const double direct_g = log_pdf_at_stationary_point(
            js, t, alpha, beta, 0.0, dist::Family::gaussian);
        CHECK(std::abs(profile_g - direct_g) < 1e-10 * std::abs(profile_g));
    }
}

TEST_CASE("numeric maximization over the mean never beats the profile") {
    RngStream rng(14);
    const int p = 2, n = 8;
    dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};
    const Vector t = random_vector(rng, p);
    const double alpha = 0.4, beta = 0.8, nu = 5.0;
    const double profile = dist::profile_log_likelihood(
        js, t, alpha, beta, nu, dist::Family::student);
    const auto scen = dist::Scenario::mixed(t, alpha, beta, dist::Hypothesis::h1);

    // Gradient-free pattern search over mu and the Cholesky factor of sigma.
    double best = -1e300;
    Vector mu = (js.y + js.Z.rowwise().sum()) / (n + 1.0);
    Matrix chol = Matrix(random_spd(rng, p).llt().matrixL());
    const auto evaluate = [&](const Vector& m, const Matrix& l) {
        const Matrix sigma = l * l.transpose();
        const dist::BackgroundModel model{m, sigma, nu, dist::Family::student};
        return dist::log_pdf(js, model, scen);
    };
    best = evaluate(mu, chol);
    double step = 0.5;
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool improved = false;
        for (int i = 0; i < p; ++i) {
            for (double dir : {step, -step}) {
                Vector trial = mu;
                trial(i) += dir;
                const double v = evaluate(trial, chol);
                if (v > best) {
                    best = v;
                    mu = trial;
                    improved = true;
                }
            }
        }
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j <= i; ++j) {
                for (double dir : {step, -step}) {
                    Matrix trial = chol;
                    trial(i, j) += dir;
                    if (i == j && trial(i, j) <= 1e-6) continue;
                    const double v = evaluate(mu, trial);
                    if (v > best) {
                        best = v;
                        chol = trial;
                        improved = true;
                    }
                }
            }
        }
        if (!improved) step *= 0.5;
        if (step < 1e-9) break;
    }
    CHECK(best <= profile + 1e-6);
    CHECK(best >= profile - 0.05);  // the search should land close
}

TEST_CASE("perturbing sigma away from the concentration point lowers log_pdf") {
    RngStream rng(15);
    const int p = 3, n = 10;
    dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};
    const double nu = 6.0;
    const Vector mu = random_vector(rng, p);

    Matrix centered(p, n + 1);
    centered.col(0) = js.y - mu;
    centered.rightCols(n) = js.Z.colwise() - mu;
    const Matrix scatter = centered * centered.transpose();
    const double gamma_factor = (nu + p - 1.0) / ((nu - 2.0) * (n + 1.0));
    const Matrix sigma_star = gamma_factor * scatter;

    const auto scen = dist::Scenario::additive(Vector::Ones(p), 0.0,
                                               dist::Hypothesis::h0);
    const double at_star = dist::log_pdf(
        js, dist::BackgroundModel{mu, sigma_star, nu, dist::Family::student},
        scen);
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix bump = 0.05 * random_spd(rng, p, 0.1);
        const double perturbed = dist::log_pdf(
            js,
            dist::BackgroundModel{mu, sigma_star + bump, nu,
                                  dist::Family::student},
            scen);
        CHECK(perturbed < at_star);
    }
}

TEST_CASE("profile ratio vanishes at the H0 point and is nu-free") {
    RngStream rng(16);
    const int p = 4, n = 12;
    dist::JointSample js{random_vector(rng, p), random_matrix(rng, p, n)};
    const Vector t = random_vector(rng, p);

    const double zero_diff =
        dist::profile_log_likelihood(js, t, 0.0, 1.0, 5.0,
                                     dist::Family::student) -
        dist::profile_log_likelihood(js, t, 0.0, 1.0, 5.0,
                                     dist::Family::student);
    CHECK(zero_diff == 0.0);

    const double gauss =
        dist::profile_log_likelihood(js, t, 0.35, 0.75, 0.0,
                                     dist::Family::gaussian) -
        dist::profile_log_likelihood(js, t, 0.0, 1.0, 0.0,
                                     dist::Family::gaussian);
    for (double nu : {2.5, 3.0, 5.0, 10.0, 100.0}) {
        const double diff =
            dist::profile_log_likelihood(js, t, 0.35, 0.75, nu,
                                         dist::Family::student) -
            dist::profile_log_likelihood(js, t, 0.0, 1.0, nu,
                                         dist::Family::student);
        CHECK(std::abs(diff - gauss) < 1e-10);
    }
}

TEST_CASE("sampler: gaussian column covariance matches the identity") {
    const int p = 3, n = 4;
    const auto model = gaussian_model(Vector::Zero(p), Matrix::Identity(p, p));
    const dist::JointSampler sampler(model);
    const auto scen = dist::Scenario::additive(Vector::Ones(p), 0.0,
                                               dist::Hypothesis::h0);
    const long draws = 25000;  // pools to 1e5 training columns
    Matrix second = Matrix::Zero(p, p);
    Vector first = Vector::Zero(p);
    long count = 0;
    RngStream rng(derive_seed(99, 1, 0));
    for (long k = 0; k < draws; ++k) {
        const auto js = sampler.sample(scen, n, rng);
        for (int c = 0; c < n; ++c) {
            const Vector col = js.Z.col(c);
            first += col;
            second += col * col.transpose();
            ++count;
        }
    }
    first /= static_cast<double>(count);
    const Matrix cov =
        second / static_cast<double>(count) - first * first.transpose();
    CHECK((cov - Matrix::Identity(p, p)).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("sampler: p=1 entry marginal is a scaled Student-t") {
    const double nu = 5.0;
    const auto model = student_model(Vector::Zero(1), Matrix::Identity(1, 1), nu);
    const dist::JointSampler sampler(model);
    const auto scen = dist::Scenario::additive(Vector::Ones(1), 0.0,
                                               dist::Hypothesis::h0);
    const long draws = 100000;
    std::vector<double> samples;
    samples.reserve(draws);
    RngStream rng(derive_seed(7, 2, 0));
    for (long k = 0; k < draws; ++k)
        samples.push_back(sampler.sample(scen, 2, rng).y(0));

    const double scale = std::sqrt((nu - 2.0) / nu);
    const double d = ks_statistic(samples, [&](double x) {
        return student_t_cdf(x / scale, nu);
    });
    const double critical = 1.628 / std::sqrt(static_cast<double>(draws));
    CHECK(d < critical);
}

TEST_CASE("sampler: H1 shifts the pixel mean by alpha t") {
    const int p = 3;
    const auto model = student_model(Vector::Zero(p), Matrix::Identity(p, p), 5.0);
    const dist::JointSampler sampler(model);
    Vector t = Vector::Zero(p);
    t(0) = 1.0;
    const auto h1 = dist::Scenario::additive(t, 1.0, dist::Hypothesis::h1);
    const auto h0 = dist::Scenario::additive(t, 1.0, dist::Hypothesis::h0);
    const long draws = 20000;
    Vector mean_h1 = Vector::Zero(p), mean_h0 = Vector::Zero(p);
    RngStream rng1(derive_seed(21, 3, 0)), rng0(derive_seed(21, 3, 0));
    for (long k = 0; k < draws; ++k) {
        mean_h1 += sampler.sample(h1, 5, rng1).y;
        mean_h0 += sampler.sample(h0, 5, rng0).y;
    }
    mean_h1 /= draws;
    mean_h0 /= draws;
    CHECK((mean_h1 - mean_h0 - t).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("sampler: column covariance converges to sigma for both families") {
    RngStream seed_rng(31);
    const int p = 4, n = 6;
    const Vector mu = random_vector(seed_rng, p);
    const Matrix sigma = random_spd(seed_rng, p, 1.0);
    const long draws = 60000;

    for (dist::Family family : {dist::Family::student, dist::Family::gaussian}) {
        const dist::BackgroundModel model{mu, sigma, 5.0, family};
        const dist::JointSampler sampler(model);
        const auto scen = dist::Scenario::additive(Vector::Ones(p), 0.0,
                                                   dist::Hypothesis::h0);
        RngStream rng(derive_seed(41, family == dist::Family::student ? 0 : 1, 0));
        // one column per draw keeps the rows i.i.d.
        std::vector<Vector> cols;
        cols.reserve(draws);
        for (long k = 0; k < draws; ++k)
            cols.push_back(sampler.sample(scen, n, rng).Z.col(0));
        Vector mean = Vector::Zero(p);
        for (const auto& c : cols) mean += c;
        mean /= static_cast<double>(draws);
        for (int i = 0; i < p; ++i) {
            for (int j = 0; j <= i; ++j) {
                double acc = 0.0, acc2 = 0.0;
                for (const auto& c : cols) {
                    const double w = (c(i) - mean(i)) * (c(j) - mean(j));
                    acc += w;
                    acc2 += w * w;
                }
                const double est = acc / draws;
                const double se =
                    std::sqrt((acc2 / draws - est * est) / draws);
                CHECK(std::abs(est - sigma(i, j)) < 3.0 * se);
            }
        }
    }
}

TEST_CASE("squared entries of distinct columns correlate only under student") {
    const int p = 2, n = 3;
    const Matrix sigma = Matrix::Identity(p, p);
    const long draws = 60000;
    for (dist::Family family : {dist::Family::student, dist::Family::gaussian}) {
        const dist::BackgroundModel model{Vector::Zero(p), sigma, 5.0, family};
        const dist::JointSampler sampler(model);
        const auto scen = dist::Scenario::additive(Vector::Ones(p), 0.0,
                                                   dist::Hypothesis::h0);
        RngStream rng(derive_seed(55, family == dist::Family::student ? 0 : 1, 0));
        std::vector<double> sq1, sq2;
        sq1.reserve(draws);
        sq2.reserve(draws);
        for (long k = 0; k < draws; ++k) {
            const auto js = sampler.sample(scen, n, rng);
            sq1.push_back(js.Z(0, 0) * js.Z(0, 0));
            sq2.push_back(js.Z(0, 1) * js.Z(0, 1));
        }
        const double r = correlation(sq1, sq2);
        const double band = 3.0 / std::sqrt(static_cast<double>(draws));
        if (family == dist::Family::student) {
            CHECK(r > band);  // shared mixing makes the squares co-move
        } else {
            CHECK(std::abs(r) < band);
        }
    }
}

TEST_CASE("sampler rejects invalid configurations") {
    const auto model = student_model(Vector::Zero(2), Matrix::Identity(2, 2), 1.5);
    RngStream rng(1);
    const auto scen =
        dist::Scenario::additive(Vector::Ones(2), 0.0, dist::Hypothesis::h0);
    CHECK_THROWS_AS(dist::sample_joint(model, scen, 5, rng), DomainError);

    const auto good = student_model(Vector::Zero(2), Matrix::Identity(2, 2), 5.0);
    CHECK_THROWS_AS(dist::sample_joint(good, scen, 2, rng), DomainError);
    const auto bad_t =
        dist::Scenario::additive(Vector::Ones(3), 0.1, dist::Hypothesis::h1);
    CHECK_THROWS_AS(dist::sample_joint(good, bad_t, 5, rng), DimensionMismatch);
}
