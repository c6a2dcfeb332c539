// subpix: sub-pixel target detection toolkit.
//
// Subcommands: detect, roc, pfa-gain, sample, selfcheck.
// Exit codes: 0 success, 2 config error, 3 numeric failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "subpix/config.hpp"
#include "subpix/detectors.hpp"
#include "subpix/distributions.hpp"
#include "subpix/experiments.hpp"
#include "subpix/version.hpp"

namespace {

using subpix::Matrix;
using subpix::Vector;
namespace io = subpix::io;
namespace mc = subpix::mc;
namespace dist = subpix::dist;
namespace detect = subpix::detect;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out_dir = ".";
};

io::RunConfig load_config(const GlobalOptions& g) {
    io::RunConfig cfg;
    if (!g.config_path.empty()) cfg = io::parse_config_file(g.config_path);
    if (g.seed) {
        cfg.seed = *g.seed;
        cfg.echo.emplace_back("seed", std::to_string(*g.seed));
    }
    if (g.threads) {
        cfg.threads = *g.threads;
        cfg.echo.emplace_back("threads", std::to_string(*g.threads));
    }
    io::validate(cfg);
    return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw subpix::Error("cannot open " + path.string() + " for writing");
    out << body;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string csv_preamble(const io::RunConfig& cfg) {
    return "# manifest=manifest.json run=" + io::run_id(cfg) + "\n";
}

int cmd_detect(const GlobalOptions& g, const std::string& y_path,
               const std::string& z_path, const std::string& which) {
    io::RunConfig cfg = load_config(g);
    const io::DatasetBundle bundle = io::resolve_bundle(cfg);
    const auto spectra = io::read_spectra_csv(y_path);
    for (const auto& y : spectra)
        if (y.size() != bundle.t.size())
            throw subpix::DimensionMismatch(
                y_path + ": spectrum length does not match the band count");

    Matrix training;
    if (!z_path.empty()) {
        const auto rows = io::read_spectra_csv(z_path);
        training.resize(bundle.t.size(), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            if (rows[k].size() != bundle.t.size())
                throw subpix::DimensionMismatch(
                    z_path + ": spectrum length does not match the band count");
            training.col(static_cast<Eigen::Index>(k)) = rows[k];
        }
    } else {
        dist::BackgroundModel model{bundle.mu, bundle.sigma, cfg.nu, cfg.family};
        subpix::RngStream rng(subpix::derive_seed(cfg.seed, 0xd2, 0));
        const auto scen =
            dist::Scenario::additive(bundle.t, 0.0, dist::Hypothesis::h0);
        training = dist::sample_joint(model, scen, cfg.n, rng).Z;
    }

    const auto ts = detect::summarize(training);
    std::vector<std::string> names;
    if (which == "all") names = {"kelly", "acute", "spade"};
    else names = {which};

    std::ostringstream out;
    out << "pixel,detector,statistic,alpha_hat,beta_hat\n";
    for (std::size_t i = 0; i < spectra.size(); ++i) {
        for (const auto& name : names) {
            detect::DetectionOutcome r;
            if (name == "kelly") r = detect::kelly(ts, spectra[i], bundle.t);
            else if (name == "acute") r = detect::acute(ts, spectra[i], bundle.t);
            else r = detect::spade(ts, spectra[i], bundle.t);
            out << i << ',' << name << ',' << io::format_double(r.statistic)
                << ',' << io::format_double(r.alpha_hat) << ','
                << io::format_double(r.beta_hat) << '\n';
        }
    }
    std::cout << out.str();
    return 0;
}

int cmd_roc(const GlobalOptions& g) {
    const auto start = std::chrono::steady_clock::now();
    io::RunConfig cfg = load_config(g);
    const auto bundle = io::resolve_bundle(cfg);
    const auto ex = io::to_experiment(cfg, bundle);

    const auto h0 = mc::run_trials_all(ex, dist::Hypothesis::h0);
    const auto h1 = mc::run_trials_all(ex, dist::Hypothesis::h1);

    std::filesystem::create_directories(g.out_dir);
    io::RunManifest manifest;
    manifest.command = "roc";
    manifest.seed = cfg.seed;
    manifest.threads = cfg.threads;

    for (mc::DetectorKind kind :
         {mc::DetectorKind::kelly, mc::DetectorKind::acute,
          mc::DetectorKind::spade}) {
        const auto curve = mc::roc_from_stats(h0.of(kind), h1.of(kind), kind,
                                              ex.max_roc_points);
        std::ostringstream body;
        body << csv_preamble(cfg);
        body << "pfa,pd,ci_half_width\n";
        for (const auto& pt : curve.points)
            body << io::format_double(pt.pfa) << ','
                 << io::format_double(pt.pd) << ','
                 << io::format_double(pt.ci_half_width) << '\n';
        const std::string name = "roc_" + curve.detector + ".csv";
        write_file(std::filesystem::path(g.out_dir) / name, body.str());
        manifest.outputs.push_back(name);
        manifest.detectors.push_back({curve.detector, ex.trials_h0,
                                      ex.trials_h1, mean_of(h0.of(kind)),
                                      mean_of(h1.of(kind))});
    }

    manifest.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_file(std::filesystem::path(g.out_dir) / "manifest.json",
               io::manifest_json(cfg, manifest));
    return 0;
}

int cmd_pfa_gain(const GlobalOptions& g, bool kelly_self_gain) {
    const auto start = std::chrono::steady_clock::now();
    io::RunConfig cfg = load_config(g);
    if (cfg.operating_point.kind != mc::OperatingPoint::Kind::fixed_pd)
        throw subpix::DomainError(
            "config field 'operating_point': pfa-gain requires fixed_pd");
    const auto bundle = io::resolve_bundle(cfg);
    const auto ex = io::to_experiment(cfg, bundle);

    const auto points = mc::pfa_gain_sweep(ex, /*strict=*/false);

    std::ostringstream body;
    body << csv_preamble(cfg);
    body << "beta,gain_acute_db,gain_spade_db,ci_acute,ci_spade,flags";
    if (kelly_self_gain) body << ",gain_kelly_db";
    body << '\n';
    for (const auto& pt : points) {
        body << io::format_double(pt.beta) << ','
             << io::format_double(pt.acute.gain_db) << ','
             << io::format_double(pt.spade.gain_db) << ','
             << io::format_double(pt.acute.ci_half_width_db) << ','
             << io::format_double(pt.spade.ci_half_width_db) << ','
             << pt.flags;
        if (kelly_self_gain) body << ',' << io::format_double(pt.kelly.gain_db);
        body << '\n';
    }

    std::filesystem::create_directories(g.out_dir);
    write_file(std::filesystem::path(g.out_dir) / "pfa_gain.csv", body.str());

    io::RunManifest manifest;
    manifest.command = "pfa-gain";
    manifest.seed = cfg.seed;
    manifest.threads = cfg.threads;
    manifest.outputs.push_back("pfa_gain.csv");
    manifest.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    write_file(std::filesystem::path(g.out_dir) / "manifest.json",
               io::manifest_json(cfg, manifest));
    return 0;
}

int cmd_sample(const GlobalOptions& g, const std::string& hypothesis,
               long count) {
    io::RunConfig cfg = load_config(g);
    const auto bundle = io::resolve_bundle(cfg);
    dist::BackgroundModel model{bundle.mu, bundle.sigma, cfg.nu, cfg.family};
    const auto hyp = hypothesis == "h1" ? dist::Hypothesis::h1
                                        : dist::Hypothesis::h0;
    dist::Scenario scen;
    switch (cfg.model) {
        case dist::ModelKind::additive:
            scen = dist::Scenario::additive(bundle.t, cfg.alpha, hyp);
            break;
        case dist::ModelKind::replacement:
            scen = dist::Scenario::replacement(bundle.t, cfg.alpha, hyp);
            break;
        case dist::ModelKind::mixed:
            scen = dist::Scenario::mixed(bundle.t, cfg.alpha, cfg.beta, hyp);
            break;
    }
    const dist::JointSampler sampler(model);

    std::ostringstream out;
    out << "# joint samples: per block, line 1 is y, lines 2..n+1 are the "
           "training spectra\n";
    for (long k = 0; k < count; ++k) {
        subpix::RngStream rng(subpix::derive_seed(
            cfg.seed, hyp == dist::Hypothesis::h1 ? 0xd1 : 0xd0,
            static_cast<std::uint64_t>(k)));
        const auto js = sampler.sample(scen, cfg.n, rng);
        out << "# sample " << k << '\n';
        for (Eigen::Index i = 0; i < js.y.size(); ++i)
            out << (i ? "," : "") << io::format_double(js.y(i));
        out << '\n';
        for (Eigen::Index c = 0; c < js.Z.cols(); ++c) {
            for (Eigen::Index i = 0; i < js.Z.rows(); ++i)
                out << (i ? "," : "") << io::format_double(js.Z(i, c));
            out << '\n';
        }
    }
    std::cout << out.str();
    return 0;
}

// ---------------------------------------------------------------------------
// selfcheck: quick numeric verification of the identities and inner solvers
// ---------------------------------------------------------------------------

Vector random_vector(subpix::RngStream& rng, int p) {
    Vector v(p);
    for (int i = 0; i < p; ++i) v(i) = rng.normal();
    return v;
}

Matrix random_matrix(subpix::RngStream& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

Matrix random_spd(subpix::RngStream& rng, int p) {
    const Matrix a = random_matrix(rng, p, p);
    return a * a.transpose() + 0.5 * Matrix::Identity(p, p);
}

double coarse_scalar_min(const std::function<double(double)>& f, double lo,
                         double hi, int cells) {
    double best = std::numeric_limits<double>::infinity();
    double best_x = lo;
    for (int k = 0; k <= cells; ++k) {
        const double x = lo + (hi - lo) * k / cells;
        const double v = f(x);
        if (v < best) {
            best = v;
            best_x = x;
        }
    }
    constexpr double kInvPhi = 0.6180339887498949;
    double a = std::max(lo, best_x - (hi - lo) / cells);
    double b = std::min(hi, best_x + (hi - lo) / cells);
    double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int k = 0; k < 120; ++k) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - kInvPhi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + kInvPhi * (b - a); f2 = f(x2);
        }
    }
    return std::min(best, std::min(f1, f2));
}

int cmd_selfcheck(const GlobalOptions& g) {
    std::uint64_t seed = 1;
    if (!g.config_path.empty()) seed = io::parse_config_file(g.config_path).seed;
    if (g.seed) seed = *g.seed;
    subpix::RngStream rng(subpix::derive_seed(seed, 0xdC, 0));
    int failures = 0;
    const auto report = [&failures](const char* name, bool ok, double err) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name
                  << " (max err " << err << ")\n";
        if (!ok) ++failures;
    };
    namespace linalg = subpix::linalg;

    {  // centering projector is symmetric, idempotent, annihilates ones
        double err = 0.0;
        for (int m : {1, 2, 5, 17, 64}) {
            const Matrix proj = linalg::centering_projector(m);
            err = std::max(err, (proj * proj - proj).cwiseAbs().maxCoeff());
            err = std::max(err, (proj - proj.transpose()).cwiseAbs().maxCoeff());
            err = std::max(err,
                           (proj * Vector::Ones(m)).cwiseAbs().maxCoeff());
        }
        report("centering projector identities", err < 1e-13, err);
    }
    {  // scatter equals the projector form
        const int p = 5, n = 17;
        const Matrix z = random_matrix(rng, p, n);
        const auto sc = linalg::scatter(z);
        const Matrix ref =
            z * linalg::centering_projector(n) * z.transpose();
        const double err = (sc.scatter - ref).cwiseAbs().maxCoeff() /
                           ref.cwiseAbs().maxCoeff();
        report("scatter matches projector form", err < 1e-10, err);
    }
    {  // symmetric inverse square root
        const Matrix spd = random_spd(rng, 6);
        const Matrix w = linalg::inv_sqrt(spd);
        const double err =
            (w * spd * w - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff();
        report("inverse square root property", err < 1e-10, err);
    }
    {  // partitioned determinant identity and mean decomposition
        const int p = 5, n = 13;
        double err = 0.0;
        for (int rep = 0; rep < 10; ++rep) {
            const Matrix z = random_matrix(rng, p, n);
            const Vector x = random_vector(rng, p);
            const auto sc = linalg::scatter(z);
            Matrix xz(p, n + 1);
            xz.col(0) = x;
            xz.rightCols(n) = z;
            const Matrix lhs =
                xz * linalg::centering_projector(n + 1) * xz.transpose();
            const Vector diff = x - sc.mean;
            const double rhs =
                std::exp(linalg::logdet(sc.scatter)) *
                (1.0 + (n / (n + 1.0)) *
                           diff.dot(sc.scatter.llt().solve(diff)));
            err = std::max(err, std::abs(lhs.determinant() - rhs) /
                                    std::abs(rhs));

            const Vector mu = random_vector(rng, p);
            Matrix centered(p, n + 1);
            centered.col(0) = x - mu;
            centered.rightCols(n) = z.colwise() - mu;
            const Vector shift = mu - (x + z.rowwise().sum()) / (n + 1.0);
            const Matrix recon = (n + 1.0) * shift * shift.transpose() + lhs;
            const Matrix direct = centered * centered.transpose();
            err = std::max(err, (recon - direct).cwiseAbs().maxCoeff() /
                                    direct.cwiseAbs().maxCoeff());
        }
        report("determinant/mean decomposition identities", err < 1e-8, err);
    }
    {  // ACUTE and SPADE roots against a grid + golden oracle
        double err = 0.0;
        for (int rep = 0; rep < 20; ++rep) {
            const int p = 4, n = 18;
            const Matrix z = random_matrix(rng, p, n);
            const Vector y = random_vector(rng, p);
            const Vector t = random_vector(rng, p);
            const auto ts = detect::summarize(z);
            const auto acute = detect::acute(ts, y, t);
            const double oracle_acute = coarse_scalar_min(
                [&](double a) {
                    return detect::glr_objective(ts, y, t, a, 1.0 - a);
                },
                -6.0, 0.9999, 4000);
            err = std::max(err, std::abs(detect::glr_objective(
                                             ts, y, t, acute.alpha_hat,
                                             acute.beta_hat) -
                                         oracle_acute));
            const auto spade = detect::spade(ts, y, t);
            const Vector sit = ts.scatter_inv * t;
            const double energy = t.dot(sit);
            const double oracle_spade = coarse_scalar_min(
                [&](double lb) {
                    const double b = std::exp(lb);
                    const double a = (y - b * ts.mean).dot(sit) / energy;
                    return detect::glr_objective(ts, y, t, a, b);
                },
                std::log(1e-3), std::log(1e3), 4000);
            err = std::max(
                err, std::abs(detect::glr_objective(ts, y, t, spade.alpha_hat,
                                                    spade.beta_hat) -
                              oracle_spade));
        }
        report("inner minimizers match grid oracles", err < 1e-8, err);
    }
    {  // the profile likelihood ratio does not depend on nu
        const int p = 4, n = 16;
        const Matrix z = random_matrix(rng, p, n);
        const Vector y = random_vector(rng, p);
        const Vector t = random_vector(rng, p);
        const dist::JointSample js{y, z};
        double err = 0.0;
        const double gauss =
            dist::profile_log_likelihood(js, t, 0.3, 0.8, 3.0,
                                         dist::Family::gaussian) -
            dist::profile_log_likelihood(js, t, 0.0, 1.0, 3.0,
                                         dist::Family::gaussian);
        for (double nu : {2.5, 5.0, 50.0}) {
            const double student =
                dist::profile_log_likelihood(js, t, 0.3, 0.8, nu,
                                             dist::Family::student) -
                dist::profile_log_likelihood(js, t, 0.0, 1.0, nu,
                                             dist::Family::student);
            err = std::max(err, std::abs(student - gauss));
        }
        report("profile ratio is nu-free", err < 1e-10, err);
    }

    if (failures == 0) {
        std::cout << "selfcheck: all checks passed\n";
        return 0;
    }
    std::cout << "selfcheck: " << failures << " check(s) failed\n";
    return 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sub-pixel target detection toolkit"};
    app.set_version_flag("--version", subpix::kVersion);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "run configuration file");
    app.add_option("--seed", g.seed, "override the master seed");
    app.add_option("--threads", g.threads, "worker threads (0 = hardware)");
    app.add_option("--out", g.out_dir, "output directory");
    app.require_subcommand(1);

    std::string y_path, z_path, which = "all";
    auto* detect_cmd =
        app.add_subcommand("detect", "score pixels under test against a training set");
    detect_cmd->add_option("--y-file", y_path, "spectra to score, one per line")
        ->required();
    detect_cmd->add_option("--z-file", z_path,
                           "training spectra, one per line (default: synthetic draw)");
    detect_cmd->add_option("--detector", which, "kelly|acute|spade|all")
        ->check(CLI::IsMember({"kelly", "acute", "spade", "all"}));

    auto* roc_cmd = app.add_subcommand("roc", "Monte-Carlo ROC curves");

    bool kelly_self_gain = false;
    auto* gain_cmd =
        app.add_subcommand("pfa-gain", "false-alarm gain sweep over beta");
    gain_cmd->add_flag("--kelly-self-gain", kelly_self_gain,
                       "append the always-zero kelly self-gain column");

    std::string hypothesis = "h0";
    long count = 1;
    auto* sample_cmd =
        app.add_subcommand("sample", "dump synthetic joint samples");
    sample_cmd->add_option("--hypothesis", hypothesis, "h0|h1")
        ->check(CLI::IsMember({"h0", "h1"}));
    sample_cmd->add_option("--count", count, "number of samples");

    auto* selfcheck_cmd =
        app.add_subcommand("selfcheck", "run the numeric identity suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*detect_cmd) return cmd_detect(g, y_path, z_path, which);
        if (*roc_cmd) return cmd_roc(g);
        if (*gain_cmd) return cmd_pfa_gain(g, kelly_self_gain);
        if (*sample_cmd) return cmd_sample(g, hypothesis, count);
        if (*selfcheck_cmd) return cmd_selfcheck(g);
    } catch (const subpix::ParseError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const subpix::DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const subpix::DimensionMismatch& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const subpix::AsymmetryError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const subpix::EmptyInput& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const subpix::Error& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
