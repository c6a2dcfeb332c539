#include "subpix/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace subpix::mc {

namespace {

constexpr std::uint64_t kH0Tag = 0xd0;
constexpr std::uint64_t kH1Tag = 0xd1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t hypothesis_tag(dist::Hypothesis h) {
    return h == dist::Hypothesis::h0 ? kH0Tag : kH1Tag;
}

dist::Scenario make_scenario(const ExperimentConfig& cfg,
                             dist::Hypothesis hyp) {
    switch (cfg.truth) {
        case dist::ModelKind::additive:
            return dist::Scenario::additive(cfg.target, cfg.alpha, hyp);
        case dist::ModelKind::replacement:
            return dist::Scenario::replacement(cfg.target, cfg.alpha, hyp);
        case dist::ModelKind::mixed:
            return dist::Scenario::mixed(cfg.target, cfg.alpha, cfg.beta, hyp);
    }
    throw DomainError("experiment config: unknown model kind");
}

template <class E>
[[noreturn]] void rethrow_at_trial(long index, const E& e) {
    throw E("trial " + std::to_string(index) + ": " + e.what());
}

[[noreturn]] void annotate_and_throw(long index, std::exception_ptr ptr) {
    try {
        std::rethrow_exception(ptr);
    } catch (const NotPositiveDefinite& e) {
        rethrow_at_trial(index, e);
    } catch (const ZeroVector& e) {
        rethrow_at_trial(index, e);
    } catch (const DimensionMismatch& e) {
        rethrow_at_trial(index, e);
    } catch (const DomainError& e) {
        rethrow_at_trial(index, e);
    } catch (const NoConvergence& e) {
        rethrow_at_trial(index, e);
    } catch (const Error& e) {
        rethrow_at_trial(index, e);
    } catch (const std::exception& e) {
        throw Error("trial " + std::to_string(index) + ": " + e.what());
    }
}

// Runs body(i, rng) for every trial index with a deterministic stream per
// index; the partition across workers never changes the result.
template <class Body>
void parallel_trials(long trials, std::uint64_t seed, std::uint64_t tag,
                     int threads, const Body& body) {
    int workers = threads > 0
                      ? threads
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, workers);
    workers = static_cast<int>(
        std::min<long>(workers, std::max<long>(trials, 1)));

    std::mutex gate;
    std::atomic<bool> failed{false};
    long failed_index = -1;
    std::exception_ptr failure;

    const auto chunk = [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            if (failed.load(std::memory_order_relaxed)) return;
            try {
                RngStream rng(derive_seed(seed, tag, static_cast<std::uint64_t>(i)));
                body(i, rng);
            } catch (...) {
                std::lock_guard<std::mutex> lock(gate);
                if (!failure) {
                    failure = std::current_exception();
                    failed_index = i;
                }
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    if (workers == 1) {
        chunk(0, trials);
    } else {
        const long step = (trials + workers - 1) / workers;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) {
            const long lo = w * step;
            const long hi = std::min(trials, lo + step);
            if (lo >= hi) break;
            pool.emplace_back(chunk, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    if (failure) annotate_and_throw(failed_index, failure);
}

long exceedances(const std::vector<double>& sorted_stats, double threshold) {
    return static_cast<long>(
        sorted_stats.end() -
        std::upper_bound(sorted_stats.begin(), sorted_stats.end(), threshold));
}

GainEntry estimate_pfa(const std::vector<double>& h0_sorted, double threshold) {
    GainEntry e;
    e.events = exceedances(h0_sorted, threshold);
    const long total = static_cast<long>(h0_sorted.size());
    e.pfa = static_cast<double>(e.events) / static_cast<double>(total);
    e.ci_half_width_db = 0.0;
    return e;
}

}  // namespace

const char* detector_name(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::kelly: return "kelly";
        case DetectorKind::acute: return "acute";
        case DetectorKind::spade: return "spade";
    }
    return "unknown";
}

const std::vector<double>& TrialStatistics::of(DetectorKind kind) const {
    switch (kind) {
        case DetectorKind::kelly: return kelly;
        case DetectorKind::acute: return acute;
        case DetectorKind::spade: return spade;
    }
    throw DomainError("unknown detector kind");
}

void validate(const ExperimentConfig& cfg) {
    dist::validate(cfg.model);
    if (cfg.p != cfg.model.mu.size())
        throw DimensionMismatch("experiment config: p does not match model");
    if (cfg.target.size() != cfg.p)
        throw DimensionMismatch("experiment config: target length");
    if (cfg.n <= cfg.p)
        throw DomainError("experiment config: n must exceed p");
    if (cfg.trials_h0 < 1 || cfg.trials_h1 < 1)
        throw DomainError("experiment config: trial counts must be >= 1");
    if (!(cfg.operating_point.value > 0.0 && cfg.operating_point.value < 1.0))
        throw DomainError(
            "experiment config: operating-point value must lie in (0,1)");
    for (double b : cfg.beta_grid)
        if (!(b > 0.0))
            throw DomainError("experiment config: beta_grid entries must be > 0");
    if (cfg.threads < 0)
        throw DomainError("experiment config: threads must be >= 0");
}

TrialStatistics run_trials_all(const ExperimentConfig& cfg,
                               dist::Hypothesis hypothesis) {
    validate(cfg);
    const long trials = hypothesis == dist::Hypothesis::h1 ? cfg.trials_h1
                                                           : cfg.trials_h0;
    TrialStatistics out;
    out.kelly.resize(trials);
    out.acute.resize(trials);
    out.spade.resize(trials);

    const dist::JointSampler sampler(cfg.model);
    const dist::Scenario scenario = make_scenario(cfg, hypothesis);

    parallel_trials(trials, cfg.seed, hypothesis_tag(hypothesis), cfg.threads,
                    [&](long i, RngStream& rng) {
                        const auto js = sampler.sample(scenario, cfg.n, rng);
                        const auto ts = detect::summarize(js.Z);
                        out.kelly[i] =
                            detect::kelly(ts, js.y, scenario.t).statistic;
                        out.acute[i] =
                            detect::acute(ts, js.y, scenario.t).statistic;
                        out.spade[i] =
                            detect::spade(ts, js.y, scenario.t).statistic;
                    });
    return out;
}

std::vector<double> run_trials(const ExperimentConfig& cfg,
                               dist::Hypothesis hypothesis, DetectorKind kind) {
    auto all = run_trials_all(cfg, hypothesis);
    switch (kind) {
        case DetectorKind::kelly: return std::move(all.kelly);
        case DetectorKind::acute: return std::move(all.acute);
        case DetectorKind::spade: return std::move(all.spade);
    }
    throw DomainError("unknown detector kind");
}

std::vector<double> run_trials_fn(const ExperimentConfig& cfg,
                                  dist::Hypothesis hypothesis,
                                  const DetectorFn& fn) {
    validate(cfg);
    const long trials = hypothesis == dist::Hypothesis::h1 ? cfg.trials_h1
                                                           : cfg.trials_h0;
    std::vector<double> out(trials);
    const dist::JointSampler sampler(cfg.model);
    const dist::Scenario scenario = make_scenario(cfg, hypothesis);
    parallel_trials(trials, cfg.seed, hypothesis_tag(hypothesis), cfg.threads,
                    [&](long i, RngStream& rng) {
                        const auto js = sampler.sample(scenario, cfg.n, rng);
                        const auto ts = detect::summarize(js.Z);
                        out[i] = fn(ts, js.y, scenario.t, rng);
                    });
    return out;
}

double empirical_quantile_threshold(std::vector<double> stats, double level) {
    if (stats.empty())
        throw EmptyInput("empirical_quantile_threshold: no statistics");
    if (!(level > 0.0 && level < 1.0))
        throw DomainError(
            "empirical_quantile_threshold: level must lie in (0,1)");
    std::sort(stats.begin(), stats.end());
    const auto count = static_cast<long>(stats.size());
    const double pos = (1.0 - level) * static_cast<double>(count);
    const long nearest = std::lround(pos);
    if (std::abs(pos - static_cast<double>(nearest)) <=
        1e-9 * std::max(1.0, pos)) {
        if (nearest <= 0) return stats.front();
        if (nearest >= count) return stats.back();
        return 0.5 * (stats[nearest - 1] + stats[nearest]);
    }
    const long idx = static_cast<long>(std::ceil(pos));
    return stats[std::clamp<long>(idx, 1, count) - 1];
}

double wilson_half_width(double phat, long count, double z) {
    if (count <= 0)
        throw DomainError("wilson_half_width: needs a positive count");
    const double n = static_cast<double>(count);
    const double zz = z * z;
    return z * std::sqrt(phat * (1.0 - phat) / n + zz / (4.0 * n * n)) /
           (1.0 + zz / n);
}

RocCurve roc_from_stats(const std::vector<double>& h0,
                        const std::vector<double>& h1, DetectorKind kind,
                        long max_points) {
    if (h0.empty() || h1.empty())
        throw EmptyInput("roc: empty statistic batch");
    std::vector<double> s0 = h0, s1 = h1;
    std::sort(s0.begin(), s0.end());
    std::sort(s1.begin(), s1.end());

    std::vector<double> pooled;
    pooled.reserve(s0.size() + s1.size());
    pooled.insert(pooled.end(), s0.begin(), s0.end());
    pooled.insert(pooled.end(), s1.begin(), s1.end());
    std::sort(pooled.begin(), pooled.end());
    pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());

    RocCurve curve;
    curve.detector = detector_name(kind);
    curve.trials_h0 = static_cast<long>(h0.size());
    curve.trials_h1 = static_cast<long>(h1.size());

    const double n0 = static_cast<double>(s0.size());
    const double n1 = static_cast<double>(s1.size());
    curve.points.push_back({1.0, 1.0, wilson_half_width(1.0, s1.size())});
    for (double thr : pooled) {
        const double pfa = exceedances(s0, thr) / n0;
        const double pd = exceedances(s1, thr) / n1;
        curve.points.push_back({pfa, pd, wilson_half_width(pd, s1.size())});
    }

    if (max_points > 2 &&
        static_cast<long>(curve.points.size()) > max_points) {
        std::vector<RocPoint> kept;
        kept.reserve(max_points);
        const auto total = static_cast<long>(curve.points.size());
        for (long k = 0; k < max_points; ++k) {
            const long idx = k * (total - 1) / (max_points - 1);
            kept.push_back(curve.points[idx]);
        }
        curve.points = std::move(kept);
    }
    return curve;
}

RocCurve roc(const ExperimentConfig& cfg, DetectorKind kind) {
    const auto h0 = run_trials(cfg, dist::Hypothesis::h0, kind);
    const auto h1 = run_trials(cfg, dist::Hypothesis::h1, kind);
    return roc_from_stats(h0, h1, kind, cfg.max_roc_points);
}

std::vector<RocCurve> roc_all(const ExperimentConfig& cfg) {
    const auto h0 = run_trials_all(cfg, dist::Hypothesis::h0);
    const auto h1 = run_trials_all(cfg, dist::Hypothesis::h1);
    std::vector<RocCurve> curves;
    for (DetectorKind kind : {DetectorKind::kelly, DetectorKind::acute,
                              DetectorKind::spade})
        curves.push_back(
            roc_from_stats(h0.of(kind), h1.of(kind), kind, cfg.max_roc_points));
    return curves;
}

std::vector<PfaGainPoint> pfa_gain_sweep(const ExperimentConfig& cfg,
                                         bool strict) {
    validate(cfg);
    if (cfg.operating_point.kind != OperatingPoint::Kind::fixed_pd)
        throw DomainError("pfa_gain_sweep: requires a fixed_pd operating point");
    if (cfg.beta_grid.empty())
        throw DomainError("pfa_gain_sweep: beta_grid is empty");

    auto h0 = run_trials_all(cfg, dist::Hypothesis::h0);
    std::sort(h0.kelly.begin(), h0.kelly.end());
    std::sort(h0.acute.begin(), h0.acute.end());
    std::sort(h0.spade.begin(), h0.spade.end());

    const double pd = cfg.operating_point.value;
    std::vector<PfaGainPoint> out;
    out.reserve(cfg.beta_grid.size());

    for (double beta : cfg.beta_grid) {
        ExperimentConfig sweep = cfg;
        sweep.truth = dist::ModelKind::mixed;
        sweep.beta = beta;
        const auto h1 = run_trials_all(sweep, dist::Hypothesis::h1);

        PfaGainPoint point;
        point.beta = beta;
        std::string flags;
        const auto add_flag = [&flags](const std::string& f) {
            if (!flags.empty()) flags += ';';
            flags += f;
        };

        const auto calibrate = [&](const std::vector<double>& h1_stats,
                                   const std::vector<double>& h0_sorted,
                                   const char* name) {
            const double thr = empirical_quantile_threshold(h1_stats, pd);
            GainEntry e = estimate_pfa(h0_sorted, thr);
            if (e.events == 0) {
                if (strict)
                    throw InsufficientTrials(
                        std::string("pfa_gain_sweep: zero H0 exceedances for ") +
                        name + " at beta=" + std::to_string(beta));
                add_flag(std::string("zero:") + name);
            } else if (e.events < 50) {
                add_flag(std::string("low:") + name);
            }
            return e;
        };

        point.kelly = calibrate(h1.kelly, h0.kelly, "kelly");
        point.acute = calibrate(h1.acute, h0.acute, "acute");
        point.spade = calibrate(h1.spade, h0.spade, "spade");

        const auto fill_gain = [&](GainEntry& e) {
            if (point.kelly.events == 0 || e.events == 0) {
                e.gain_db = kNaN;
                e.ci_half_width_db = kNaN;
                return;
            }
            e.gain_db = 10.0 * std::log10(point.kelly.pfa / e.pfa);
            const double rel_k =
                wilson_half_width(point.kelly.pfa, cfg.trials_h0) /
                point.kelly.pfa;
            const double rel_e =
                wilson_half_width(e.pfa, cfg.trials_h0) / e.pfa;
            e.ci_half_width_db =
                10.0 / std::log(10.0) * std::sqrt(rel_k * rel_k + rel_e * rel_e);
        };
        fill_gain(point.acute);
        fill_gain(point.spade);
        // Self-gain of the reference: exactly 0 dB when computable.
        if (point.kelly.events > 0) {
            point.kelly.gain_db =
                10.0 * std::log10(point.kelly.pfa / point.kelly.pfa);
            point.kelly.ci_half_width_db = 0.0;
        } else {
            point.kelly.gain_db = kNaN;
            point.kelly.ci_half_width_db = kNaN;
        }
        point.flags = flags;
        out.push_back(std::move(point));
    }
    return out;
}

}  // namespace subpix::mc
