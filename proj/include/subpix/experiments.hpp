#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "subpix/detectors.hpp"
#include "subpix/distributions.hpp"

// Monte-Carlo harness: trial engine with deterministic per-trial streams,
// empirical threshold calibration, ROC curves and the false-alarm-gain sweep.
namespace subpix::mc {

enum class DetectorKind { kelly, acute, spade };

const char* detector_name(DetectorKind kind);

struct OperatingPoint {
    enum class Kind { fixed_pfa, fixed_pd };
    Kind kind = Kind::fixed_pfa;
    double value = 0.01;
};

struct ExperimentConfig {
    int p = 0;
    int n = 0;
    dist::BackgroundModel model;
    Vector target;
    dist::ModelKind truth = dist::ModelKind::additive;  // H1 generator law
    double alpha = 0.0;
    double beta = 1.0;  // mixed-model beta of the H1 generator
    std::vector<double> beta_grid;
    long trials_h0 = 0;
    long trials_h1 = 0;
    std::uint64_t seed = 0;
    OperatingPoint operating_point;
    int threads = 0;         // 0 = hardware concurrency
    long max_roc_points = 512;  // 0 = keep every pooled threshold
};

void validate(const ExperimentConfig& cfg);

struct TrialStatistics {
    std::vector<double> kelly;
    std::vector<double> acute;
    std::vector<double> spade;

    const std::vector<double>& of(DetectorKind kind) const;
};

// One detector statistic per trial. Trial i always consumes the stream
// derived from (seed, hypothesis, i), so results are bitwise reproducible
// for any worker count, and all detectors see the same draws.
TrialStatistics run_trials_all(const ExperimentConfig& cfg,
                               dist::Hypothesis hypothesis);
std::vector<double> run_trials(const ExperimentConfig& cfg,
                               dist::Hypothesis hypothesis, DetectorKind kind);

// Custom statistic hook for the same engine (test instrumentation).
using DetectorFn = std::function<double(const detect::TrainingSummary&,
                                        const Vector& y, const Vector& t,
                                        RngStream& rng)>;
std::vector<double> run_trials_fn(const ExperimentConfig& cfg,
                                  dist::Hypothesis hypothesis,
                                  const DetectorFn& fn);

// Threshold whose empirical exceedance probability is `level`, midpoint
// convention on ties. Called with H0 statistics and level = target P_fa, or
// H1 statistics and level = target P_d.
double empirical_quantile_threshold(std::vector<double> stats, double level);

// 95% Wilson score half-width for an empirical probability.
double wilson_half_width(double phat, long count, double z = 1.96);

struct RocPoint {
    double pfa = 0.0;
    double pd = 0.0;
    double ci_half_width = 0.0;  // Wilson half-width of pd
};

struct RocCurve {
    std::string detector;
    long trials_h0 = 0;
    long trials_h1 = 0;
    std::vector<RocPoint> points;  // threshold increasing: pfa and pd decrease
};

RocCurve roc(const ExperimentConfig& cfg, DetectorKind kind);

// All three curves from one pair of trial batches.
std::vector<RocCurve> roc_all(const ExperimentConfig& cfg);

RocCurve roc_from_stats(const std::vector<double>& h0,
                        const std::vector<double>& h1, DetectorKind kind,
                        long max_points);

struct GainEntry {
    double gain_db = 0.0;       // 10 log10(pfa_kelly / pfa_detector)
    double ci_half_width_db = 0.0;
    double pfa = 0.0;
    long events = 0;            // H0 exceedances behind the estimate
};

struct PfaGainPoint {
    double beta = 0.0;
    GainEntry kelly;  // self-reference, identically 0 dB when computable
    GainEntry acute;
    GainEntry spade;
    std::string flags;  // ';'-joined, e.g. "zero:acute" or "low:spade"
};

// Fixed-P_d calibration on H1(alpha, beta) samples, false-alarm estimation on
// independent H0 samples shared across the grid. Zero-count estimates are
// flagged (strict = false) or raise InsufficientTrials (strict = true).
std::vector<PfaGainPoint> pfa_gain_sweep(const ExperimentConfig& cfg,
                                         bool strict = false);

}  // namespace subpix::mc
