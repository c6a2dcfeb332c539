#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "subpix/dataset.hpp"
#include "subpix/experiments.hpp"

// Flat key = value run configuration ('#' comments, one key per line) and the
// run manifest written next to every output table.
namespace subpix::io {

struct RunConfig {
    int p = 16;
    int n = 40;
    dist::Family family = dist::Family::student;
    double nu = 0.0;  // required when family = student

    std::string t_source = "synthetic";  // synthetic | file
    double rho = 0.9;
    double mu_offset = 0.0;
    double t_rough = 0.0;
    double mu_rough = 0.0;
    std::string t_file, mu_file, sigma_file;

    dist::ModelKind model = dist::ModelKind::replacement;
    double alpha = 0.05;
    double beta = 1.0;  // mixed-model generator beta

    long trials_h0 = 10000;
    long trials_h1 = 10000;
    std::uint64_t seed = 1;
    int threads = 0;

    mc::OperatingPoint operating_point{mc::OperatingPoint::Kind::fixed_pd, 0.5};
    std::vector<double> beta_grid{0.8, 0.9, 1.0, 1.1};
    long max_roc_points = 512;

    // insertion-ordered echo of every parsed key for the manifest
    std::vector<std::pair<std::string, std::string>> echo;
};

RunConfig parse_config_text(const std::string& text, const std::string& label);
RunConfig parse_config_file(const std::string& path);

// Field-specific validation; throws DomainError naming the offending key.
void validate(const RunConfig& cfg);

DatasetBundle resolve_bundle(const RunConfig& cfg);

mc::ExperimentConfig to_experiment(const RunConfig& cfg,
                                   const DatasetBundle& bundle);

// Shortest round-trip decimal formatting for all numeric output.
std::string format_double(double x);

// Deterministic run identifier from seed + config echo.
std::string run_id(const RunConfig& cfg);

struct DetectorSummary {
    std::string name;
    long trials_h0 = 0;
    long trials_h1 = 0;
    double h0_mean = 0.0;
    double h1_mean = 0.0;
};

struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    int threads = 0;
    double runtime_seconds = 0.0;
    std::vector<std::string> outputs;
    std::vector<DetectorSummary> detectors;
};

std::string manifest_json(const RunConfig& cfg, const RunManifest& manifest);

}  // namespace subpix::io
