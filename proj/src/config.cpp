#include "subpix/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "subpix/rng.hpp"
#include "subpix/version.hpp"

#include <json.hpp>

namespace subpix::io {

namespace {

std::string trim(const std::string& s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c); };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(out))
        throw ParseError("config key '" + key + "': expected a number, got '" +
                         value + "'");
    return out;
}

long to_long(const std::string& key, const std::string& value) {
    long out = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError("config key '" + key +
                         "': expected an integer, got '" + value + "'");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* begin = value.data();
    const auto* end = value.data() + value.size();
    const auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError("config key '" + key +
                         "': expected an unsigned integer, got '" + value + "'");
    return out;
}

std::vector<double> to_grid(const std::string& key, const std::string& value) {
    std::vector<double> grid;
    std::stringstream ss(value);
    std::string token;
    while (std::getline(ss, token, ',')) {
        const std::string t = trim(token);
        if (t.empty())
            throw ParseError("config key '" + key + "': empty grid entry");
        grid.push_back(to_double(key, t));
    }
    if (grid.empty())
        throw ParseError("config key '" + key + "': empty grid");
    return grid;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& label) {
    RunConfig cfg;
    bool saw_nu = false;
    std::stringstream in(text);
    std::string raw;
    long line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string payload = raw;
        const auto hash = payload.find('#');
        if (hash != std::string::npos) payload.erase(hash);
        payload = trim(payload);
        if (payload.empty()) continue;
        const auto eq = payload.find('=');
        if (eq == std::string::npos)
            throw ParseError(label + ":" + std::to_string(line) +
                             ": expected 'key = value'");
        const std::string key = trim(payload.substr(0, eq));
        const std::string value = trim(payload.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ParseError(label + ":" + std::to_string(line) +
                             ": empty key or value");
        cfg.echo.emplace_back(key, value);

        if (key == "p") cfg.p = static_cast<int>(to_long(key, value));
        else if (key == "n") cfg.n = static_cast<int>(to_long(key, value));
        else if (key == "family") {
            if (value == "student") cfg.family = dist::Family::student;
            else if (value == "gaussian") cfg.family = dist::Family::gaussian;
            else
                throw ParseError("config key 'family': expected student or "
                                 "gaussian, got '" + value + "'");
        } else if (key == "nu") {
            cfg.nu = to_double(key, value);
            saw_nu = true;
        } else if (key == "t_source") {
            if (value != "synthetic" && value != "file")
                throw ParseError("config key 't_source': expected synthetic "
                                 "or file, got '" + value + "'");
            cfg.t_source = value;
        } else if (key == "rho") cfg.rho = to_double(key, value);
        else if (key == "mu_offset") cfg.mu_offset = to_double(key, value);
        else if (key == "t_rough") cfg.t_rough = to_double(key, value);
        else if (key == "mu_rough") cfg.mu_rough = to_double(key, value);
        else if (key == "t_file") cfg.t_file = value;
        else if (key == "mu_file") cfg.mu_file = value;
        else if (key == "sigma_file") cfg.sigma_file = value;
        else if (key == "model") {
            if (value == "additive") cfg.model = dist::ModelKind::additive;
            else if (value == "replacement")
                cfg.model = dist::ModelKind::replacement;
            else if (value == "mixed") cfg.model = dist::ModelKind::mixed;
            else
                throw ParseError("config key 'model': expected additive, "
                                 "replacement or mixed, got '" + value + "'");
        } else if (key == "alpha") cfg.alpha = to_double(key, value);
        else if (key == "beta") cfg.beta = to_double(key, value);
        else if (key == "trials_h0") cfg.trials_h0 = to_long(key, value);
        else if (key == "trials_h1") cfg.trials_h1 = to_long(key, value);
        else if (key == "seed") cfg.seed = to_u64(key, value);
        else if (key == "threads") cfg.threads = static_cast<int>(to_long(key, value));
        else if (key == "operating_point") {
            if (value == "fixed_pfa")
                cfg.operating_point.kind = mc::OperatingPoint::Kind::fixed_pfa;
            else if (value == "fixed_pd")
                cfg.operating_point.kind = mc::OperatingPoint::Kind::fixed_pd;
            else
                throw ParseError("config key 'operating_point': expected "
                                 "fixed_pfa or fixed_pd, got '" + value + "'");
        } else if (key == "operating_value")
            cfg.operating_point.value = to_double(key, value);
        else if (key == "beta_grid") cfg.beta_grid = to_grid(key, value);
        else if (key == "max_roc_points") cfg.max_roc_points = to_long(key, value);
        else
            throw ParseError(label + ":" + std::to_string(line) +
                             ": unknown config key '" + key + "'");
    }
    if (cfg.family == dist::Family::student && !saw_nu) cfg.nu = 0.0;
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open config file");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

void validate(const RunConfig& cfg) {
    if (cfg.p < 1) throw DomainError("config field 'p': must be >= 1");
    if (cfg.n <= cfg.p)
        throw DomainError("config field 'n': must exceed p (got n=" +
                          std::to_string(cfg.n) + ", p=" +
                          std::to_string(cfg.p) + ")");
    if (cfg.family == dist::Family::student && !(cfg.nu > 2.0))
        throw DomainError(
            "config field 'nu': required for family=student and must exceed 2");
    if (cfg.t_source == "file") {
        if (cfg.t_file.empty() || cfg.mu_file.empty() || cfg.sigma_file.empty())
            throw DomainError(
                "config fields 't_file'/'mu_file'/'sigma_file': required when "
                "t_source=file");
    } else {
        if (!(std::abs(cfg.rho) < 1.0))
            throw DomainError("config field 'rho': |rho| must be below 1");
        if (cfg.t_rough < 0.0)
            throw DomainError("config field 't_rough': must be >= 0");
    }
    if (cfg.model == dist::ModelKind::replacement && !(cfg.alpha < 1.0))
        throw DomainError(
            "config field 'alpha': must stay below 1 under the replacement "
            "model");
    if (cfg.model == dist::ModelKind::mixed && !(cfg.beta > 0.0))
        throw DomainError("config field 'beta': must be positive");
    if (cfg.trials_h0 < 1)
        throw DomainError("config field 'trials_h0': must be >= 1");
    if (cfg.trials_h1 < 1)
        throw DomainError("config field 'trials_h1': must be >= 1");
    if (!(cfg.operating_point.value > 0.0 && cfg.operating_point.value < 1.0))
        throw DomainError(
            "config field 'operating_value': must lie strictly in (0,1)");
    for (double b : cfg.beta_grid)
        if (!(b > 0.0))
            throw DomainError(
                "config field 'beta_grid': entries must be positive");
    if (cfg.threads < 0)
        throw DomainError("config field 'threads': must be >= 0");
    if (cfg.max_roc_points < 0)
        throw DomainError("config field 'max_roc_points': must be >= 0");
}

DatasetBundle resolve_bundle(const RunConfig& cfg) {
    if (cfg.t_source == "file")
        return load_bundle_from_files(cfg.t_file, cfg.mu_file, cfg.sigma_file);
    return synthetic_bundle(cfg.p, cfg.rho, cfg.mu_offset, cfg.t_rough,
                            cfg.mu_rough);
}

mc::ExperimentConfig to_experiment(const RunConfig& cfg,
                                   const DatasetBundle& bundle) {
    if (bundle.t.size() != cfg.p)
        throw DimensionMismatch(
            "config field 'p': dataset bundle has " +
            std::to_string(bundle.t.size()) + " bands, config says " +
            std::to_string(cfg.p));
    mc::ExperimentConfig ex;
    ex.p = cfg.p;
    ex.n = cfg.n;
    ex.model.mu = bundle.mu;
    ex.model.sigma = bundle.sigma;
    ex.model.nu = cfg.nu;
    ex.model.family = cfg.family;
    ex.target = bundle.t;
    ex.truth = cfg.model;
    ex.alpha = cfg.alpha;
    ex.beta = cfg.beta;
    ex.beta_grid = cfg.beta_grid;
    ex.trials_h0 = cfg.trials_h0;
    ex.trials_h1 = cfg.trials_h1;
    ex.seed = cfg.seed;
    ex.operating_point = cfg.operating_point;
    ex.threads = cfg.threads;
    ex.max_roc_points = cfg.max_roc_points;
    return ex;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string run_id(const RunConfig& cfg) {
    std::uint64_t h = detail::mix64(cfg.seed + 0x9e3779b97f4a7c15ULL);
    for (const auto& [key, value] : cfg.echo) {
        if (key == "threads") continue;  // worker count never changes results
        for (char c : key) h = detail::mix64(h ^ static_cast<unsigned char>(c));
        for (char c : value)
            h = detail::mix64(h ^ static_cast<unsigned char>(c));
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::string manifest_json(const RunConfig& cfg, const RunManifest& manifest) {
    nlohmann::json j;
    j["tool"] = "subpix";
    j["version"] = kVersion;
    j["command"] = manifest.command;
    j["run_id"] = run_id(cfg);
    j["seed"] = manifest.seed;
    j["threads"] = manifest.threads;
    j["runtime_seconds"] = manifest.runtime_seconds;
    j["ci_method"] =
        "Wilson score 95%; gains carry first-order propagated intervals "
        "(artifact choice, not sourced from prior work)";
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& [key, value] : cfg.echo) echo[key] = value;
    j["config"] = echo;
    j["outputs"] = manifest.outputs;
    nlohmann::json det = nlohmann::json::object();
    for (const auto& d : manifest.detectors) {
        det[d.name] = {{"trials_h0", d.trials_h0},
                       {"trials_h1", d.trials_h1},
                       {"h0_stat_mean", d.h0_mean},
                       {"h1_stat_mean", d.h1_mean}};
    }
    j["detectors"] = det;
    return j.dump(2) + "\n";
}

}  // namespace subpix::io
