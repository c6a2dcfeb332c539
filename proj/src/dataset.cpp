#include "subpix/dataset.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace subpix::io {

namespace {

std::string strip(std::string line) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto is_space = [](unsigned char c) { return std::isspace(c); };
    while (!line.empty() && is_space(line.back())) line.pop_back();
    std::size_t lead = 0;
    while (lead < line.size() && is_space(line[lead])) ++lead;
    return line.substr(lead);
}

double parse_cell(const std::string& token, const std::string& path, long line,
                  long column) {
    const std::string where = path + ":" + std::to_string(line) + ": column " +
                              std::to_string(column);
    std::string t = strip(token);
    if (t.empty()) throw ParseError(where + ": empty cell");
    double value = 0.0;
    const auto* begin = t.data();
    const auto* end = t.data() + t.size();
    const auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc{} || res.ptr != end)
        throw ParseError(where + ": invalid number '" + t + "'");
    if (!std::isfinite(value))
        throw ParseError(where + ": non-finite value '" + t + "'");
    return value;
}

std::vector<std::vector<double>> read_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");
    std::vector<std::vector<double>> rows;
    std::string raw;
    long line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string payload = strip(raw);
        if (payload.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(payload);
        std::string token;
        long column = 0;
        while (std::getline(ss, token, ',')) {
            ++column;
            row.push_back(parse_cell(token, path, line, column));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(path + ": no data rows");
    return rows;
}

}  // namespace

Vector read_vector_csv(const std::string& path) {
    const auto rows = read_rows(path);
    Vector v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != 1)
            throw ParseError(path + ": expected one value per line, line " +
                             std::to_string(i + 1) + " has " +
                             std::to_string(rows[i].size()));
        v(static_cast<Eigen::Index>(i)) = rows[i][0];
    }
    return v;
}

Matrix read_matrix_csv(const std::string& path) {
    const auto rows = read_rows(path);
    const std::size_t cols = rows.front().size();
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].size() != cols)
            throw ParseError(path + ": ragged row " + std::to_string(i + 1) +
                             " (" + std::to_string(rows[i].size()) + " vs " +
                             std::to_string(cols) + " values)");
    if (rows.size() != cols)
        throw DimensionMismatch(path + ": covariance must be square, got " +
                                std::to_string(rows.size()) + " x " +
                                std::to_string(cols));
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                rows[i][j];
    return m;
}

std::vector<Vector> read_spectra_csv(const std::string& path) {
    const auto rows = read_rows(path);
    const std::size_t cols = rows.front().size();
    std::vector<Vector> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols)
            throw ParseError(path + ": ragged row " + std::to_string(i + 1));
        Vector v(cols);
        for (std::size_t j = 0; j < cols; ++j)
            v(static_cast<Eigen::Index>(j)) = rows[i][j];
        out.push_back(std::move(v));
    }
    return out;
}

Matrix symmetrized(const Matrix& m, const std::string& label) {
    if (m.rows() != m.cols())
        throw DimensionMismatch(label + ": matrix is not square");
    const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-30);
    const double gap = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (gap > 1e-8 * scale) {
        std::ostringstream msg;
        msg << label << ": relative asymmetry " << gap / scale
            << " exceeds 1e-8";
        throw AsymmetryError(msg.str());
    }
    return 0.5 * (m + m.transpose());
}

Matrix ar1_covariance(int p, double rho) {
    if (p < 1) throw DomainError("ar1_covariance: p must be >= 1");
    if (!(std::abs(rho) < 1.0))
        throw DomainError("ar1_covariance: |rho| must be below 1");
    Matrix sigma(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            sigma(i, j) = std::pow(rho, std::abs(i - j));
    return sigma;
}

Vector smooth_target(int p) {
    if (p < 1) throw DomainError("smooth_target: p must be >= 1");
    Vector t(p);
    const double center = 0.5 * (p - 1);
    const double width = std::max(1.0, p / 6.0);
    for (int i = 0; i < p; ++i) {
        const double z = (i - center) / width;
        t(i) = std::exp(-0.5 * z * z);
    }
    return t / t.norm();
}

DatasetBundle load_bundle_from_files(const std::string& t_path,
                                     const std::string& mu_path,
                                     const std::string& sigma_path) {
    DatasetBundle b;
    b.t = read_vector_csv(t_path);
    b.mu = read_vector_csv(mu_path);
    b.sigma = symmetrized(read_matrix_csv(sigma_path), sigma_path);
    b.provenance = Provenance::files;
    if (b.mu.size() != b.t.size() || b.sigma.rows() != b.t.size())
        throw DimensionMismatch(
            "dataset bundle: t, mu and sigma disagree on the band count");
    linalg::cholesky(b.sigma);  // PD gate
    return b;
}

DatasetBundle synthetic_bundle(int p, double rho, double mu_offset,
                               double t_rough, double mu_rough) {
    DatasetBundle b;
    b.t = smooth_target(p);
    if (t_rough != 0.0) {
        for (int i = 0; i < p; ++i)
            b.t(i) += t_rough * ((i % 2) ? -1.0 : 1.0) / std::sqrt(double(p));
        b.t /= b.t.norm();
    }
    b.mu = Vector::Constant(p, mu_offset);
    for (int i = 0; i < p; ++i)
        b.mu(i) += mu_rough * (((i / 2) % 2) ? -1.0 : 1.0);
    b.sigma = ar1_covariance(p, rho);
    b.provenance = Provenance::synthetic;
    return b;
}

}  // namespace subpix::io
