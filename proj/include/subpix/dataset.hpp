#pragma once

#include <string>
#include <vector>

#include "subpix/linalg.hpp"

// Dataset ingestion and synthetic background generation.
//
// File formats:
//  - vector files: single-column CSV, one real per line, '#' comments allowed
//  - covariance: p lines of p comma-separated reals; near-symmetric inputs
//    (relative asymmetry below 1e-8) are symmetrized, anything worse errors
//  - spectra files: one spectrum per line, p comma-separated reals
namespace subpix::io {

enum class Provenance { files, synthetic };

struct DatasetBundle {
    Vector t;
    Vector mu;
    Matrix sigma;
    Provenance provenance = Provenance::synthetic;
};

Vector read_vector_csv(const std::string& path);
Matrix read_matrix_csv(const std::string& path);
std::vector<Vector> read_spectra_csv(const std::string& path);

// Enforces the 1e-8 relative symmetry budget; returns 0.5 (M + M^T).
Matrix symmetrized(const Matrix& m, const std::string& label);

// Toeplitz AR(1) covariance, sigma_ij = rho^|i-j|.
Matrix ar1_covariance(int p, double rho);

// Smooth unit-norm band profile used as the synthetic target signature.
Vector smooth_target(int p);

DatasetBundle load_bundle_from_files(const std::string& t_path,
                                     const std::string& mu_path,
                                     const std::string& sigma_path);

// Synthetic background: sigma = AR(1)(rho); mu = mu_offset * 1_p plus an
// optional band-alternating component of weight mu_rough (real signatures
// and means carry fine structure that the smooth defaults lack); t = smooth
// profile blended with a high-frequency component of weight t_rough, unit
// norm. All extras default to zero.
DatasetBundle synthetic_bundle(int p, double rho, double mu_offset = 0.0,
                               double t_rough = 0.0, double mu_rough = 0.0);

}  // namespace subpix::io
