#pragma once

#include <Eigen/Dense>

#include "subpix/errors.hpp"

namespace subpix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace subpix

// Small dense symmetric linear algebra shared by every other module. All
// functions are pure; inputs are never modified.
namespace subpix::linalg {

// I_m - (1/m) 1 1^T, the projector onto the orthogonal complement of the
// all-ones vector.
Matrix centering_projector(int m);

struct Scatter {
    Vector mean;     // column average of the samples
    Matrix scatter;  // Z Z^T - n mean mean^T, positive definite
};

// Column mean and centered scatter of a p x n sample matrix. Requires n > p;
// throws NotPositiveDefinite when the training set is degenerate.
Scatter scatter(const Matrix& samples);

// Symmetric W with W * spd * W = I.
Matrix inv_sqrt(const Matrix& spd);

// Symmetric R with R * R = spd.
Matrix sqrt_spd(const Matrix& spd);

// I - v v^T / (v^T v); annihilates v.
Matrix unit_orth_projector(const Vector& v);

// log det of a positive definite matrix via its Cholesky factor.
double logdet(const Matrix& spd);

// Cholesky factorization that throws NotPositiveDefinite instead of
// reporting failure through info().
Eigen::LLT<Matrix> cholesky(const Matrix& spd);

bool is_symmetric(const Matrix& m, double rel_tol = 1e-12);

}  // namespace subpix::linalg
