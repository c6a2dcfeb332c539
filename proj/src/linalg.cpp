#include "subpix/linalg.hpp"

#include <cmath>
#include <string>

namespace subpix::linalg {

namespace {

void require_symmetric(const Matrix& m, const char* who) {
    if (m.rows() != m.cols())
        throw DimensionMismatch(std::string(who) + ": matrix is not square");
    if (!is_symmetric(m))
        throw DomainError(std::string(who) + ": matrix is not symmetric");
}

}  // namespace

bool is_symmetric(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = m.cwiseAbs().maxCoeff();
    const double gap = (m - m.transpose()).cwiseAbs().maxCoeff();
    return gap <= rel_tol * std::max(scale, 1.0);
}

Matrix centering_projector(int m) {
    if (m < 1) throw DomainError("centering_projector: m must be >= 1");
    Matrix proj = Matrix::Identity(m, m);
    proj.array() -= 1.0 / static_cast<double>(m);
    return proj;
}

Eigen::LLT<Matrix> cholesky(const Matrix& spd) {
    Eigen::LLT<Matrix> llt(spd);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefinite("matrix is not positive definite");
    return llt;
}

Scatter scatter(const Matrix& samples) {
    const auto p = samples.rows();
    const auto n = samples.cols();
    if (n <= p)
        throw DomainError("scatter: need more samples than bands (n > p)");
    if (!samples.allFinite())
        throw DomainError("scatter: samples contain non-finite entries");
    Scatter out;
    out.mean = samples.rowwise().mean();
    out.scatter = samples * samples.transpose() -
                  static_cast<double>(n) * out.mean * out.mean.transpose();
    out.scatter = (0.5 * (out.scatter + out.scatter.transpose())).eval();
    cholesky(out.scatter);  // degenerate training sets fail here
    return out;
}

Matrix inv_sqrt(const Matrix& spd) {
    require_symmetric(spd, "inv_sqrt");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
    if (eig.info() != Eigen::Success)
        throw NotPositiveDefinite("inv_sqrt: eigendecomposition failed");
    if (!(eig.eigenvalues().minCoeff() > 0.0))
        throw NotPositiveDefinite("inv_sqrt: matrix is not positive definite");
    return eig.eigenvectors() *
           eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
           eig.eigenvectors().transpose();
}

Matrix sqrt_spd(const Matrix& spd) {
    require_symmetric(spd, "sqrt_spd");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spd);
    if (eig.info() != Eigen::Success)
        throw NotPositiveDefinite("sqrt_spd: eigendecomposition failed");
    if (!(eig.eigenvalues().minCoeff() > 0.0))
        throw NotPositiveDefinite("sqrt_spd: matrix is not positive definite");
    return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
}

Matrix unit_orth_projector(const Vector& v) {
    const double nsq = v.squaredNorm();
    if (!(std::sqrt(nsq) > 1e-300))
        throw ZeroVector("unit_orth_projector: direction has zero norm");
    return Matrix::Identity(v.size(), v.size()) - v * v.transpose() / nsq;
}

double logdet(const Matrix& spd) {
    require_symmetric(spd, "logdet");
    const auto llt = cholesky(spd);
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace subpix::linalg
