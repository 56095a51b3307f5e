#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "pmubqkd/mode_algebra.hpp"

namespace pmubqkd {

/// A square complex matrix checked to equal its conjugate transpose.
class HermitianOperator {
public:
    HermitianOperator() = default;

    explicit HermitianOperator(CMatrix m, double tol = 1e-12) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw std::invalid_argument("Hermitian operator must be square");
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > tol * scale) {
            throw std::invalid_argument("operator is not Hermitian");
        }
        m_ = 0.5 * (m_ + m_.adjoint());
    }

    static HermitianOperator identity(int dim) { return HermitianOperator(CMatrix::Identity(dim, dim)); }

    int dim() const noexcept { return static_cast<int>(m_.rows()); }
    const CMatrix& matrix() const noexcept { return m_; }

    Eigen::VectorXd eigenvalues() const { return Eigen::SelfAdjointEigenSolver<CMatrix>(m_, Eigen::EigenvaluesOnly).eigenvalues(); }
    double operator_norm() const { return eigenvalues().cwiseAbs().maxCoeff(); }

    /// Re Tr(rho A)
    double expectation(const CMatrix& rho) const { return (rho * m_).trace().real(); }

private:
    CMatrix m_;
};

/// exp(A) for Hermitian A through its spectral decomposition.
inline CMatrix hermitian_exp(const CMatrix& a) {
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(a);
    const CMatrix& v = es.eigenvectors();
    return v * es.eigenvalues().array().exp().matrix().cast<cplx>().asDiagonal() * v.adjoint();
}

/// |a><b| for column vectors.
inline CMatrix outer(const CVector& a, const CVector& b) { return a * b.adjoint(); }

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

}  // namespace pmubqkd
