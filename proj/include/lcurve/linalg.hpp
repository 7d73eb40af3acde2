#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "lcurve/errors.hpp"

namespace lcurve {

// Cholesky factor of a covariance matrix. The matrix is tried as given,
// then with a diagonal jitter of 1e-10 escalated by x10 up to 1e-4.
// `jitter_used` reports the diagonal addition that succeeded.
struct JitteredCholesky {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter_used = 0.0;
};

inline JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& k) {
    JitteredCholesky out;
    if (!k.allFinite()) throw NumericalFailure("covariance matrix has non-finite entries");
    out.llt.compute(k);
    if (out.llt.info() == Eigen::Success) return out;
    const auto n = k.rows();
    for (double jitter = 1e-10; jitter <= 1e-4 * (1.0 + 1e-9); jitter *= 10.0) {
        out.llt.compute(k + jitter * Eigen::MatrixXd::Identity(n, n));
        if (out.llt.info() == Eigen::Success) {
            out.jitter_used = jitter;
            return out;
        }
    }
    throw NumericalFailure("covariance not positive definite after jitter escalation to 1e-4");
}

// Symmetric PSD inverse through the eigen-decomposition. Eigenvalues below
// max_eig * 1e-16 are lifted to that floor, so near-singular information
// matrices give very large (but finite) variances instead of failing.
inline Eigen::MatrixXd psd_inverse(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 0.0);
    const double floor = top > 0.0 ? top * 1e-16 : 1e-300;
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = 1.0 / std::max(ev[i], floor);
    Eigen::MatrixXd inv = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (inv + inv.transpose());
}

} // namespace lcurve
