#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <vector>

namespace glmm {

struct EigenPairs {
    std::vector<double> values; ///< ascending
    Eigen::MatrixXd vectors;    ///< columns, B-orthonormal
    bool converged = false;
    int iterations = 0;
    double max_residual = 0.0;
};

/// Lowest `count` eigenpairs of the generalized symmetric problem A x = lambda B x
/// with B = diag(b) > 0, by shift-invert block Lanczos with full reorthogonalization and
/// Rayleigh-Ritz extraction; the block size covers eigenvalue multiplicities up to 8.
/// `shift` must lie strictly below the spectrum of (A, B) so that A - shift*B is SPD.
EigenPairs lowest_eigenpairs(const Eigen::SparseMatrix<double>& a,
                             const Eigen::VectorXd& b,
                             int count,
                             double shift,
                             int max_krylov = 400,
                             double tolerance = 1e-10);

/// Solves a consistent symmetric positive semidefinite system K x = rhs whose
/// kernel is spanned by the constant vector. The solution is normalized to
/// have zero weighted mean (weights `mass`).
Eigen::VectorXd solve_constant_kernel(const Eigen::SparseMatrix<double>& k,
                                      const Eigen::VectorXd& rhs,
                                      const Eigen::VectorXd& mass);

/// Solves a consistent symmetric positive semidefinite system with a
/// one-dimensional kernel whose generator is nonzero at index 0, by pinning x(0) = 0.
Eigen::VectorXd solve_pinned(const Eigen::SparseMatrix<double>& k, const Eigen::VectorXd& rhs);

/// Number of eigenvalues of (A, diag(b)) strictly below `sigma` (Sylvester inertia of A - sigma*B).
int count_eigenvalues_below(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, double sigma);

struct IterativeSolve {
    Eigen::VectorXd x;
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Conjugate gradients on a consistent symmetric positive semidefinite system.
IterativeSolve solve_semidefinite(const Eigen::SparseMatrix<double>& k,
                                  const Eigen::VectorXd& rhs,
                                  double tolerance,
                                  int max_iterations);

} // namespace glmm
