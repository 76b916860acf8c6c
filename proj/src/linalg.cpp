#include "glmm/linalg.hpp"

#include "glmm/error.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>

namespace glmm {

namespace {

constexpr const char* kModule = "linalg";
constexpr int kBlock = 8;

Eigen::SparseMatrix<double> shifted(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, double sigma)
{
    Eigen::SparseMatrix<double> m = a;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        m.coeffRef(i, i) -= sigma * b(i);
    }
    m.makeCompressed();
    return m;
}

/// Orthonormalizes `block` against the first `used` columns of `basis` and
/// within itself; columns that collapse are replaced by fresh random vectors.
int append_block(Eigen::MatrixXd& basis, int used, Eigen::MatrixXd block, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal;
    const Eigen::Index n = basis.rows();
    int added = 0;
    for (Eigen::Index j = 0; j < block.cols() && used + added < basis.cols(); ++j) {
        Eigen::VectorXd v = block.col(j);
        for (int attempt = 0; attempt < 4; ++attempt) {
            double before = v.norm();
            for (int pass = 0; pass < 2; ++pass) {
                if (used + added > 0) {
                    auto q = basis.leftCols(used + added);
                    v -= q * (q.transpose() * v);
                }
            }
            double after = v.norm();
            if (after > 1e-10 * std::max(before, 1e-300)) {
                break;
            }
            for (Eigen::Index i = 0; i < n; ++i) {
                v(i) = normal(rng);
            }
        }
        double norm = v.norm();
        if (!(norm > 0.0)) {
            continue;
        }
        basis.col(used + added) = v / norm;
        ++added;
    }
    return added;
}

} // namespace

EigenPairs lowest_eigenpairs(const Eigen::SparseMatrix<double>& a,
                             const Eigen::VectorXd& b,
                             int count,
                             double shift,
                             int max_krylov,
                             double tolerance)
{
    const Eigen::Index n = a.rows();
    if (a.cols() != n || b.size() != n) {
        throw ValidationError(kModule, "eigen-solve dimension mismatch");
    }
    if (count < 1 || b.minCoeff() <= 0.0) {
        throw ValidationError(kModule, "eigen-solve needs count >= 1 and a positive mass");
    }
    count = static_cast<int>(std::min<Eigen::Index>(count, n));
    const int limit = static_cast<int>(std::min<Eigen::Index>(std::max(max_krylov, 2 * count + 2 * kBlock), n));

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted(a, b, shift));
    if (factor.info() != Eigen::Success || factor.vectorD().minCoeff() <= 0.0) {
        throw ComputeError(kModule, "shift is not below the spectrum (A - shift*B not positive definite)");
    }
    const Eigen::VectorXd root = b.cwiseSqrt();
    auto apply = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        Eigen::VectorXd rhs = root.cwiseProduct(y);
        return root.cwiseProduct(factor.solve(rhs));
    };

    std::mt19937_64 rng(0x5eed1234ULL);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd basis(n, limit);
    Eigen::MatrixXd image(n, limit);
    Eigen::MatrixXd start(n, std::min<Eigen::Index>(kBlock, n));
    for (Eigen::Index i = 0; i < start.size(); ++i) {
        start.data()[i] = normal(rng);
    }
    int used = append_block(basis, 0, start, rng);
    int imaged = 0;

    EigenPairs out;
    std::vector<double> theta;
    Eigen::MatrixXd ritz;
    for (;;) {
        for (; imaged < used; ++imaged) {
            image.col(imaged) = apply(basis.col(imaged));
        }
        const bool full = used >= limit;
        if (used >= count + kBlock || full) {
            Eigen::MatrixXd h = basis.leftCols(used).transpose() * image.leftCols(used);
            h = 0.5 * (h + h.transpose()).eval();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
            theta.clear();
            ritz.resize(used, count);
            double worst = 0.0;
            bool ok = true;
            for (int k = 0; k < count; ++k) {
                Eigen::Index idx = used - 1 - k;
                double t = eig.eigenvalues()(idx);
                Eigen::VectorXd s = eig.eigenvectors().col(idx);
                Eigen::VectorXd r = image.leftCols(used) * s - t * (basis.leftCols(used) * s);
                double rel = r.norm() / std::max(std::abs(t), 1e-300);
                worst = std::max(worst, rel);
                ok = ok && rel <= tolerance;
                theta.push_back(t);
                ritz.col(k) = s;
            }
            out.max_residual = worst;
            out.iterations = used;
            if (ok || full) {
                out.converged = ok;
                break;
            }
        }
        Eigen::MatrixXd next = image.middleCols(std::max(0, used - kBlock), std::min(used, kBlock));
        int added = append_block(basis, used, next, rng);
        if (added == 0) {
            out.converged = false;
            break;
        }
        used += added;
    }

    // theta descending -> lambda ascending.
    out.values.resize(theta.size());
    out.vectors.resize(n, static_cast<Eigen::Index>(theta.size()));
    for (std::size_t k = 0; k < theta.size(); ++k) {
        out.values[k] = shift + 1.0 / theta[k];
        Eigen::VectorXd y = basis.leftCols(used) * ritz.col(static_cast<Eigen::Index>(k));
        out.vectors.col(static_cast<Eigen::Index>(k)) = y.cwiseQuotient(root);
    }
    return out;
}

Eigen::VectorXd solve_pinned(const Eigen::SparseMatrix<double>& k, const Eigen::VectorXd& rhs)
{
    const Eigen::Index n = k.rows();
    if (n == 0 || rhs.size() != n) {
        throw ValidationError(kModule, "pinned solve dimension mismatch");
    }
    if (n == 1) {
        return Eigen::VectorXd::Zero(1);
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(k.nonZeros()));
    for (int col = 0; col < k.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(k, col); it; ++it) {
            if (it.row() > 0 && it.col() > 0) {
                trips.emplace_back(it.row() - 1, it.col() - 1, it.value());
            }
        }
    }
    Eigen::SparseMatrix<double> reduced(n - 1, n - 1);
    reduced.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(reduced);
    if (factor.info() != Eigen::Success) {
        throw ComputeError(kModule, "pinned factorization failed");
    }
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.tail(n - 1) = factor.solve(rhs.tail(n - 1));
    if (factor.info() != Eigen::Success || !x.allFinite()) {
        throw ComputeError(kModule, "pinned solve failed");
    }
    return x;
}

Eigen::VectorXd solve_constant_kernel(const Eigen::SparseMatrix<double>& k,
                                      const Eigen::VectorXd& rhs,
                                      const Eigen::VectorXd& mass)
{
    Eigen::VectorXd x = solve_pinned(k, rhs);
    x.array() -= x.dot(mass) / mass.sum();
    return x;
}

int count_eigenvalues_below(const Eigen::SparseMatrix<double>& a, const Eigen::VectorXd& b, double sigma)
{
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted(a, b, sigma));
    if (factor.info() != Eigen::Success) {
        throw ComputeError(kModule, "inertia factorization failed");
    }
    const Eigen::VectorXd& d = factor.vectorD();
    return static_cast<int>((d.array() < 0.0).count());
}

IterativeSolve solve_semidefinite(const Eigen::SparseMatrix<double>& k,
                                  const Eigen::VectorXd& rhs,
                                  double tolerance,
                                  int max_iterations)
{
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(tolerance);
    cg.setMaxIterations(max_iterations);
    cg.compute(k);
    IterativeSolve out;
    out.x = cg.solve(rhs);
    out.iterations = static_cast<int>(cg.iterations());
    double denom = rhs.norm();
    out.relative_residual = denom > 0.0 ? (k * out.x - rhs).norm() / denom : 0.0;
    if (!out.x.allFinite() || out.relative_residual > std::max(10.0 * tolerance, 1e-12)) {
        throw ComputeError(kModule, "conjugate gradients stalled at relative residual "
                                        + std::to_string(out.relative_residual) + " after "
                                        + std::to_string(out.iterations) + " iterations");
    }
    return out;
}

} // namespace glmm
