#pragma once

#include "glmm/manifold.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace glmm {

struct PotentialValue {
    double w = 0.0;
    Eigen::Vector2d dw = Eigen::Vector2d::Zero();
};

/// W(z) = (1 - |z|^2)^2 / 4 for |z| < 2, continued as 9/4 + 6 tanh(|z| - 2).
/// The continuation matches value and slope at |z| = 2.
PotentialValue potential_eval(const Eigen::Vector2d& z);
Eigen::Matrix2d potential_hessian(const Eigen::Vector2d& z);

/// sup |DW| for the continuation above (attained at |z| = 2).
inline constexpr double kPotentialGradientBound = 6.0;

/// Per-vertex R^2-valued field on a mesh together with its epsilon.
struct ComplexField {
    MeshPtr mesh;
    Eigen::MatrixX2d values; ///< V x 2, row v = (Re u, Im u)
    double epsilon = 0.0;

    ComplexField() = default;
    ComplexField(MeshPtr m, Eigen::MatrixX2d v, double eps);

    static ComplexField constant(MeshPtr m, const Eigen::Vector2d& value, double eps);

    int size() const { return static_cast<int>(values.rows()); }
    /// Throws ValidationError when epsilon <= 0, sizes disagree or entries are not finite.
    void validate() const;
    double min_modulus() const;
    double max_modulus() const;
};

struct EnergyReport {
    double total = 0.0;
    double dirichlet = 0.0;   ///< 1/2 int |du|^2
    double potential = 0.0;   ///< int W(u) / eps^2
    double normalized = 0.0;  ///< total / |log eps|
    Eigen::VectorXd cell_density; ///< e_eps per top cell, sum(vol * e) = total
};

EnergyReport energy(const ComplexField& u);

/// Total energy only, for inner loops.
double energy_value(const MeshManifold& mesh, const Eigen::MatrixX2d& values, double epsilon);

/// Exact gradient of the discrete energy (a covector: mass weights are not removed).
Eigen::MatrixX2d gradient(const ComplexField& u);
Eigen::MatrixX2d gradient(const MeshManifold& mesh, const Eigen::MatrixX2d& values, double epsilon);

/// sqrt(sum_v star0_v |r_v|^2) with r = gradient / star0, the discrete (GL) residual.
double gl_residual(const ComplexField& u);
double residual_norm(const MeshManifold& mesh, const Eigen::MatrixX2d& covector);

/// Exact Hessian of the discrete energy; unknowns interleaved as 2v + component.
SparseMatrix hessian(const ComplexField& u);

/// Per-vertex nearest-point retraction onto the closed unit disk.
ComplexField truncate(const ComplexField& u);

/// n x 2 matrix du on a cell, rows along the cell's tangent frame.
Eigen::MatrixXd cell_differential(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell);
/// |du|^2 on a cell from its edges; sum(vol * this) equals sum(star1 |du_e|^2).
double cell_gradient_squared(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell);
/// Mean of |u|^2 over the corners of a cell.
double cell_mean_modulus2(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell);

/// Ambient vector field sampled at vertices (V x ambient dimension).
struct TestVectorField {
    std::string name;
    Eigen::MatrixXd values;
};

/// Rotation and conformal fields on the sphere; first Fourier modes on tori.
std::vector<TestVectorField> default_test_fields(const MeshManifold& mesh);

struct StressEnergy {
    std::vector<Eigen::MatrixXd> tensor; ///< per cell n x n, T = e Id - du^T du
    Eigen::VectorXd density;             ///< e per cell
    Eigen::VectorXd du_squared;          ///< |du|^2 per cell, from the frame differential
    std::vector<std::string> field_names;
    Eigen::VectorXd residuals;           ///< int <T, grad X_i>
    Eigen::VectorXd relative_residuals;  ///< residual_i / (E * max|grad X_i|)
    double max_trace_defect = 0.0;       ///< max |tr T - (n e - |du|^2)|
    double max_asymmetry = 0.0;

    /// P = T / e on a cell (zero where e vanishes).
    Eigen::MatrixXd normalized(int cell) const;
};

StressEnergy stress_energy(const ComplexField& u, const std::vector<TestVectorField>& fields);

void write_field(const std::string& path, const ComplexField& u);
ComplexField read_field(const std::string& path, MeshPtr mesh);

} // namespace glmm
