#pragma once

#include "glmm/glenergy.hpp"
#include "glmm/manifold.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace glmm {

/// v_eps(z) = z/|z| for |z| > eps, z/eps otherwise.
Eigen::Vector2d model_vortex(const Eigen::Vector2d& z, double epsilon);

/// Planar energy of v_eps on the disk of radius R by Gauss-Legendre quadrature
/// in r on the core and in log r on the annulus. Requires quadrature_n >= 4.
double vortex_disk_energy(double epsilon, double radius, int quadrature_n);

struct VortexLaw {
    std::vector<double> epsilons;
    std::vector<double> energies;
    double slope = 0.0;     ///< least-squares slope of E against log(1/eps)
    double intercept = 0.0;
};

VortexLaw fit_vortex_law(const std::vector<double>& epsilons, double radius, int quadrature_n);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// f = orthogonal projection of the mesh embedding onto a seeded random 2-plane.
struct SweepMap {
    Eigen::MatrixX2d values;   ///< V x 2
    Eigen::MatrixXd plane;     ///< L x 2, orthonormal columns
    std::uint64_t seed = 0;
    int draws = 0;             ///< planes drawn until the rank checks passed
    double jmin = 0.0;         ///< min over cells of |Jf| = sigma_1 sigma_2
    double min_edge_ratio = 0.0; ///< min over edges of |df_e| / length
    double lipschitz2 = 0.0;   ///< max over cells of |df|_F^2
    double fiber_bound = 0.0;  ///< max over sampled z of sum of diam^{n-2} over cells meeting f^{-1}(z)
    double image_diameter = 0.0;

    /// C1, C2 in E(F_y) <= C1 |log eps| + C2 derived from the coarea formula.
    double c1() const;
    double c2() const;
};

struct SweepOptions {
    double rank_tolerance = 1e-6;
    int max_draws = 64;
    int fiber_samples = 48; ///< per side of the sampling grid over the image bounding box
};

SweepMap build_sweep_map(const MeshManifold& mesh, std::uint64_t seed, const SweepOptions& options = {});

/// Polar parameter grid over the closed unit disk: node 0 is the center,
/// node 1 + (i - 1) n_t + j sits at radius i / n_r and angle 2 pi j / n_t.
/// Ring n_r is the boundary circle.
struct DiskFamily {
    MeshPtr mesh;
    double epsilon = 0.0;
    int n_r = 0;
    int n_t = 0;
    std::uint64_t seed = 0;
    double c1 = 0.0;
    double c2 = 0.0;
    double translate_clamp = 0.0;
    std::vector<Eigen::MatrixX2d> fields;

    int node_count() const { return 1 + n_r * n_t; }
    int node_index(int ring, int angle) const;
    Eigen::Vector2d parameter(int node) const;
    bool is_boundary(int node) const;
    ComplexField field(int node) const;
    std::vector<std::pair<int, int>> adjacent_pairs() const;

    /// Checks sizes and exact boundary pinning; throws ValidationError otherwise.
    void validate() const;
};

DiskFamily build_family(MeshPtr mesh, const SweepMap& sweep, double epsilon, int n_r, int n_t,
                        double clamp_factor = 10.0);

/// sqrt(int |d(u - v)|^2 + |u - v|^2).
double h1_distance(const MeshManifold& mesh, const Eigen::MatrixX2d& u, const Eigen::MatrixX2d& v);

struct FamilyStats {
    std::vector<double> energies;
    int max_node = 0;
    double max_energy = 0.0;
    double continuity_modulus = 0.0; ///< max H1 distance over adjacent nodes
    double min_average_norm = 0.0;   ///< min over nodes of |average of F(y)|
    int min_average_node = 0;
};

FamilyStats family_stats(const DiskFamily& family);

/// Spatial average of a field.
Eigen::Vector2d field_average(const MeshManifold& mesh, const Eigen::MatrixX2d& values);

void save_family(const std::string& directory, const DiskFamily& family);
DiskFamily load_family(const std::string& directory, MeshPtr mesh);

} // namespace glmm
