#pragma once

#include "glmm/glenergy.hpp"
#include "glmm/manifold.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace glmm {

/// Cutoff profile: 1 on t <= 1/2, 1/t on t >= 3/4, C^2 polynomial in between.
double cutoff(double t);
double cutoff_derivative(double t);

struct PreJacobian {
    Eigen::VectorXd ju;          ///< edge 1-form, u_a x u_b (the average of u times du along the edge)
    Eigen::VectorXd divergence;  ///< d* ju, a vertex function
    double divergence_norm = 0.0;
    Eigen::VectorXd curl;        ///< d ju, a 2-form
    double max_identity_defect = 0.0; ///< max over cells of the relative defect of |u|^2|du|^2 = |ju|^2 + |u|^2|d|u||^2
};

PreJacobian prejacobian(const ComplexField& u, const DECOperators& dec);

struct BochnerReport {
    Eigen::VectorXd defect;      ///< per cell max(0, |du|^2 - (1/eps^2 + A)(1 - |u|^2))
    double max_defect = 0.0;
    double violating_fraction = 0.0; ///< cells with a positive defect
};

BochnerReport bochner_check(const ComplexField& u, double ricci_negative_max);

struct SublevelRow {
    double t = 0.0;
    double volume = 0.0;
    double constant = 0.0; ///< volume (1 - t)^2 / eps^2
};

std::vector<SublevelRow> sublevel_volume(const ComplexField& u, const std::vector<double>& t_list);

struct HodgeParts {
    Eigen::VectorXd gamma;    ///< f(|u|^2) ju on edges
    Eigen::VectorXd theta;    ///< vertex function, zero weighted mean
    Eigen::VectorXd xi;       ///< 2-form
    Eigen::VectorXd exact;    ///< d theta
    Eigen::VectorXd coexact;  ///< d* xi
    Eigen::VectorXd harmonic; ///< gamma - d theta - d* xi
    double gamma_norm = 0.0;
    double exact_norm = 0.0;
    double coexact_norm = 0.0;
    double harmonic_norm = 0.0;
    double harmonic_defect = 0.0; ///< (|d* h| + |d h|) / |gamma|: distance of h from the harmonic space
    double max_cross_inner = 0.0; ///< max pairwise |<a, b>| / |gamma|^2 over the three parts
};

/// Decomposes gamma = f(|u|^2) ju. Norms use the star1 inner product.
/// Throws ComputeError when a linear solve fails.
HodgeParts hodge_decompose(const ComplexField& u, const DECOperators& dec);
/// Same for an arbitrary edge 1-form.
HodgeParts hodge_decompose_form(const MeshManifold& mesh, const DECOperators& dec, const Eigen::VectorXd& gamma);

/// int |alpha|^p with |alpha|^2 reconstructed per cell from the edge values.
double one_form_lp(const MeshManifold& mesh, const Eigen::VectorXd& alpha, double p);

struct DthetaRow {
    double epsilon = 0.0;
    double dtheta2 = 0.0;        ///< int |d theta|^2
    double sqrt_log_ratio = 0.0; ///< dtheta2 / |log eps|^{1/2}
    double log_ratio = 0.0;      ///< dtheta2 / |log eps|
    double harmonic2 = 0.0;      ///< int |h|^2
};

std::vector<DthetaRow> dtheta_subcritical(const std::vector<double>& epsilons, const std::vector<HodgeParts>& parts);

/// Largest growth factor of sqrt_log_ratio between consecutive rows.
double max_consecutive_growth(const std::vector<DthetaRow>& rows);

/// Edge-weighted shortest-path distances from `source`, pruned beyond `cutoff_radius`
/// (vertices past the cutoff stay at infinity).
Eigen::VectorXd graph_distances(const MeshManifold& mesh, int source, double cutoff_radius);

/// Energy attributed to vertices: each cell's vol * e shared equally among its corners.
Eigen::VectorXd vertex_energy(const ComplexField& u);

struct DensityProfile {
    int center = 0;
    std::vector<double> radii;
    std::vector<double> mass;    ///< mu(B_r), mu = e dv / |log eps|
    std::vector<double> values;  ///< mass / (omega_{n-2} r^{n-2})
};

/// Smallest admissible ball radius (three longest edges).
double min_profile_radius(const MeshManifold& mesh);

DensityProfile density_profile(const ComplexField& u, int center, const std::vector<double>& radii);

struct ZeroCluster {
    std::vector<int> vertices;
    int center = 0;              ///< cluster vertex nearest the centroid
    double min_modulus2 = 0.0;
};

/// Vertices with |u|^2 < threshold grouped by edge adjacency.
std::vector<ZeroCluster> zero_clusters(const ComplexField& u, double threshold = 0.25);

/// Vertex maximizing the graph distance to the given vertices.
int farthest_vertex(const MeshManifold& mesh, const std::vector<int>& from);

struct EllipticityOptions {
    double eta0 = 0.01;
    double delta0 = 0.5;
    double modulus2_threshold = 7.0 / 8.0;
};

struct EllipticityFlags {
    EllipticityOptions options;
    std::vector<char> low_energy;   ///< r^{2-n} int_{B_r} e <= eta0 |log(eps/r)| at r = delta0
    Eigen::VectorXd ball_energy;    ///< int_{B_delta0} e per vertex
    int flagged = 0;
    int violations = 0;             ///< flagged vertices with |u|^2 below the threshold
};

EllipticityFlags eta_ellipticity_scan(const ComplexField& u, const EllipticityOptions& options = {});

/// Loop integral of a 1-form along a closed vertex path (consecutive vertices must share an edge).
double loop_integral(const MeshManifold& mesh, const Eigen::VectorXd& one_form, const std::vector<int>& loop);

struct ConcentrationOptions {
    bool hodge = true;
    bool density = true;
    bool ellipticity = true;
    bool bochner = true;
    bool stress_energy = true;
    EllipticityOptions ellipticity_options;
    std::vector<double> sublevel_t = {0.25, 0.5, 0.75};
    std::vector<double> lp_exponents = {1.1, 1.25};
    int profile_samples = 6; ///< radii from the resolution floor up to delta0
};

struct ConcentrationReport {
    double epsilon = 0.0;
    double energy = 0.0;
    double normalized_energy = 0.0;
    double residual = 0.0;
    PreJacobian prejac;
    bool has_bochner = false;
    BochnerReport bochner;
    std::vector<SublevelRow> sublevel;
    bool has_hodge = false;
    HodgeParts hodge;
    std::vector<std::pair<double, double>> coexact_lp; ///< (p, |d* xi|_{L^p})
    std::vector<ZeroCluster> clusters;
    std::vector<DensityProfile> profiles; ///< one per cluster, then the control vertex
    int control_vertex = -1;
    bool has_ellipticity = false;
    EllipticityFlags ellipticity;
    bool has_stress = false;
    StressEnergy stress;
};

ConcentrationReport concentration_report(const ComplexField& u, const DECOperators& dec,
                                         const ConcentrationOptions& options = {});

/// Writes the report as JSON; large forms go to sibling files named in the document.
void save_concentration_report(const std::string& directory, const std::string& stem,
                               const ConcentrationReport& report);

} // namespace glmm
