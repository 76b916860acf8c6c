#pragma once

#include "glmm/glenergy.hpp"
#include "glmm/sweepfamily.hpp"

#include <string>
#include <vector>

namespace glmm {

struct FlowConfig {
    bool line_search = true;
    double step = 1.0;          ///< initial (line search) or fixed step on the preconditioned direction
    double max_step = 4.0;
    int max_iterations = 2000;
    bool truncate = true;       ///< retract onto the unit disk after each step
    int window = 10;
    double relative_tolerance = 1e-8;
    double min_step = 1e-14;
    /// Stop once the max node's H^1_eps-dual gradient norm is at most this times sqrt(E); 0 disables.
    double stationarity_tolerance = 1e-3;

    void validate() const;
};

struct FlowResult {
    DiskFamily family;
    std::vector<double> history; ///< max-node energy, entry 0 is the initial family
    std::vector<double> gradient_history; ///< H^1_eps-dual gradient norm at the max node, per iteration
    int max_node = 0;
    int iterations = 0;
    bool stagnated = false;
    std::string stop_reason;
};

/// Preconditioned energy descent applied to every interior node of the family.
/// Boundary nodes are never touched. Throws ValidationError when the family is not admissible.
FlowResult pull_down(const DiskFamily& family, const FlowConfig& cfg);

struct RefineOptions {
    double tolerance = 1e-8;
    int max_iterations = 200;
};

struct RefineResult {
    ComplexField field;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    double residual = 0.0;
    int iterations = 0;
    int newton_steps = 0;
    int fallback_steps = 0;
    std::vector<double> residual_history;
};

/// Damped Newton on the discrete (GL) equation with the phase gauge fixed by a
/// bordered system. Up to 25 full Newton steps may raise the residual (watchdog); after that,
/// Levenberg-Marquardt steps on the residual. The best iterate is returned.
/// Throws ComputeError with the best residual on non-convergence.
RefineResult refine_to_critical(const ComplexField& u0, const RefineOptions& options = {});

struct MorseInfo {
    int index = 0;                  ///< eigenvalues below -zero_tolerance
    int near_zero = 0;
    double zero_tolerance = 0.0;
    std::vector<double> eigenvalues; ///< lowest ones of (Hessian, mass)
};

MorseInfo morse_index(const ComplexField& u, int count = 20);

struct MinMaxResult {
    double epsilon = 0.0;
    double c_estimate = 0.0;        ///< max-node energy after the flow
    std::vector<double> history;
    int max_node = 0;
    int flow_iterations = 0;
    bool stagnated = false;
    std::string stop_reason;
    DiskFamily family;              ///< the family after the flow
    ComplexField critical;
    double slice_energy = 0.0;      ///< energy of the max slice before refinement
    double refined_energy = 0.0;
    double residual = 0.0;
    int refine_iterations = 0;
    MorseInfo morse;
    double min_modulus = 0.0;
    bool nontrivial = false;        ///< E > 0 and min |u|^2 < 7/8
    double wall_seconds = 0.0;
};

MinMaxResult run_minmax(MeshPtr mesh, const SweepMap& sweep, double epsilon, int n_r, int n_t,
                        const FlowConfig& flow, const RefineOptions& refine);

/// Smallest admissible epsilon for a mesh (a quarter of the longest edge).
double epsilon_floor(const MeshManifold& mesh);

struct SweepTable {
    std::vector<MinMaxResult> results;
    double fit_c1 = 0.0; ///< least-squares slope of refined energy against |log eps|
    double fit_c2 = 0.0;
};

SweepTable cepsilon_sweep(MeshPtr mesh, const SweepMap& sweep, const std::vector<double>& epsilons, int n_r,
                          int n_t, const FlowConfig& flow, const RefineOptions& refine);

/// Checks the epsilon list: strictly decreasing, each above the mesh floor.
void validate_epsilons(const MeshManifold& mesh, const std::vector<double>& epsilons);

void fit_affine(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept);

/// Columnar sweep table with a schema comment and header row.
std::string format_sweep_table(const SweepTable& table);

} // namespace glmm
