#pragma once

#include "glmm/concentration.hpp"
#include "glmm/manifold.hpp"
#include "glmm/minmax.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace glmm {

/// One experiment: geometry, epsilon sweep, solver settings and diagnostics.
///
/// Text form is JSON with sections `geometry`, `sweep`, `flow`, `refine`,
/// `diagnostics` and `output`; see README.md for the keys.
struct RunConfig {
    ModelSpec geometry{ModelKind::FlatTorus2d, 32};
    std::vector<double> epsilons{0.2};
    int n_r = 4;
    int n_t = 16;
    std::uint64_t seed = 1;
    FlowConfig flow;
    RefineOptions refine;
    ConcentrationOptions diagnostics;
    int workers = 1;
    std::string output_directory = "glmm-run";

    /// Checks everything that does not need the mesh. Throws ValidationError.
    void validate() const;

    std::string to_text() const;
    static RunConfig from_text(const std::string& text);
    static RunConfig load(const std::string& path);
};

/// Environment variable that overrides `output.directory`.
inline constexpr const char* kOutputDirEnv = "GLMM_OUTPUT_DIR";

struct EpsilonRun {
    MinMaxResult minmax;
    bool has_report = false;
    ConcentrationReport report;
};

struct RunResult {
    std::string directory;
    MeshPtr mesh;
    SweepMap sweep;
    std::vector<EpsilonRun> runs; ///< in epsilon order
    SweepTable table;
    std::vector<DthetaRow> dtheta;
};

/// Runs the whole experiment and writes the artifact directory.
/// On error a FAILED marker naming the stage is written and the error rethrown.
RunResult run(const RunConfig& config);

/// The summary table (no timing columns, so reruns compare byte for byte).
std::string format_summary_table(const RunResult& result);

struct VerifyItem {
    std::string criterion;
    bool pass = false;
    std::string detail;
};

struct VerifyReport {
    std::vector<VerifyItem> items;
    bool failed_marker = false;
    std::string failed_stage;

    bool pass() const;
};

/// Re-checks the persisted invariants of a run directory from files alone.
VerifyReport verify(const std::string& directory);

/// Name of the subdirectory holding the artifacts of the i-th epsilon.
std::string epsilon_directory(int index);

} // namespace glmm
