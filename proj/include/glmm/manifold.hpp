#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace glmm {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class CellKind { Simplex, Box };

/// Discretized closed Riemannian manifold.
///
/// Two flavours share one representation: embedded triangle meshes (the round
/// sphere, ambient R^3) and uniform periodic box grids (flat tori, where the
/// vertex positions are parameter coordinates in [0, period)^n).  Discrete
/// k-forms live on k-cells: vertices, oriented edges, oriented 2-faces and,
/// for n = 3, oriented 3-cells.  Top-dimensional cells are `cells`.
struct MeshManifold {
    int dimension = 0;      ///< intrinsic dimension n (2 or 3)
    CellKind kind = CellKind::Simplex;
    double period = 0.0;    ///< side length of periodic grids, 0 for embedded meshes
    int grid_m = 0;         ///< vertices per side of periodic grids
    int betti1_hint = 0;    ///< declared first Betti number
    double ricci_negative_max = 0.0; ///< A(M,g) = max |Ric^-|, stored metadata

    Eigen::MatrixXd positions; ///< V x ambient_dim
    Eigen::MatrixXi cells;     ///< C x (n+1) for simplices, C x 2^n for boxes (corner bit d <-> +e_d)

    // Topology derived from `cells`.
    Eigen::MatrixXi edges;                 ///< E x 2, oriented tail -> head
    std::vector<std::vector<int>> faces;   ///< 2-cells as vertex lists
    std::vector<std::vector<std::pair<int, int>>> face_boundary; ///< (edge, sign)
    std::vector<std::vector<std::pair<int, int>>> volume_boundary; ///< n = 3 only: (face, sign)
    Eigen::MatrixXi cell_edges;            ///< C x edges-per-cell

    // Metric data.
    Eigen::VectorXd vertex_mass;  ///< Hodge star on 0-forms (dual cell volume)
    Eigen::VectorXd edge_weight;  ///< Hodge star on 1-forms (dual volume / length)
    Eigen::VectorXd edge_length;
    Eigen::VectorXd face_star;    ///< Hodge star on 2-forms
    Eigen::VectorXd volume_star;  ///< Hodge star on 3-forms (n = 3)
    Eigen::VectorXd cell_volume;
    Eigen::MatrixXd cell_centroid;             ///< C x ambient_dim
    std::vector<Eigen::MatrixXd> cell_frame;   ///< ambient_dim x n orthonormal tangent frame
    std::vector<Eigen::MatrixXd> cell_gradient; ///< n x verts-per-cell: vertex values -> gradient in frame
    Eigen::MatrixXd cell_edge_factor;          ///< C x edges-per-cell: |du|^2_cell = sum factor * (du_e)^2

    int vertex_count() const { return static_cast<int>(positions.rows()); }
    int edge_count() const { return static_cast<int>(edges.rows()); }
    int face_count() const { return static_cast<int>(faces.size()); }
    int volume_count() const { return static_cast<int>(volume_boundary.size()); }
    int cell_count() const { return static_cast<int>(cells.rows()); }
    int ambient_dimension() const { return static_cast<int>(positions.cols()); }
    int vertices_per_cell() const { return static_cast<int>(cells.cols()); }

    double total_volume() const { return cell_volume.sum(); }
    double max_edge_length() const { return edge_length.maxCoeff(); }

    /// Displacement from vertex a to vertex b (minimal image on periodic grids).
    Eigen::VectorXd displacement(int a, int b) const;
    /// Point in embedding space used by the sweep map: R^3 for the sphere, R^{2n} for tori.
    Eigen::VectorXd embedding(int v) const;
    int embedding_dimension() const;

    std::uint64_t checksum() const;
};

using MeshPtr = std::shared_ptr<const MeshManifold>;

/// Builds topology and metric from positions and cells. Throws ComputeError on
/// degenerate cells, open meshes or non-positive Hodge stars.
void finalize_mesh(MeshManifold& mesh);

enum class ModelKind { UnitSphere, FlatTorus2d, FlatTorus3d };

struct ModelSpec {
    ModelKind kind = ModelKind::UnitSphere;
    int resolution = 0; ///< refinement level k for the sphere, grid m for tori

    std::string to_string() const;
    static ModelSpec parse(const std::string& text);
};

MeshPtr build_model(const ModelSpec& spec);
MeshPtr unit_sphere(int refinement);
MeshPtr flat_torus_2d(int m);
MeshPtr flat_torus_3d(int m);

void write_mesh(std::ostream& out, const MeshManifold& mesh);
MeshPtr read_mesh(std::istream& in);
void save_mesh(const std::string& path, const MeshManifold& mesh);
MeshPtr load_mesh(const std::string& path);

/// Discrete exterior calculus on a mesh. Immutable after assembly.
struct DECOperators {
    SparseMatrix d0; ///< E x V
    SparseMatrix d1; ///< F x E
    SparseMatrix d2; ///< C3 x F (n = 3), empty otherwise
    Eigen::VectorXd star0, star1, star2, star3;

    /// Scalar stiffness d0^T *1 d0; the Laplacian is star0^{-1} of it.
    SparseMatrix stiffness;

    Eigen::VectorXd codifferential1(const Eigen::VectorXd& one_form) const; ///< 1-form -> 0-form
    Eigen::VectorXd codifferential2(const Eigen::VectorXd& two_form) const; ///< 2-form -> 1-form
    Eigen::VectorXd scalar_laplacian(const Eigen::VectorXd& f) const;       ///< d* d f

    /// *1 (d0 d0* + d1* d1): symmetric form of the Hodge Laplacian on 1-forms.
    SparseMatrix hodge_laplacian1_form() const;
    /// *2 (d1 d1* + d2* d2): symmetric form of the Hodge Laplacian on 2-forms.
    SparseMatrix hodge_laplacian2_form() const;

    double inner0(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    double inner1(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
    double inner2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
};

DECOperators assemble_dec(const MeshManifold& mesh);

struct SpectralInfo {
    double lambda1 = 0.0;
    int harmonic_dimension = 0;
    std::vector<double> low_scalar_spectrum;
    std::vector<double> low_one_form_spectrum;
};

SpectralInfo poincare_constant(const MeshManifold& mesh, const DECOperators& dec);

} // namespace glmm
