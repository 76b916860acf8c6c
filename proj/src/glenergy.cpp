#include "glmm/glenergy.hpp"

#include "glmm/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

namespace glmm {

namespace {

constexpr const char* kModule = "glenergy";

double inv_eps2(double epsilon) { return 1.0 / (epsilon * epsilon); }

} // namespace

PotentialValue potential_eval(const Eigen::Vector2d& z)
{
    const double r2 = z.squaredNorm();
    PotentialValue out;
    if (r2 < 4.0) {
        const double s = 1.0 - r2;
        out.w = 0.25 * s * s;
        out.dw = -s * z;
        return out;
    }
    const double r = std::sqrt(r2);
    const double th = std::tanh(r - 2.0);
    const double sech2 = 1.0 - th * th;
    out.w = 2.25 + 6.0 * th;
    out.dw = (6.0 * sech2 / r) * z;
    return out;
}

Eigen::Matrix2d potential_hessian(const Eigen::Vector2d& z)
{
    const double r2 = z.squaredNorm();
    if (r2 < 4.0) {
        return -(1.0 - r2) * Eigen::Matrix2d::Identity() + 2.0 * z * z.transpose();
    }
    const double r = std::sqrt(r2);
    const double th = std::tanh(r - 2.0);
    const double sech2 = 1.0 - th * th;
    const double d1 = 6.0 * sech2;
    const double d2 = -12.0 * sech2 * th;
    const Eigen::Vector2d n = z / r;
    const Eigen::Matrix2d radial = n * n.transpose();
    return d2 * radial + (d1 / r) * (Eigen::Matrix2d::Identity() - radial);
}

ComplexField::ComplexField(MeshPtr m, Eigen::MatrixX2d v, double eps)
    : mesh(std::move(m)), values(std::move(v)), epsilon(eps)
{
    validate();
}

ComplexField ComplexField::constant(MeshPtr m, const Eigen::Vector2d& value, double eps)
{
    if (!m) {
        throw ValidationError(kModule, "field without mesh");
    }
    Eigen::MatrixX2d v(m->vertex_count(), 2);
    v.col(0).setConstant(value(0));
    v.col(1).setConstant(value(1));
    return ComplexField(std::move(m), std::move(v), eps);
}

void ComplexField::validate() const
{
    if (!mesh) {
        throw ValidationError(kModule, "field without mesh");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw ValidationError(kModule, "epsilon must be positive and finite");
    }
    if (values.rows() != mesh->vertex_count()) {
        throw ValidationError(kModule, "field has " + std::to_string(values.rows()) + " values for "
                                           + std::to_string(mesh->vertex_count()) + " vertices");
    }
    if (!values.allFinite()) {
        throw ValidationError(kModule, "field has non-finite entries");
    }
}

double ComplexField::min_modulus() const { return values.rowwise().norm().minCoeff(); }
double ComplexField::max_modulus() const { return values.rowwise().norm().maxCoeff(); }

double energy_value(const MeshManifold& mesh, const Eigen::MatrixX2d& values, double epsilon)
{
    double dirichlet = 0.0;
    for (int e = 0; e < mesh.edge_count(); ++e) {
        Eigen::Vector2d d = values.row(mesh.edges(e, 1)) - values.row(mesh.edges(e, 0));
        dirichlet += mesh.edge_weight(e) * d.squaredNorm();
    }
    double pot = 0.0;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        pot += mesh.vertex_mass(v) * potential_eval(values.row(v).transpose()).w;
    }
    return 0.5 * dirichlet + pot * inv_eps2(epsilon);
}

double cell_gradient_squared(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell)
{
    double sum = 0.0;
    for (Eigen::Index k = 0; k < mesh.cell_edges.cols(); ++k) {
        int e = mesh.cell_edges(cell, k);
        Eigen::Vector2d d = values.row(mesh.edges(e, 1)) - values.row(mesh.edges(e, 0));
        sum += mesh.cell_edge_factor(cell, k) * d.squaredNorm();
    }
    return sum;
}

double cell_mean_modulus2(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell)
{
    double sum = 0.0;
    for (int k = 0; k < mesh.vertices_per_cell(); ++k) {
        sum += values.row(mesh.cells(cell, k)).squaredNorm();
    }
    return sum / mesh.vertices_per_cell();
}

Eigen::MatrixXd cell_differential(const MeshManifold& mesh, const Eigen::MatrixX2d& values, int cell)
{
    const int corners = mesh.vertices_per_cell();
    Eigen::MatrixXd local(corners, 2);
    for (int k = 0; k < corners; ++k) {
        local.row(k) = values.row(mesh.cells(cell, k));
    }
    return mesh.cell_gradient[cell] * local;
}

EnergyReport energy(const ComplexField& u)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    const double k = inv_eps2(u.epsilon);
    EnergyReport rep;
    rep.cell_density.resize(mesh.cell_count());
    for (int c = 0; c < mesh.cell_count(); ++c) {
        double wbar = 0.0;
        for (int j = 0; j < mesh.vertices_per_cell(); ++j) {
            wbar += potential_eval(u.values.row(mesh.cells(c, j)).transpose()).w;
        }
        wbar /= mesh.vertices_per_cell();
        double grad2 = cell_gradient_squared(mesh, u.values, c);
        rep.cell_density(c) = 0.5 * grad2 + k * wbar;
        rep.dirichlet += mesh.cell_volume(c) * 0.5 * grad2;
        rep.potential += mesh.cell_volume(c) * k * wbar;
    }
    rep.total = rep.dirichlet + rep.potential;
    const double log_eps = std::abs(std::log(u.epsilon));
    rep.normalized = log_eps > 0.0 ? rep.total / log_eps : std::numeric_limits<double>::infinity();
    return rep;
}

Eigen::MatrixX2d gradient(const MeshManifold& mesh, const Eigen::MatrixX2d& values, double epsilon)
{
    Eigen::MatrixX2d g = Eigen::MatrixX2d::Zero(mesh.vertex_count(), 2);
    for (int e = 0; e < mesh.edge_count(); ++e) {
        const int a = mesh.edges(e, 0);
        const int b = mesh.edges(e, 1);
        Eigen::RowVector2d d = mesh.edge_weight(e) * (values.row(b) - values.row(a));
        g.row(b) += d;
        g.row(a) -= d;
    }
    const double k = inv_eps2(epsilon);
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        g.row(v) += (k * mesh.vertex_mass(v)) * potential_eval(values.row(v).transpose()).dw.transpose();
    }
    return g;
}

Eigen::MatrixX2d gradient(const ComplexField& u)
{
    u.validate();
    return gradient(*u.mesh, u.values, u.epsilon);
}

double residual_norm(const MeshManifold& mesh, const Eigen::MatrixX2d& covector)
{
    double sum = 0.0;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        sum += covector.row(v).squaredNorm() / mesh.vertex_mass(v);
    }
    return std::sqrt(sum);
}

double gl_residual(const ComplexField& u) { return residual_norm(*u.mesh, gradient(u)); }

SparseMatrix hessian(const ComplexField& u)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    const int nv = mesh.vertex_count();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(8 * mesh.edge_count() + 4 * nv));
    for (int e = 0; e < mesh.edge_count(); ++e) {
        const int a = mesh.edges(e, 0);
        const int b = mesh.edges(e, 1);
        const double w = mesh.edge_weight(e);
        for (int c = 0; c < 2; ++c) {
            trips.emplace_back(2 * a + c, 2 * a + c, w);
            trips.emplace_back(2 * b + c, 2 * b + c, w);
            trips.emplace_back(2 * a + c, 2 * b + c, -w);
            trips.emplace_back(2 * b + c, 2 * a + c, -w);
        }
    }
    const double k = inv_eps2(u.epsilon);
    for (int v = 0; v < nv; ++v) {
        Eigen::Matrix2d h = (k * mesh.vertex_mass(v)) * potential_hessian(u.values.row(v).transpose());
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 2; ++c) {
                trips.emplace_back(2 * v + r, 2 * v + c, h(r, c));
            }
        }
    }
    SparseMatrix out(2 * nv, 2 * nv);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

ComplexField truncate(const ComplexField& u)
{
    ComplexField out = u;
    for (int v = 0; v < out.size(); ++v) {
        const double r = out.values.row(v).norm();
        if (r > 1.0) {
            out.values.row(v) /= r;
        }
    }
    return out;
}

std::vector<TestVectorField> default_test_fields(const MeshManifold& mesh)
{
    std::vector<TestVectorField> fields;
    const int nv = mesh.vertex_count();
    const int amb = mesh.ambient_dimension();
    if (mesh.kind == CellKind::Simplex) {
        const char* axis = "xyz";
        for (int a = 0; a < std::min(amb, 3); ++a) {
            TestVectorField rot{std::string("rotation_") + axis[a], Eigen::MatrixXd(nv, amb)};
            TestVectorField conf{std::string("conformal_") + axis[a], Eigen::MatrixXd(nv, amb)};
            for (int v = 0; v < nv; ++v) {
                Eigen::Vector3d p = mesh.positions.row(v).transpose();
                Eigen::Vector3d e = Eigen::Vector3d::Unit(a);
                rot.values.row(v) = e.cross(p).transpose();
                conf.values.row(v) = (e - e.dot(p) * p).transpose();
            }
            fields.push_back(std::move(rot));
            fields.push_back(std::move(conf));
        }
        return fields;
    }
    const double scale = 2.0 * std::numbers::pi / mesh.period;
    for (int d = 0; d < mesh.dimension; ++d) {
        for (int j = 0; j < mesh.dimension; ++j) {
            TestVectorField s{"e" + std::to_string(d) + "_sin_x" + std::to_string(j), Eigen::MatrixXd::Zero(nv, amb)};
            TestVectorField c{"e" + std::to_string(d) + "_cos_x" + std::to_string(j), Eigen::MatrixXd::Zero(nv, amb)};
            for (int v = 0; v < nv; ++v) {
                s.values(v, d) = std::sin(scale * mesh.positions(v, j));
                c.values(v, d) = std::cos(scale * mesh.positions(v, j));
            }
            fields.push_back(std::move(s));
            fields.push_back(std::move(c));
        }
    }
    return fields;
}

Eigen::MatrixXd StressEnergy::normalized(int cell) const
{
    if (density(cell) <= 0.0) {
        return Eigen::MatrixXd::Zero(tensor[cell].rows(), tensor[cell].cols());
    }
    return tensor[cell] / density(cell);
}

StressEnergy stress_energy(const ComplexField& u, const std::vector<TestVectorField>& fields)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    const int n = mesh.dimension;
    const int nc = mesh.cell_count();
    const int corners = mesh.vertices_per_cell();
    EnergyReport rep = energy(u);

    StressEnergy out;
    out.density = rep.cell_density;
    out.du_squared.resize(nc);
    out.tensor.resize(nc);
    for (int c = 0; c < nc; ++c) {
        Eigen::MatrixXd du = cell_differential(mesh, u.values, c);
        Eigen::MatrixXd t = out.density(c) * Eigen::MatrixXd::Identity(n, n) - du * du.transpose();
        out.du_squared(c) = du.squaredNorm();
        out.tensor[c] = t;
        out.max_trace_defect =
            std::max(out.max_trace_defect, std::abs(t.trace() - (n * out.density(c) - out.du_squared(c))));
        out.max_asymmetry = std::max(out.max_asymmetry, (t - t.transpose()).cwiseAbs().maxCoeff());
    }

    out.residuals.resize(static_cast<Eigen::Index>(fields.size()));
    out.relative_residuals.resize(static_cast<Eigen::Index>(fields.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& field = fields[i];
        if (field.values.rows() != mesh.vertex_count() || field.values.cols() != mesh.ambient_dimension()) {
            throw ValidationError(kModule, "test field '" + field.name + "' has the wrong shape");
        }
        out.field_names.push_back(field.name);
        double sum = 0.0;
        double max_grad = 0.0;
        for (int c = 0; c < nc; ++c) {
            Eigen::MatrixXd local(corners, mesh.ambient_dimension());
            for (int k = 0; k < corners; ++k) {
                local.row(k) = field.values.row(mesh.cells(c, k));
            }
            // Rows: derivative directions in the frame; columns: ambient components.
            Eigen::MatrixXd dx = mesh.cell_gradient[c] * local;
            // Tangential projection gives the covariant derivative, (i, j) = <D_i X, e_j>.
            Eigen::MatrixXd cov = dx * mesh.cell_frame[c];
            sum += mesh.cell_volume(c) * (out.tensor[c].cwiseProduct(cov)).sum();
            max_grad = std::max(max_grad, cov.norm());
        }
        out.residuals(static_cast<Eigen::Index>(i)) = sum;
        double denom = rep.total * max_grad;
        out.relative_residuals(static_cast<Eigen::Index>(i)) = denom > 0.0 ? std::abs(sum) / denom : 0.0;
    }
    return out;
}

void write_field(const std::string& path, const ComplexField& u)
{
    u.validate();
    std::ofstream out(path);
    if (!out) {
        throw ComputeError(kModule, "cannot write " + path);
    }
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(u.mesh->checksum()));
    out << "# glmm-field v1\n";
    out << std::setprecision(17);
    out << "epsilon " << u.epsilon << "\n";
    out << "mesh_checksum " << checksum << "\n";
    out << "vertices " << u.size() << "\n";
    for (int v = 0; v < u.size(); ++v) {
        out << u.values(v, 0) << " " << u.values(v, 1) << "\n";
    }
}

ComplexField read_field(const std::string& path, MeshPtr mesh)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(kModule, "cannot open " + path);
    }
    std::string line;
    std::getline(in, line);
    if (line != "# glmm-field v1") {
        throw ValidationError(kModule, path + ": not a field file");
    }
    std::string key;
    double eps = 0.0;
    std::string checksum;
    int count = 0;
    in >> key >> eps;
    if (key != "epsilon") {
        throw ValidationError(kModule, path + ": missing epsilon");
    }
    in >> key >> checksum;
    if (key != "mesh_checksum") {
        throw ValidationError(kModule, path + ": missing mesh checksum");
    }
    in >> key >> count;
    if (key != "vertices" || !in) {
        throw ValidationError(kModule, path + ": missing vertex count");
    }
    char expected[32];
    std::snprintf(expected, sizeof(expected), "%016llx", static_cast<unsigned long long>(mesh->checksum()));
    if (checksum != expected) {
        throw ValidationError(kModule, path + ": mesh checksum mismatch");
    }
    Eigen::MatrixX2d values(count, 2);
    for (int v = 0; v < count; ++v) {
        in >> values(v, 0) >> values(v, 1);
    }
    if (!in) {
        throw ValidationError(kModule, path + ": truncated field");
    }
    return ComplexField(std::move(mesh), std::move(values), eps);
}

} // namespace glmm
