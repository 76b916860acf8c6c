#include "glmm/manifold.hpp"

#include "glmm/error.hpp"
#include "glmm/linalg.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace glmm {

namespace {

constexpr const char* kModule = "manifold";

std::uint64_t edge_key(int a, int b)
{
    auto lo = static_cast<std::uint64_t>(std::min(a, b));
    auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

double wrap(double d, double period)
{
    if (period <= 0.0) {
        return d;
    }
    d = std::fmod(d, period);
    if (d > 0.5 * period) {
        d -= period;
    } else if (d <= -0.5 * period) {
        d += period;
    }
    return d;
}

class EdgeTable {
public:
    explicit EdgeTable(std::vector<std::array<int, 2>>& edges) : edges_(edges) {}

    /// Returns (edge id, sign) for the directed pair tail -> head.
    std::pair<int, int> get(int tail, int head, bool create_oriented)
    {
        auto key = edge_key(tail, head);
        auto it = index_.find(key);
        if (it == index_.end()) {
            if (!create_oriented) {
                throw ComputeError(kModule, "edge missing from table");
            }
            int id = static_cast<int>(edges_.size());
            edges_.push_back({tail, head});
            index_.emplace(key, id);
            return {id, 1};
        }
        const auto& e = edges_[it->second];
        return {it->second, e[0] == tail ? 1 : -1};
    }

private:
    std::vector<std::array<int, 2>>& edges_;
    std::unordered_map<std::uint64_t, int> index_;
};

void build_simplex_topology(MeshManifold& mesh)
{
    if (mesh.dimension != 2 || mesh.cells.cols() != 3) {
        throw ValidationError(kModule, "simplicial meshes must be triangulated surfaces");
    }
    std::vector<std::array<int, 2>> edges;
    EdgeTable table(edges);
    const int nc = mesh.cell_count();
    mesh.cell_edges.resize(nc, 3);
    mesh.faces.assign(nc, {});
    mesh.face_boundary.assign(nc, {});
    for (int c = 0; c < nc; ++c) {
        for (int k = 0; k < 3; ++k) {
            int a = mesh.cells(c, k);
            int b = mesh.cells(c, (k + 1) % 3);
            // Orient new edges from low to high index.
            auto [id, sign] = table.get(std::min(a, b), std::max(a, b), true);
            sign = (a < b) ? 1 : -1;
            mesh.cell_edges(c, k) = id;
            mesh.face_boundary[c].emplace_back(id, sign);
        }
        mesh.faces[c] = {mesh.cells(c, 0), mesh.cells(c, 1), mesh.cells(c, 2)};
    }
    mesh.edges.resize(static_cast<Eigen::Index>(edges.size()), 2);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        mesh.edges(static_cast<Eigen::Index>(e), 0) = edges[e][0];
        mesh.edges(static_cast<Eigen::Index>(e), 1) = edges[e][1];
    }
    mesh.volume_boundary.clear();
}

void build_box_topology(MeshManifold& mesh)
{
    const int n = mesh.dimension;
    const int corners = 1 << n;
    if (mesh.cells.cols() != corners) {
        throw ValidationError(kModule, "box cells need 2^n corners");
    }
    std::vector<std::array<int, 2>> edges;
    EdgeTable table(edges);
    const int nc = mesh.cell_count();
    const int edges_per_cell = n * (corners / 2);
    mesh.cell_edges.resize(nc, edges_per_cell);

    for (int c = 0; c < nc; ++c) {
        int slot = 0;
        for (int d = 0; d < n; ++d) {
            for (int k = 0; k < corners; ++k) {
                if (k & (1 << d)) {
                    continue;
                }
                int tail = mesh.cells(c, k);
                int head = mesh.cells(c, k | (1 << d));
                auto [id, sign] = table.get(tail, head, true);
                if (sign != 1) {
                    throw ComputeError(kModule, "inconsistent edge orientation in box grid");
                }
                mesh.cell_edges(c, slot++) = id;
            }
        }
    }
    mesh.edges.resize(static_cast<Eigen::Index>(edges.size()), 2);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        mesh.edges(static_cast<Eigen::Index>(e), 0) = edges[e][0];
        mesh.edges(static_cast<Eigen::Index>(e), 1) = edges[e][1];
    }

    // 2-faces spanned by directions (a < b) at a base corner.
    std::map<std::array<int, 4>, int> face_index;
    mesh.faces.clear();
    mesh.face_boundary.clear();
    auto face_of = [&](int c, int base, int a, int b) {
        int ba = 1 << a;
        int bb = 1 << b;
        std::array<int, 4> vs = {mesh.cells(c, base), mesh.cells(c, base | ba), mesh.cells(c, base | bb),
                                 mesh.cells(c, base | ba | bb)};
        auto key = vs;
        std::sort(key.begin(), key.end());
        auto it = face_index.find(key);
        if (it != face_index.end()) {
            return it->second;
        }
        int id = static_cast<int>(mesh.faces.size());
        face_index.emplace(key, id);
        mesh.faces.push_back({vs[0], vs[1], vs[2], vs[3]});
        std::vector<std::pair<int, int>> boundary;
        boundary.emplace_back(table.get(vs[0], vs[1], false).first, 1);
        boundary.emplace_back(table.get(vs[1], vs[3], false).first, 1);
        boundary.emplace_back(table.get(vs[2], vs[3], false).first, -1);
        boundary.emplace_back(table.get(vs[0], vs[2], false).first, -1);
        mesh.face_boundary.push_back(std::move(boundary));
        return id;
    };

    mesh.volume_boundary.clear();
    if (n == 2) {
        for (int c = 0; c < nc; ++c) {
            face_of(c, 0, 0, 1);
        }
        return;
    }
    for (int c = 0; c < nc; ++c) {
        std::vector<std::pair<int, int>> boundary;
        for (int i = 0; i < 3; ++i) {
            int a = (i == 0) ? 1 : 0;
            int b = (i == 2) ? 1 : 2;
            int sign = (i % 2 == 0) ? 1 : -1;
            boundary.emplace_back(face_of(c, 1 << i, a, b), sign);
            boundary.emplace_back(face_of(c, 0, a, b), -sign);
        }
        mesh.volume_boundary.push_back(std::move(boundary));
    }
}

void check_closed(const MeshManifold& mesh)
{
    // Every codimension-1 face must bound exactly two top cells with opposite orientation.
    if (mesh.dimension == 2) {
        std::vector<int> count(mesh.edge_count(), 0);
        std::vector<int> sum(mesh.edge_count(), 0);
        for (const auto& fb : mesh.face_boundary) {
            for (auto [e, s] : fb) {
                ++count[e];
                sum[e] += s;
            }
        }
        for (int e = 0; e < mesh.edge_count(); ++e) {
            if (count[e] != 2) {
                throw ComputeError(kModule, "mesh is not closed: edge " + std::to_string(e) + " bounds "
                                                + std::to_string(count[e]) + " cells");
            }
            if (sum[e] != 0) {
                throw ComputeError(kModule, "mesh is not consistently oriented at edge " + std::to_string(e));
            }
        }
    } else {
        std::vector<int> count(mesh.face_count(), 0);
        std::vector<int> sum(mesh.face_count(), 0);
        for (const auto& vb : mesh.volume_boundary) {
            for (auto [f, s] : vb) {
                ++count[f];
                sum[f] += s;
            }
        }
        for (int f = 0; f < mesh.face_count(); ++f) {
            if (count[f] != 2 || sum[f] != 0) {
                throw ComputeError(kModule, "mesh is not closed at face " + std::to_string(f));
            }
        }
    }
}

void build_simplex_metric(MeshManifold& mesh)
{
    const int nc = mesh.cell_count();
    const int amb = mesh.ambient_dimension();
    mesh.vertex_mass = Eigen::VectorXd::Zero(mesh.vertex_count());
    mesh.edge_weight = Eigen::VectorXd::Zero(mesh.edge_count());
    mesh.cell_volume.resize(nc);
    mesh.face_star.resize(nc);
    mesh.cell_centroid.resize(nc, amb);
    mesh.cell_frame.assign(nc, Eigen::MatrixXd());
    mesh.cell_gradient.assign(nc, Eigen::MatrixXd());
    mesh.cell_edge_factor.resize(nc, 3);

    double scale = 0.0;
    for (int e = 0; e < mesh.edge_count(); ++e) {
        scale = std::max(scale, (mesh.positions.row(mesh.edges(e, 1)) - mesh.positions.row(mesh.edges(e, 0))).norm());
    }
    const double area_tol = 1e-12 * scale * scale;

    for (int c = 0; c < nc; ++c) {
        Eigen::VectorXd p0 = mesh.positions.row(mesh.cells(c, 0)).transpose();
        Eigen::VectorXd p1 = mesh.positions.row(mesh.cells(c, 1)).transpose();
        Eigen::VectorXd p2 = mesh.positions.row(mesh.cells(c, 2)).transpose();
        Eigen::VectorXd a = p1 - p0;
        Eigen::VectorXd b = p2 - p0;
        double cross2 = a.squaredNorm() * b.squaredNorm() - a.dot(b) * a.dot(b);
        double area = 0.5 * std::sqrt(std::max(cross2, 0.0));
        if (!(area > area_tol)) {
            throw ComputeError(kModule, "degenerate cell " + std::to_string(c));
        }
        mesh.cell_volume(c) = area;
        mesh.face_star(c) = 1.0 / area;
        mesh.cell_centroid.row(c) = ((p0 + p1 + p2) / 3.0).transpose();

        // cot of the angle at vertex k, opposite edge (k+1, k+2).
        std::array<Eigen::VectorXd, 3> p = {p0, p1, p2};
        std::array<double, 3> cot{};
        for (int k = 0; k < 3; ++k) {
            Eigen::VectorXd u = p[(k + 1) % 3] - p[k];
            Eigen::VectorXd v = p[(k + 2) % 3] - p[k];
            cot[k] = u.dot(v) / (2.0 * area);
        }
        // cell edge slot k joins vertices k and k+1, opposite vertex k+2.
        for (int k = 0; k < 3; ++k) {
            double w = 0.5 * cot[(k + 2) % 3];
            mesh.edge_weight(mesh.cell_edges(c, k)) += w;
            mesh.cell_edge_factor(c, k) = w / area;
            mesh.vertex_mass(mesh.cells(c, k)) += area / 3.0;
        }

        Eigen::MatrixXd frame(amb, 2);
        frame.col(0) = a.normalized();
        Eigen::VectorXd t = b - b.dot(frame.col(0)) * frame.col(0);
        frame.col(1) = t.normalized();
        Eigen::Matrix2d local;
        local << a.dot(frame.col(0)), a.dot(frame.col(1)), b.dot(frame.col(0)), b.dot(frame.col(1));
        Eigen::Matrix<double, 2, 3> diff;
        diff << -1, 1, 0, -1, 0, 1;
        mesh.cell_frame[c] = frame;
        mesh.cell_gradient[c] = local.inverse() * diff;
    }
    for (int e = 0; e < mesh.edge_count(); ++e) {
        if (!(mesh.edge_weight(e) > 0.0)) {
            throw ComputeError(kModule, "non-positive Hodge star on edge " + std::to_string(e)
                                            + " (non-Delaunay configuration)");
        }
    }
    mesh.edge_length.resize(mesh.edge_count());
    for (int e = 0; e < mesh.edge_count(); ++e) {
        mesh.edge_length(e) = (mesh.positions.row(mesh.edges(e, 1)) - mesh.positions.row(mesh.edges(e, 0))).norm();
    }
}

void build_box_metric(MeshManifold& mesh)
{
    const int n = mesh.dimension;
    const int corners = 1 << n;
    if (mesh.period <= 0.0 || mesh.grid_m < 1) {
        throw ValidationError(kModule, "box grids need a positive period and grid size");
    }
    const double h = mesh.period / mesh.grid_m;
    const int nc = mesh.cell_count();

    for (int c = 0; c < nc; ++c) {
        for (int d = 0; d < n; ++d) {
            Eigen::VectorXd disp = mesh.displacement(mesh.cells(c, 0), mesh.cells(c, 1 << d));
            Eigen::VectorXd expect = Eigen::VectorXd::Zero(n);
            expect(d) = h;
            if ((disp - expect).norm() > 1e-9 * h) {
                throw ComputeError(kModule, "box cell " + std::to_string(c) + " is not a uniform grid cell");
            }
        }
    }

    mesh.vertex_mass = Eigen::VectorXd::Constant(mesh.vertex_count(), std::pow(h, n));
    mesh.edge_weight = Eigen::VectorXd::Constant(mesh.edge_count(), std::pow(h, n - 2));
    mesh.edge_length = Eigen::VectorXd::Constant(mesh.edge_count(), h);
    mesh.face_star = Eigen::VectorXd::Constant(mesh.face_count(), std::pow(h, n - 4));
    if (n == 3) {
        mesh.volume_star = Eigen::VectorXd::Constant(mesh.volume_count(), std::pow(h, n - 6));
    }
    mesh.cell_volume = Eigen::VectorXd::Constant(nc, std::pow(h, n));
    mesh.cell_centroid.resize(nc, n);
    mesh.cell_frame.assign(nc, Eigen::MatrixXd::Identity(n, n));
    mesh.cell_edge_factor =
        Eigen::MatrixXd::Constant(nc, mesh.cell_edges.cols(), 1.0 / (h * h * (corners / 2)));

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, corners);
    const double w = 1.0 / (h * (corners / 2));
    for (int d = 0; d < n; ++d) {
        for (int k = 0; k < corners; ++k) {
            if (k & (1 << d)) {
                continue;
            }
            grad(d, k) -= w;
            grad(d, k | (1 << d)) += w;
        }
    }
    mesh.cell_gradient.assign(nc, grad);
    for (int c = 0; c < nc; ++c) {
        Eigen::VectorXd p = mesh.positions.row(mesh.cells(c, 0)).transpose();
        for (int d = 0; d < n; ++d) {
            p(d) = std::fmod(p(d) + 0.5 * h, mesh.period);
        }
        mesh.cell_centroid.row(c) = p.transpose();
    }
}

} // namespace

Eigen::VectorXd MeshManifold::displacement(int a, int b) const
{
    Eigen::VectorXd d = (positions.row(b) - positions.row(a)).transpose();
    if (period > 0.0) {
        for (Eigen::Index i = 0; i < d.size(); ++i) {
            d(i) = wrap(d(i), period);
        }
    }
    return d;
}

int MeshManifold::embedding_dimension() const
{
    return kind == CellKind::Box ? 2 * dimension : ambient_dimension();
}

Eigen::VectorXd MeshManifold::embedding(int v) const
{
    if (kind != CellKind::Box) {
        return positions.row(v).transpose();
    }
    // Product of round circles of circumference `period`: an isometric embedding.
    const double radius = period / (2.0 * std::numbers::pi);
    Eigen::VectorXd out(2 * dimension);
    for (int d = 0; d < dimension; ++d) {
        double angle = positions(v, d) / radius;
        out(2 * d) = radius * std::cos(angle);
        out(2 * d + 1) = radius * std::sin(angle);
    }
    return out;
}

std::uint64_t MeshManifold::checksum() const
{
    std::uint64_t hash = 1469598103934665603ULL;
    auto mix = [&hash](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            hash ^= p[i];
            hash *= 1099511628211ULL;
        }
    };
    int header[4] = {dimension, kind == CellKind::Box ? 1 : 0, grid_m, betti1_hint};
    mix(header, sizeof(header));
    mix(&period, sizeof(period));
    for (Eigen::Index i = 0; i < positions.size(); ++i) {
        double x = positions.data()[i];
        mix(&x, sizeof(x));
    }
    for (Eigen::Index i = 0; i < cells.size(); ++i) {
        int c = cells.data()[i];
        mix(&c, sizeof(c));
    }
    return hash;
}

void finalize_mesh(MeshManifold& mesh)
{
    if (mesh.dimension != 2 && mesh.dimension != 3) {
        throw ValidationError(kModule, "dimension must be 2 or 3");
    }
    if (mesh.cells.size() == 0 || mesh.positions.rows() == 0) {
        throw ValidationError(kModule, "empty mesh");
    }
    if (mesh.cells.minCoeff() < 0 || mesh.cells.maxCoeff() >= mesh.vertex_count()) {
        throw ValidationError(kModule, "cell references a vertex out of range");
    }
    if (mesh.betti1_hint < 0 || mesh.ricci_negative_max < 0.0) {
        throw ValidationError(kModule, "betti1_hint and A must be nonnegative");
    }
    if (mesh.kind == CellKind::Simplex) {
        build_simplex_topology(mesh);
        check_closed(mesh);
        build_simplex_metric(mesh);
    } else {
        build_box_topology(mesh);
        check_closed(mesh);
        build_box_metric(mesh);
    }
}

std::string ModelSpec::to_string() const
{
    switch (kind) {
    case ModelKind::UnitSphere:
        return "unit_sphere:" + std::to_string(resolution);
    case ModelKind::FlatTorus2d:
        return "flat_torus_2d:" + std::to_string(resolution);
    case ModelKind::FlatTorus3d:
        return "flat_torus_3d:" + std::to_string(resolution);
    }
    return {};
}

ModelSpec ModelSpec::parse(const std::string& text)
{
    auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw ValidationError(kModule, "model spec must look like name:resolution, got '" + text + "'");
    }
    std::string name = text.substr(0, colon);
    ModelSpec spec;
    try {
        std::size_t used = 0;
        spec.resolution = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) {
            throw std::invalid_argument("trailing characters");
        }
    } catch (const std::exception&) {
        throw ValidationError(kModule, "bad resolution in model spec '" + text + "'");
    }
    if (name == "unit_sphere") {
        spec.kind = ModelKind::UnitSphere;
    } else if (name == "flat_torus_2d") {
        spec.kind = ModelKind::FlatTorus2d;
    } else if (name == "flat_torus_3d") {
        spec.kind = ModelKind::FlatTorus3d;
    } else {
        throw ValidationError(kModule, "unknown model '" + name + "'");
    }
    return spec;
}

MeshPtr build_model(const ModelSpec& spec)
{
    switch (spec.kind) {
    case ModelKind::UnitSphere:
        return unit_sphere(spec.resolution);
    case ModelKind::FlatTorus2d:
        return flat_torus_2d(spec.resolution);
    case ModelKind::FlatTorus3d:
        return flat_torus_3d(spec.resolution);
    }
    throw ValidationError(kModule, "unknown model");
}

MeshPtr unit_sphere(int refinement)
{
    if (refinement < 0) {
        throw ValidationError(kModule, "sphere refinement must be >= 0");
    }
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    for (auto& v : verts) {
        v.normalize();
    }
    std::vector<std::array<int, 3>> tris = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };
    for (int level = 0; level < refinement; ++level) {
        std::unordered_map<std::uint64_t, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = edge_key(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) {
                return it->second;
            }
            int id = static_cast<int>(verts.size());
            verts.push_back((verts[a] + verts[b]).normalized());
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(tris.size() * 4);
        for (const auto& tri : tris) {
            int ab = mid(tri[0], tri[1]);
            int bc = mid(tri[1], tri[2]);
            int ca = mid(tri[2], tri[0]);
            next.push_back({tri[0], ab, ca});
            next.push_back({tri[1], bc, ab});
            next.push_back({tri[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        tris = std::move(next);
    }
    auto mesh = std::make_shared<MeshManifold>();
    mesh->dimension = 2;
    mesh->kind = CellKind::Simplex;
    mesh->betti1_hint = 0;
    mesh->ricci_negative_max = 0.0;
    mesh->positions.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) {
        mesh->positions.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
    }
    mesh->cells.resize(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t i = 0; i < tris.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            mesh->cells(static_cast<Eigen::Index>(i), k) = tris[i][k];
        }
    }
    finalize_mesh(*mesh);
    return mesh;
}

namespace {

MeshPtr flat_torus(int n, int m)
{
    if (m < 8) {
        throw ValidationError(kModule, "periodic grid needs m >= 8, got " + std::to_string(m));
    }
    const double side = 2.0 * std::numbers::pi;
    const double h = side / m;
    auto mesh = std::make_shared<MeshManifold>();
    mesh->dimension = n;
    mesh->kind = CellKind::Box;
    mesh->period = side;
    mesh->grid_m = m;
    mesh->betti1_hint = n;
    mesh->ricci_negative_max = 0.0;

    int nv = 1;
    for (int d = 0; d < n; ++d) {
        nv *= m;
    }
    auto index = [&](const std::array<int, 3>& ijk) {
        int id = 0;
        for (int d = n - 1; d >= 0; --d) {
            id = id * m + ((ijk[d] % m) + m) % m;
        }
        return id;
    };
    mesh->positions.resize(nv, n);
    mesh->cells.resize(nv, 1 << n);
    for (int v = 0; v < nv; ++v) {
        std::array<int, 3> ijk = {0, 0, 0};
        int rest = v;
        for (int d = 0; d < n; ++d) {
            ijk[d] = rest % m;
            rest /= m;
        }
        for (int d = 0; d < n; ++d) {
            mesh->positions(v, d) = h * ijk[d];
        }
        for (int k = 0; k < (1 << n); ++k) {
            std::array<int, 3> corner = ijk;
            for (int d = 0; d < n; ++d) {
                if (k & (1 << d)) {
                    ++corner[d];
                }
            }
            mesh->cells(v, k) = index(corner);
        }
    }
    finalize_mesh(*mesh);
    return mesh;
}

} // namespace

MeshPtr flat_torus_2d(int m) { return flat_torus(2, m); }
MeshPtr flat_torus_3d(int m) { return flat_torus(3, m); }

void write_mesh(std::ostream& out, const MeshManifold& mesh)
{
    out << "glmm-mesh 1\n";
    out << "dimension " << mesh.dimension << "\n";
    out << "kind " << (mesh.kind == CellKind::Box ? "box" : "simplex") << "\n";
    out << "ambient " << mesh.ambient_dimension() << "\n";
    out << std::setprecision(17);
    out << "period " << mesh.period << "\n";
    out << "grid " << mesh.grid_m << "\n";
    out << "vertices " << mesh.vertex_count() << "\n";
    out << "cells " << mesh.cell_count() << " " << mesh.vertices_per_cell() << "\n";
    out << "betti1_hint " << mesh.betti1_hint << "\n";
    out << "ricci_negative_max " << mesh.ricci_negative_max << "\n";
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        for (int d = 0; d < mesh.ambient_dimension(); ++d) {
            out << (d ? " " : "") << mesh.positions(v, d);
        }
        out << "\n";
    }
    for (int c = 0; c < mesh.cell_count(); ++c) {
        for (int k = 0; k < mesh.vertices_per_cell(); ++k) {
            out << (k ? " " : "") << mesh.cells(c, k);
        }
        out << "\n";
    }
}

MeshPtr read_mesh(std::istream& in)
{
    auto expect = [&](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key) {
            throw ValidationError(kModule, "mesh file: expected '" + key + "', got '" + word + "'");
        }
    };
    expect("glmm-mesh");
    int version = 0;
    in >> version;
    if (version != 1) {
        throw ValidationError(kModule, "mesh file: unsupported version");
    }
    auto mesh = std::make_shared<MeshManifold>();
    int ambient = 0;
    int nv = 0;
    int nc = 0;
    int per_cell = 0;
    std::string kind;
    expect("dimension");
    in >> mesh->dimension;
    expect("kind");
    in >> kind;
    expect("ambient");
    in >> ambient;
    expect("period");
    in >> mesh->period;
    expect("grid");
    in >> mesh->grid_m;
    expect("vertices");
    in >> nv;
    expect("cells");
    in >> nc >> per_cell;
    expect("betti1_hint");
    in >> mesh->betti1_hint;
    expect("ricci_negative_max");
    in >> mesh->ricci_negative_max;
    if (!in || nv <= 0 || nc <= 0 || ambient <= 0 || per_cell <= 0) {
        throw ValidationError(kModule, "mesh file: malformed header");
    }
    if (kind == "box") {
        mesh->kind = CellKind::Box;
    } else if (kind == "simplex") {
        mesh->kind = CellKind::Simplex;
    } else {
        throw ValidationError(kModule, "mesh file: unknown kind '" + kind + "'");
    }
    mesh->positions.resize(nv, ambient);
    for (int v = 0; v < nv; ++v) {
        for (int d = 0; d < ambient; ++d) {
            in >> mesh->positions(v, d);
        }
    }
    mesh->cells.resize(nc, per_cell);
    for (int c = 0; c < nc; ++c) {
        for (int k = 0; k < per_cell; ++k) {
            in >> mesh->cells(c, k);
        }
    }
    if (!in) {
        throw ValidationError(kModule, "mesh file: truncated body");
    }
    finalize_mesh(*mesh);
    return mesh;
}

void save_mesh(const std::string& path, const MeshManifold& mesh)
{
    std::ofstream out(path);
    if (!out) {
        throw ComputeError(kModule, "cannot write " + path);
    }
    write_mesh(out, mesh);
}

MeshPtr load_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(kModule, "cannot open " + path);
    }
    return read_mesh(in);
}

// ---------------------------------------------------------------------------
// DEC

namespace {

SparseMatrix incidence(int rows, int cols, const std::vector<std::vector<std::pair<int, int>>>& boundary)
{
    std::vector<Eigen::Triplet<double>> trips;
    for (int r = 0; r < rows; ++r) {
        for (auto [c, s] : boundary[r]) {
            trips.emplace_back(r, c, static_cast<double>(s));
        }
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

SparseMatrix diag(const Eigen::VectorXd& d)
{
    SparseMatrix m(d.size(), d.size());
    std::vector<Eigen::Triplet<double>> trips;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        trips.emplace_back(i, i, d(i));
    }
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

} // namespace

DECOperators assemble_dec(const MeshManifold& mesh)
{
    DECOperators dec;
    const int nv = mesh.vertex_count();
    const int ne = mesh.edge_count();
    const int nf = mesh.face_count();

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(2 * static_cast<std::size_t>(ne));
    for (int e = 0; e < ne; ++e) {
        trips.emplace_back(e, mesh.edges(e, 0), -1.0);
        trips.emplace_back(e, mesh.edges(e, 1), 1.0);
    }
    dec.d0.resize(ne, nv);
    dec.d0.setFromTriplets(trips.begin(), trips.end());
    dec.d1 = incidence(nf, ne, mesh.face_boundary);
    if (mesh.dimension == 3) {
        dec.d2 = incidence(mesh.volume_count(), nf, mesh.volume_boundary);
        dec.star3 = mesh.volume_star;
    }
    dec.star0 = mesh.vertex_mass;
    dec.star1 = mesh.edge_weight;
    dec.star2 = mesh.face_star;

    const double vol_tol = 1e-14 * mesh.total_volume();
    if (mesh.cell_volume.minCoeff() <= vol_tol || dec.star0.minCoeff() <= 0.0 || dec.star1.minCoeff() <= 0.0
        || dec.star2.minCoeff() <= 0.0) {
        throw ComputeError(kModule, "degenerate cell: non-positive volume or Hodge star");
    }
    dec.stiffness = SparseMatrix(dec.d0.transpose() * diag(dec.star1) * dec.d0);
    return dec;
}

Eigen::VectorXd DECOperators::codifferential1(const Eigen::VectorXd& one_form) const
{
    Eigen::VectorXd weighted = star1.cwiseProduct(one_form);
    return (d0.transpose() * weighted).cwiseQuotient(star0);
}

Eigen::VectorXd DECOperators::codifferential2(const Eigen::VectorXd& two_form) const
{
    Eigen::VectorXd weighted = star2.cwiseProduct(two_form);
    return (d1.transpose() * weighted).cwiseQuotient(star1);
}

Eigen::VectorXd DECOperators::scalar_laplacian(const Eigen::VectorXd& f) const
{
    return (stiffness * f).cwiseQuotient(star0);
}

SparseMatrix DECOperators::hodge_laplacian1_form() const
{
    SparseMatrix w1d0 = diag(star1) * d0;
    SparseMatrix up = w1d0 * diag(star0.cwiseInverse()) * SparseMatrix(w1d0.transpose());
    SparseMatrix down = SparseMatrix(d1.transpose()) * diag(star2) * d1;
    return up + down;
}

SparseMatrix DECOperators::hodge_laplacian2_form() const
{
    SparseMatrix w2d1 = diag(star2) * d1;
    SparseMatrix down = w2d1 * diag(star1.cwiseInverse()) * SparseMatrix(w2d1.transpose());
    if (d2.size() == 0) {
        return down;
    }
    SparseMatrix up = SparseMatrix(d2.transpose()) * diag(star3) * d2;
    return down + up;
}

double DECOperators::inner0(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const
{
    return a.dot(star0.cwiseProduct(b));
}

double DECOperators::inner1(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const
{
    return a.dot(star1.cwiseProduct(b));
}

double DECOperators::inner2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const
{
    return a.dot(star2.cwiseProduct(b));
}

SpectralInfo poincare_constant(const MeshManifold& mesh, const DECOperators& dec)
{
    SpectralInfo info;
    // Shift below zero on the natural length scale of the manifold.
    const double scale = 1.0 / std::pow(mesh.total_volume(), 2.0 / mesh.dimension);
    const double shift = -0.5 * scale;

    auto scalar = lowest_eigenpairs(dec.stiffness, dec.star0, 4, shift);
    if (!scalar.converged) {
        throw ComputeError(kModule, "scalar eigen-solve did not converge after " + std::to_string(scalar.iterations)
                                        + " Krylov vectors (residual " + std::to_string(scalar.max_residual) + ")");
    }
    info.low_scalar_spectrum = scalar.values;
    const double zero_tol = 1e-8 * scale;
    for (double v : scalar.values) {
        if (v > zero_tol) {
            info.lambda1 = v;
            break;
        }
    }
    if (!(info.lambda1 > 0.0)) {
        throw ComputeError(kModule, "no positive eigenvalue among the lowest scalar modes");
    }

    SparseMatrix hodge1 = dec.hodge_laplacian1_form();
    int want = mesh.betti1_hint + 4;
    for (;;) {
        auto forms = lowest_eigenpairs(hodge1, dec.star1, want, shift);
        if (!forms.converged) {
            throw ComputeError(kModule, "1-form eigen-solve did not converge after "
                                            + std::to_string(forms.iterations) + " Krylov vectors");
        }
        int zeros = 0;
        for (double v : forms.values) {
            if (std::abs(v) < 1e-6 * info.lambda1) {
                ++zeros;
            }
        }
        if (zeros < want || want >= dec.star1.size()) {
            info.harmonic_dimension = zeros;
            info.low_one_form_spectrum = forms.values;
            break;
        }
        want *= 2;
    }
    return info;
}

} // namespace glmm
