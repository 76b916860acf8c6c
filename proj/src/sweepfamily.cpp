#include "glmm/sweepfamily.hpp"

#include "glmm/error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

namespace glmm {

namespace {

constexpr const char* kModule = "sweepfamily";
constexpr double kPi = std::numbers::pi;

double cross2(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

/// Counter-clockwise convex hull (Andrew's monotone chain).
std::vector<Eigen::Vector2d> convex_hull(std::vector<Eigen::Vector2d> pts)
{
    std::sort(pts.begin(), pts.end(), [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
    });
    if (pts.size() < 3) {
        return pts;
    }
    std::vector<Eigen::Vector2d> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) {
            --k;
        }
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i - 1]) <= 0.0) {
            --k;
        }
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

bool inside_convex(const std::vector<Eigen::Vector2d>& hull, const Eigen::Vector2d& p)
{
    if (hull.size() < 3) {
        return false;
    }
    for (std::size_t i = 0; i < hull.size(); ++i) {
        if (cross2(hull[i], hull[(i + 1) % hull.size()], p) < 0.0) {
            return false;
        }
    }
    return true;
}

double inner_density(double r, double epsilon)
{
    // |dv|^2 = 2 / eps^2 on the core; W(z / eps) with |z| = r.
    const double s = 1.0 - (r * r) / (epsilon * epsilon);
    return 1.0 / (epsilon * epsilon) + 0.25 * s * s / (epsilon * epsilon);
}

} // namespace

Eigen::Vector2d model_vortex(const Eigen::Vector2d& z, double epsilon)
{
    if (!(epsilon > 0.0)) {
        throw ValidationError(kModule, "epsilon must be positive");
    }
    const double r = z.norm();
    if (r > epsilon) {
        return z / r;
    }
    return z / epsilon;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights)
{
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

double vortex_disk_energy(double epsilon, double radius, int quadrature_n)
{
    if (!(epsilon > 0.0) || !(radius >= epsilon)) {
        throw ValidationError(kModule, "vortex_disk_energy needs 0 < eps <= R");
    }
    if (quadrature_n < 4) {
        throw ValidationError(kModule, "quadrature_n must be at least 4 to resolve the core polynomial");
    }
    std::vector<double> x;
    std::vector<double> w;
    gauss_legendre(quadrature_n, x, w);

    double core = 0.0;
    for (int i = 0; i < quadrature_n; ++i) {
        double r = 0.5 * epsilon * (x[i] + 1.0);
        core += 0.5 * epsilon * w[i] * inner_density(r, epsilon) * 2.0 * kPi * r;
    }
    double annulus = 0.0;
    const double a = std::log(epsilon);
    const double b = std::log(radius);
    for (int i = 0; i < quadrature_n; ++i) {
        double t = 0.5 * (b - a) * x[i] + 0.5 * (a + b);
        double r = std::exp(t);
        // e = 1 / (2 r^2) outside the core; dA = 2 pi r^2 dt.
        annulus += 0.5 * (b - a) * w[i] * (1.0 / (2.0 * r * r)) * 2.0 * kPi * r * r;
    }
    return core + annulus;
}

VortexLaw fit_vortex_law(const std::vector<double>& epsilons, double radius, int quadrature_n)
{
    if (epsilons.size() < 2) {
        throw ValidationError(kModule, "vortex law needs at least two epsilons");
    }
    VortexLaw law;
    law.epsilons = epsilons;
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (double eps : epsilons) {
        double e = vortex_disk_energy(eps, radius, quadrature_n);
        law.energies.push_back(e);
        double t = std::log(1.0 / eps);
        sx += t;
        sy += e;
        sxx += t * t;
        sxy += t * e;
    }
    const double n = static_cast<double>(epsilons.size());
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-300) {
        throw ValidationError(kModule, "vortex law needs distinct epsilons");
    }
    law.slope = (n * sxy - sx * sy) / denom;
    law.intercept = (sy - law.slope * sx) / n;
    return law;
}

double SweepMap::c1() const
{
    return kPi * lipschitz2 * fiber_bound / jmin;
}

double SweepMap::c2() const
{
    return (fiber_bound / jmin) * kPi
           * (lipschitz2 * std::max(std::log(image_diameter), 0.0) + 0.5 * lipschitz2 + 0.25);
}

SweepMap build_sweep_map(const MeshManifold& mesh, std::uint64_t seed, const SweepOptions& options)
{
    const int dim = mesh.embedding_dimension();
    const int nv = mesh.vertex_count();
    Eigen::MatrixXd emb(nv, dim);
    for (int v = 0; v < nv; ++v) {
        emb.row(v) = mesh.embedding(v).transpose();
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    SweepMap map;
    map.seed = seed;
    bool accepted = false;
    for (int draw = 1; draw <= options.max_draws && !accepted; ++draw) {
        Eigen::MatrixXd g(dim, 2);
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            g.data()[i] = normal(rng);
        }
        Eigen::MatrixXd q = g.householderQr().householderQ() * Eigen::MatrixXd::Identity(dim, 2);
        Eigen::MatrixX2d f = emb * q;

        double jmin = std::numeric_limits<double>::infinity();
        double smin = std::numeric_limits<double>::infinity();
        double lip2 = 0.0;
        for (int c = 0; c < mesh.cell_count(); ++c) {
            Eigen::MatrixXd local(mesh.vertices_per_cell(), 2);
            for (int k = 0; k < mesh.vertices_per_cell(); ++k) {
                local.row(k) = f.row(mesh.cells(c, k));
            }
            Eigen::MatrixXd df = mesh.cell_gradient[c] * local;
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(df);
            const auto& s = svd.singularValues();
            smin = std::min(smin, s(1));
            jmin = std::min(jmin, s(0) * s(1));
            lip2 = std::max(lip2, df.squaredNorm());
        }
        double edge_ratio = std::numeric_limits<double>::infinity();
        for (int e = 0; e < mesh.edge_count(); ++e) {
            double df = (f.row(mesh.edges(e, 1)) - f.row(mesh.edges(e, 0))).norm();
            edge_ratio = std::min(edge_ratio, df / mesh.edge_length(e));
        }
        map.draws = draw;
        if (smin >= options.rank_tolerance && edge_ratio >= options.rank_tolerance) {
            accepted = true;
            map.values = f;
            map.plane = q;
            map.jmin = jmin;
            map.min_edge_ratio = edge_ratio;
            map.lipschitz2 = lip2;
        }
    }
    if (!accepted) {
        throw ComputeError(kModule, std::to_string(options.max_draws)
                                        + " consecutive planes failed the rank checks: degenerate embedding");
    }

    // Image diameter from the hull of all image points.
    std::vector<Eigen::Vector2d> pts(nv);
    for (int v = 0; v < nv; ++v) {
        pts[v] = map.values.row(v).transpose();
    }
    auto hull = convex_hull(pts);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            map.image_diameter = std::max(map.image_diameter, (hull[i] - hull[j]).norm());
        }
    }

    // Fiber measure on a sample grid: cells whose image hull contains z, weighted by diam^{n-2}.
    const int s = std::max(options.fiber_samples, 4);
    Eigen::Vector2d lo = map.values.colwise().minCoeff().transpose();
    Eigen::Vector2d hi = map.values.colwise().maxCoeff().transpose();
    Eigen::Vector2d step = (hi - lo) / s;
    std::vector<double> fiber(static_cast<std::size_t>(s) * s, 0.0);
    for (int c = 0; c < mesh.cell_count(); ++c) {
        std::vector<Eigen::Vector2d> corner(mesh.vertices_per_cell());
        double diam = 0.0;
        for (int k = 0; k < mesh.vertices_per_cell(); ++k) {
            corner[k] = map.values.row(mesh.cells(c, k)).transpose();
            for (int l = 0; l < k; ++l) {
                diam = std::max(diam, mesh.displacement(mesh.cells(c, l), mesh.cells(c, k)).norm());
            }
        }
        const double weight = std::pow(diam, mesh.dimension - 2);
        auto cell_hull = convex_hull(corner);
        Eigen::Vector2d clo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
        Eigen::Vector2d chi = -clo;
        for (const auto& p : corner) {
            clo = clo.cwiseMin(p);
            chi = chi.cwiseMax(p);
        }
        int i0 = std::max(0, static_cast<int>(std::floor((clo(0) - lo(0)) / step(0) - 0.5)));
        int i1 = std::min(s - 1, static_cast<int>(std::ceil((chi(0) - lo(0)) / step(0) - 0.5)));
        int j0 = std::max(0, static_cast<int>(std::floor((clo(1) - lo(1)) / step(1) - 0.5)));
        int j1 = std::min(s - 1, static_cast<int>(std::ceil((chi(1) - lo(1)) / step(1) - 0.5)));
        for (int i = i0; i <= i1; ++i) {
            for (int j = j0; j <= j1; ++j) {
                Eigen::Vector2d z(lo(0) + (i + 0.5) * step(0), lo(1) + (j + 0.5) * step(1));
                if (inside_convex(cell_hull, z)) {
                    fiber[static_cast<std::size_t>(i) * s + j] += weight;
                }
            }
        }
    }
    map.fiber_bound = *std::max_element(fiber.begin(), fiber.end());
    return map;
}

int DiskFamily::node_index(int ring, int angle) const
{
    if (ring == 0) {
        return 0;
    }
    return 1 + (ring - 1) * n_t + ((angle % n_t) + n_t) % n_t;
}

Eigen::Vector2d DiskFamily::parameter(int node) const
{
    if (node == 0) {
        return Eigen::Vector2d::Zero();
    }
    const int ring = 1 + (node - 1) / n_t;
    const int angle = (node - 1) % n_t;
    const double r = static_cast<double>(ring) / n_r;
    const double t = 2.0 * kPi * angle / n_t;
    if (ring == n_r) {
        return {std::cos(t), std::sin(t)};
    }
    return {r * std::cos(t), r * std::sin(t)};
}

bool DiskFamily::is_boundary(int node) const
{
    return node > 0 && 1 + (node - 1) / n_t == n_r;
}

ComplexField DiskFamily::field(int node) const
{
    return ComplexField(mesh, fields.at(static_cast<std::size_t>(node)), epsilon);
}

std::vector<std::pair<int, int>> DiskFamily::adjacent_pairs() const
{
    std::vector<std::pair<int, int>> pairs;
    for (int j = 0; j < n_t; ++j) {
        pairs.emplace_back(0, node_index(1, j));
    }
    for (int i = 1; i <= n_r; ++i) {
        for (int j = 0; j < n_t; ++j) {
            pairs.emplace_back(node_index(i, j), node_index(i, j + 1));
            if (i < n_r) {
                pairs.emplace_back(node_index(i, j), node_index(i + 1, j));
            }
        }
    }
    return pairs;
}

void DiskFamily::validate() const
{
    if (!mesh || n_r < 1 || n_t < 3 || !(epsilon > 0.0)) {
        throw ValidationError(kModule, "family needs a mesh, n_r >= 1, n_t >= 3 and eps > 0");
    }
    if (static_cast<int>(fields.size()) != node_count()) {
        throw ValidationError(kModule, "family has the wrong number of node fields");
    }
    for (int node = 0; node < node_count(); ++node) {
        const auto& f = fields[static_cast<std::size_t>(node)];
        if (f.rows() != mesh->vertex_count()) {
            throw ValidationError(kModule, "node field size mismatch at node " + std::to_string(node));
        }
        if (is_boundary(node)) {
            Eigen::Vector2d y = parameter(node);
            for (int v = 0; v < f.rows(); ++v) {
                if (f(v, 0) != y(0) || f(v, 1) != y(1)) {
                    throw ValidationError(kModule, "boundary node " + std::to_string(node)
                                                       + " is not the constant map y (not in the admissible class)");
                }
            }
        }
    }
}

DiskFamily build_family(MeshPtr mesh, const SweepMap& sweep, double epsilon, int n_r, int n_t, double clamp_factor)
{
    if (!(epsilon > 0.0)) {
        throw ValidationError(kModule, "epsilon must be positive");
    }
    if (n_r < 1 || n_t < 3) {
        throw ValidationError(kModule, "family grid needs n_r >= 1 and n_t >= 3");
    }
    if (sweep.values.rows() != mesh->vertex_count()) {
        throw ValidationError(kModule, "sweep map does not belong to this mesh");
    }
    DiskFamily fam;
    fam.mesh = mesh;
    fam.epsilon = epsilon;
    fam.n_r = n_r;
    fam.n_t = n_t;
    fam.seed = sweep.seed;
    fam.c1 = sweep.c1();
    fam.c2 = sweep.c2();
    fam.translate_clamp = clamp_factor * sweep.image_diameter;
    fam.fields.resize(static_cast<std::size_t>(fam.node_count()));
    const int nv = mesh->vertex_count();
    for (int node = 0; node < fam.node_count(); ++node) {
        Eigen::Vector2d y = fam.parameter(node);
        Eigen::MatrixX2d f(nv, 2);
        if (fam.is_boundary(node)) {
            f.col(0).setConstant(y(0));
            f.col(1).setConstant(y(1));
        } else {
            Eigen::Vector2d w = y / (1.0 - y.norm());
            if (w.norm() > fam.translate_clamp) {
                w *= fam.translate_clamp / w.norm();
            }
            for (int v = 0; v < nv; ++v) {
                Eigen::Vector2d z = sweep.values.row(v).transpose() + w;
                f.row(v) = model_vortex(z, epsilon).transpose();
            }
        }
        fam.fields[static_cast<std::size_t>(node)] = std::move(f);
    }
    return fam;
}

double h1_distance(const MeshManifold& mesh, const Eigen::MatrixX2d& u, const Eigen::MatrixX2d& v)
{
    Eigen::MatrixX2d d = u - v;
    double sum = 0.0;
    for (int e = 0; e < mesh.edge_count(); ++e) {
        sum += mesh.edge_weight(e) * (d.row(mesh.edges(e, 1)) - d.row(mesh.edges(e, 0))).squaredNorm();
    }
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        sum += mesh.vertex_mass(i) * d.row(i).squaredNorm();
    }
    return std::sqrt(sum);
}

Eigen::Vector2d field_average(const MeshManifold& mesh, const Eigen::MatrixX2d& values)
{
    return (values.transpose() * mesh.vertex_mass) / mesh.vertex_mass.sum();
}

FamilyStats family_stats(const DiskFamily& family)
{
    const MeshManifold& mesh = *family.mesh;
    FamilyStats st;
    st.energies.resize(static_cast<std::size_t>(family.node_count()));
    st.max_energy = -1.0;
    st.min_average_norm = std::numeric_limits<double>::infinity();
    for (int node = 0; node < family.node_count(); ++node) {
        const auto& f = family.fields[static_cast<std::size_t>(node)];
        double e = energy_value(mesh, f, family.epsilon);
        st.energies[static_cast<std::size_t>(node)] = e;
        if (e > st.max_energy) {
            st.max_energy = e;
            st.max_node = node;
        }
        double avg = field_average(mesh, f).norm();
        if (avg < st.min_average_norm) {
            st.min_average_norm = avg;
            st.min_average_node = node;
        }
    }
    for (auto [a, b] : family.adjacent_pairs()) {
        st.continuity_modulus = std::max(st.continuity_modulus,
                                         h1_distance(mesh, family.fields[static_cast<std::size_t>(a)],
                                                     family.fields[static_cast<std::size_t>(b)]));
    }
    return st;
}

void save_family(const std::string& directory, const DiskFamily& family)
{
    namespace fs = std::filesystem;
    family.validate();
    fs::create_directories(directory);
    nlohmann::json index;
    char checksum[32];
    std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(family.mesh->checksum()));
    index["schema"] = "glmm-family 1";
    index["epsilon"] = family.epsilon;
    index["n_r"] = family.n_r;
    index["n_t"] = family.n_t;
    index["seed"] = family.seed;
    index["c1"] = family.c1;
    index["c2"] = family.c2;
    index["translate_clamp"] = family.translate_clamp;
    index["mesh_checksum"] = checksum;
    nlohmann::json nodes = nlohmann::json::array();
    for (int node = 0; node < family.node_count(); ++node) {
        char name[32];
        std::snprintf(name, sizeof(name), "node_%05d.field", node);
        write_field((fs::path(directory) / name).string(), family.field(node));
        Eigen::Vector2d y = family.parameter(node);
        nodes.push_back({{"file", name}, {"y", {y(0), y(1)}}, {"boundary", family.is_boundary(node)}});
    }
    index["nodes"] = nodes;
    std::ofstream out(fs::path(directory) / "family.json");
    if (!out) {
        throw ComputeError(kModule, "cannot write family index in " + directory);
    }
    out << index.dump(2) << "\n";
}

DiskFamily load_family(const std::string& directory, MeshPtr mesh)
{
    namespace fs = std::filesystem;
    std::ifstream in(fs::path(directory) / "family.json");
    if (!in) {
        throw ValidationError(kModule, "missing family index in " + directory);
    }
    nlohmann::json index;
    try {
        in >> index;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(kModule, std::string("corrupt family index: ") + e.what());
    }
    DiskFamily fam;
    try {
        fam.mesh = mesh;
        fam.epsilon = index.at("epsilon").get<double>();
        fam.n_r = index.at("n_r").get<int>();
        fam.n_t = index.at("n_t").get<int>();
        fam.seed = index.at("seed").get<std::uint64_t>();
        fam.c1 = index.at("c1").get<double>();
        fam.c2 = index.at("c2").get<double>();
        fam.translate_clamp = index.at("translate_clamp").get<double>();
        for (const auto& node : index.at("nodes")) {
            auto f = read_field((fs::path(directory) / node.at("file").get<std::string>()).string(), mesh);
            fam.fields.push_back(f.values);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(kModule, std::string("corrupt family index: ") + e.what());
    }
    fam.validate();
    return fam;
}

} // namespace glmm
