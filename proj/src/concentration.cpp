#include "glmm/concentration.hpp"

#include "glmm/error.hpp"
#include "glmm/linalg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <queue>

namespace glmm {

namespace {

const std::string kModule = "concentration";

constexpr double kLow = 0.5;
constexpr double kHigh = 0.75;
constexpr double kWidth = kHigh - kLow;

// Transition on s in [0, 1]: quintic Hermite between the two branches (value, slope and
// curvature matched) plus s^3 (1 - s)^3 q(s), which leaves the end data unchanged.
// q is a minimax fit that brings max |f'| down from 3.38 to 1.84.
constexpr double kHermite[6] = {1.0, 0.0, 0.0, 142.0 / 27.0, -227.0 / 27.0, 94.0 / 27.0};
constexpr double kBump[4] = {24.84, -131.52, 236.28, -171.37};

double poly(const double* c, int n, double s)
{
    double v = 0.0;
    for (int k = n - 1; k >= 0; --k) {
        v = v * s + c[k];
    }
    return v;
}

double poly_derivative(const double* c, int n, double s)
{
    double v = 0.0;
    for (int k = n - 1; k >= 1; --k) {
        v = v * s + k * c[k];
    }
    return v;
}

double transition(double s)
{
    double w = s * s * s * (1.0 - s) * (1.0 - s) * (1.0 - s);
    return poly(kHermite, 6, s) + w * poly(kBump, 4, s);
}

double transition_derivative(double s)
{
    double a = s * (1.0 - s);
    double w = a * a * a;
    double dw = 3.0 * a * a * (1.0 - 2.0 * s);
    return poly_derivative(kHermite, 6, s) + dw * poly(kBump, 4, s) + w * poly_derivative(kBump, 4, s);
}

double cell_omega(int n) { return n == 2 ? 1.0 : 2.0; }

double relative(double a, double b) { return b > 0.0 ? a / b : a; }

struct EdgeLookup {
    std::map<std::pair<int, int>, int> index;

    explicit EdgeLookup(const MeshManifold& mesh)
    {
        for (int e = 0; e < mesh.edge_count(); ++e) {
            int a = mesh.edges(e, 0);
            int b = mesh.edges(e, 1);
            index[{std::min(a, b), std::max(a, b)}] = e;
        }
    }
};

std::vector<std::vector<std::pair<int, double>>> adjacency(const MeshManifold& mesh)
{
    std::vector<std::vector<std::pair<int, double>>> adj(static_cast<std::size_t>(mesh.vertex_count()));
    for (int e = 0; e < mesh.edge_count(); ++e) {
        int a = mesh.edges(e, 0);
        int b = mesh.edges(e, 1);
        adj[static_cast<std::size_t>(a)].emplace_back(b, mesh.edge_length(e));
        adj[static_cast<std::size_t>(b)].emplace_back(a, mesh.edge_length(e));
    }
    return adj;
}

Eigen::VectorXd dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj,
                         const std::vector<int>& sources, double cutoff_radius)
{
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::VectorXd dist = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(adj.size()), inf);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    for (int s : sources) {
        dist(s) = 0.0;
        queue.emplace(0.0, s);
    }
    while (!queue.empty()) {
        auto [d, v] = queue.top();
        queue.pop();
        if (d > dist(v)) {
            continue;
        }
        for (auto [w, len] : adj[static_cast<std::size_t>(v)]) {
            double nd = d + len;
            if (nd < dist(w) && nd <= cutoff_radius) {
                dist(w) = nd;
                queue.emplace(nd, w);
            }
        }
    }
    return dist;
}

Eigen::VectorXd edge_modulus2(const MeshManifold& mesh, const Eigen::MatrixX2d& values)
{
    Eigen::VectorXd t(mesh.edge_count());
    for (int e = 0; e < mesh.edge_count(); ++e) {
        t(e) = 0.5 * (values.row(mesh.edges(e, 0)).squaredNorm() + values.row(mesh.edges(e, 1)).squaredNorm());
    }
    return t;
}

} // namespace

double cutoff(double t)
{
    if (t <= kLow) {
        return 1.0;
    }
    if (t >= kHigh) {
        return 1.0 / t;
    }
    return transition((t - kLow) / kWidth);
}

double cutoff_derivative(double t)
{
    if (t <= kLow) {
        return 0.0;
    }
    if (t >= kHigh) {
        return -1.0 / (t * t);
    }
    return transition_derivative((t - kLow) / kWidth) / kWidth;
}

PreJacobian prejacobian(const ComplexField& u, const DECOperators& dec)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    PreJacobian pj;
    pj.ju.resize(mesh.edge_count());
    for (int e = 0; e < mesh.edge_count(); ++e) {
        Eigen::Vector2d a = u.values.row(mesh.edges(e, 0));
        Eigen::Vector2d b = u.values.row(mesh.edges(e, 1));
        pj.ju(e) = a(0) * b(1) - a(1) * b(0);
    }
    pj.divergence = dec.codifferential1(pj.ju);
    pj.divergence_norm = std::sqrt(dec.inner0(pj.divergence, pj.divergence));
    pj.curl = dec.d1 * pj.ju;

    const int corners = mesh.vertices_per_cell();
    for (int c = 0; c < mesh.cell_count(); ++c) {
        Eigen::Vector2d mean = Eigen::Vector2d::Zero();
        for (int k = 0; k < corners; ++k) {
            mean += u.values.row(mesh.cells(c, k)).transpose();
        }
        mean /= corners;
        Eigen::MatrixXd du = cell_differential(mesh, u.values, c);
        double m2 = mean.squaredNorm();
        Eigen::VectorXd j = mean(0) * du.col(1) - mean(1) * du.col(0);
        double lhs = m2 * du.squaredNorm();
        double rhs = j.squaredNorm();
        if (m2 > 0.0) {
            Eigen::VectorXd dmod = du * mean / std::sqrt(m2);
            rhs += m2 * dmod.squaredNorm();
        }
        double scale = std::max(lhs, std::numeric_limits<double>::min());
        pj.max_identity_defect = std::max(pj.max_identity_defect, std::abs(lhs - rhs) / scale);
    }
    return pj;
}

BochnerReport bochner_check(const ComplexField& u, double ricci_negative_max)
{
    u.validate();
    if (ricci_negative_max < 0.0) {
        throw ValidationError(kModule, "Ricci witness must be nonnegative");
    }
    const MeshManifold& mesh = *u.mesh;
    const double k = 1.0 / (u.epsilon * u.epsilon) + ricci_negative_max;
    BochnerReport rep;
    rep.defect.resize(mesh.cell_count());
    int bad = 0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        double lhs = cell_gradient_squared(mesh, u.values, c);
        double rhs = k * (1.0 - cell_mean_modulus2(mesh, u.values, c));
        rep.defect(c) = std::max(0.0, lhs - rhs);
        bad += rep.defect(c) > 0.0 ? 1 : 0;
    }
    rep.max_defect = rep.defect.maxCoeff();
    rep.violating_fraction = static_cast<double>(bad) / mesh.cell_count();
    return rep;
}

std::vector<SublevelRow> sublevel_volume(const ComplexField& u, const std::vector<double>& t_list)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    std::vector<SublevelRow> rows;
    for (double t : t_list) {
        if (!(t >= 0.0 && t < 1.0)) {
            throw ValidationError(kModule, "sublevel t must lie in [0, 1)");
        }
        SublevelRow row;
        row.t = t;
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            if (u.values.row(v).squaredNorm() <= t) {
                row.volume += mesh.vertex_mass(v);
            }
        }
        row.constant = row.volume * (1.0 - t) * (1.0 - t) / (u.epsilon * u.epsilon);
        rows.push_back(row);
    }
    return rows;
}

HodgeParts hodge_decompose(const ComplexField& u, const DECOperators& dec)
{
    const MeshManifold& mesh = *u.mesh;
    PreJacobian pj = prejacobian(u, dec);
    Eigen::VectorXd t = edge_modulus2(mesh, u.values);

    Eigen::VectorXd gamma(mesh.edge_count());
    for (int e = 0; e < mesh.edge_count(); ++e) {
        gamma(e) = cutoff(t(e)) * pj.ju(e);
    }
    return hodge_decompose_form(mesh, dec, gamma);
}

HodgeParts hodge_decompose_form(const MeshManifold& mesh, const DECOperators& dec, const Eigen::VectorXd& gamma)
{
    if (gamma.size() != mesh.edge_count()) {
        throw ValidationError(kModule, "1-form size does not match the edge count");
    }
    HodgeParts hp;
    hp.gamma = gamma;

    Eigen::VectorXd div_rhs = dec.d0.transpose() * dec.star1.cwiseProduct(hp.gamma);
    hp.theta = solve_constant_kernel(dec.stiffness, div_rhs, dec.star0);
    hp.exact = dec.d0 * hp.theta;

    SparseMatrix l2 = dec.hodge_laplacian2_form();
    Eigen::VectorXd curl_rhs = dec.star2.cwiseProduct(dec.d1 * hp.gamma);
    if (mesh.dimension == 2) {
        hp.xi = solve_pinned(l2, curl_rhs);
    } else {
        hp.xi = solve_semidefinite(l2, curl_rhs, 1e-13, 20000).x;
    }
    hp.coexact = dec.codifferential2(hp.xi);
    hp.harmonic = hp.gamma - hp.exact - hp.coexact;

    auto norm1 = [&](const Eigen::VectorXd& a) { return std::sqrt(dec.inner1(a, a)); };
    hp.gamma_norm = norm1(hp.gamma);
    hp.exact_norm = norm1(hp.exact);
    hp.coexact_norm = norm1(hp.coexact);
    hp.harmonic_norm = norm1(hp.harmonic);

    Eigen::VectorXd dstar_h = dec.codifferential1(hp.harmonic);
    Eigen::VectorXd d_h = dec.d1 * hp.harmonic;
    double defect = std::sqrt(dec.inner0(dstar_h, dstar_h)) + std::sqrt(dec.inner2(d_h, d_h));
    hp.harmonic_defect = relative(defect, hp.gamma_norm);

    const Eigen::VectorXd* parts[3] = {&hp.exact, &hp.coexact, &hp.harmonic};
    const double g2 = hp.gamma_norm * hp.gamma_norm;
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            hp.max_cross_inner = std::max(hp.max_cross_inner, relative(std::abs(dec.inner1(*parts[a], *parts[b])), g2));
        }
    }
    return hp;
}

double one_form_lp(const MeshManifold& mesh, const Eigen::VectorXd& alpha, double p)
{
    if (!(p >= 1.0)) {
        throw ValidationError(kModule, "L^p exponent must be at least 1");
    }
    double sum = 0.0;
    for (int c = 0; c < mesh.cell_count(); ++c) {
        double a2 = 0.0;
        for (Eigen::Index k = 0; k < mesh.cell_edges.cols(); ++k) {
            double a = alpha(mesh.cell_edges(c, k));
            a2 += mesh.cell_edge_factor(c, k) * a * a;
        }
        sum += mesh.cell_volume(c) * std::pow(a2, 0.5 * p);
    }
    return sum;
}

std::vector<DthetaRow> dtheta_subcritical(const std::vector<double>& epsilons, const std::vector<HodgeParts>& parts)
{
    if (epsilons.size() != parts.size()) {
        throw ValidationError(kModule, "one Hodge decomposition per epsilon is required");
    }
    std::vector<DthetaRow> rows;
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        double eps = epsilons[i];
        if (!(eps > 0.0 && eps < 1.0)) {
            throw ValidationError(kModule, "epsilon must lie in (0, 1)");
        }
        DthetaRow row;
        row.epsilon = eps;
        row.dtheta2 = parts[i].exact_norm * parts[i].exact_norm;
        row.harmonic2 = parts[i].harmonic_norm * parts[i].harmonic_norm;
        double lg = std::abs(std::log(eps));
        row.sqrt_log_ratio = row.dtheta2 / std::sqrt(lg);
        row.log_ratio = row.dtheta2 / lg;
        rows.push_back(row);
    }
    return rows;
}

double max_consecutive_growth(const std::vector<DthetaRow>& rows)
{
    double worst = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        double prev = rows[i - 1].sqrt_log_ratio;
        double next = rows[i].sqrt_log_ratio;
        double g = prev > 0.0 ? next / prev : (next > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        worst = std::max(worst, g);
    }
    return worst;
}

Eigen::VectorXd graph_distances(const MeshManifold& mesh, int source, double cutoff_radius)
{
    if (source < 0 || source >= mesh.vertex_count()) {
        throw ValidationError(kModule, "vertex index out of range");
    }
    return dijkstra(adjacency(mesh), {source}, cutoff_radius);
}

Eigen::VectorXd vertex_energy(const ComplexField& u)
{
    const MeshManifold& mesh = *u.mesh;
    EnergyReport rep = energy(u);
    Eigen::VectorXd share = Eigen::VectorXd::Zero(mesh.vertex_count());
    const int corners = mesh.vertices_per_cell();
    for (int c = 0; c < mesh.cell_count(); ++c) {
        double part = mesh.cell_volume(c) * rep.cell_density(c) / corners;
        for (int k = 0; k < corners; ++k) {
            share(mesh.cells(c, k)) += part;
        }
    }
    return share;
}

double min_profile_radius(const MeshManifold& mesh) { return 3.0 * mesh.max_edge_length(); }

DensityProfile density_profile(const ComplexField& u, int center, const std::vector<double>& radii)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    const double floor = min_profile_radius(mesh);
    if (radii.empty()) {
        throw ValidationError(kModule, "no radii given");
    }
    for (double r : radii) {
        if (!(r >= floor * (1.0 - 1e-12))) {
            throw ValidationError(kModule, "radius below the mesh resolution (3h)");
        }
    }
    const double lg = std::abs(std::log(u.epsilon));
    if (!(lg > 0.0)) {
        throw ValidationError(kModule, "density needs epsilon != 1");
    }
    double rmax = *std::max_element(radii.begin(), radii.end());
    Eigen::VectorXd dist = graph_distances(mesh, center, rmax);
    Eigen::VectorXd share = vertex_energy(u);

    DensityProfile prof;
    prof.center = center;
    prof.radii = radii;
    const int n = mesh.dimension;
    for (double r : radii) {
        double m = 0.0;
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            if (dist(v) <= r) {
                m += share(v);
            }
        }
        m /= lg;
        prof.mass.push_back(m);
        prof.values.push_back(m / (cell_omega(n) * std::pow(r, n - 2)));
    }
    return prof;
}

std::vector<ZeroCluster> zero_clusters(const ComplexField& u, double threshold)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    const int nv = mesh.vertex_count();
    Eigen::VectorXd mod2 = u.values.rowwise().squaredNorm();
    auto adj = adjacency(mesh);
    std::vector<int> label(static_cast<std::size_t>(nv), -1);
    std::vector<ZeroCluster> clusters;
    for (int seed = 0; seed < nv; ++seed) {
        if (mod2(seed) >= threshold || label[static_cast<std::size_t>(seed)] >= 0) {
            continue;
        }
        ZeroCluster cl;
        std::vector<int> stack = {seed};
        label[static_cast<std::size_t>(seed)] = static_cast<int>(clusters.size());
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            cl.vertices.push_back(v);
            for (auto [w, len] : adj[static_cast<std::size_t>(v)]) {
                (void)len;
                if (mod2(w) < threshold && label[static_cast<std::size_t>(w)] < 0) {
                    label[static_cast<std::size_t>(w)] = label[static_cast<std::size_t>(seed)];
                    stack.push_back(w);
                }
            }
        }
        std::sort(cl.vertices.begin(), cl.vertices.end());

        // Centroid relative to the first vertex (minimal image on periodic grids).
        const int base = cl.vertices.front();
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(mesh.ambient_dimension());
        for (int v : cl.vertices) {
            mean += mesh.displacement(base, v);
        }
        mean /= static_cast<double>(cl.vertices.size());
        double best = std::numeric_limits<double>::infinity();
        cl.min_modulus2 = std::numeric_limits<double>::infinity();
        for (int v : cl.vertices) {
            double d = (mesh.displacement(base, v) - mean).squaredNorm();
            if (d < best) {
                best = d;
                cl.center = v;
            }
            cl.min_modulus2 = std::min(cl.min_modulus2, mod2(v));
        }
        clusters.push_back(std::move(cl));
    }
    return clusters;
}

int farthest_vertex(const MeshManifold& mesh, const std::vector<int>& from)
{
    if (from.empty()) {
        return 0;
    }
    Eigen::VectorXd dist = dijkstra(adjacency(mesh), from, std::numeric_limits<double>::infinity());
    Eigen::Index best = 0;
    dist.maxCoeff(&best);
    return static_cast<int>(best);
}

EllipticityFlags eta_ellipticity_scan(const ComplexField& u, const EllipticityOptions& options)
{
    u.validate();
    if (!(options.eta0 > 0.0) || !(options.delta0 > 0.0)) {
        throw ValidationError(kModule, "eta0 and delta0 must be positive");
    }
    if (!(u.epsilon < options.delta0)) {
        throw ValidationError(kModule, "ellipticity scan needs epsilon < delta0");
    }
    const MeshManifold& mesh = *u.mesh;
    const int nv = mesh.vertex_count();
    auto adj = adjacency(mesh);
    Eigen::VectorXd share = vertex_energy(u);
    const double r = options.delta0;
    const double threshold = options.eta0 * std::abs(std::log(u.epsilon / r)) * std::pow(r, mesh.dimension - 2);

    EllipticityFlags flags;
    flags.options = options;
    flags.low_energy.assign(static_cast<std::size_t>(nv), 0);
    flags.ball_energy.resize(nv);
    for (int v = 0; v < nv; ++v) {
        Eigen::VectorXd dist = dijkstra(adj, {v}, r);
        double e = 0.0;
        for (int w = 0; w < nv; ++w) {
            if (dist(w) <= r) {
                e += share(w);
            }
        }
        flags.ball_energy(v) = e;
        if (e <= threshold) {
            flags.low_energy[static_cast<std::size_t>(v)] = 1;
            ++flags.flagged;
            if (u.values.row(v).squaredNorm() < options.modulus2_threshold) {
                ++flags.violations;
            }
        }
    }
    return flags;
}

double loop_integral(const MeshManifold& mesh, const Eigen::VectorXd& one_form, const std::vector<int>& loop)
{
    if (loop.size() < 2) {
        throw ValidationError(kModule, "loop needs at least two vertices");
    }
    EdgeLookup lookup(mesh);
    double sum = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
        int a = loop[i];
        int b = loop[(i + 1) % loop.size()];
        auto it = lookup.index.find({std::min(a, b), std::max(a, b)});
        if (it == lookup.index.end()) {
            throw ValidationError(kModule, "loop vertices are not joined by an edge");
        }
        int e = it->second;
        sum += mesh.edges(e, 0) == a ? one_form(e) : -one_form(e);
    }
    return sum;
}

ConcentrationReport concentration_report(const ComplexField& u, const DECOperators& dec,
                                         const ConcentrationOptions& options)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    ConcentrationReport rep;
    rep.epsilon = u.epsilon;
    EnergyReport en = energy(u);
    rep.energy = en.total;
    rep.normalized_energy = en.normalized;
    rep.residual = gl_residual(u);
    rep.prejac = prejacobian(u, dec);
    rep.sublevel = sublevel_volume(u, options.sublevel_t);
    if (options.bochner) {
        rep.has_bochner = true;
        rep.bochner = bochner_check(u, mesh.ricci_negative_max);
    }
    if (options.hodge) {
        rep.has_hodge = true;
        rep.hodge = hodge_decompose(u, dec);
        for (double p : options.lp_exponents) {
            rep.coexact_lp.emplace_back(p, std::pow(one_form_lp(mesh, rep.hodge.coexact, p), 1.0 / p));
        }
    }
    rep.clusters = zero_clusters(u);
    if (options.density) {
        const double lo = min_profile_radius(mesh);
        const double hi = std::max(lo, options.ellipticity_options.delta0);
        std::vector<double> radii;
        const int samples = std::max(options.profile_samples, 1);
        for (int i = 0; i < samples; ++i) {
            radii.push_back(samples == 1 ? hi : lo + (hi - lo) * i / (samples - 1));
        }
        std::vector<int> centers;
        for (const auto& cl : rep.clusters) {
            centers.push_back(cl.center);
            rep.profiles.push_back(density_profile(u, cl.center, radii));
        }
        rep.control_vertex = farthest_vertex(mesh, centers);
        rep.profiles.push_back(density_profile(u, rep.control_vertex, radii));
    }
    if (options.ellipticity && u.epsilon < options.ellipticity_options.delta0) {
        rep.has_ellipticity = true;
        rep.ellipticity = eta_ellipticity_scan(u, options.ellipticity_options);
    }
    if (options.stress_energy) {
        rep.has_stress = true;
        rep.stress = stress_energy(u, default_test_fields(mesh));
    }
    return rep;
}

namespace {

void write_vector(const std::filesystem::path& path, const Eigen::VectorXd& v, const std::string& kind)
{
    std::ofstream out(path);
    if (!out) {
        throw ComputeError(kModule, "cannot write " + path.string());
    }
    out << "# glmm-form " << kind << " v1\n" << "entries " << v.size() << "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v(i));
        out << buf;
    }
}

nlohmann::json profile_json(const DensityProfile& p)
{
    return {{"center", p.center}, {"radii", p.radii}, {"mass", p.mass}, {"values", p.values}};
}

} // namespace

void save_concentration_report(const std::string& directory, const std::string& stem,
                               const ConcentrationReport& report)
{
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    nlohmann::json doc;
    doc["schema"] = "glmm-concentration v1";
    doc["epsilon"] = report.epsilon;
    doc["energy"] = report.energy;
    doc["normalized_energy"] = report.normalized_energy;
    doc["residual"] = report.residual;
    doc["prejacobian"] = {{"divergence_norm", report.prejac.divergence_norm},
                          {"max_identity_defect", report.prejac.max_identity_defect},
                          {"ju_file", stem + "_ju.form"}};
    write_vector(fs::path(directory) / (stem + "_ju.form"), report.prejac.ju, "edge");

    nlohmann::json sub = nlohmann::json::array();
    for (const auto& row : report.sublevel) {
        sub.push_back({{"t", row.t}, {"volume", row.volume}, {"constant", row.constant}});
    }
    doc["sublevel"] = sub;
    if (report.has_bochner) {
        doc["bochner"] = {{"max_defect", report.bochner.max_defect},
                          {"violating_fraction", report.bochner.violating_fraction}};
    }
    if (report.has_hodge) {
        const HodgeParts& h = report.hodge;
        nlohmann::json lp = nlohmann::json::array();
        for (auto [p, value] : report.coexact_lp) {
            lp.push_back({{"p", p}, {"norm", value}});
        }
        doc["hodge"] = {{"gamma_norm", h.gamma_norm},     {"exact_norm", h.exact_norm},
                        {"coexact_norm", h.coexact_norm}, {"harmonic_norm", h.harmonic_norm},
                        {"harmonic_defect", h.harmonic_defect}, {"max_cross_inner", h.max_cross_inner},
                        {"coexact_lp", lp},
                        {"gamma_file", stem + "_gamma.form"}, {"theta_file", stem + "_theta.form"},
                        {"xi_file", stem + "_xi.form"},       {"harmonic_file", stem + "_harmonic.form"}};
        write_vector(fs::path(directory) / (stem + "_gamma.form"), h.gamma, "edge");
        write_vector(fs::path(directory) / (stem + "_theta.form"), h.theta, "vertex");
        write_vector(fs::path(directory) / (stem + "_xi.form"), h.xi, "face");
        write_vector(fs::path(directory) / (stem + "_harmonic.form"), h.harmonic, "edge");
    }
    nlohmann::json clusters = nlohmann::json::array();
    for (const auto& cl : report.clusters) {
        clusters.push_back({{"center", cl.center}, {"size", cl.vertices.size()}, {"min_modulus2", cl.min_modulus2}});
    }
    doc["zero_clusters"] = clusters;
    nlohmann::json profiles = nlohmann::json::array();
    for (const auto& p : report.profiles) {
        profiles.push_back(profile_json(p));
    }
    doc["density_profiles"] = profiles;
    doc["control_vertex"] = report.control_vertex;
    if (report.has_ellipticity) {
        const auto& f = report.ellipticity;
        doc["ellipticity"] = {{"eta0", f.options.eta0},
                              {"delta0", f.options.delta0},
                              {"modulus2_threshold", f.options.modulus2_threshold},
                              {"flagged", f.flagged},
                              {"violations", f.violations}};
    }
    if (report.has_stress) {
        nlohmann::json fields = nlohmann::json::array();
        for (std::size_t i = 0; i < report.stress.field_names.size(); ++i) {
            fields.push_back({{"name", report.stress.field_names[i]},
                              {"residual", report.stress.residuals(static_cast<Eigen::Index>(i))},
                              {"relative", report.stress.relative_residuals(static_cast<Eigen::Index>(i))}});
        }
        doc["stress_energy"] = {{"fields", fields},
                                {"max_trace_defect", report.stress.max_trace_defect},
                                {"max_asymmetry", report.stress.max_asymmetry}};
    }
    std::ofstream out(fs::path(directory) / (stem + ".json"));
    if (!out) {
        throw ComputeError(kModule, "cannot write report for " + stem);
    }
    out << doc.dump(2) << "\n";
}

} // namespace glmm
