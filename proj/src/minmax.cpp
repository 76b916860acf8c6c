#include "glmm/minmax.hpp"

#include "glmm/error.hpp"
#include "glmm/linalg.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace glmm {

namespace {

constexpr const char* kModule = "minmax";

// Full Newton steps accepted without residual decrease (watchdog), and the growth they may cause.
constexpr int kNonmonotoneSteps = 25;
constexpr double kNonmonotoneGrowth = 1e4;

Eigen::VectorXd flatten(const Eigen::MatrixX2d& values)
{
    Eigen::VectorXd out(2 * values.rows());
    for (Eigen::Index v = 0; v < values.rows(); ++v) {
        out(2 * v) = values(v, 0);
        out(2 * v + 1) = values(v, 1);
    }
    return out;
}

Eigen::MatrixX2d unflatten(const Eigen::VectorXd& flat)
{
    Eigen::MatrixX2d out(flat.size() / 2, 2);
    for (Eigen::Index v = 0; v < out.rows(); ++v) {
        out(v, 0) = flat(2 * v);
        out(v, 1) = flat(2 * v + 1);
    }
    return out;
}

Eigen::VectorXd interleaved_mass(const MeshManifold& mesh)
{
    Eigen::VectorXd b(2 * mesh.vertex_count());
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        b(2 * v) = mesh.vertex_mass(v);
        b(2 * v + 1) = mesh.vertex_mass(v);
    }
    return b;
}

void truncate_rows(Eigen::MatrixX2d& values)
{
    for (Eigen::Index v = 0; v < values.rows(); ++v) {
        const double r = values.row(v).norm();
        if (r > 1.0) {
            values.row(v) /= r;
        }
    }
}

SparseMatrix diagonal(const Eigen::VectorXd& d)
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

void FlowConfig::validate() const
{
    if (!(step > 0.0) || !(max_step >= step)) {
        throw ValidationError(kModule, "flow step must be positive and not above max_step");
    }
    if (window < 10) {
        throw ValidationError(kModule, "flow window must be at least 10 iterations");
    }
    if (max_iterations < 0 || !(relative_tolerance >= 0.0) || !(min_step > 0.0) || !(stationarity_tolerance >= 0.0)) {
        throw ValidationError(kModule, "flow limits must be nonnegative");
    }
}

FlowResult pull_down(const DiskFamily& family, const FlowConfig& cfg)
{
    cfg.validate();
    family.validate();
    const MeshManifold& mesh = *family.mesh;
    const double eps = family.epsilon;

    // H^1_eps preconditioner K + M / eps^2, factored once.
    DECOperators dec = assemble_dec(mesh);
    SparseMatrix pre = dec.stiffness + diagonal(dec.star0 / (eps * eps));
    Eigen::SimplicialLLT<SparseMatrix> factor(pre);
    if (factor.info() != Eigen::Success) {
        throw ComputeError(kModule, "preconditioner factorization failed");
    }

    FlowResult out;
    out.family = family;
    auto& fields = out.family.fields;
    const int nodes = family.node_count();
    std::vector<double> energy(static_cast<std::size_t>(nodes));
    std::vector<double> alpha(static_cast<std::size_t>(nodes), cfg.step);
    for (int node = 0; node < nodes; ++node) {
        energy[static_cast<std::size_t>(node)] = energy_value(mesh, fields[static_cast<std::size_t>(node)], eps);
    }
    auto current_max = [&](int& arg) {
        double best = -1.0;
        for (int node = 0; node < nodes; ++node) {
            if (energy[static_cast<std::size_t>(node)] > best) {
                best = energy[static_cast<std::size_t>(node)];
                arg = node;
            }
        }
        return best;
    };
    out.history.push_back(current_max(out.max_node));
    out.stop_reason = "max_iterations";

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        std::vector<char> stalled(static_cast<std::size_t>(nodes), 0);
        std::vector<double> dual(static_cast<std::size_t>(nodes), 0.0);
        for (int node = 0; node < nodes; ++node) {
            if (family.is_boundary(node)) {
                continue;
            }
            auto idx = static_cast<std::size_t>(node);
            Eigen::MatrixX2d& u = fields[idx];
            Eigen::MatrixX2d g = gradient(mesh, u, eps);
            Eigen::MatrixX2d d = -factor.solve(g);
            const double slope = (g.array() * d.array()).sum();
            dual[idx] = std::sqrt(std::max(0.0, -slope));
            if (!(slope < -1e-30 * std::max(1.0, energy[idx]))) {
                continue; // already stationary to rounding
            }
            if (!cfg.line_search) {
                Eigen::MatrixX2d trial = u + cfg.step * d;
                if (cfg.truncate) {
                    truncate_rows(trial);
                }
                u = std::move(trial);
                energy[idx] = energy_value(mesh, u, eps);
                continue;
            }
            double a = alpha[idx];
            bool accepted = false;
            while (a >= cfg.min_step) {
                Eigen::MatrixX2d trial = u + a * d;
                if (cfg.truncate) {
                    truncate_rows(trial);
                }
                const double e1 = energy_value(mesh, trial, eps);
                if (e1 <= energy[idx] + 1e-4 * a * slope && e1 <= energy[idx]) {
                    u = std::move(trial);
                    energy[idx] = e1;
                    alpha[idx] = std::min(1.5 * a, cfg.max_step);
                    accepted = true;
                    break;
                }
                a *= 0.5;
            }
            if (!accepted) {
                alpha[idx] = cfg.step;
                stalled[idx] = 1;
            }
        }
        int arg = 0;
        out.history.push_back(current_max(arg));
        out.gradient_history.push_back(dual[static_cast<std::size_t>(arg)]);
        out.max_node = arg;
        out.iterations = iter;
        if (stalled[static_cast<std::size_t>(arg)]) {
            out.stagnated = true;
            out.stop_reason = "stagnation";
            break;
        }
        if (iter >= cfg.window && out.history.back() > 0.0
            && out.gradient_history.back() <= cfg.stationarity_tolerance * std::sqrt(out.history.back())) {
            out.stop_reason = "stationary";
            break;
        }
        if (iter >= cfg.window) {
            const double before = out.history[static_cast<std::size_t>(iter - cfg.window)];
            const double now = out.history.back();
            if (before - now <= cfg.relative_tolerance * std::abs(before)) {
                out.stop_reason = "converged";
                break;
            }
        }
    }
    return out;
}

RefineResult refine_to_critical(const ComplexField& u0, const RefineOptions& options)
{
    u0.validate();
    if (!(options.tolerance > 0.0) || options.max_iterations < 0) {
        throw ValidationError(kModule, "refinement needs a positive tolerance");
    }
    const MeshManifold& mesh = *u0.mesh;
    const double eps = u0.epsilon;
    const Eigen::VectorXd b = interleaved_mass(mesh);
    const Eigen::Index n = b.size();

    RefineResult out;
    out.field = u0;
    out.initial_energy = energy_value(mesh, u0.values, eps);
    Eigen::MatrixX2d u = u0.values;
    double r = residual_norm(mesh, gradient(mesh, u, eps));
    out.residual_history.push_back(r);
    double mu = -1.0;
    Eigen::MatrixX2d best = u;
    double best_r = r;
    int watchdog = kNonmonotoneSteps;

    auto residual_at = [&](const Eigen::MatrixX2d& v) { return residual_norm(mesh, gradient(mesh, v, eps)); };

    while (r > options.tolerance && out.iterations < options.max_iterations) {
        ++out.iterations;
        ComplexField cur(u0.mesh, u, eps);
        Eigen::VectorXd g = flatten(gradient(mesh, u, eps));
        SparseMatrix h = hessian(cur);
        bool moved = false;

        // Newton step on the gauge-fixed (bordered) system.
        Eigen::VectorXd w(n);
        for (Eigen::Index v = 0; v < n / 2; ++v) {
            w(2 * v) = -u(v, 1);
            w(2 * v + 1) = u(v, 0);
        }
        Eigen::VectorXd c = b.cwiseProduct(w);
        const bool border = c.norm() > 1e-12 * b.sum();
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(h.nonZeros() + 2 * n));
        for (int col = 0; col < h.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(h, col); it; ++it) {
                trips.emplace_back(it.row(), it.col(), it.value());
            }
        }
        const Eigen::Index size = border ? n + 1 : n;
        if (border) {
            for (Eigen::Index i = 0; i < n; ++i) {
                if (c(i) != 0.0) {
                    trips.emplace_back(i, n, c(i));
                    trips.emplace_back(n, i, c(i));
                }
            }
        }
        SparseMatrix sys(size, size);
        sys.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<SparseMatrix> lu;
        lu.compute(sys);
        if (lu.info() == Eigen::Success) {
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
            rhs.head(n) = -g;
            Eigen::VectorXd sol = lu.solve(rhs);
            if (lu.info() == Eigen::Success && sol.allFinite()) {
                Eigen::MatrixX2d step = unflatten(sol.head(n));
                double full_r = 0.0;
                for (double a = 1.0; a >= 1.0 / 64.0; a *= 0.5) {
                    Eigen::MatrixX2d trial = u + a * step;
                    double rt = residual_at(trial);
                    if (a == 1.0) {
                        full_r = rt;
                    }
                    if (rt <= (1.0 - 1e-4 * a) * r) {
                        u = std::move(trial);
                        r = rt;
                        moved = true;
                        ++out.newton_steps;
                        break;
                    }
                }
                if (!moved && watchdog > 0 && std::isfinite(full_r) && full_r <= kNonmonotoneGrowth * best_r) {
                    --watchdog;
                    u += step;
                    r = full_r;
                    moved = true;
                    ++out.newton_steps;
                }
            }
        }

        if (!moved) {
            // Levenberg-Marquardt on 1/2 |M^{-1} g|_M^2: (H M^-1 H + mu M) d = -H M^-1 g.
            SparseMatrix gn = h * diagonal(b.cwiseInverse()) * h;
            Eigen::VectorXd grad_phi = h * g.cwiseQuotient(b);
            if (mu < 0.0) {
                mu = 1e-6 * gn.diagonal().cwiseQuotient(b).maxCoeff();
            }
            for (int attempt = 0; attempt < 30 && !moved; ++attempt) {
                SparseMatrix damped = gn + diagonal(mu * b);
                Eigen::SimplicialLDLT<SparseMatrix> ldlt(damped);
                if (ldlt.info() == Eigen::Success) {
                    Eigen::VectorXd d = ldlt.solve(-grad_phi);
                    Eigen::MatrixX2d trial = u + unflatten(d);
                    double rt = residual_at(trial);
                    if (std::isfinite(rt) && rt < r) {
                        u = std::move(trial);
                        r = rt;
                        moved = true;
                        ++out.fallback_steps;
                        mu = std::max(mu / 3.0, 1e-300);
                        break;
                    }
                }
                mu *= 10.0;
            }
        }
        out.residual_history.push_back(r);
        if (r < best_r) {
            best = u;
            best_r = r;
        }
        if (!moved) {
            break;
        }
    }
    u = std::move(best);
    r = best_r;

    out.field = ComplexField(u0.mesh, u, eps);
    out.residual = r;
    out.final_energy = energy_value(mesh, u, eps);
    if (r > options.tolerance) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "refinement did not reach tolerance %.3g after %d iterations (best residual %.6g)",
                      options.tolerance, out.iterations, r);
        throw ComputeError(kModule, buf);
    }
    return out;
}

MorseInfo morse_index(const ComplexField& u, int count)
{
    u.validate();
    const MeshManifold& mesh = *u.mesh;
    SparseMatrix h = hessian(u);
    const Eigen::VectorXd b = interleaved_mass(mesh);
    const double scale = 1.0 / (u.epsilon * u.epsilon);

    // K >= 0, so the spectrum of (H, M) lies above min_v lambda_min(D^2 W(u_v)) / eps^2.
    double floor = 0.0;
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        Eigen::Matrix2d d2 = potential_hessian(u.values.row(v).transpose());
        floor = std::min(floor, Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(d2, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() * scale);
    }
    double lo = floor - 1.0;
    double hi = 0.0;
    double shift = 0.0;
    if (count_eigenvalues_below(h, b, hi) == 0) {
        shift = -1e-3 * (1.0 + std::abs(lo));
    } else {
        for (int it = 0; it < 60 && hi - lo > 1e-3 * (1.0 + std::abs(lo)); ++it) {
            double mid = 0.5 * (lo + hi);
            if (count_eigenvalues_below(h, b, mid) == 0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shift = lo - (hi - lo);
    }
    auto pairs = lowest_eigenpairs(h, b, std::min<int>(count, static_cast<int>(b.size())), shift, 600, 1e-10);
    if (!pairs.converged) {
        throw ComputeError(kModule, "Hessian eigen-solve did not converge after " + std::to_string(pairs.iterations)
                                        + " Krylov vectors (residual " + std::to_string(pairs.max_residual) + ")");
    }
    MorseInfo info;
    info.eigenvalues = pairs.values;
    info.zero_tolerance = 1e-6 * std::max(1.0, scale);
    for (double lam : pairs.values) {
        if (lam < -info.zero_tolerance) {
            ++info.index;
        } else if (std::abs(lam) <= info.zero_tolerance) {
            ++info.near_zero;
        }
    }
    return info;
}

double epsilon_floor(const MeshManifold& mesh) { return 0.25 * mesh.max_edge_length(); }

void validate_epsilons(const MeshManifold& mesh, const std::vector<double>& epsilons)
{
    if (epsilons.empty()) {
        throw ValidationError(kModule, "epsilon list is empty");
    }
    const double floor = epsilon_floor(mesh);
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double eps = epsilons[i];
        if (!(eps > 0.0) || !std::isfinite(eps)) {
            throw ValidationError(kModule, "epsilon must be positive and finite");
        }
        if (eps <= floor) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "epsilon %.6g is below the mesh floor h/4 = %.6g (vortex core unresolvable)",
                          eps, floor);
            throw ValidationError(kModule, buf);
        }
        if (i > 0 && !(eps < epsilons[i - 1])) {
            throw ValidationError(kModule, "epsilon list must be strictly decreasing");
        }
    }
}

MinMaxResult run_minmax(MeshPtr mesh, const SweepMap& sweep, double epsilon, int n_r, int n_t,
                        const FlowConfig& flow, const RefineOptions& refine)
{
    auto start = std::chrono::steady_clock::now();
    validate_epsilons(*mesh, {epsilon});
    DiskFamily fam = build_family(mesh, sweep, epsilon, n_r, n_t);
    FlowResult flowed = pull_down(fam, flow);

    MinMaxResult res;
    res.epsilon = epsilon;
    res.history = flowed.history;
    res.c_estimate = flowed.history.back();
    res.max_node = flowed.max_node;
    res.flow_iterations = flowed.iterations;
    res.stagnated = flowed.stagnated;
    res.stop_reason = flowed.stop_reason;
    res.family = flowed.family;

    ComplexField slice = flowed.family.field(flowed.max_node);
    res.slice_energy = energy_value(*mesh, slice.values, epsilon);
    RefineResult refined = refine_to_critical(slice, refine);
    res.critical = refined.field;
    res.refined_energy = refined.final_energy;
    res.residual = refined.residual;
    res.refine_iterations = refined.iterations;
    res.morse = morse_index(res.critical);
    res.min_modulus = res.critical.min_modulus();
    res.nontrivial = res.refined_energy > 0.0 && res.min_modulus * res.min_modulus < 7.0 / 8.0;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

void fit_affine(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept)
{
    const double n = static_cast<double>(x.size());
    if (x.size() != y.size() || x.empty()) {
        throw ValidationError(kModule, "affine fit needs matching nonempty samples");
    }
    if (x.size() == 1) {
        slope = 0.0;
        intercept = y[0];
        return;
    }
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    slope = std::abs(denom) > 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    intercept = (sy - slope * sx) / n;
}

SweepTable cepsilon_sweep(MeshPtr mesh, const SweepMap& sweep, const std::vector<double>& epsilons, int n_r,
                          int n_t, const FlowConfig& flow, const RefineOptions& refine)
{
    validate_epsilons(*mesh, epsilons);
    flow.validate();
    SweepTable table;
    std::vector<double> x;
    std::vector<double> y;
    for (double eps : epsilons) {
        table.results.push_back(run_minmax(mesh, sweep, eps, n_r, n_t, flow, refine));
        x.push_back(std::abs(std::log(eps)));
        y.push_back(table.results.back().refined_energy);
    }
    fit_affine(x, y, table.fit_c1, table.fit_c2);
    return table;
}

std::string format_sweep_table(const SweepTable& table)
{
    std::ostringstream out;
    out << "# glmm-table minmax-sweep v1\n";
    out << "# fit: refined_energy = " << std::scientific;
    out.precision(12);
    out << table.fit_c1 << " * |log eps| + " << table.fit_c2 << "\n";
    out << "epsilon log_eps c_estimate refined_energy residual min_modulus morse_index wall_seconds\n";
    for (const auto& r : table.results) {
        char line[400];
        std::snprintf(line, sizeof(line), "%.12e %.12e %.12e %.12e %.6e %.12e %d %.3f\n", r.epsilon,
                      std::abs(std::log(r.epsilon)), r.c_estimate, r.refined_energy, r.residual, r.min_modulus,
                      r.morse.index, r.wall_seconds);
        out << line;
    }
    return out.str();
}

} // namespace glmm
