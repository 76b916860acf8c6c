#include <doctest.h>

#include "glmm/error.hpp"
#include "glmm/sweepfamily.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace glmm;

namespace {

constexpr double kPi = std::numbers::pi;

/// Closed form of the planar energy of v_eps on D_R: outer Dirichlet
/// pi log(R/eps), core Dirichlet pi, core potential pi/12.
double disk_energy_closed_form(double eps, double radius)
{
    return kPi * std::log(radius / eps) + kPi + kPi / 12.0;
}

} // namespace

TEST_CASE("model vortex branches")
{
    const double eps = 0.1;
    Eigen::Vector2d outer = model_vortex({2 * eps, 0.0}, eps);
    CHECK(outer(0) == doctest::Approx(1.0));
    CHECK(outer(1) == 0.0);
    Eigen::Vector2d inner = model_vortex({eps / 2, 0.0}, eps);
    CHECK(inner(0) == doctest::Approx(0.5));
    CHECK(model_vortex({0.0, 0.0}, eps).norm() == 0.0);
    CHECK_THROWS_AS(model_vortex({1.0, 0.0}, 0.0), ValidationError);
}

TEST_CASE("model vortex is Lipschitz with constant 1/eps")
{
    const double eps = 0.05;
    double worst = 0.0;
    for (int i = 0; i < 400; ++i) {
        Eigen::Vector2d a(std::cos(0.1 * i) * 0.002 * i, std::sin(0.37 * i) * 0.001 * i);
        Eigen::Vector2d b = a + Eigen::Vector2d(1e-4, -2e-4);
        worst = std::max(worst, (model_vortex(a, eps) - model_vortex(b, eps)).norm() / (a - b).norm());
    }
    CHECK(worst <= 1.0 / eps + 1e-9);
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly")
{
    std::vector<double> x;
    std::vector<double> w;
    gauss_legendre(6, x, w);
    double s0 = 0.0;
    double s10 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        s0 += w[i];
        s10 += w[i] * std::pow(x[i], 10);
    }
    CHECK(s0 == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s10 == doctest::Approx(2.0 / 11.0).epsilon(1e-13));
}

TEST_CASE("disk energy matches the closed form")
{
    for (double eps : {1e-1, 1e-2, 1e-4}) {
        for (double radius : {1.0, 2.0}) {
            CHECK(vortex_disk_energy(eps, radius, 8) == doctest::Approx(disk_energy_closed_form(eps, radius)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(vortex_disk_energy(0.1, 1.0, 3), ValidationError);
    CHECK_THROWS_AS(vortex_disk_energy(2.0, 1.0, 8), ValidationError);
}

TEST_CASE("disk energy at eps = R stays below the core density bound")
{
    // Core density is at most 9 / (4 eps^2) on a disk of area pi eps^2.
    CHECK(vortex_disk_energy(0.3, 0.3, 8) <= 9.0 * kPi / 4.0);
}

TEST_CASE("vortex law slope and radius doubling")
{
    auto law = fit_vortex_law({1e-2, 1e-3, 1e-4}, 1.0, 16);
    CHECK(std::abs(law.slope - kPi) / kPi < 0.02);
    double gain = vortex_disk_energy(0.01, 2.0, 16) - vortex_disk_energy(0.01, 1.0, 16);
    CHECK(gain == doctest::Approx(kPi * std::log(2.0)).epsilon(0.02));
}

TEST_CASE("sweep map on the flat torus has a positive Jacobian bound")
{
    auto mesh = flat_torus_2d(32);
    auto map = build_sweep_map(*mesh, 1);
    CHECK(map.jmin > 0.0);
    CHECK(map.min_edge_ratio >= 1e-6);
    CHECK(map.fiber_bound >= 1.0);
    CHECK((map.plane.transpose() * map.plane - Eigen::Matrix2d::Identity()).norm() < 1e-12);
    CHECK(map.lipschitz2 <= 2.0 + 1e-9);
}

TEST_CASE("sweep map on the sphere has small fibers")
{
    auto mesh = unit_sphere(3);
    auto map = build_sweep_map(*mesh, 5);
    CHECK(map.jmin > 0.0);
    // Generic fibers are two points; overlapping image hulls near the fold add a few.
    CHECK(map.fiber_bound <= 8.0);
    CHECK(map.fiber_bound >= 2.0);
}

TEST_CASE("sweep map is reproducible")
{
    auto mesh = flat_torus_2d(16);
    auto a = build_sweep_map(*mesh, 42);
    auto b = build_sweep_map(*mesh, 42);
    CHECK(a.values == b.values);
    CHECK(a.jmin == b.jmin);
    CHECK(a.fiber_bound == b.fiber_bound);
    auto c = build_sweep_map(*mesh, 43);
    CHECK(a.values != c.values);
}

TEST_CASE("family boundary nodes are the constant maps")
{
    auto mesh = flat_torus_2d(16);
    auto map = build_sweep_map(*mesh, 3);
    auto fam = build_family(mesh, map, 0.2, 4, 16);
    CHECK_NOTHROW(fam.validate());
    auto stats = family_stats(fam);
    for (int node = 0; node < fam.node_count(); ++node) {
        if (fam.is_boundary(node)) {
            CHECK(stats.energies[static_cast<std::size_t>(node)] < 1e-25);
        }
    }
    int boundary_x = fam.node_index(4, 0);
    CHECK(fam.fields[static_cast<std::size_t>(boundary_x)](7, 0) == 1.0);
    CHECK(fam.fields[static_cast<std::size_t>(boundary_x)](7, 1) == 0.0);
    fam.fields[static_cast<std::size_t>(boundary_x)](0, 0) = 0.999;
    CHECK_THROWS_AS(fam.validate(), ValidationError);
}

TEST_CASE("center node vanishes where f does")
{
    auto mesh = flat_torus_2d(32);
    auto map = build_sweep_map(*mesh, 9);
    auto fam = build_family(mesh, map, 0.2, 4, 16);
    // The image of the torus surrounds the origin, so v_eps(f) has small modulus somewhere.
    CHECK(fam.field(0).min_modulus() < 0.5);
}

TEST_CASE("max-node energy law on the torus")
{
    auto mesh = flat_torus_2d(32);
    auto map = build_sweep_map(*mesh, 2);
    double worst_ratio = 0.0;
    for (double eps : {0.2, 0.1, 0.05}) {
        auto fam = build_family(mesh, map, eps, 6, 24);
        auto stats = family_stats(fam);
        double bound = fam.c1 * std::abs(std::log(eps)) + fam.c2;
        CHECK(stats.max_energy <= bound);
        worst_ratio = std::max(worst_ratio, stats.max_energy / std::abs(std::log(eps)));
    }
    CHECK(worst_ratio <= map.c1() + map.c2() / std::abs(std::log(0.2)));
}

TEST_CASE("parameter refinement shrinks the continuity modulus and the obstruction minimum")
{
    auto mesh = flat_torus_2d(32);
    auto map = build_sweep_map(*mesh, 4);
    auto coarse = family_stats(build_family(mesh, map, 0.2, 4, 16));
    auto fine = family_stats(build_family(mesh, map, 0.2, 8, 32));
    CHECK(fine.continuity_modulus < coarse.continuity_modulus);
    CHECK(fine.min_average_norm <= coarse.min_average_norm);
}

TEST_CASE("family persistence round trip")
{
    auto mesh = unit_sphere(1);
    auto map = build_sweep_map(*mesh, 8);
    auto fam = build_family(mesh, map, 0.3, 2, 6);
    auto dir = (std::filesystem::temp_directory_path() / "glmm_family_roundtrip").string();
    std::filesystem::remove_all(dir);
    save_family(dir, fam);
    auto back = load_family(dir, mesh);
    CHECK(back.n_r == fam.n_r);
    CHECK(back.n_t == fam.n_t);
    CHECK(back.c1 == fam.c1);
    for (int node = 0; node < fam.node_count(); ++node) {
        CHECK(back.fields[static_cast<std::size_t>(node)] == fam.fields[static_cast<std::size_t>(node)]);
    }
    std::filesystem::remove_all(dir);
}
