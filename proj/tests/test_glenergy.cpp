#include <doctest.h>

#include "glmm/error.hpp"
#include "glmm/glenergy.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

using namespace glmm;

namespace {

Eigen::MatrixX2d random_values(int n, std::mt19937_64& rng, double scale = 1.0)
{
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::MatrixX2d v(n, 2);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        v.data()[i] = normal(rng);
    }
    return v;
}

/// (1 - k^2 eps^2)^{1/2} e^{i k x} sampled on a torus grid.
ComplexField plane_wave(MeshPtr mesh, int k, double eps)
{
    const double amp = std::sqrt(1.0 - k * k * eps * eps);
    Eigen::MatrixX2d v(mesh->vertex_count(), 2);
    for (int i = 0; i < mesh->vertex_count(); ++i) {
        double x = mesh->positions(i, 0);
        v(i, 0) = amp * std::cos(k * x);
        v(i, 1) = amp * std::sin(k * x);
    }
    return ComplexField(mesh, v, eps);
}

} // namespace

TEST_CASE("potential at reference points")
{
    auto p = potential_eval({1.0, 0.0});
    CHECK(p.w == 0.0);
    CHECK(p.dw.norm() == 0.0);
    p = potential_eval({0.0, 0.0});
    CHECK(p.w == 0.25);
    CHECK(p.dw.norm() == 0.0);
    p = potential_eval({0.5, 0.0});
    CHECK(p.w == doctest::Approx(0.140625).epsilon(1e-15));
    CHECK(p.dw(0) == doctest::Approx(-0.375).epsilon(1e-15));
    CHECK(p.dw(1) == 0.0);
}

TEST_CASE("potential continuation is C1 and bounded")
{
    const Eigen::Vector2d dir = Eigen::Vector2d(3.0, 4.0).normalized();
    auto below = potential_eval((2.0 - 1e-9) * dir);
    auto above = potential_eval((2.0 + 1e-9) * dir);
    CHECK(std::abs(below.w - above.w) < 1e-7);
    CHECK((below.dw - above.dw).norm() < 1e-6);
    double sup = 0.0;
    for (double r = 0.0; r < 40.0; r += 0.001) {
        auto q = potential_eval(r * dir);
        sup = std::max(sup, q.dw.norm());
        CHECK(q.w >= 0.0);
        if (r >= 2.0) {
            CHECK(q.w >= 2.0);
        }
    }
    CHECK(sup <= kPotentialGradientBound + 1e-12);
    CHECK(sup >= kPotentialGradientBound - 1e-2);
}

TEST_CASE("potential vanishes only on the unit circle inside radius 2")
{
    for (double r : {0.0, 0.3, 0.99, 1.01, 1.5, 1.99}) {
        CHECK(potential_eval({r, 0.0}).w > 0.0);
    }
    CHECK(potential_eval({std::cos(0.7), std::sin(0.7)}).w < 1e-30);
}

TEST_CASE("potential Hessian matches differences of DW")
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        Eigen::Vector2d z(uni(rng), uni(rng));
        if (std::abs(z.norm() - 2.0) < 1e-3) {
            continue;
        }
        Eigen::Matrix2d fd;
        const double s = 1e-6;
        for (int c = 0; c < 2; ++c) {
            Eigen::Vector2d e = Eigen::Vector2d::Unit(c) * s;
            fd.col(c) = (potential_eval(z + e).dw - potential_eval(z - e).dw) / (2 * s);
        }
        CHECK((fd - potential_hessian(z)).norm() < 1e-6 * (1.0 + fd.norm()));
    }
}

TEST_CASE("constant fields")
{
    auto mesh = flat_torus_2d(16);
    auto unit = ComplexField::constant(mesh, {0.0, 1.0}, 0.3);
    CHECK(energy(unit).total == 0.0);
    CHECK(gl_residual(unit) == 0.0);
    auto zero = ComplexField::constant(mesh, {0.0, 0.0}, 0.1);
    const double vol = 4.0 * std::numbers::pi * std::numbers::pi;
    CHECK(energy(zero).total == doctest::Approx(vol * 25.0).epsilon(1e-12));
    CHECK_THROWS_AS(ComplexField::constant(mesh, {1.0, 0.0}, -0.1), ValidationError);
}

TEST_CASE("energy report splits consistently")
{
    std::mt19937_64 rng(5);
    for (auto mesh : {unit_sphere(2), flat_torus_2d(8), flat_torus_3d(8)}) {
        ComplexField u(mesh, random_values(mesh->vertex_count(), rng), 0.2);
        auto rep = energy(u);
        CHECK(rep.total == doctest::Approx(rep.dirichlet + rep.potential).epsilon(1e-14));
        CHECK(rep.total == doctest::Approx(energy_value(*mesh, u.values, u.epsilon)).epsilon(1e-12));
        CHECK(rep.cell_density.dot(mesh->cell_volume) == doctest::Approx(rep.total).epsilon(1e-12));
        CHECK(rep.dirichlet >= 0.0);
        CHECK(rep.potential >= 0.0);
    }
}

TEST_CASE("plane wave Dirichlet energy converges at second order")
{
    const double exact = 0.5 * 4.0 * std::numbers::pi * std::numbers::pi;
    double previous = 0.0;
    for (int m : {16, 32, 64}) {
        auto mesh = flat_torus_2d(m);
        Eigen::MatrixX2d v(mesh->vertex_count(), 2);
        for (int i = 0; i < mesh->vertex_count(); ++i) {
            v(i, 0) = std::cos(mesh->positions(i, 0));
            v(i, 1) = std::sin(mesh->positions(i, 0));
        }
        double err = std::abs(energy(ComplexField(mesh, v, 0.1)).dirichlet - exact);
        if (previous > 0.0) {
            CHECK(previous / err == doctest::Approx(4.0).epsilon(0.02));
        }
        previous = err;
    }
}

TEST_CASE("gradient matches central differences")
{
    std::mt19937_64 rng(17);
    for (auto mesh : {flat_torus_2d(16), flat_torus_3d(8), unit_sphere(2)}) {
        for (int trial = 0; trial < 5; ++trial) {
            ComplexField u(mesh, random_values(mesh->vertex_count(), rng, 0.8), 0.3);
            Eigen::MatrixX2d dir = random_values(mesh->vertex_count(), rng);
            const double t = 1e-5;
            double fd = (energy_value(*mesh, u.values + t * dir, u.epsilon)
                         - energy_value(*mesh, u.values - t * dir, u.epsilon))
                        / (2 * t);
            double an = (gradient(u).array() * dir.array()).sum();
            CHECK(std::abs(fd - an) <= 1e-6 * std::abs(an));
        }
    }
}

TEST_CASE("Hessian is the derivative of the gradient")
{
    std::mt19937_64 rng(19);
    auto mesh = unit_sphere(1);
    ComplexField u(mesh, random_values(mesh->vertex_count(), rng, 0.7), 0.4);
    SparseMatrix h = hessian(u);
    Eigen::MatrixX2d dir = random_values(mesh->vertex_count(), rng);
    const double t = 1e-6;
    Eigen::MatrixX2d fd = (gradient(*mesh, u.values + t * dir, u.epsilon)
                           - gradient(*mesh, u.values - t * dir, u.epsilon))
                          / (2 * t);
    Eigen::VectorXd flat(2 * mesh->vertex_count());
    for (int v = 0; v < mesh->vertex_count(); ++v) {
        flat(2 * v) = dir(v, 0);
        flat(2 * v + 1) = dir(v, 1);
    }
    Eigen::VectorXd hd = h * flat;
    double err = 0.0;
    for (int v = 0; v < mesh->vertex_count(); ++v) {
        err = std::max(err, std::abs(hd(2 * v) - fd(v, 0)) + std::abs(hd(2 * v + 1) - fd(v, 1)));
    }
    CHECK(err < 1e-5 * hd.cwiseAbs().maxCoeff());
    CHECK((SparseMatrix(h.transpose()) - h).norm() == 0.0);
}

TEST_CASE("plane wave residual is second order")
{
    for (int k : {1, 2}) {
        double r32 = gl_residual(plane_wave(flat_torus_2d(32), k, 0.05));
        double r64 = gl_residual(plane_wave(flat_torus_2d(64), k, 0.05));
        CHECK(r32 / r64 >= 3.5);
    }
}

TEST_CASE("truncation never increases energy")
{
    std::mt19937_64 rng(23);
    for (auto mesh : {unit_sphere(2), flat_torus_2d(16)}) {
        for (int trial = 0; trial < 20; ++trial) {
            ComplexField u(mesh, random_values(mesh->vertex_count(), rng, 1.5), 0.2);
            REQUIRE(u.max_modulus() > 1.0);
            auto t = truncate(u);
            CHECK(t.max_modulus() <= 1.0 + 1e-15);
            CHECK(energy(t).total <= energy(u).total);
        }
    }
}

TEST_CASE("zero energy forces a unit constant")
{
    std::mt19937_64 rng(29);
    auto mesh = flat_torus_2d(8);
    ComplexField u(mesh, random_values(mesh->vertex_count(), rng), 0.5);
    CHECK(energy(u).total > 0.0);
    Eigen::MatrixX2d rotated = Eigen::MatrixX2d::Zero(mesh->vertex_count(), 2);
    rotated.col(0).setConstant(std::cos(1.0));
    rotated.col(1).setConstant(std::sin(1.0));
    CHECK(energy(ComplexField(mesh, rotated, 0.5)).total < 1e-28);
}

TEST_CASE("stress-energy tensor algebra")
{
    std::mt19937_64 rng(31);
    for (auto mesh : {unit_sphere(2), flat_torus_2d(16), flat_torus_3d(8)}) {
        ComplexField u(mesh, random_values(mesh->vertex_count(), rng), 0.3);
        auto se = stress_energy(u, default_test_fields(*mesh));
        CHECK(se.max_trace_defect <= 1e-12 * se.density.maxCoeff());
        CHECK(se.max_asymmetry == 0.0);
        auto c = stress_energy(ComplexField::constant(mesh, {1.0, 0.0}, 0.3), default_test_fields(*mesh));
        CHECK(c.residuals.cwiseAbs().maxCoeff() < 1e-28);
        CHECK(c.tensor[0].norm() < 1e-28);
    }
}

TEST_CASE("stress-energy vanishes on Killing fields of the sphere")
{
    // Rotations preserve the discrete energy only approximately, but
    // <T, grad X> is pointwise zero for antisymmetric grad X and symmetric T.
    std::mt19937_64 rng(37);
    auto mesh = unit_sphere(3);
    ComplexField u(mesh, random_values(mesh->vertex_count(), rng), 0.3);
    auto fields = default_test_fields(*mesh);
    auto se = stress_energy(u, fields);
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i].name.rfind("rotation", 0) == 0) {
            CHECK(se.relative_residuals(static_cast<Eigen::Index>(i)) < 2e-2);
        }
    }
}

TEST_CASE("field files round trip")
{
    std::mt19937_64 rng(41);
    auto mesh = unit_sphere(2);
    ComplexField u(mesh, random_values(mesh->vertex_count(), rng), 0.125);
    auto path = (std::filesystem::temp_directory_path() / "glmm_field_roundtrip.txt").string();
    write_field(path, u);
    auto back = read_field(path, mesh);
    CHECK(back.epsilon == u.epsilon);
    CHECK(back.values == u.values);
    CHECK_THROWS_AS(read_field(path, unit_sphere(1)), ValidationError);
    std::filesystem::remove(path);
}
