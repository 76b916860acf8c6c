// Command-line front end: run, verify, mesh, vortex-law.

#include "glmm/error.hpp"
#include "glmm/pipeline.hpp"
#include "glmm/sweepfamily.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <sstream>

namespace {

enum Exit { kPass = 0, kValidation = 1, kCompute = 2, kVerification = 3 };

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw glmm::ValidationError("cli", "bad number '" + item + "' in list");
        }
    }
    return out;
}

int cmd_run(const std::string& path)
{
    auto cfg = glmm::RunConfig::load(path);
    auto result = glmm::run(cfg);
    std::cout << glmm::format_summary_table(result);
    std::cout << "artifacts: " << result.directory << "\n";
    return kPass;
}

int cmd_verify(const std::string& dir)
{
    auto rep = glmm::verify(dir);
    for (const auto& item : rep.items) {
        std::cout << (item.pass ? "PASS " : "FAIL ") << item.criterion << ": " << item.detail << "\n";
    }
    return rep.pass() ? kPass : kVerification;
}

int cmd_mesh(const std::string& model, const std::string& out)
{
    auto mesh = glmm::build_model(glmm::ModelSpec::parse(model));
    glmm::save_mesh(out, *mesh);
    std::cout << "vertices " << mesh->vertex_count() << " cells " << mesh->cell_count() << " volume "
              << mesh->total_volume() << "\n";
    return kPass;
}

int cmd_vortex_law(const std::string& list, double radius, int quadrature)
{
    auto law = glmm::fit_vortex_law(parse_list(list), radius, quadrature);
    std::printf("# glmm-table vortex-law v1\n");
    std::printf("epsilon log_inv_eps energy\n");
    for (std::size_t i = 0; i < law.epsilons.size(); ++i) {
        std::printf("%.12e %.12e %.12e\n", law.epsilons[i], std::log(radius / law.epsilons[i]), law.energies[i]);
    }
    std::printf("# slope %.12e intercept %.12e pi %.12e\n", law.slope, law.intercept, std::numbers::pi);
    return kPass;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Ginzburg-Landau min-max critical points and concentration diagnostics"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("config", config_path, "config file")->required();

    std::string dir;
    auto* ver = app.add_subcommand("verify", "re-check a run directory from its files");
    ver->add_option("dir", dir, "artifact directory")->required();

    std::string model;
    std::string out;
    auto* mesh = app.add_subcommand("mesh", "build a model mesh and write it");
    mesh->add_option("model", model, "unit_sphere:k, flat_torus_2d:m or flat_torus_3d:m")->required();
    mesh->add_option("out", out, "output path")->required();

    std::string eps_list;
    double radius = 1.0;
    int quadrature = 16;
    auto* law = app.add_subcommand("vortex-law", "planar vortex energy on a disk against log(1/eps)");
    law->add_option("epsilons", eps_list, "comma-separated epsilon list")->required();
    law->add_option("--radius", radius, "disk radius");
    law->add_option("--quadrature", quadrature, "Gauss-Legendre points per panel");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kPass : kValidation;
    }

    try {
        if (*run) {
            return cmd_run(config_path);
        }
        if (*ver) {
            return cmd_verify(dir);
        }
        if (*mesh) {
            return cmd_mesh(model, out);
        }
        return cmd_vortex_law(eps_list, radius, quadrature);
    } catch (const glmm::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const glmm::ComputeError& e) {
        std::cerr << "compute error: " << e.what() << "\n";
        return kCompute;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCompute;
    }
}
