#include <doctest.h>

#include "glmm/error.hpp"
#include "glmm/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace glmm;
namespace fs = std::filesystem;

namespace {

RunConfig smoke_config(const std::string& name)
{
    RunConfig cfg;
    cfg.geometry = ModelSpec::parse("flat_torus_2d:32");
    cfg.epsilons = {0.2};
    cfg.n_r = 4;
    cfg.n_t = 16;
    cfg.diagnostics.hodge = false;
    cfg.diagnostics.density = false;
    cfg.diagnostics.ellipticity = false;
    cfg.output_directory = (fs::temp_directory_path() / name).string();
    fs::remove_all(cfg.output_directory);
    return cfg;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config text round trip is lossless")
{
    RunConfig cfg;
    cfg.geometry = ModelSpec::parse("unit_sphere:4");
    cfg.epsilons = {0.2, 0.1, 0.05};
    cfg.n_r = 6;
    cfg.n_t = 24;
    cfg.seed = 18446744073709551557ULL;
    cfg.flow.relative_tolerance = 1.0 / 3.0 * 1e-8;
    cfg.diagnostics.ellipticity_options.eta0 = 0.1 / 3.0;
    cfg.diagnostics.sublevel_t = {0.1, 0.5};
    auto back = RunConfig::from_text(cfg.to_text());
    CHECK(back.to_text() == cfg.to_text());
    CHECK(back.seed == cfg.seed);
    CHECK(back.epsilons == cfg.epsilons);
    CHECK(back.flow.relative_tolerance == cfg.flow.relative_tolerance);
    CHECK(back.diagnostics.ellipticity_options.eta0 == cfg.diagnostics.ellipticity_options.eta0);
    CHECK(back.geometry.to_string() == "unit_sphere:4");
}

TEST_CASE("malformed configs are rejected before compute")
{
    CHECK_THROWS_AS(RunConfig::from_text(R"({"sweep": {"epsilons": [-0.1]}})"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({"sweep": {"epsilons": [0.1, 0.2]}})"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({"sweep": {"epsilon": [0.1]}})"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({"geometry": {"model": "flat_torus_2d:4"}})"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_text("{not json"), ValidationError);
    CHECK_THROWS_AS(RunConfig::from_text(R"({"flow": {"step": "big"}})"), ValidationError);
    CHECK_NOTHROW(RunConfig::from_text("{}"));
}

TEST_CASE("smoke run verifies and reruns byte for byte")
{
    auto cfg = smoke_config("glmm_smoke_a");
    auto res = run(cfg);
    CHECK(res.runs.size() == 1);
    auto rep = verify(cfg.output_directory);
    CHECK(rep.pass());
    auto first = slurp(fs::path(cfg.output_directory) / "summary.tbl");
    CHECK(first.rfind("# glmm-table summary v1\n", 0) == 0);

    auto again = smoke_config("glmm_smoke_b");
    run(again);
    CHECK(slurp(fs::path(again.output_directory) / "summary.tbl") == first);
    fs::remove_all(again.output_directory);

    SUBCASE("tampered residual is caught")
    {
        const fs::path table = fs::path(cfg.output_directory) / epsilon_directory(0) / "result.tbl";
        std::string text = slurp(table);
        auto header_end = text.find('\n', text.find("epsilon "));
        std::istringstream row(text.substr(header_end + 1));
        std::vector<std::string> cells;
        std::string cell;
        while (row >> cell) {
            cells.push_back(cell);
        }
        cells[4] = "1.000000e-03";
        std::string rebuilt = text.substr(0, header_end + 1);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            rebuilt += (i ? " " : "") + cells[i];
        }
        std::ofstream(table) << rebuilt << "\n";
        auto bad = verify(cfg.output_directory);
        CHECK_FALSE(bad.pass());
        bool named = false;
        for (const auto& item : bad.items) {
            named = named || (!item.pass && item.criterion.rfind("residual", 0) == 0);
        }
        CHECK(named);
    }
    SUBCASE("tampered family boundary is caught")
    {
        const fs::path node = fs::path(cfg.output_directory) / epsilon_directory(0) / "family" / "node_00064.field";
        REQUIRE(fs::exists(node));
        std::string text = slurp(node);
        auto pos = text.find("vertices");
        pos = text.find('\n', pos) + 1;
        std::ofstream(node) << text.substr(0, pos) << "0.5 0.5" << text.substr(text.find('\n', pos));
        auto bad = verify(cfg.output_directory);
        bool named = false;
        for (const auto& item : bad.items) {
            named = named || (!item.pass && item.criterion.rfind("pinning", 0) == 0);
        }
        CHECK(named);
    }
    fs::remove_all(cfg.output_directory);
}

TEST_CASE("failed runs leave a marker naming the stage")
{
    auto cfg = smoke_config("glmm_failed");
    cfg.epsilons = {0.01}; // below the mesh floor for m = 32
    CHECK_THROWS_AS(run(cfg), ValidationError);
    REQUIRE(fs::exists(fs::path(cfg.output_directory) / "FAILED"));
    auto rep = verify(cfg.output_directory);
    CHECK(rep.failed_marker);
    CHECK(rep.failed_stage == "validate");
    CHECK_FALSE(rep.pass());
    fs::remove_all(cfg.output_directory);
}

TEST_CASE("verify reports missing files")
{
    auto dir = fs::temp_directory_path() / "glmm_empty_dir";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto rep = verify(dir.string());
    CHECK_FALSE(rep.pass());
    fs::remove_all(dir);
}

TEST_CASE("output directory override from the environment")
{
    auto cfg = smoke_config("glmm_env_unused");
    auto target = (fs::temp_directory_path() / "glmm_env_target").string();
    fs::remove_all(target);
    setenv(kOutputDirEnv, target.c_str(), 1);
    auto res = run(cfg);
    unsetenv(kOutputDirEnv);
    CHECK(res.directory == target);
    CHECK(fs::exists(fs::path(target) / "summary.tbl"));
    CHECK_FALSE(fs::exists(cfg.output_directory));
    fs::remove_all(target);
}
