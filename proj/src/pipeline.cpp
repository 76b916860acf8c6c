#include "glmm/pipeline.hpp"

#include "glmm/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace glmm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kModule = "cli";
const char* kFailedMarker = "FAILED";

void require_keys(const json& obj, const std::string& section, const std::vector<std::string>& allowed)
{
    if (!obj.is_object()) {
        throw ValidationError(kModule, "config section '" + section + "' must be an object");
    }
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ValidationError(kModule, "unknown config key '" + section + "." + item.key() + "'");
        }
    }
}

template <typename T>
void read_key(const json& obj, const char* key, T& target)
{
    if (obj.contains(key)) {
        target = obj.at(key).get<T>();
    }
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out) {
        throw ComputeError(kModule, "cannot write " + path.string());
    }
    out << text;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(kModule, "cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

/// Columnar table: '#' comment lines, one header row, whitespace-separated rows.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const
    {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw ValidationError(kModule, "table has no column '" + name + "'");
        }
        return static_cast<int>(it - header.begin());
    }

    double number(std::size_t row, const std::string& name) const
    {
        const std::string& cell = rows.at(row).at(static_cast<std::size_t>(column(name)));
        try {
            std::size_t used = 0;
            double v = std::stod(cell, &used);
            if (used != cell.size()) {
                throw std::invalid_argument("trailing characters");
            }
            return v;
        } catch (const std::exception&) {
            throw ValidationError(kModule, "column '" + name + "' holds a non-number '" + cell + "'");
        }
    }
};

Table read_table(const fs::path& path)
{
    std::istringstream in(read_text(path));
    Table t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        std::vector<std::string> cells;
        std::string cell;
        while (ls >> cell) {
            cells.push_back(cell);
        }
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) {
                throw ValidationError(kModule, path.string() + ": ragged table row");
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (t.header.empty()) {
        throw ValidationError(kModule, path.string() + ": table has no header");
    }
    return t;
}

Eigen::VectorXd read_form(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(kModule, "cannot read " + path.string());
    }
    std::string line;
    std::getline(in, line);
    if (line.rfind("# glmm-form", 0) != 0) {
        throw ValidationError(kModule, path.string() + ": not a form file");
    }
    std::string key;
    long long n = 0;
    in >> key >> n;
    if (key != "entries" || n < 0) {
        throw ValidationError(kModule, path.string() + ": missing entry count");
    }
    Eigen::VectorXd v(n);
    for (long long i = 0; i < n; ++i) {
        if (!(in >> v(i))) {
            throw ValidationError(kModule, path.string() + ": truncated form");
        }
    }
    return v;
}

std::string history_table(const MinMaxResult& r)
{
    std::ostringstream out;
    out << "# glmm-table flow-history v1\n" << "iteration max_energy\n";
    for (std::size_t i = 0; i < r.history.size(); ++i) {
        out << i << " " << format_double(r.history[i]) << "\n";
    }
    return out.str();
}

std::string result_table(const MinMaxResult& r)
{
    std::ostringstream out;
    out << "# glmm-table minmax-result v1\n";
    out << "epsilon c_estimate slice_energy refined_energy residual refine_iterations flow_iterations stop_reason "
           "max_node morse_index near_zero min_modulus nontrivial wall_seconds\n";
    char line[512];
    std::snprintf(line, sizeof line, "%.12e %.12e %.12e %.12e %.6e %d %d %s %d %d %d %.12e %d %.3f\n", r.epsilon,
                  r.c_estimate, r.slice_energy, r.refined_energy, r.residual, r.refine_iterations, r.flow_iterations,
                  r.stop_reason.c_str(), r.max_node, r.morse.index, r.morse.near_zero, r.min_modulus,
                  r.nontrivial ? 1 : 0, r.wall_seconds);
    out << line;
    return out.str();
}

std::string dtheta_table(const std::vector<DthetaRow>& rows)
{
    std::ostringstream out;
    out << "# glmm-table dtheta v1\n" << "epsilon dtheta2 dtheta2_over_sqrt_log dtheta2_over_log harmonic2\n";
    for (const auto& r : rows) {
        out << format_double(r.epsilon) << " " << format_double(r.dtheta2) << " " << format_double(r.sqrt_log_ratio)
            << " " << format_double(r.log_ratio) << " " << format_double(r.harmonic2) << "\n";
    }
    return out.str();
}

void write_failed(const fs::path& dir, const std::string& stage, const std::string& module, const std::string& what)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir / kFailedMarker);
    out << "stage " << stage << "\n" << "module " << module << "\n" << "error " << what << "\n";
}

bool close(double a, double b, double rel)
{
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

} // namespace

std::string epsilon_directory(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "eps_%02d", index);
    return buf;
}

void RunConfig::validate() const
{
    if (epsilons.empty()) {
        throw ValidationError(kModule, "epsilon list is empty");
    }
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) {
            throw ValidationError(kModule, "epsilon values must lie in (0, 1)");
        }
        if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
            throw ValidationError(kModule, "epsilon list must be strictly decreasing");
        }
    }
    if (geometry.kind == ModelKind::UnitSphere ? geometry.resolution < 0 : geometry.resolution < 8) {
        throw ValidationError(kModule, "model resolution out of range: " + geometry.to_string());
    }
    if (n_r < 1 || n_t < 3) {
        throw ValidationError(kModule, "family grid needs n_r >= 1 and n_t >= 3");
    }
    flow.validate();
    if (!(refine.tolerance > 0.0) || refine.max_iterations < 1) {
        throw ValidationError(kModule, "refinement needs a positive tolerance and iteration limit");
    }
    const auto& e = diagnostics.ellipticity_options;
    if (!(e.eta0 > 0.0) || !(e.delta0 > 0.0) || !(e.modulus2_threshold > 0.0 && e.modulus2_threshold < 1.0)) {
        throw ValidationError(kModule, "need eta0 > 0, delta0 > 0 and a modulus threshold in (0, 1)");
    }
    for (double t : diagnostics.sublevel_t) {
        if (!(t >= 0.0 && t < 1.0)) {
            throw ValidationError(kModule, "sublevel t values must lie in [0, 1)");
        }
    }
    for (double p : diagnostics.lp_exponents) {
        if (!(p >= 1.0)) {
            throw ValidationError(kModule, "L^p exponents must be at least 1");
        }
    }
    if (diagnostics.profile_samples < 1) {
        throw ValidationError(kModule, "profile_samples must be positive");
    }
    if (workers < 1) {
        throw ValidationError(kModule, "workers must be positive");
    }
    if (output_directory.empty()) {
        throw ValidationError(kModule, "output directory is empty");
    }
}

std::string RunConfig::to_text() const
{
    json doc;
    doc["geometry"] = {{"model", geometry.to_string()}};
    doc["sweep"] = {{"epsilons", epsilons}, {"n_r", n_r}, {"n_t", n_t}, {"seed", seed}, {"workers", workers}};
    doc["flow"] = {{"line_search", flow.line_search},
                   {"step", flow.step},
                   {"max_step", flow.max_step},
                   {"max_iterations", flow.max_iterations},
                   {"truncate", flow.truncate},
                   {"window", flow.window},
                   {"relative_tolerance", flow.relative_tolerance},
                   {"min_step", flow.min_step},
                   {"stationarity_tolerance", flow.stationarity_tolerance}};
    doc["refine"] = {{"tolerance", refine.tolerance}, {"max_iterations", refine.max_iterations}};
    const auto& d = diagnostics;
    doc["diagnostics"] = {{"hodge", d.hodge},
                          {"density", d.density},
                          {"ellipticity", d.ellipticity},
                          {"bochner", d.bochner},
                          {"stress_energy", d.stress_energy},
                          {"eta0", d.ellipticity_options.eta0},
                          {"delta0", d.ellipticity_options.delta0},
                          {"modulus2_threshold", d.ellipticity_options.modulus2_threshold},
                          {"sublevel_t", d.sublevel_t},
                          {"lp_exponents", d.lp_exponents},
                          {"profile_samples", d.profile_samples}};
    doc["output"] = {{"directory", output_directory}};
    return doc.dump(2) + "\n";
}

RunConfig RunConfig::from_text(const std::string& text)
{
    RunConfig cfg;
    try {
        json doc = json::parse(text);
        require_keys(doc, "", {"geometry", "sweep", "flow", "refine", "diagnostics", "output"});
        if (doc.contains("geometry")) {
            const json& g = doc["geometry"];
            require_keys(g, "geometry", {"model"});
            if (g.contains("model")) {
                cfg.geometry = ModelSpec::parse(g["model"].get<std::string>());
            }
        }
        if (doc.contains("sweep")) {
            const json& s = doc["sweep"];
            require_keys(s, "sweep", {"epsilons", "n_r", "n_t", "seed", "workers"});
            read_key(s, "epsilons", cfg.epsilons);
            read_key(s, "n_r", cfg.n_r);
            read_key(s, "n_t", cfg.n_t);
            read_key(s, "seed", cfg.seed);
            read_key(s, "workers", cfg.workers);
        }
        if (doc.contains("flow")) {
            const json& f = doc["flow"];
            require_keys(f, "flow",
                         {"line_search", "step", "max_step", "max_iterations", "truncate", "window",
                          "relative_tolerance", "min_step", "stationarity_tolerance"});
            read_key(f, "line_search", cfg.flow.line_search);
            read_key(f, "step", cfg.flow.step);
            read_key(f, "max_step", cfg.flow.max_step);
            read_key(f, "max_iterations", cfg.flow.max_iterations);
            read_key(f, "truncate", cfg.flow.truncate);
            read_key(f, "window", cfg.flow.window);
            read_key(f, "relative_tolerance", cfg.flow.relative_tolerance);
            read_key(f, "min_step", cfg.flow.min_step);
            read_key(f, "stationarity_tolerance", cfg.flow.stationarity_tolerance);
        }
        if (doc.contains("refine")) {
            const json& r = doc["refine"];
            require_keys(r, "refine", {"tolerance", "max_iterations"});
            read_key(r, "tolerance", cfg.refine.tolerance);
            read_key(r, "max_iterations", cfg.refine.max_iterations);
        }
        if (doc.contains("diagnostics")) {
            const json& d = doc["diagnostics"];
            require_keys(d, "diagnostics",
                         {"hodge", "density", "ellipticity", "bochner", "stress_energy", "eta0", "delta0",
                          "modulus2_threshold", "sublevel_t", "lp_exponents", "profile_samples"});
            auto& o = cfg.diagnostics;
            read_key(d, "hodge", o.hodge);
            read_key(d, "density", o.density);
            read_key(d, "ellipticity", o.ellipticity);
            read_key(d, "bochner", o.bochner);
            read_key(d, "stress_energy", o.stress_energy);
            read_key(d, "eta0", o.ellipticity_options.eta0);
            read_key(d, "delta0", o.ellipticity_options.delta0);
            read_key(d, "modulus2_threshold", o.ellipticity_options.modulus2_threshold);
            read_key(d, "sublevel_t", o.sublevel_t);
            read_key(d, "lp_exponents", o.lp_exponents);
            read_key(d, "profile_samples", o.profile_samples);
        }
        if (doc.contains("output")) {
            const json& o = doc["output"];
            require_keys(o, "output", {"directory"});
            read_key(o, "directory", cfg.output_directory);
        }
    } catch (const json::exception& e) {
        throw ValidationError(kModule, std::string("malformed config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) { return from_text(read_text(path)); }

std::string format_summary_table(const RunResult& result)
{
    std::ostringstream out;
    out << "# glmm-table summary v1\n";
    out << "# fit: refined_energy = C1 * |log eps| + C2, C1 = " << format_double(result.table.fit_c1)
        << " C2 = " << format_double(result.table.fit_c2) << "\n";
    out << "# sweep map: seed " << result.sweep.seed << " jmin " << format_double(result.sweep.jmin) << " C1_bound "
        << format_double(result.sweep.c1()) << " C2_bound " << format_double(result.sweep.c2()) << "\n";
    out << "epsilon log_eps c_estimate refined_energy normalized_energy residual min_modulus morse_index nontrivial "
           "dtheta2_over_sqrt_log harmonic_fraction\n";
    for (std::size_t i = 0; i < result.runs.size(); ++i) {
        const auto& r = result.runs[i].minmax;
        const double lg = std::abs(std::log(r.epsilon));
        double ratio = std::nan("");
        double harmonic = std::nan("");
        if (result.runs[i].has_report && result.runs[i].report.has_hodge) {
            const auto& h = result.runs[i].report.hodge;
            ratio = h.exact_norm * h.exact_norm / std::sqrt(lg);
            harmonic = h.gamma_norm > 0.0 ? h.harmonic_norm / h.gamma_norm : 0.0;
        }
        char line[512];
        std::snprintf(line, sizeof line, "%.12e %.12e %.12e %.12e %.12e %.6e %.12e %d %d %.12e %.12e\n", r.epsilon, lg,
                      r.c_estimate, r.refined_energy, r.refined_energy / lg, r.residual, r.min_modulus, r.morse.index,
                      r.nontrivial ? 1 : 0, ratio, harmonic);
        out << line;
    }
    return out.str();
}

RunResult run(const RunConfig& input)
{
    RunConfig config = input;
    if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
        config.output_directory = env;
    }
    config.validate();

    const fs::path dir(config.output_directory);
    std::string stage = "setup";
    try {
        fs::create_directories(dir);
        fs::remove(dir / kFailedMarker);
        write_text(dir / "config.json", config.to_text());

        RunResult result;
        result.directory = dir.string();
        stage = "mesh";
        result.mesh = build_model(config.geometry);
        save_mesh((dir / "mesh.txt").string(), *result.mesh);
        stage = "validate";
        validate_epsilons(*result.mesh, config.epsilons);
        stage = "sweep_map";
        result.sweep = build_sweep_map(*result.mesh, config.seed);
        DECOperators dec = assemble_dec(*result.mesh);

        const std::size_t count = config.epsilons.size();
        result.runs.resize(count);
        std::vector<std::exception_ptr> errors(count);
        std::vector<std::string> stages(count);
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t i = next++; i < count; i = next++) {
                const double eps = config.epsilons[i];
                const fs::path sub = dir / epsilon_directory(static_cast<int>(i));
                char tag[64];
                std::snprintf(tag, sizeof tag, "eps=%.6g", eps);
                try {
                    stages[i] = std::string("minmax ") + tag;
                    fs::create_directories(sub);
                    EpsilonRun& er = result.runs[i];
                    er.minmax = run_minmax(result.mesh, result.sweep, eps, config.n_r, config.n_t, config.flow,
                                           config.refine);
                    stages[i] = std::string("persist ") + tag;
                    save_family((sub / "family").string(), er.minmax.family);
                    write_field((sub / "critical.field").string(), er.minmax.critical);
                    write_text(sub / "history.tbl", history_table(er.minmax));
                    write_text(sub / "result.tbl", result_table(er.minmax));
                    stages[i] = std::string("concentration ") + tag;
                    er.report = concentration_report(er.minmax.critical, dec, config.diagnostics);
                    er.has_report = true;
                    save_concentration_report((sub / "concentration").string(), "report", er.report);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const int threads = std::min<int>(config.workers, static_cast<int>(count));
        std::vector<std::thread> pool;
        for (int t = 1; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
        for (auto& t : pool) {
            t.join();
        }
        for (std::size_t i = 0; i < count; ++i) {
            if (errors[i]) {
                stage = stages[i];
                std::rethrow_exception(errors[i]);
            }
        }

        stage = "summary";
        std::vector<double> x;
        std::vector<double> y;
        std::vector<HodgeParts> parts;
        for (const auto& er : result.runs) {
            result.table.results.push_back(er.minmax);
            x.push_back(std::abs(std::log(er.minmax.epsilon)));
            y.push_back(er.minmax.refined_energy);
            if (er.report.has_hodge) {
                parts.push_back(er.report.hodge);
            }
        }
        fit_affine(x, y, result.table.fit_c1, result.table.fit_c2);
        write_text(dir / "sweep.tbl", format_sweep_table(result.table));
        if (parts.size() == count) {
            result.dtheta = dtheta_subcritical(config.epsilons, parts);
            write_text(dir / "dtheta.tbl", dtheta_table(result.dtheta));
        }
        write_text(dir / "summary.tbl", format_summary_table(result));
        return result;
    } catch (const Error& e) {
        write_failed(dir, stage, e.module(), e.what());
        throw;
    } catch (const std::exception& e) {
        write_failed(dir, stage, kModule, e.what());
        throw ComputeError(kModule, "stage " + stage + ": " + e.what());
    }
}

bool VerifyReport::pass() const
{
    if (failed_marker || items.empty()) {
        return false;
    }
    return std::all_of(items.begin(), items.end(), [](const VerifyItem& i) { return i.pass; });
}

VerifyReport verify(const std::string& directory)
{
    VerifyReport rep;
    const fs::path dir(directory);
    auto add = [&](const std::string& criterion, bool pass, const std::string& detail) {
        rep.items.push_back({criterion, pass, detail});
    };
    if (fs::exists(dir / kFailedMarker)) {
        rep.failed_marker = true;
        std::ifstream in(dir / kFailedMarker);
        std::string key;
        in >> key;
        std::getline(in, rep.failed_stage);
        if (!rep.failed_stage.empty() && rep.failed_stage[0] == ' ') {
            rep.failed_stage.erase(0, 1);
        }
        add("completed", false, "run failed at stage " + rep.failed_stage);
        return rep;
    }

    RunConfig config;
    MeshPtr mesh;
    try {
        config = RunConfig::load((dir / "config.json").string());
        mesh = load_mesh((dir / "mesh.txt").string());
        add("config", true, "config and mesh readable");
    } catch (const std::exception& e) {
        add("config", false, e.what());
        return rep;
    }
    DECOperators dec = assemble_dec(*mesh);
    const double tol = config.refine.tolerance;

    Table summary;
    bool have_summary = false;
    try {
        summary = read_table(dir / "summary.tbl");
        have_summary = summary.rows.size() == config.epsilons.size();
        add("summary", have_summary, have_summary ? "one row per epsilon" : "row count differs from the epsilon list");
    } catch (const std::exception& e) {
        add("summary", false, e.what());
    }

    for (std::size_t i = 0; i < config.epsilons.size(); ++i) {
        const fs::path sub = dir / epsilon_directory(static_cast<int>(i));
        char tag[64];
        std::snprintf(tag, sizeof tag, "[eps=%.6g]", config.epsilons[i]);
        const std::string t(tag);
        try {
            Table result = read_table(sub / "result.tbl");
            if (result.rows.size() != 1) {
                throw ValidationError(kModule, "result table must have one row");
            }
            ComplexField u = read_field((sub / "critical.field").string(), mesh);

            const double rec_res = result.number(0, "residual");
            const double res = gl_residual(u);
            bool ok = res <= tol && close(rec_res, res, 1e-5);
            add("residual" + t, ok, "recorded " + format_double(rec_res) + " recomputed " + format_double(res));

            const double rec_e = result.number(0, "refined_energy");
            const double e = energy_value(*mesh, u.values, u.epsilon);
            add("energy" + t, close(rec_e, e, 1e-10),
                "recorded " + format_double(rec_e) + " recomputed " + format_double(e));

            Table hist = read_table(sub / "history.tbl");
            bool mono = !hist.rows.empty();
            for (std::size_t k = 1; k < hist.rows.size(); ++k) {
                mono = mono && hist.number(k, "max_energy") <= hist.number(k - 1, "max_energy");
            }
            mono = mono && close(hist.number(hist.rows.size() - 1, "max_energy"), result.number(0, "c_estimate"), 1e-11);
            add("monotonicity" + t, mono, "flow history non-increasing and ending at c_estimate");

            try {
                DiskFamily fam = load_family((sub / "family").string(), mesh);
                fam.validate();
                add("pinning" + t, true, "boundary nodes equal their constants");
            } catch (const std::exception& ex) {
                add("pinning" + t, false, ex.what());
            }

            PreJacobian pj = prejacobian(u, dec);
            add("divergence" + t, pj.divergence_norm <= 10.0 * tol, "|d* ju| = " + format_double(pj.divergence_norm));

            const fs::path conc = sub / "concentration";
            if (config.diagnostics.hodge) {
                Eigen::VectorXd gamma = read_form(conc / "report_gamma.form");
                Eigen::VectorXd theta = read_form(conc / "report_theta.form");
                Eigen::VectorXd xi = read_form(conc / "report_xi.form");
                Eigen::VectorXd h = read_form(conc / "report_harmonic.form");
                if (gamma.size() != mesh->edge_count() || theta.size() != mesh->vertex_count()
                    || xi.size() != mesh->face_count() || h.size() != mesh->edge_count()) {
                    throw ValidationError(kModule, "form sizes do not match the mesh");
                }
                Eigen::VectorXd expect(mesh->edge_count());
                for (int k = 0; k < mesh->edge_count(); ++k) {
                    double m2 = 0.5 * (u.values.row(mesh->edges(k, 0)).squaredNorm()
                                       + u.values.row(mesh->edges(k, 1)).squaredNorm());
                    expect(k) = cutoff(m2) * pj.ju(k);
                }
                const double gnorm = std::sqrt(dec.inner1(gamma, gamma));
                Eigen::VectorXd diff = gamma - expect;
                bool gamma_ok = std::sqrt(dec.inner1(diff, diff)) <= 1e-12 * std::max(gnorm, 1e-300);
                Eigen::VectorXd rest = gamma - dec.d0 * theta - dec.codifferential2(xi) - h;
                const double rest_norm = std::sqrt(dec.inner1(rest, rest));
                Eigen::VectorXd dsh = dec.codifferential1(h);
                Eigen::VectorXd dh = dec.d1 * h;
                const double defect = std::sqrt(dec.inner0(dsh, dsh)) + std::sqrt(dec.inner2(dh, dh));
                const double hnorm = std::sqrt(dec.inner1(h, h));
                bool hodge_ok = gamma_ok && rest_norm <= 1e-10 * std::max(gnorm, 1e-300)
                                && defect <= 1e-8 * std::max(gnorm, 1e-300);
                if (mesh->betti1_hint == 0) {
                    hodge_ok = hodge_ok && hnorm <= 1e-8 * std::max(gnorm, 1e-300);
                }
                add("hodge" + t, hodge_ok,
                    "|gamma - parts| = " + format_double(rest_norm) + " harmonic defect " + format_double(defect)
                        + " |h| = " + format_double(hnorm) + (gamma_ok ? "" : " gamma does not match the field"));
            }

            if (have_summary) {
                bool match = close(summary.number(i, "epsilon"), result.number(0, "epsilon"), 1e-11)
                             && close(summary.number(i, "refined_energy"), rec_e, 1e-11)
                             && close(summary.number(i, "c_estimate"), result.number(0, "c_estimate"), 1e-11)
                             && close(summary.number(i, "residual"), rec_res, 1e-5);
                add("summary" + t, match, "summary row agrees with the result table");
            }
        } catch (const std::exception& e) {
            add("artifacts" + t, false, e.what());
        }
    }
    return rep;
}

} // namespace glmm
