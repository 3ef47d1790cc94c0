#include "cli.hpp"

#include "specmp/csv.hpp"
#include "specmp/errors.hpp"
#include "specmp/model_spec.hpp"
#include "specmp/parallel.hpp"
#include "specmp/simulator.hpp"
#include "specmp/stieltjes.hpp"
#include "specmp/toeplitz_lsd.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace specmp::cli {

namespace {

using nlohmann::json;

constexpr double kKsReplicateThreshold = 0.05;
constexpr double kKsMedianThreshold = 0.03;
constexpr int kSmallSampleP = 500;
constexpr int kHistogramBins = 50;

struct Options {
    std::string model;
    std::string model_file;
    double y = 0.0;
    int p = 0;
    int grid = 512;
    std::vector<double> eps_schedule{1e-6, 5e-7, 2.5e-7};
    std::uint64_t seed = 0;
    int replicates = 1;
    std::string out;
    bool center = false;
    std::string law = "normal";
    double mu = 0.0;
    SolverConfig solver;
};

std::string read_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw ValidationError("cannot read model file " + path);
    std::ostringstream text;
    text << file.rdbuf();
    return text.str();
}

LinearProcessModel load_model(const Options& o) {
    if (o.model.empty() == o.model_file.empty()) {
        throw ValidationError("give exactly one of --model and --model-file");
    }
    const std::string text = o.model.empty() ? read_file(o.model_file) : o.model;
    return parse_model_spec(std::string_view(text));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot open " + path + " for writing");
    file << text;
    if (!file) throw std::runtime_error("failed writing " + path);
}

void write_json(const std::string& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string support_line(double lo, double hi) {
    std::ostringstream line;
    line.precision(10);
    line << lo << ' ' << hi;
    return line.str();
}

json stats_json(const InversionStats& s) {
    return {{"solves", s.solves},
            {"max_iterations", s.max_iterations},
            {"continuation_solves", s.continuation_solves},
            {"max_residual", s.max_residual},
            {"max_quadrature_error", s.max_quadrature_error},
            {"clamped_points", s.clamped_points},
            {"fallback_points", s.fallback_points}};
}

LimitingDensity theoretical_density(const GammaLsd& lsd, const Options& o, double cover) {
    const AspectRatio y(o.y);
    auto grid = default_density_grid(lsd, y, o.grid, o.solver);
    // Stretch to cover the observed spectrum.
    if (1.05 * cover > grid.back()) grid = sqrt_spaced_grid(grid.front(), 1.05 * cover, o.grid);
    InversionConfig config;
    config.eps_schedule = o.eps_schedule;
    config.solver = o.solver;
    return invert_to_density(lsd, y, grid, config);
}

SimulationPlan make_plan(const Options& o, LinearProcessModel model) {
    if (o.p < 2) throw ValidationError("--p must be >= 2");
    SimulationPlan plan;
    plan.p = o.p;
    plan.y = o.y;
    plan.model = std::move(model);
    plan.law = parse_innovation_law(o.law);
    plan.mu = o.mu;
    plan.center = o.center;
    plan.seed = o.seed;
    plan.replicates = o.replicates;
    plan.validate();
    return plan;
}

json plan_json(const SimulationPlan& plan) {
    return {{"p", plan.p},         {"y", plan.y},           {"n", plan.n()},
            {"model", to_json(plan.model)},                 {"law", to_string(plan.law)},
            {"mu", plan.mu},       {"center", plan.center}, {"seed", plan.seed},
            {"replicates", plan.replicates}};
}

void require_y(const Options& o) { (void)AspectRatio(o.y); }

int cmd_gamma_density(const Options& o, std::ostream& out) {
    const auto model = load_model(o);
    if (o.grid < 2) throw ValidationError("--grid must be >= 2");
    const auto lsd = make_gamma_lsd(model);
    const std::string path = (o.out.empty() ? "gamma_density" : o.out) + ".csv";
    if (lsd.is_atomic()) {
        std::vector<double> level, weight;
        for (const auto& a : lsd.atoms()) {
            level.push_back(a.level);
            weight.push_back(a.weight);
        }
        write_csv(path, {"level", "weight"}, {level, weight});
        out << support_line(lsd.lower(), lsd.upper()) << '\n';
        for (const auto& a : lsd.atoms()) out << '(' << format_double(a.level) << ", " << format_double(a.weight) << ")\n";
        return kSuccess;
    }
    const LevelSetFinder finder(spectral_density(model));
    const double lo = lsd.lower(), hi = lsd.upper();
    const auto n = static_cast<std::size_t>(o.grid);
    std::vector<double> lambda(n), g(n);
    for (std::size_t i = 0; i < n; ++i) lambda[i] = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    parallel_for(n, [&](std::size_t i) { g[i] = finder.gamma_density(lambda[i]).value; });
    write_csv(path, {"lambda", "g_lambda"}, {lambda, g});
    out << support_line(lo, hi) << '\n';
    return kSuccess;
}

int cmd_lsd_density(const Options& o, std::ostream& out) {
    const auto model = load_model(o);
    require_y(o);
    if (o.grid < 2) throw ValidationError("--grid must be >= 2");
    const auto lsd = make_gamma_lsd(model);
    const auto density = theoretical_density(lsd, o, 0.0);
    const std::string prefix = o.out.empty() ? "lsd_density" : o.out;
    write_csv(prefix + ".csv", {"x", "p_x"}, {density.grid, density.values});
    const json sidecar = {{"y", o.y},
                          {"mass_at_zero", density.mass_at_zero},
                          {"total_mass", density.cumulative.back()},
                          {"model", to_json(model)},
                          {"eps_schedule", o.eps_schedule},
                          {"grid_points", density.grid.size()},
                          {"solver", stats_json(density.stats)}};
    write_json(prefix + ".json", sidecar);
    out << "mass_at_zero " << format_double(density.mass_at_zero) << " total_mass "
        << format_double(density.cumulative.back()) << '\n';
    return kSuccess;
}

struct SimulationOutcome {
    SimulationPlan plan;
    std::vector<ReplicateResult> replicates;
    std::optional<LimitingDensity> theory;
    std::vector<std::optional<double>> ks;
};

SimulationOutcome simulate(const Options& o) {
    require_y(o);
    SimulationOutcome result{make_plan(o, load_model(o)), {}, std::nullopt, {}};
    result.replicates = run_simulation(result.plan);
    if (!result.plan.long_memory()) {
        double top = 0.0;
        for (const auto& r : result.replicates) top = std::max(top, r.spectrum.eigenvalues.back());
        result.theory = theoretical_density(make_gamma_lsd(result.plan.model), o, top);
    }
    for (const auto& r : result.replicates) {
        if (result.theory) {
            const auto& theory = *result.theory;
            result.ks.emplace_back(ks_distance(r.spectrum, [&](double x) { return lsd_cdf(theory, x); }));
        } else {
            result.ks.emplace_back(std::nullopt);
        }
    }
    return result;
}

int cmd_simulate(const Options& o, std::ostream& out) {
    const auto sim = simulate(o);
    const std::string prefix = o.out.empty() ? "simulate" : o.out;
    for (std::size_t k = 0; k < sim.replicates.size(); ++k) {
        const auto& r = sim.replicates[k];
        const std::string base = prefix + "_r" + std::to_string(r.replicate);
        write_csv(base + ".csv", {"eigenvalue"}, {r.spectrum.eigenvalues});
        json summary = {{"ks", sim.ks[k] ? json(*sim.ks[k]) : json(nullptr)},
                        {"trace_check", trace_check(r.spectrum)},
                        {"seed", r.seed},
                        {"replicate", r.replicate},
                        {"plan", plan_json(sim.plan)}};
        if (sim.plan.long_memory()) summary["warning"] = "d > 0: long memory, no limiting distribution is computed";
        write_json(base + ".json", summary);
        out << base << " ks " << (sim.ks[k] ? format_double(*sim.ks[k]) : std::string("null")) << '\n';
    }
    return kSuccess;
}

int cmd_compare(const Options& o, std::ostream& out) {
    const auto sim = simulate(o);
    if (!sim.theory) throw ValidationError("compare needs a model with a limiting distribution (d <= 0)");
    const auto& theory = *sim.theory;
    std::vector<double> ks, l1;
    for (std::size_t k = 0; k < sim.replicates.size(); ++k) {
        ks.push_back(*sim.ks[k]);
        const auto& spectrum = sim.replicates[k].spectrum;
        const double hi = theory.grid.back();
        const bool atom = theory.mass_at_zero > 0.0;
        const auto h = histogram(spectrum, kHistogramBins, 0.0, hi, atom);
        double dev = std::abs(h.zero_atom - theory.mass_at_zero);
        for (std::size_t b = 0; b < h.densities.size(); ++b) {
            const double a = h.edges[b], c = h.edges[b + 1];
            const double expected = lsd_cdf(theory, c) - lsd_cdf(theory, a);
            dev += std::abs(h.densities[b] * (c - a) - expected);
        }
        l1.push_back(dev);
    }
    std::vector<double> sorted = ks;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    const bool pass = sorted.back() <= kKsReplicateThreshold && median <= kKsMedianThreshold;
    const json report = {{"ks", ks},
                         {"ks_median", median},
                         {"histogram_l1", l1},
                         {"histogram_bins", kHistogramBins},
                         {"thresholds", {{"ks_replicate", kKsReplicateThreshold}, {"ks_median", kKsMedianThreshold}}},
                         {"pass", pass},
                         {"small_sample", sim.plan.p < kSmallSampleP},
                         {"plan", plan_json(sim.plan)},
                         {"theory", {{"mass_at_zero", theory.mass_at_zero},
                                     {"total_mass", theory.cumulative.back()},
                                     {"solver", stats_json(theory.stats)}}}};
    write_json((o.out.empty() ? "compare" : o.out) + ".json", report);
    out << "ks_median " << format_double(median) << " pass " << (pass ? "true" : "false") << '\n';
    return kSuccess;
}

void add_model_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--model", o.model, "Model spec as inline JSON");
    cmd->add_option("--model-file", o.model_file, "Path to a model spec JSON file");
    cmd->add_option("--out", o.out, "Output path prefix");
}

void add_density_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--y", o.y, "Aspect ratio y = n/p")->required();
    cmd->add_option("--grid", o.grid, "Number of density grid points");
    cmd->add_option("--eps-schedule", o.eps_schedule, "Imaginary offsets for inversion, e.g. 1e-6,5e-7,2.5e-7")
        ->delimiter(',');
    cmd->add_option("--max-iter", o.solver.max_iter, "Solver iterations per attempt")->check(CLI::PositiveNumber);
    cmd->add_option("--solver-tol", o.solver.tol, "Relative step size accepted as converged")
        ->check(CLI::PositiveNumber);
}

void add_simulation_options(CLI::App* cmd, Options& o) {
    cmd->add_option("--p", o.p, "Matrix dimension p")->required();
    cmd->add_option("--seed", o.seed, "Base RNG seed");
    cmd->add_option("--replicates", o.replicates, "Number of independent replicates");
    cmd->add_flag("--center", o.center, "Subtract the empirical mean before forming the covariance");
    cmd->add_option("--law", o.law, "Innovation law: normal, rademacher or uniform");
    cmd->add_option("--mu", o.mu, "Mean shift added to every entry");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Limiting spectral distributions of sample covariance matrices of linear processes"};
    app.name("specmp");
    app.require_subcommand(1);

    auto* gamma = app.add_subcommand("gamma-density", "Tabulate the Toeplitz LSD density (or atoms)");
    add_model_options(gamma, o);
    gamma->add_option("--grid", o.grid, "Number of interior lambda points");

    auto* lsd = app.add_subcommand("lsd-density", "Tabulate the LSD density of p^-1 X X^T");
    add_model_options(lsd, o);
    add_density_options(lsd, o);

    auto* sim = app.add_subcommand("simulate", "Simulate sample covariance spectra");
    add_model_options(sim, o);
    add_density_options(sim, o);
    add_simulation_options(sim, o);

    auto* cmp = app.add_subcommand("compare", "Compare simulated spectra with the LSD");
    add_model_options(cmp, o);
    add_density_options(cmp, o);
    add_simulation_options(cmp, o);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kValidation;
    }

    try {
        if (*gamma) return cmd_gamma_density(o, out);
        if (*lsd) return cmd_lsd_density(o, out);
        if (*sim) return cmd_simulate(o, out);
        return cmd_compare(o, out);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        err << "invalid input: " << e.what() << '\n';
        return kValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIoFailure;
    }
}

}  // namespace specmp::cli
