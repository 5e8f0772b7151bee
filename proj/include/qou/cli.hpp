#pragma once

// Command-line front end.  Exit codes: 0 success, 1 computation failure,
// 2 argument error.  Output goes to --out (default standard output);
// diagnostics go to the error stream.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qou/density.hpp"
#include "qou/experiments.hpp"
#include "qou/jumps.hpp"
#include "qou/parallel.hpp"
#include "qou/report.hpp"
#include "qou/sampler.hpp"

namespace qou::cli {

namespace detail {

/// Thrown for argument problems found after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    double q = 0.0;
    std::vector<double> x;
    double t = 1.0;
    double y = 0.0;
    std::vector<double> epsilon;
    int n = 8;
    std::int64_t horizon = 1;
    std::int64_t a = 0;
    std::optional<std::int64_t> b;
    std::int64_t replicates = 100000;
    std::uint64_t seed = 0;
    double scale_lambda = 2.0;
    int threads = 1;
    int nx = TableConfig{}.nx;
    int nu = TableConfig{}.nu;
    double step_cap = 2e10;
    std::vector<double> delta{0.1, 0.5, 1.0, 4.0};
    std::vector<double> rho{0.1, 0.01, 0.001};
    std::vector<double> times{1.0, 2.0, 4.0, 8.0};
    int grid = 0;
    std::optional<double> r_tolerance;
    std::optional<double> ratio_tolerance;
    bool no_refinement_check = false;
    bool no_table_check = false;
    std::string path;
    std::string out;
    std::string format = "json";
    bool timing = false;
    std::string experiment;
};

inline void add_q(CLI::App* app, Options& o) {
    app->add_option("--q", o.q, "Deformation parameter q in the open interval (-1, 1)")->required();
}

inline void add_output(CLI::App* app, Options& o, bool csv) {
    app->add_option("--out", o.out, "Output file (default: standard output)");
    auto* f = app->add_option("--format", o.format, "Output format")->capture_default_str();
    f->check(csv ? CLI::IsMember({"json", "csv"}) : CLI::IsMember({"json"}));
}

inline void add_table(CLI::App* app, Options& o) {
    app->add_option("--nx", o.nx, "Transition table source rows")->capture_default_str();
    app->add_option("--nu", o.nu, "Transition table probability levels")->capture_default_str();
    app->add_option("--threads", o.threads, "Worker threads (default: QOU_THREADS or hardware)");
}

inline TableConfig table_config(const Options& o) {
    TableConfig t;
    t.nx = o.nx;
    t.nu = o.nu;
    return t;
}

inline std::string number(double v) { return Json(v).dump(); }

inline void emit(const Options& o, const std::string& text, std::ostream& out) {
    if (o.out.empty()) {
        out << text;
        return;
    }
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw Error("write", "cannot open " + o.out);
    f << text;
    if (!f) throw Error("write", "failed writing " + o.out);
}

inline std::string emit_json(const Json& j) { return j.dump(2) + "\n"; }

inline std::string run_alpha(const Options& o) {
    const QParams qp(o.q);
    Json j;
    j["q"] = o.q;
    j["alpha_q"] = alpha_q(qp);
    return emit_json(j);
}

inline std::string run_density(const Options& o) {
    const QParams qp(o.q);
    const MarginalDensity p(qp);
    std::vector<double> v;
    for (double x : o.x) v.push_back(p(x));
    if (o.format == "csv") {
        std::string s = "x,density\n";
        for (std::size_t i = 0; i < v.size(); ++i) s += number(o.x[i]) + "," + number(v[i]) + "\n";
        return s;
    }
    Json j;
    j["q"] = o.q;
    if (o.x.size() == 1) {
        j["x"] = o.x[0];
        j["density"] = v[0];
    } else {
        j["x"] = o.x;
        j["density"] = v;
    }
    return emit_json(j);
}

inline std::string run_transition(const Options& o) {
    const QParams qp(o.q);
    Json j;
    j["q"] = o.q;
    j["t"] = o.t;
    j["x"] = o.x.at(0);
    j["y"] = o.y;
    j["density"] = transition_pdf(qp, {o.t, o.x.at(0), o.y});
    return emit_json(j);
}

inline std::string run_sample_path(const Options& o) {
    const QParams qp(o.q);
    const auto table = TransitionTable::build(qp, o.n, table_config(o), o.threads);
    const auto path = simulate_path(table, o.horizon, RngSeed{o.seed, 0});
    if (o.format == "csv") {
        std::ostringstream os;
        write_path_csv(os, path);
        return os.str();
    }
    Json j;
    j["config"] = {{"q", o.q}, {"n", o.n}, {"horizon", o.horizon}, {"seed", o.seed}, {"table", qou::detail::table_json(table.config())}};
    j["values"] = path.values;
    return emit_json(j);
}

inline std::string run_count_jumps(const Options& o) {
    const QParams qp(o.q);
    if (o.epsilon.size() != 1) throw UsageError("count-jumps takes exactly one --epsilon");
    PathGrid path;
    Json source;
    if (!o.path.empty()) {
        std::ifstream f(o.path);
        if (!f) throw UsageError("cannot open path file " + o.path);
        path = read_path_csv(f);
        source = {{"path", o.path}};
    } else {
        const auto table = TransitionTable::build(qp, o.n, table_config(o), o.threads);
        path = simulate_path(table, o.horizon, RngSeed{o.seed, 0});
        source = {{"n", o.n}, {"horizon", o.horizon}, {"seed", o.seed}, {"table", qou::detail::table_json(table.config())}};
    }
    for (double v : path.values)
        if (!(std::abs(v) <= qp.L())) throw UsageError("path value " + number(v) + " lies outside [-L, L]");
    const JumpSpec spec{o.epsilon[0], o.a, o.b.value_or(path.horizon)};
    const auto count = count_events(qp, path, spec);
    if (o.format == "csv") {
        std::string s = "interval,count\n";
        for (std::size_t i = 0; i < count.per_unit_interval.size(); ++i)
            s += std::to_string(spec.a + static_cast<std::int64_t>(i) + 1) + "," +
                 std::to_string(count.per_unit_interval[i]) + "\n";
        return s;
    }
    Json j = to_json(count);
    j["config"] = {{"q", o.q}, {"source", source}};
    return emit_json(j);
}

inline McConfig mc_config(const Options& o) {
    McConfig mc;
    mc.n = o.n;
    mc.replicates = o.replicates;
    mc.seed = o.seed;
    mc.threads = o.threads;
    mc.table = table_config(o);
    mc.step_cap = o.step_cap;
    return mc;
}

inline double single_epsilon(const Options& o, const char* what) {
    if (o.epsilon.size() != 1) throw UsageError(std::string(what) + " takes exactly one --epsilon");
    return o.epsilon[0];
}

inline ExperimentReport run_experiment_report(const Options& o) {
    const QParams qp(o.q);
    const std::string& e = o.experiment;
    if (e == "jump-rate") {
        JumpRateConfig cfg;
        cfg.r_tolerance = o.r_tolerance;
        return quadrature_jump_rate(qp, o.epsilon.empty() ? std::vector<double>{0.2, 0.1, 0.05, 0.02} : o.epsilon, cfg);
    }
    if (e == "margin-mass") {
        MarginMassConfig cfg;
        cfg.ratio_tolerance = o.ratio_tolerance;
        return margin_mass_asymptotics(qp, o.epsilon.empty() ? std::vector<double>{0.2, 0.1, 0.05, 0.02} : o.epsilon,
                                       cfg);
    }
    if (e == "jump-probability") {
        return mc_jump_probability(qp, single_epsilon(o, "jump-probability"), mc_config(o),
                                   JumpProbabilityOptions{!o.no_refinement_check, !o.no_table_check});
    }
    if (e == "poisson") {
        PoissonConfig cfg;
        cfg.mc = mc_config(o);
        cfg.scale_lambda = o.scale_lambda;
        return mc_poisson_limit(qp, single_epsilon(o, "poisson"), cfg);
    }
    if (e == "double-jump") {
        DoubleJumpConfig cfg;
        cfg.mc = mc_config(o);
        return mc_double_jump(qp, o.epsilon.empty() ? std::vector<double>{0.4, 0.3} : o.epsilon, cfg);
    }
    if (e == "kernel-bounds") {
        KernelBoundsConfig cfg;
        if (o.grid > 0) cfg.grid_size = o.grid;
        return verify_kernel_bounds(qp, o.delta, cfg);
    }
    if (e == "expansions") {
        ExpansionConfig cfg;
        if (o.grid > 0) cfg.grid_size = o.grid;
        return verify_small_rho_expansions(qp, o.rho, cfg);
    }
    MixingConfig cfg;
    if (o.grid > 0) cfg.grid_size = o.grid;
    return mixing_decay(qp, o.times, cfg);
}

inline std::string run_experiment(const Options& o) {
    auto rep = run_experiment_report(o);
    if (!o.timing) rep.wall_time_seconds.reset();
    if (o.format == "csv") {
        if (rep.ladder.empty()) throw UsageError("experiment " + o.experiment + " has no CSV ladder output");
        std::ostringstream os;
        rep.write_ladder_csv(os);
        return os.str();
    }
    return emit_json(rep.to_json());
}

}  // namespace detail

/// Parses args (args[0] is the program name) and runs one subcommand.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    detail::Options o;
    o.threads = default_threads();
    CLI::App app{"q-Ornstein-Uhlenbeck process: densities, sampling, big jumps and experiments", "qou"};
    app.require_subcommand(1);
    app.allow_extras(false);

    auto* alpha = app.add_subcommand("alpha", "Poisson limit parameter alpha_q");
    detail::add_q(alpha, o);
    detail::add_output(alpha, o, false);

    auto* density = app.add_subcommand("density", "Stationary density p(x)");
    detail::add_q(density, o);
    density->add_option("--x", o.x, "Evaluation point(s)")->required();
    detail::add_output(density, o, true);

    auto* transition = app.add_subcommand("transition", "Transition density p_{0,t}(x, y)");
    detail::add_q(transition, o);
    transition->add_option("--t", o.t, "Time t > 0")->required();
    transition->add_option("--x", o.x, "Source point")->required()->expected(1);
    transition->add_option("--y", o.y, "Target point")->required();
    detail::add_output(transition, o, false);

    auto* sample = app.add_subcommand("sample-path", "Simulate the chain on the grid i/2^n");
    detail::add_q(sample, o);
    sample->add_option("--n", o.n, "Dyadic resolution")->capture_default_str();
    sample->add_option("--horizon", o.horizon, "Number of unit time intervals")->capture_default_str();
    sample->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    detail::add_table(sample, o);
    detail::add_output(sample, o, true);

    auto* count = app.add_subcommand("count-jumps", "Count lower-to-upper margin jumps");
    detail::add_q(count, o);
    count->add_option("--epsilon", o.epsilon, "Margin width")->required()->expected(1);
    count->add_option("--path", o.path, "Path CSV written by sample-path (otherwise a path is simulated)");
    count->add_option("--a", o.a, "Window start a of (a, b]")->capture_default_str();
    count->add_option("--b", o.b, "Window end b of (a, b] (default: horizon)");
    count->add_option("--n", o.n, "Dyadic resolution of a simulated path")->capture_default_str();
    count->add_option("--horizon", o.horizon, "Horizon of a simulated path")->capture_default_str();
    count->add_option("--seed", o.seed, "Master seed of a simulated path")->capture_default_str();
    detail::add_table(count, o);
    detail::add_output(count, o, true);

    auto* exp = app.add_subcommand("experiment", "Run a numerical experiment");
    exp->add_option("name", o.experiment, "Experiment")
        ->required()
        ->check(CLI::IsMember({"jump-rate", "margin-mass", "jump-probability", "poisson", "double-jump",
                               "kernel-bounds", "expansions", "mixing"}));
    detail::add_q(exp, o);
    exp->add_option("--epsilon", o.epsilon, "Margin width(s); ladders take several values");
    exp->add_option("--n", o.n, "Dyadic resolution")->capture_default_str();
    exp->add_option("--replicates", o.replicates, "Monte Carlo replicates")->capture_default_str();
    exp->add_option("--seed", o.seed, "Master seed")->capture_default_str();
    exp->add_option("--scale-lambda", o.scale_lambda, "Target mean of W (poisson)")->capture_default_str();
    exp->add_option("--step-cap", o.step_cap, "Refuse runs above this many transitions")->capture_default_str();
    exp->add_option("--delta", o.delta, "Time steps (kernel-bounds)")->capture_default_str();
    exp->add_option("--rho", o.rho, "rho ladder (expansions)")->capture_default_str();
    exp->add_option("--t", o.times, "Times (mixing)")->capture_default_str();
    exp->add_option("--grid", o.grid, "Grid points per axis (kernel-bounds, expansions, mixing)");
    exp->add_option("--r-tolerance", o.r_tolerance, "Bound on |R(eps_min) - 1| (jump-rate)");
    exp->add_option("--ratio-tolerance", o.ratio_tolerance, "Bound on |ratio(eps_min) - 1| (margin-mass)");
    exp->add_flag("--no-refinement-check", o.no_refinement_check, "Skip the n+1 rerun (jump-probability)");
    exp->add_flag("--no-table-check", o.no_table_check, "Skip the doubled-table rerun (jump-probability)");
    exp->add_flag("--timing", o.timing, "Report wall time (otherwise null)");
    detail::add_table(exp, o);
    detail::add_output(exp, o, true);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();  // program name
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    if (o.threads < 1) {
        err << "error: --threads must be >= 1\n";
        return 2;
    }
    try {
        std::string text;
        if (alpha->parsed()) text = detail::run_alpha(o);
        else if (density->parsed()) text = detail::run_density(o);
        else if (transition->parsed()) text = detail::run_transition(o);
        else if (sample->parsed()) text = detail::run_sample_path(o);
        else if (count->parsed()) text = detail::run_count_jumps(o);
        else text = detail::run_experiment(o);
        detail::emit(o, text, out);
        return 0;
    } catch (const detail::UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const WindowOutOfRange& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "computation failed: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "computation failed: " << e.what() << "\n";
        return 1;
    }
}

inline int run(int argc, char** argv) {
    return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace qou::cli
