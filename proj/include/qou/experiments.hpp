#pragma once

// Numerical experiments: quadrature of the epsilon^3 jump law and its
// ingredients, Monte Carlo jump probabilities and Poisson counts, and grid
// checks of the kernel inequalities, small-rho expansions and mixing decay.
//
// Monte Carlo replicate r always uses the stream (master_seed, r) and writes
// only its own result slot; reductions run in replicate order afterwards, so
// reports do not depend on the thread count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/tools/minima.hpp>

#include "qou/density.hpp"
#include "qou/jumps.hpp"
#include "qou/numerics.hpp"
#include "qou/parallel.hpp"
#include "qou/qseries.hpp"
#include "qou/report.hpp"
#include "qou/sampler.hpp"
#include "qou/stats.hpp"

namespace qou {

/// Quadrature settings for the corner integral and the margin masses.
inline QuadConfig experiment_quad() { return QuadConfig{1e-300, 1e-11, 400}; }

namespace detail {

inline std::string label(const char* base, double v) {
    std::ostringstream os;
    os << base << '[' << Json(v).dump() << ']';
    return os.str();
}

template <class A, class B>
std::string label(const char* base, const char* k1, A v1, const char* k2, B v2) {
    std::ostringstream os;
    os << base << '[' << k1 << '=' << Json(v1).dump() << ',' << k2 << '=' << Json(v2).dump() << ']';
    return os.str();
}

inline Json quad_json(const QuadConfig& c) {
    return {{"abs_tol", c.abs_tol}, {"rel_tol", c.rel_tol}, {"max_subdivisions", c.max_subdivisions}};
}

inline Json table_json(const TableConfig& c) {
    return {{"nx", c.nx}, {"nu", c.nu}, {"tail_floor", c.tail_floor}, {"root_rel_tol", c.root_rel_tol},
            {"edge_scale", c.edge_scale}};
}

/// True when |v_i| is strictly decreasing.
inline bool strictly_decreasing_abs(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(std::abs(v[i]) < std::abs(v[i - 1]))) return false;
    return true;
}

inline void check_ladder(std::span<const double> eps, double L, double frac, const char* op) {
    if (eps.empty()) throw InvalidArgument(op, "epsilon list is empty");
    for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0 && eps[i] < frac * L)) {
            std::ostringstream msg;
            msg << "epsilon = " << eps[i] << " must lie in (0, " << frac * L << ")";
            throw InvalidArgument(op, msg.str());
        }
        if (i > 0 && !(eps[i] < eps[i - 1])) throw InvalidArgument(op, "epsilon list must be strictly decreasing");
    }
}

class Stopwatch {
  public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

  private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Quadrature side of the epsilon^3 law
// ---------------------------------------------------------------------------

/// F(eps) = 2 (q)_inf * int_{-L}^{-L+eps} int_{L-eps}^{L} p(y1) p(y2) Psi_q(y1, y2) dy2 dy1,
/// the limit of 2^n P(B_{1,n}(eps)).  Both axes use the square-root edge map.
inline QuadResult jump_rate_integral(const QParams& qp, double epsilon, const QuadConfig& cfg = experiment_quad(),
                                     const SeriesConfig& scfg = {}) {
    constexpr const char* op = "jump_rate_integral";
    const double L = qp.L();
    if (!(epsilon > 0.0 && epsilon < L)) throw InvalidArgument(op, "epsilon must lie in (0, L)");
    const MarginalDensity p(qp, scfg);
    auto f = [&](double y1, double y2) { return p(y1) * p(y2) * Psi_inf(qp, y1, y2, scfg); };
    auto r = integrate_2d(f, Box{-L, -L + epsilon, L - epsilon, L}, cfg, AxisMap::lower_edge, AxisMap::upper_edge);
    r.value *= 2.0 * qp.qq_inf();
    r.err_estimate *= 2.0 * qp.qq_inf();
    return r;
}

/// Leading term of the margin mass: (q)^3_inf / (2 pi) * (4/3) (eps sqrt(1-q))^{3/2}.
inline double margin_mass_leading(const QParams& qp, double epsilon) {
    const double qq = qp.qq_inf();
    return qq * qq * qq / (2.0 * std::numbers::pi) * (4.0 / 3.0) * std::pow(epsilon * qp.sqrt_one_minus_q(), 1.5);
}

struct JumpRateConfig {
    QuadConfig quad = experiment_quad();
    /// Bound on |R(eps_min) - 1|; checked only when set.
    std::optional<double> r_tolerance;
};

/// For each eps of a strictly decreasing ladder in (0, L/4): F, F/eps^3,
/// R = F/(alpha_q eps^3), the corner product 2 (q)_inf Psi(-L, L) m(eps)^2 and the
/// factorisation ratio F / corner product.
inline ExperimentReport quadrature_jump_rate(const QParams& qp, std::span<const double> eps_list,
                                             const JumpRateConfig& cfg = {}) {
    constexpr const char* op = "quadrature_jump_rate";
    detail::Stopwatch clock;
    detail::check_ladder(eps_list, qp.L(), 0.25, op);
    ExperimentReport rep;
    rep.name = "jump-rate";
    rep.config = {{"q", qp.q()}, {"epsilon", std::vector<double>(eps_list.begin(), eps_list.end())},
                  {"quad", detail::quad_json(cfg.quad)}};
    if (cfg.r_tolerance) rep.config["r_tolerance"] = *cfg.r_tolerance;
    const double alpha = alpha_q(qp);
    const double psi_corner = Psi_inf(qp, -qp.L(), qp.L());
    const MarginalDensity p(qp);
    rep.add_estimate("alpha_q", alpha);
    std::vector<double> r_dev, fac_dev;
    for (double eps : eps_list) {
        const auto F = jump_rate_integral(qp, eps, cfg.quad);
        const double e3 = eps * eps * eps;
        const auto m = integrate_edge(p, Endpoint::lower, eps, qp, cfg.quad);
        const double corner = 2.0 * qp.qq_inf() * psi_corner * m.value * m.value;
        const double corner_err = 2.0 * corner * m.err_estimate / m.value;
        const double R = F.value / (alpha * e3);
        const double R_err = F.err_estimate / (alpha * e3);
        const double fac = F.value / corner;
        rep.add_estimate(detail::label("F", eps), F.value, F.err_estimate);
        rep.add_estimate(detail::label("F_over_eps3", eps), F.value / e3, F.err_estimate / e3);
        rep.add_estimate(detail::label("R", eps), R, R_err);
        rep.add_estimate(detail::label("corner_product", eps), corner, corner_err);
        rep.add_estimate(detail::label("factorisation_ratio", eps), fac,
                         fac * (F.err_estimate / F.value + corner_err / corner));
        rep.ladder.push_back({eps, R, R_err});
        r_dev.push_back(R - 1.0);
        fac_dev.push_back(fac - 1.0);
    }
    if (eps_list.size() >= 2) {
        rep.add_verdict("R_deviation_strictly_decreasing", detail::strictly_decreasing_abs(r_dev));
        rep.add_verdict("factorisation_deviation_strictly_decreasing", detail::strictly_decreasing_abs(fac_dev));
    }
    if (cfg.r_tolerance) rep.add_verdict("R_final_within_tolerance", std::abs(r_dev.back()) < *cfg.r_tolerance);
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

struct MarginMassConfig {
    QuadConfig quad = QuadConfig{1e-300, 1e-13, 400};
    double symmetry_tolerance = 1e-12;
    std::optional<double> ratio_tolerance;
};

/// m(eps) = int_{-L}^{-L+eps} p against its leading term over a decreasing ladder.
inline ExperimentReport margin_mass_asymptotics(const QParams& qp, std::span<const double> eps_list,
                                                const MarginMassConfig& cfg = {}) {
    constexpr const char* op = "margin_mass_asymptotics";
    detail::Stopwatch clock;
    detail::check_ladder(eps_list, qp.L(), 0.25, op);
    ExperimentReport rep;
    rep.name = "margin-mass";
    rep.config = {{"q", qp.q()},
                  {"epsilon", std::vector<double>(eps_list.begin(), eps_list.end())},
                  {"quad", detail::quad_json(cfg.quad)},
                  {"symmetry_tolerance", cfg.symmetry_tolerance}};
    if (cfg.ratio_tolerance) rep.config["ratio_tolerance"] = *cfg.ratio_tolerance;
    const MarginalDensity p(qp);
    std::vector<double> dev;
    double worst_asym = 0.0;
    for (double eps : eps_list) {
        const auto lo = integrate_edge(p, Endpoint::lower, eps, qp, cfg.quad);
        const auto hi = integrate_edge(p, Endpoint::upper, eps, qp, cfg.quad);
        const double lead = margin_mass_leading(qp, eps);
        const double ratio = lo.value / lead;
        rep.add_estimate(detail::label("m", eps), lo.value, lo.err_estimate);
        rep.add_estimate(detail::label("m_upper", eps), hi.value, hi.err_estimate);
        rep.add_estimate(detail::label("ratio", eps), ratio, lo.err_estimate / lead);
        rep.ladder.push_back({eps, ratio, lo.err_estimate / lead});
        dev.push_back(ratio - 1.0);
        worst_asym = std::max(worst_asym, std::abs(hi.value - lo.value));
    }
    rep.add_estimate("max_upper_lower_difference", worst_asym);
    rep.add_verdict("upper_lower_symmetric", worst_asym <= cfg.symmetry_tolerance);
    if (eps_list.size() >= 2) rep.add_verdict("ratio_deviation_strictly_decreasing", detail::strictly_decreasing_abs(dev));
    if (cfg.ratio_tolerance) rep.add_verdict("ratio_final_within_tolerance", std::abs(dev.back()) < *cfg.ratio_tolerance);
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

struct McConfig {
    int n = 8;
    std::int64_t replicates = 100000;
    std::uint64_t seed = 0;
    int threads = 1;
    TableConfig table{};
    /// Verdict bound on |difference| / combined standard error.
    double z_tolerance = 3.0;
    /// Refuse runs with more transitions than this.
    double step_cap = 2e10;
    QuadConfig quad = experiment_quad();
};

namespace detail {

inline Json mc_json(const QParams& qp, double eps, const McConfig& c) {
    return {{"q", qp.q()},
            {"epsilon", eps},
            {"n", c.n},
            {"replicates", c.replicates},
            {"table", table_json(c.table)},
            {"z_tolerance", c.z_tolerance},
            {"step_cap", c.step_cap},
            {"quad", quad_json(c.quad)}};
}

inline void check_budget(double steps, double cap, const char* op) {
    if (steps > cap) {
        std::ostringstream msg;
        msg << "run needs " << steps << " transitions, above the cap of " << cap;
        throw BudgetExceeded(op, msg.str());
    }
}

inline void check_mc(const QParams& qp, double eps, const McConfig& c, const char* op) {
    JumpSpec{eps, 0, 1}.validate(qp, op);
    if (c.replicates < 1) throw InvalidArgument(op, "replicates must be >= 1");
    if (c.n < 0 || c.n > 27) throw InvalidArgument(op, "n must lie in [0, 27]");
}

/// Per-replicate jump totals N((0, horizon], eps) and occupied-interval counts W.
struct ReplicateCounts {
    std::vector<std::int64_t> total;
    std::vector<std::int64_t> occupied;
};

inline ReplicateCounts run_replicates(const TransitionTable& table, const JumpSpec& spec, std::int64_t replicates,
                                      std::uint64_t seed, int threads) {
    ReplicateCounts out{std::vector<std::int64_t>(replicates), std::vector<std::int64_t>(replicates)};
    const StationarySampler stationary(table.qparams());
    parallel_for(replicates, threads, [&](std::int64_t r) {
        const auto c = simulate_jump_count(table, stationary, spec, RngSeed{seed, static_cast<std::uint64_t>(r)});
        out.total[r] = c.total;
        out.occupied[r] = occupied_intervals(c);
    });
    return out;
}

inline std::int64_t count_at_least(const std::vector<std::int64_t>& v, std::int64_t k) {
    return std::count_if(v.begin(), v.end(), [k](std::int64_t x) { return x >= k; });
}

}  // namespace detail

struct JumpProbabilityOptions {
    /// Repeat at resolution n + 1 and compare.
    bool refinement_check = true;
    /// Rebuild the table with doubled (nx, nu) and rerun with the same streams.
    bool table_doubling_check = true;
};

/// P(N((0,1], eps) >= 1) from unit-horizon paths, compared with F(eps) and alpha_q eps^3.
inline ExperimentReport mc_jump_probability(const QParams& qp, double epsilon, const McConfig& cfg,
                                            const JumpProbabilityOptions& opt = {}) {
    constexpr const char* op = "mc_jump_probability";
    detail::Stopwatch clock;
    detail::check_mc(qp, epsilon, cfg, op);
    const double per_run = static_cast<double>(cfg.replicates) * std::ldexp(1.0, cfg.n);
    const double runs = 1.0 + (opt.refinement_check ? 2.0 : 0.0) + (opt.table_doubling_check ? 1.0 : 0.0);
    detail::check_budget(per_run * runs, cfg.step_cap, op);

    ExperimentReport rep;
    rep.name = "jump-probability";
    rep.config = detail::mc_json(qp, epsilon, cfg);
    rep.config["refinement_check"] = opt.refinement_check;
    rep.config["table_doubling_check"] = opt.table_doubling_check;
    rep.master_seed = cfg.seed;
    const JumpSpec spec{epsilon, 0, 1};
    const auto N = cfg.replicates;
    auto estimate = [&](const TransitionTable& table) {
        const auto counts = detail::run_replicates(table, spec, N, cfg.seed, cfg.threads);
        const auto hits = detail::count_at_least(counts.total, 1);
        return std::pair{static_cast<double>(hits) / static_cast<double>(N), hits};
    };

    const auto table = TransitionTable::build(qp, cfg.n, cfg.table, cfg.threads);
    const auto [p_hat, hits] = estimate(table);
    const double se = stats::binomial_stderr(p_hat, N);
    const auto F = jump_rate_integral(qp, epsilon, cfg.quad);
    const double alpha = alpha_q(qp);
    const double e3 = epsilon * epsilon * epsilon;
    rep.add_estimate("P_hat", p_hat, se);
    rep.add_estimate("events", static_cast<double>(hits));
    rep.add_estimate("P_hat_over_eps3", p_hat / e3, se / e3);
    rep.add_estimate("F", F.value, F.err_estimate);
    rep.add_estimate("alpha_q_eps3", alpha * e3);
    const double se_F = std::hypot(se, F.err_estimate);
    const double z_F = se_F > 0.0 ? (p_hat - F.value) / se_F : 0.0;
    rep.add_estimate("z_vs_F", z_F);
    rep.add_estimate("z_vs_alpha", se > 0.0 ? (p_hat - alpha * e3) / se : 0.0);
    rep.add_verdict("agrees_with_F", hits > 0 && std::abs(z_F) <= cfg.z_tolerance);

    if (opt.refinement_check) {
        const auto fine = TransitionTable::build(qp, cfg.n + 1, cfg.table, cfg.threads);
        // Independent streams: seed + 1 keeps the two runs uncorrelated.
        const auto counts = detail::run_replicates(fine, spec, N, cfg.seed + 1, cfg.threads);
        const double p_fine = static_cast<double>(detail::count_at_least(counts.total, 1)) / static_cast<double>(N);
        const double se_fine = stats::binomial_stderr(p_fine, N);
        const double se_c = std::hypot(se, se_fine);
        const double z = se_c > 0.0 ? (p_fine - p_hat) / se_c : 0.0;
        rep.add_estimate("P_hat_refined", p_fine, se_fine);
        rep.add_estimate("z_refined_minus_base", z);
        rep.add_verdict("refinement_consistent", std::abs(z) <= cfg.z_tolerance);
    }
    if (opt.table_doubling_check) {
        TableConfig doubled = cfg.table;
        doubled.nx *= 2;
        doubled.nu *= 2;
        const auto big = TransitionTable::build(qp, cfg.n, doubled, cfg.threads);
        // Same streams: the difference isolates the table resolution.
        const auto [p_big, hits_big] = estimate(big);
        rep.add_estimate("P_hat_doubled_table", p_big, stats::binomial_stderr(p_big, N));
        rep.add_estimate("doubled_table_difference", p_big - p_hat);
        rep.add_verdict("table_doubling_within_stderr", std::abs(p_big - p_hat) < std::max(se, 1.0 / N));
        (void)hits_big;
    }
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

struct PoissonConfig {
    McConfig mc{};
    /// Target mean lambda* of W over the enlarged window.
    double scale_lambda = 2.0;
    double p_value_min = 0.01;
    double var_mean_low = 0.8;
    double var_mean_high = 1.25;
    double min_expected = 5.0;
};

/// W = number of occupied unit intervals over (0, T] with T = ceil(lambda*/F(eps)),
/// i.e. the window c eps^{-3} with c = lambda* eps^3 / F(eps).
inline ExperimentReport mc_poisson_limit(const QParams& qp, double epsilon, const PoissonConfig& cfg) {
    constexpr const char* op = "mc_poisson_limit";
    detail::Stopwatch clock;
    const McConfig& mc = cfg.mc;
    detail::check_mc(qp, epsilon, mc, op);
    if (!(cfg.scale_lambda > 0.0)) throw InvalidArgument(op, "scale_lambda must be > 0");
    const auto F = jump_rate_integral(qp, epsilon, mc.quad);
    const double e3 = epsilon * epsilon * epsilon;
    const double c = cfg.scale_lambda * e3 / F.value;
    const double T_real = std::ceil(c / e3);
    if (!(T_real >= 1.0 && T_real < 9e15)) throw InvalidArgument(op, "window length is not representable");
    const auto T = static_cast<std::int64_t>(T_real);
    detail::check_budget(T_real * std::ldexp(1.0, mc.n) * static_cast<double>(mc.replicates), mc.step_cap, op);

    ExperimentReport rep;
    rep.name = "poisson";
    rep.config = detail::mc_json(qp, epsilon, mc);
    rep.config["scale_lambda"] = cfg.scale_lambda;
    rep.config["window_scale_c"] = c;
    rep.config["window_T"] = T;
    rep.config["p_value_min"] = cfg.p_value_min;
    rep.config["var_mean_range"] = {cfg.var_mean_low, cfg.var_mean_high};
    rep.config["chi_square_min_expected"] = cfg.min_expected;
    rep.master_seed = mc.seed;

    const auto table = TransitionTable::build(qp, mc.n, mc.table, mc.threads);
    const auto counts = detail::run_replicates(table, JumpSpec{epsilon, 0, T}, mc.replicates, mc.seed, mc.threads);
    const auto& W = counts.occupied;
    std::vector<double> w(W.begin(), W.end());
    const double lambda = stats::mean(w);
    const double var = W.size() > 1 ? stats::variance(w) : 0.0;
    const auto N = static_cast<double>(W.size());
    const auto hist = stats::histogram(W);

    rep.add_estimate("F", F.value, F.err_estimate);
    rep.add_estimate("lambda_hat", lambda, std::sqrt(var / N));
    rep.add_estimate("lambda_asymptotic", c * alpha_q(qp));
    rep.add_estimate("variance", var);
    const double ratio = lambda > 0.0 ? var / lambda : 0.0;
    rep.add_estimate("var_over_mean", ratio);
    rep.add_estimate("tv_distance", stats::tv_distance_poisson(hist, lambda));
    rep.add_estimate("P_hat_J", lambda / static_cast<double>(T), std::sqrt(var / N) / static_cast<double>(T));

    const auto chi = stats::chi_square_poisson(hist, lambda, cfg.min_expected);
    rep.add_estimate("chi_square", chi.statistic);
    rep.add_estimate("chi_square_df", chi.df);
    rep.add_estimate("chi_square_p_value", chi.p_value);

    // P(W >= 2 | W >= 1) against the Poisson prediction.
    const auto ge1 = detail::count_at_least(W, 1);
    const auto ge2 = detail::count_at_least(W, 2);
    double pred = 0.0;
    if (lambda > 0.0) pred = -std::expm1(-lambda) > 0.0 ? 1.0 - lambda * std::exp(-lambda) / -std::expm1(-lambda) : 0.0;
    const double emp = ge1 > 0 ? static_cast<double>(ge2) / static_cast<double>(ge1) : 0.0;
    const double se_ratio = ge1 > 0 ? std::sqrt(std::max(pred * (1 - pred), 1e-300) / static_cast<double>(ge1)) : 0.0;
    rep.add_estimate("ratio_ge2_ge1", emp, se_ratio);
    rep.add_estimate("ratio_ge2_ge1_poisson", pred);

    rep.add_verdict("chi_square_p_value_above_min", chi.df >= 1 && chi.p_value > cfg.p_value_min);
    rep.add_verdict("var_over_mean_in_range", ratio >= cfg.var_mean_low && ratio <= cfg.var_mean_high);
    rep.add_verdict("ratio_ge2_ge1_consistent", ge1 > 0 && std::abs(emp - pred) <= mc.z_tolerance * se_ratio);
    rep.details["W_histogram"] = hist;
    rep.details["N_total_events"] = std::accumulate(counts.total.begin(), counts.total.end(), std::int64_t{0});
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

struct DoubleJumpConfig {
    McConfig mc{};
    /// Bound on the upper confidence limit of P(N >= 2) / P_hat(N >= 1)^2.
    double quadratic_ratio_max = 1000.0;
    /// P(N >= 2) must stay below this fraction of P_hat(N >= 1).
    double relative_max = 0.1;
};

/// P(N((0,1], eps) >= 2) for each eps of a ladder; zero counts use the rule of three.
inline ExperimentReport mc_double_jump(const QParams& qp, std::span<const double> eps_list,
                                       const DoubleJumpConfig& cfg) {
    constexpr const char* op = "mc_double_jump";
    detail::Stopwatch clock;
    const McConfig& mc = cfg.mc;
    if (eps_list.empty()) throw InvalidArgument(op, "epsilon list is empty");
    for (double eps : eps_list) detail::check_mc(qp, eps, mc, op);
    detail::check_budget(static_cast<double>(mc.replicates) * std::ldexp(1.0, mc.n), mc.step_cap, op);

    ExperimentReport rep;
    rep.name = "double-jump";
    rep.config = detail::mc_json(qp, eps_list.front(), mc);
    rep.config["epsilon"] = std::vector<double>(eps_list.begin(), eps_list.end());
    rep.config["quadratic_ratio_max"] = cfg.quadratic_ratio_max;
    rep.config["relative_max"] = cfg.relative_max;
    rep.master_seed = mc.seed;
    const auto table = TransitionTable::build(qp, mc.n, mc.table, mc.threads);
    const auto N = static_cast<double>(mc.replicates);
    // One set of paths serves every epsilon: totals are computed per margin.
    std::vector<std::vector<std::int64_t>> totals(eps_list.size(), std::vector<std::int64_t>(mc.replicates));
    const StationarySampler stationary(qp);
    parallel_for(mc.replicates, mc.threads, [&](std::int64_t r) {
        const auto path = simulate_path(table, stationary, 1, RngSeed{mc.seed, static_cast<std::uint64_t>(r)});
        for (std::size_t e = 0; e < eps_list.size(); ++e)
            totals[e][r] = count_events(qp, path, JumpSpec{eps_list[e], 0, 1}).total;
    });
    bool small = true, bounded = true;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        const double eps = eps_list[e];
        const auto ge1 = detail::count_at_least(totals[e], 1);
        const auto ge2 = detail::count_at_least(totals[e], 2);
        const double p1 = static_cast<double>(ge1) / N;
        const double p2 = static_cast<double>(ge2) / N;
        const double se2 = stats::binomial_stderr(p2, mc.replicates);
        const double upper = ge2 == 0 ? stats::rule_of_three(mc.replicates) : p2 + mc.z_tolerance * se2;
        rep.add_estimate(detail::label("P_ge1", eps), p1, stats::binomial_stderr(p1, mc.replicates));
        rep.add_estimate(detail::label("P_ge2", eps), p2, se2);
        rep.add_estimate(detail::label("P_ge2_upper", eps), upper);
        const double qratio = p1 > 0.0 ? upper / (p1 * p1) : 0.0;
        rep.add_estimate(detail::label("quadratic_ratio_upper", eps), qratio);
        rep.ladder.push_back({eps, p2, se2});
        small = small && p1 > 0.0 && p2 <= cfg.relative_max * p1;
        bounded = bounded && p1 > 0.0 && qratio <= cfg.quadratic_ratio_max;
    }
    rep.add_verdict("double_jumps_small", small);
    rep.add_verdict("quadratic_ratio_bounded", bounded);
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

// ---------------------------------------------------------------------------
// Deterministic grid checks
// ---------------------------------------------------------------------------

struct KernelBoundsConfig {
    int grid_size = 101;
    std::vector<int> k_list{0, 1, 2};
    double min_tolerance = 1e-10;
    /// Relative allowance for rounding in the pointwise inequalities.
    double rounding_slack = 1e-11;
    /// Kernel-ratio bounds are checked for t >= this value.
    double ratio_t_min = 0.1;
};

namespace detail {

/// Minimum of f over [-L, L]^2: grid scan, then alternating Brent line searches
/// within the neighbouring grid cells.
template <class F>
std::pair<double, std::pair<double, double>> box_minimum(F&& f, double L, int grid) {
    const double h = 2.0 * L / (grid - 1);
    double best = f(-L, -L);
    double bx = -L, by = -L;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double x = i == grid - 1 ? L : -L + i * h;
            const double y = j == grid - 1 ? L : -L + j * h;
            const double v = f(x, y);
            if (v < best) {
                best = v;
                bx = x;
                by = y;
            }
        }
    }
    for (int sweep = 0; sweep < 4; ++sweep) {
        const double y0 = by;
        auto rx = boost::math::tools::brent_find_minima([&](double x) { return f(x, y0); },
                                                        std::max(-L, bx - h), std::min(L, bx + h), 50);
        if (rx.second < best) {
            best = rx.second;
            bx = rx.first;
        }
        const double x0 = bx;
        auto ry = boost::math::tools::brent_find_minima([&](double y) { return f(x0, y); },
                                                        std::max(-L, by - h), std::min(L, by + h), 50);
        if (ry.second < best) {
            best = ry.second;
            by = ry.first;
        }
    }
    return {best, {bx, by}};
}

inline double grid_point(double L, int i, int grid) { return i == grid - 1 ? L : -L + 2.0 * L * i / (grid - 1); }

}  // namespace detail

/// Checks, for each delta in delta_list, on a grid_size^2 grid of [-L, L]^2:
///  (a) min phi_{q,k}(delta, ., .) = (1 - e^{-delta} |q|^k)^4,
///  (b) phi_{q,0} >= e^{-2 delta} [16 sinh^4(delta/2) + (1-q)(x-y)^2],
///  (c) C(x, e^{-t}, q) <= p_{0,t}(x,y)/p(y) <= (e^{-2t};q)_inf / (e^{-t};q)_inf^4 for t = delta >= ratio_t_min.
inline ExperimentReport verify_kernel_bounds(const QParams& qp, std::span<const double> delta_list,
                                             const KernelBoundsConfig& cfg = {}) {
    constexpr const char* op = "verify_kernel_bounds";
    detail::Stopwatch clock;
    if (cfg.grid_size < 100) throw InvalidArgument(op, "grid_size must be >= 100");
    if (delta_list.empty()) throw InvalidArgument(op, "delta list is empty");
    for (double d : delta_list)
        if (!(d > 0.0)) throw InvalidArgument(op, "delta values must be > 0");
    ExperimentReport rep;
    rep.name = "kernel-bounds";
    rep.config = {{"q", qp.q()},
                  {"delta", std::vector<double>(delta_list.begin(), delta_list.end())},
                  {"grid_size", cfg.grid_size},
                  {"k", cfg.k_list},
                  {"min_tolerance", cfg.min_tolerance},
                  {"rounding_slack", cfg.rounding_slack},
                  {"ratio_t_min", cfg.ratio_t_min}};
    const double L = qp.L();
    const int G = cfg.grid_size;
    const double one_minus_q = 1.0 - qp.q();
    bool minima_ok = true;
    std::int64_t phi2_violations = 0, ratio_violations = 0, q2k_violations = 0, points = 0;
    Json witnesses = Json::array();
    for (double d : delta_list) {
        for (int k : cfg.k_list) {
            const auto [mn, at] = detail::box_minimum([&](double x, double y) { return phi(qp, k, d, x, y); }, L, G);
            const double expected = std::pow(1.0 - std::exp(-d) * std::pow(std::abs(qp.q()), k), 4);
            rep.add_estimate(detail::label("phi_min", "k", k, "delta", d), mn, std::abs(mn - expected));
            rep.add_estimate(detail::label("phi_min_expected", "k", k, "delta", d), expected);
            if (!(std::abs(mn - expected) <= cfg.min_tolerance)) {
                minima_ok = false;
                witnesses.push_back({{"check", "phi_min"}, {"k", k}, {"delta", d}, {"x", at.first}, {"y", at.second}});
            }
        }
        const double sh = std::sinh(0.5 * d);
        const double e2 = std::exp(-2.0 * d);
        const bool check_ratio = d >= cfg.ratio_t_min;
        const TransitionKernel kernel(qp, d);
        const double upper = ratio_upper_bound(qp, d);
        const double rho = std::exp(-d);
        double worst_phi2 = 1e300;
        for (int i = 0; i < G; ++i) {
            const double x = detail::grid_point(L, i, G);
            const double lower = check_ratio ? ratio_lower_bound(qp, x, rho) : 0.0;
            const double lower_q2k = check_ratio ? ratio_lower_bound_q2k(qp, x, rho) : 0.0;
            for (int j = 0; j < G; ++j) {
                const double y = detail::grid_point(L, j, G);
                ++points;
                const double v = phi(qp, 0, d, x, y);
                const double lb = e2 * (16.0 * sh * sh * sh * sh + one_minus_q * (x - y) * (x - y));
                worst_phi2 = std::min(worst_phi2, v - lb);
                if (v < lb * (1.0 - cfg.rounding_slack)) {
                    if (phi2_violations++ < 5)
                        witnesses.push_back({{"check", "phi2"}, {"delta", d}, {"x", x}, {"y", y}});
                }
                if (check_ratio) {
                    const double r = kernel.ratio(x, y);
                    if (r > upper * (1.0 + cfg.rounding_slack) || r < lower * (1.0 - cfg.rounding_slack)) {
                        if (ratio_violations++ < 5)
                            witnesses.push_back({{"check", "ratio"}, {"t", d}, {"x", x}, {"y", y}, {"ratio", r}});
                    }
                    if (r < lower_q2k * (1.0 - cfg.rounding_slack)) ++q2k_violations;
                }
            }
        }
        rep.add_estimate(detail::label("phi2_min_margin", d), worst_phi2);
        if (check_ratio) rep.add_estimate(detail::label("ratio_upper_bound", d), upper);
    }
    rep.add_estimate("grid_points_checked", static_cast<double>(points));
    rep.add_estimate("phi2_violations", static_cast<double>(phi2_violations));
    rep.add_estimate("ratio_violations", static_cast<double>(ratio_violations));
    // The printed q^{2k} form of C; informational only.
    rep.add_estimate("q2k_variant_violations", static_cast<double>(q2k_violations));
    rep.add_verdict("phi_minimum_matches", minima_ok);
    rep.add_verdict("phi2_lower_bound_holds", phi2_violations == 0);
    rep.add_verdict("kernel_ratio_bounds_hold", ratio_violations == 0);
    if (!witnesses.empty()) rep.details["witnesses"] = witnesses;
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

struct ExpansionConfig {
    int grid_size = 201;
    /// Relative tolerance of g(rho)/rho against 4/(1-q) at the smallest rho.
    double relative_tolerance = 0.02;
    /// slack(rho) = slack_coefficient * rho added to (7 + 8 sqrt 2)/(1 - |q|).
    double slack_coefficient = 100.0;
};

/// g(rho) = (rho^2;q)_inf/(rho;q)_inf^4 - 1 against 4 rho/(1-q), and
/// [1 - C(x, rho, q)]/rho against (7 + 8 sqrt 2)/(1 - |q|) on an x grid.
inline ExperimentReport verify_small_rho_expansions(const QParams& qp, std::span<const double> rho_list,
                                                    const ExpansionConfig& cfg = {}) {
    constexpr const char* op = "verify_small_rho_expansions";
    detail::Stopwatch clock;
    if (rho_list.empty()) throw InvalidArgument(op, "rho list is empty");
    for (std::size_t i = 0; i < rho_list.size(); ++i) {
        if (!(rho_list[i] > 0.0 && rho_list[i] <= 0.1)) throw InvalidArgument(op, "rho values must lie in (0, 0.1]");
        if (i > 0 && !(rho_list[i] < rho_list[i - 1])) throw InvalidArgument(op, "rho list must be strictly decreasing");
    }
    if (cfg.grid_size < 2) throw InvalidArgument(op, "grid_size must be >= 2");
    ExperimentReport rep;
    rep.name = "expansions";
    const double limit = 4.0 / (1.0 - qp.q());
    const double lhs_const = (7.0 + 8.0 * std::numbers::sqrt2) / (1.0 - std::abs(qp.q()));
    rep.config = {{"q", qp.q()},
                  {"rho", std::vector<double>(rho_list.begin(), rho_list.end())},
                  {"grid_size", cfg.grid_size},
                  {"relative_tolerance", cfg.relative_tolerance},
                  {"slack_coefficient", cfg.slack_coefficient},
                  {"g_limit", limit},
                  {"lhs_constant", lhs_const}};
    const double L = qp.L();
    bool g_positive = true, c_le_one = true, c_bounded = true;
    std::vector<double> g_over_rho;
    for (double rho : rho_list) {
        const double e = qpochhammer_inf(rho, qp);
        const double g = qpochhammer_inf(rho * rho, qp) / (e * e * e * e) - 1.0;
        g_positive = g_positive && g > 0.0;
        g_over_rho.push_back(g / rho);
        rep.add_estimate(detail::label("g_over_rho", rho), g / rho);
        double worst = 0.0, max_c = 0.0;
        for (int i = 0; i < cfg.grid_size; ++i) {
            const double x = detail::grid_point(L, i, cfg.grid_size);
            const double C = ratio_lower_bound(qp, x, rho);
            max_c = std::max(max_c, C);
            worst = std::max(worst, (1.0 - C) / rho);
        }
        c_le_one = c_le_one && max_c <= 1.0;
        c_bounded = c_bounded && worst <= lhs_const + cfg.slack_coefficient * rho;
        rep.add_estimate(detail::label("max_C", rho), max_c);
        rep.add_estimate(detail::label("max_one_minus_C_over_rho", rho), worst);
        rep.ladder.push_back({rho, g / rho, 0.0});
    }
    const double last = g_over_rho.back();
    rep.add_estimate("g_over_rho_final_relative_deviation", std::abs(last - limit) / limit);
    if (rho_list.size() >= 2) {
        // First-order Richardson extrapolation from the two smallest rho.
        const std::size_t m = rho_list.size();
        const double r = rho_list[m - 2] / rho_list[m - 1];
        const double extrap = (r * g_over_rho[m - 1] - g_over_rho[m - 2]) / (r - 1.0);
        rep.add_estimate("g_over_rho_richardson", extrap, std::abs(extrap - last));
        rep.add_verdict("richardson_limit_matches",
                        std::abs(extrap - limit) <= cfg.relative_tolerance * limit);
    }
    rep.add_verdict("g_over_rho_within_tolerance", std::abs(last - limit) <= cfg.relative_tolerance * limit);
    rep.add_verdict("g_positive", g_positive);
    rep.add_verdict("C_at_most_one", c_le_one);
    rep.add_verdict("one_minus_C_bounded", c_bounded);
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

struct MixingConfig {
    int grid_size = 101;
    double slope_target = -1.0;
    double slope_tolerance = 0.15;
};

/// D(t) = max over the grid of |p_{0,t}(x,y)/p(y) - 1|, and the least-squares
/// slope of log D against t.
inline ExperimentReport mixing_decay(const QParams& qp, std::span<const double> t_list, const MixingConfig& cfg = {}) {
    constexpr const char* op = "mixing_decay";
    detail::Stopwatch clock;
    if (t_list.size() < 4) throw InvalidArgument(op, "need at least 4 times");
    for (std::size_t i = 0; i < t_list.size(); ++i) {
        if (!(t_list[i] >= 1.0 && t_list[i] <= 16.0)) throw InvalidArgument(op, "times must lie in [1, 16]");
        if (i > 0 && !(t_list[i] > t_list[i - 1])) throw InvalidArgument(op, "times must be increasing");
    }
    if (cfg.grid_size < 2) throw InvalidArgument(op, "grid_size must be >= 2");
    ExperimentReport rep;
    rep.name = "mixing";
    rep.config = {{"q", qp.q()},
                  {"t", std::vector<double>(t_list.begin(), t_list.end())},
                  {"grid_size", cfg.grid_size},
                  {"slope_target", cfg.slope_target},
                  {"slope_tolerance", cfg.slope_tolerance}};
    const double L = qp.L();
    std::vector<double> D, logD;
    double Cq = 0.0;
    for (double t : t_list) {
        const TransitionKernel kernel(qp, t);
        double sup = 0.0;
        for (int i = 0; i < cfg.grid_size; ++i) {
            const double x = detail::grid_point(L, i, cfg.grid_size);
            for (int j = 0; j < cfg.grid_size; ++j)
                sup = std::max(sup, std::abs(kernel.ratio(x, detail::grid_point(L, j, cfg.grid_size)) - 1.0));
        }
        D.push_back(sup);
        logD.push_back(std::log(sup));
        Cq = std::max(Cq, std::exp(t) * sup);
        rep.add_estimate(detail::label("D", t), sup);
    }
    bool decreasing = true;
    for (std::size_t i = 1; i < D.size(); ++i) decreasing = decreasing && D[i] < D[i - 1];
    const double slope = stats::ls_slope(t_list, logD);
    rep.add_estimate("slope", slope);
    rep.add_estimate("C_q_empirical", Cq);
    rep.add_verdict("D_strictly_decreasing", decreasing);
    rep.add_verdict("slope_within_tolerance", std::abs(slope - cfg.slope_target) <= cfg.slope_tolerance);
    rep.add_verdict("C_q_finite", std::isfinite(Cq));
    rep.wall_time_seconds = clock.seconds();
    return rep;
}

}  // namespace qou
