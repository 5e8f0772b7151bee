#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qou/experiments.hpp"

using namespace qou;

namespace {

constexpr double kPi = std::numbers::pi;

McConfig small_mc(int n, std::int64_t reps, std::uint64_t seed) {
    McConfig mc;
    mc.n = n;
    mc.replicates = reps;
    mc.seed = seed;
    mc.table.nx = 96;
    mc.table.nu = 192;
    return mc;
}

/// JSON with the timing field removed, for reproducibility comparisons.
std::string stable_dump(ExperimentReport rep) {
    rep.wall_time_seconds.reset();
    return rep.to_json().dump();
}

}  // namespace

TEST(JumpRate, LadderConvergesAtZero) {
    const std::vector<double> eps{0.2, 0.1, 0.05, 0.02};
    const auto rep = quadrature_jump_rate(QParams(0.0), eps);
    EXPECT_NEAR(rep.estimate("alpha_q").value, 1.0 / (18 * kPi * kPi), 1e-16);
    EXPECT_TRUE(rep.verdict("R_deviation_strictly_decreasing"));
    EXPECT_TRUE(rep.verdict("factorisation_deviation_strictly_decreasing"));
    EXPECT_NEAR(rep.estimate("R[0.02]").value, 1.0, 0.02);
    ASSERT_EQ(rep.ladder.size(), 4u);
    EXPECT_EQ(rep.ladder[3].epsilon, 0.02);
    // Deterministic: a second run is bit-identical.
    EXPECT_EQ(stable_dump(rep), stable_dump(quadrature_jump_rate(QParams(0.0), eps)));
}

TEST(JumpRate, CornerProductFactorisation) {
    const std::vector<double> eps{0.1, 0.01};
    for (double q : {-0.5, 0.0, 0.5}) {
        const auto rep = quadrature_jump_rate(QParams(q), eps);
        const double f1 = rep.estimate("factorisation_ratio[0.1]").value;
        const double f2 = rep.estimate("factorisation_ratio[0.01]").value;
        EXPECT_GT(f1, 0.0);
        EXPECT_LT(std::abs(f2 - 1), std::abs(f1 - 1)) << q;
        // Below the corner product for q < 0, above it for q >= 0.
        if (q < 0) {
            EXPECT_LT(f2, 1.0);
        } else {
            EXPECT_GT(f2, 1.0);
        }
    }
}

TEST(JumpRate, ToleranceVerdictAndErrors) {
    const std::vector<double> eps{0.2, 0.1};
    JumpRateConfig cfg;
    cfg.r_tolerance = 1e-6;
    const auto rep = quadrature_jump_rate(QParams(0.0), eps, cfg);
    EXPECT_FALSE(rep.verdict("R_final_within_tolerance"));
    EXPECT_EQ(rep.config["r_tolerance"], 1e-6);
    EXPECT_FALSE(rep.passed());
    const std::vector<double> too_big{0.6};
    EXPECT_THROW(quadrature_jump_rate(QParams(0.0), too_big), InvalidArgument);
    const std::vector<double> unsorted{0.1, 0.2};
    EXPECT_THROW(quadrature_jump_rate(QParams(0.0), unsorted), InvalidArgument);
    EXPECT_THROW(jump_rate_integral(QParams(0.0), 2.0), InvalidArgument);
}

TEST(MarginMass, LadderAndSymmetry) {
    const std::vector<double> eps{0.2, 0.1, 0.05, 0.01};
    const auto rep = margin_mass_asymptotics(QParams(0.0), eps);
    EXPECT_TRUE(rep.verdict("upper_lower_symmetric"));
    EXPECT_TRUE(rep.verdict("ratio_deviation_strictly_decreasing"));
    EXPECT_NEAR(rep.estimate("ratio[0.01]").value, 1.0, 0.03);
    EXPECT_GT(std::abs(rep.estimate("ratio[0.2]").value - 1), std::abs(rep.estimate("ratio[0.01]").value - 1));
    // Closed form of the semicircle margin mass at eps = 0.01.
    const double x = -1.99;
    const double closed = (x * std::sqrt(4 - x * x) / 4 + std::asin(x / 2)) / kPi + 0.5;
    EXPECT_NEAR(rep.estimate("m[0.01]").value, closed, 1e-13);
    std::ostringstream csv;
    rep.write_ladder_csv(csv);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "epsilon,value,stderr");
}

TEST(KernelBounds, ZeroViolations) {
    const std::vector<double> deltas{0.1, 0.5, 1.0, 4.0};
    for (double q : {-0.5, 0.0, 0.5}) {
        const auto rep = verify_kernel_bounds(QParams(q), deltas);
        EXPECT_TRUE(rep.passed()) << rep.to_json().dump();
        EXPECT_GE(rep.estimate("grid_points_checked").value, 4e4);
    }
    const auto r0 = verify_kernel_bounds(QParams(0.0), deltas);
    EXPECT_NEAR(r0.estimate("phi_min[k=0,delta=1.0]").value, std::pow(1 - std::exp(-1.0), 4), 1e-12);
    EXPECT_GE(r0.estimate("phi2_min_margin[1.0]").value, 0.0);
    KernelBoundsConfig small;
    small.grid_size = 50;
    EXPECT_THROW(verify_kernel_bounds(QParams(0.0), deltas, small), InvalidArgument);
}

TEST(Expansions, SmallRho) {
    const std::vector<double> rho{0.1, 0.01, 0.001};
    for (double q : {0.0, 0.5, -0.5}) {
        const auto rep = verify_small_rho_expansions(QParams(q), rho);
        EXPECT_TRUE(rep.passed()) << q;
        EXPECT_NEAR(rep.estimate("g_over_rho[0.001]").value, 4 / (1 - q), 0.02 * 4 / (1 - q));
    }
    const std::vector<double> bad{0.5};
    EXPECT_THROW(verify_small_rho_expansions(QParams(0.0), bad), InvalidArgument);
}

TEST(Mixing, DecayAtZero) {
    const std::vector<double> t{1, 2, 4, 8};
    const auto rep = mixing_decay(QParams(0.0), t);
    EXPECT_TRUE(rep.passed()) << rep.to_json().dump();
    const std::vector<double> t16{1, 2, 4, 16};
    EXPECT_LT(mixing_decay(QParams(0.0), t16).estimate("D[16.0]").value, 1e-5);
    const std::vector<double> few{1, 2, 4};
    EXPECT_THROW(mixing_decay(QParams(0.0), few), InvalidArgument);
}

TEST(MonteCarlo, JumpProbabilityReproducibleAcrossThreads) {
    // Coarse resolution and a wide margin keep events frequent.
    McConfig mc = small_mc(3, 4000, 9);
    const JumpProbabilityOptions opt{true, false};
    const auto a = mc_jump_probability(QParams(0.0), 0.8, mc, opt);
    mc.threads = 3;
    const auto b = mc_jump_probability(QParams(0.0), 0.8, mc, opt);
    EXPECT_EQ(stable_dump(a), stable_dump(b));
    EXPECT_GT(a.estimate("events").value, 20);
    EXPECT_EQ(*a.master_seed, 9u);
}

TEST(MonteCarlo, InputErrorsAndBudget) {
    const QParams qp(0.0);
    McConfig mc = small_mc(3, 10, 1);
    EXPECT_THROW(mc_jump_probability(qp, qp.L(), mc), InvalidArgument);
    EXPECT_THROW(mc_jump_probability(qp, 0.0, mc), InvalidArgument);
    mc.replicates = 0;
    EXPECT_THROW(mc_jump_probability(qp, 0.3, mc), InvalidArgument);
    PoissonConfig pc;
    pc.mc = small_mc(8, 2000, 1);
    pc.mc.step_cap = 1e6;
    EXPECT_THROW(mc_poisson_limit(qp, 0.3, pc), BudgetExceeded);
}

TEST(MonteCarlo, PoissonDegenerateWindow) {
    PoissonConfig pc;
    pc.mc = small_mc(2, 200, 3);
    pc.scale_lambda = 1e-9;
    const auto rep = mc_poisson_limit(QParams(0.0), 0.3, pc);
    EXPECT_EQ(rep.config["window_T"], 1);
    EXPECT_EQ(rep.estimate("lambda_hat").value, 0.0);
    EXPECT_EQ(rep.estimate("tv_distance").value, 0.0);
}

TEST(MonteCarlo, PoissonShapeAtCoarseResolution) {
    // n = 3, eps = 0.5: a cheap configuration with many occupied intervals.
    PoissonConfig pc;
    pc.mc = small_mc(3, 1500, 5);
    pc.scale_lambda = 2.0;
    const auto rep = mc_poisson_limit(QParams(0.0), 0.5, pc);
    EXPECT_NEAR(rep.estimate("lambda_hat").value, 2.0, 0.3);
    EXPECT_TRUE(rep.verdict("var_over_mean_in_range")) << rep.to_json().dump();
    EXPECT_TRUE(rep.verdict("chi_square_p_value_above_min")) << rep.to_json().dump();
    const auto json = rep.to_json();
    EXPECT_TRUE(json["details"].contains("W_histogram"));
    for (const char* key : {"name", "config", "estimates", "verdicts", "seed", "wall_time"})
        EXPECT_TRUE(json.contains(key)) << key;
}

TEST(MonteCarlo, DoubleJumpRuleOfThree) {
    DoubleJumpConfig dc;
    dc.mc = small_mc(4, 2000, 2);
    const std::vector<double> eps{0.4, 0.3};
    const auto rep = mc_double_jump(QParams(0.0), eps, dc);
    for (const char* e : {"[0.4]", "[0.3]"}) {
        const double p2 = rep.estimate(std::string("P_ge2") + e).value;
        const double upper = rep.estimate(std::string("P_ge2_upper") + e).value;
        if (p2 == 0.0) {
            EXPECT_EQ(upper, 3.0 / 2000);
        }
        EXPECT_GE(upper, p2);
    }
    EXPECT_LE(rep.estimate("P_ge1[0.3]").value, rep.estimate("P_ge1[0.4]").value);
}
