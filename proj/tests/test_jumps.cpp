#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qou/jumps.hpp"

using namespace qou;

namespace {

PathGrid make_path(int n, std::int64_t horizon, std::vector<double> values) {
    PathGrid p;
    p.n = n;
    p.horizon = horizon;
    p.values = std::move(values);
    return p;
}

/// Quadratic re-scan: for every pair of grid indices, keep adjacent pairs that
/// cross from the lower margin to the upper one.
std::vector<JumpEvent> brute_force(const QParams& qp, const PathGrid& path, const JumpSpec& spec) {
    std::vector<JumpEvent> out;
    const auto m = static_cast<std::int64_t>(path.values.size());
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < m; ++j) {
            if (j != i + 1) continue;
            const double t = static_cast<double>(j) / static_cast<double>(path.steps_per_unit());
            if (!(t > static_cast<double>(spec.a) && t <= static_cast<double>(spec.b))) continue;
            if (path.values[i] < -qp.L() + spec.epsilon && path.values[j] > qp.L() - spec.epsilon)
                out.push_back({j, path.values[i], path.values[j]});
        }
    }
    return out;
}

const TransitionTable& table_q0_n1() {
    static const TransitionTable t = build_transition_table(QParams(0.0), 1, 128, 256);
    return t;
}

}  // namespace

TEST(DetectJumps, ConstantAndTwoPointPaths) {
    const QParams qp(0.0);
    const JumpSpec spec{0.2, 0, 1};
    EXPECT_TRUE(detect_jumps(qp, make_path(3, 1, std::vector<double>(9, 0.0)), spec).empty());
    const auto events = detect_jumps(qp, make_path(0, 1, {-qp.L() + 0.1, qp.L() - 0.1}), spec);
    ASSERT_EQ(events.size(), 1u);
    EXPECT_EQ(events[0].step_index, 1);
    EXPECT_EQ(events[0].y_from, -qp.L() + 0.1);
    // Clamped edge values count as inside the margin; exact margin boundaries do not.
    EXPECT_EQ(detect_jumps(qp, make_path(0, 1, {-qp.L(), qp.L()}), spec).size(), 1u);
    EXPECT_TRUE(detect_jumps(qp, make_path(0, 1, {-qp.L() + 0.2, qp.L()}), spec).empty());
    EXPECT_TRUE(detect_jumps(qp, make_path(0, 1, {-qp.L(), qp.L() - 0.2}), spec).empty());
    // Downward crossings are not counted.
    EXPECT_TRUE(detect_jumps(qp, make_path(0, 1, {qp.L(), -qp.L()}), spec).empty());
}

TEST(DetectJumps, Errors) {
    const QParams qp(0.5);
    const auto path = make_path(1, 2, std::vector<double>(5, 0.0));
    EXPECT_THROW(detect_jumps(qp, path, {0.1, 0, 3}), WindowOutOfRange);
    EXPECT_THROW(detect_jumps(qp, path, {0.0, 0, 1}), InvalidArgument);
    EXPECT_THROW(detect_jumps(qp, path, {qp.L(), 0, 1}), InvalidArgument);
    EXPECT_THROW(detect_jumps(qp, path, {0.1, 1, 1}), InvalidArgument);
    EXPECT_THROW(detect_jumps(qp, path, {0.1, -1, 1}), InvalidArgument);
    EXPECT_THROW(detect_jumps(qp, make_path(1, 2, std::vector<double>(4, 0.0)), {0.1, 0, 1}), InvalidArgument);
}

TEST(DetectJumps, MatchesBruteForceOnRandomPaths) {
    const QParams qp(-0.3);
    const double L = qp.L();
    std::mt19937_64 gen(99);
    // Values concentrated in the margins so that crossings are common.
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int r = 0; r < 10000; ++r) {
        const int n = static_cast<int>(gen() % 3);
        const std::int64_t horizon = 1 + static_cast<std::int64_t>(gen() % 3);
        std::vector<double> v(static_cast<std::size_t>(horizon << n) + 1);
        for (auto& x : v) {
            const double s = unit(gen);
            x = s < 0.4 ? -L + 0.5 * unit(gen) : (s < 0.8 ? L - 0.5 * unit(gen) : (2 * unit(gen) - 1) * L);
        }
        const auto path = make_path(n, horizon, v);
        const std::int64_t a = static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(horizon));
        const std::int64_t b = a + 1 + static_cast<std::int64_t>(gen() % static_cast<std::uint64_t>(horizon - a));
        const JumpSpec spec{0.05 + 0.4 * unit(gen), a, b};
        const auto events = detect_jumps(qp, path, spec);
        ASSERT_EQ(events, brute_force(qp, path, spec)) << r;
        for (std::size_t k = 1; k < events.size(); ++k) ASSERT_GT(events[k].step_index, events[k - 1].step_index + 1);
        const auto c = count_events(qp, path, spec);
        ASSERT_EQ(c.total, static_cast<std::int64_t>(events.size()));
        // Monotone in epsilon: a wider margin keeps every event.
        const auto wider = detect_jumps(qp, path, {spec.epsilon + 0.1, a, b});
        for (const auto& e : events) ASSERT_NE(std::find(wider.begin(), wider.end(), e), wider.end());
    }
}

TEST(CountEvents, PerIntervalBookkeeping) {
    const QParams qp(0.0);
    const double L = qp.L();
    std::vector<double> v(4 * 4 + 1, 0.0);
    // Crossing into step 2 (interval 1) and step 11 (interval 3).
    v[1] = -L;
    v[2] = L;
    v[10] = -L;
    v[11] = L;
    const auto path = make_path(2, 4, v);
    const auto c = count_events(qp, path, {0.1, 0, 4});
    EXPECT_EQ(c.per_unit_interval, (std::vector<std::int64_t>{1, 0, 1, 0}));
    EXPECT_EQ(c.total, 2);
    const auto sub = count_events(qp, path, {0.1, 2, 4});
    EXPECT_EQ(sub.per_unit_interval, (std::vector<std::int64_t>{1, 0}));
    EXPECT_EQ(to_json(c).dump(), R"({"epsilon":0.1,"n":2,"window":[0,4],"per_interval":[1,0,1,0],"total":2})");
    const auto empty = count_events(qp, make_path(2, 4, std::vector<double>(17, 0.0)), {0.1, 0, 4});
    EXPECT_EQ(empty.per_unit_interval, (std::vector<std::int64_t>{0, 0, 0, 0}));
}

TEST(BernoulliIndicators, Examples) {
    JumpCount c;
    c.per_unit_interval = {0, 2, 1};
    c.total = 3;
    EXPECT_EQ(bernoulli_indicators(c), (std::vector<int>{0, 1, 1}));
    EXPECT_EQ(occupied_intervals(c), 2);
    EXPECT_LE(occupied_intervals(c), c.total);
    c.per_unit_interval = {0, 0};
    c.total = 0;
    EXPECT_EQ(bernoulli_indicators(c), (std::vector<int>{0, 0}));
    EXPECT_EQ(occupied_intervals(c), 0);
}

TEST(DoubleJump, TwoCrossingsInOneIntervalCountAsTwo) {
    const QParams qp(0.0);
    const double L = qp.L();
    std::vector<double> v(9, 0.0);
    v[1] = -L;
    v[2] = L;
    v[5] = -L + 0.01;
    v[6] = L - 0.01;
    const auto c = count_events(qp, make_path(3, 1, v), {0.3, 0, 1});
    EXPECT_EQ(c.per_unit_interval[0], 2);
    EXPECT_EQ(occupied_intervals(c), 1);
}

TEST(StreamingCount, AgreesWithStoredPath) {
    // A coarse grid (n = 1) and a wide margin make crossings frequent.
    const auto& t = table_q0_n1();
    const StationarySampler s(t.qparams());
    std::int64_t seen = 0;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        for (const JumpSpec spec : {JumpSpec{1.2, 0, 5}, JumpSpec{0.8, 2, 5}}) {
            const RngSeed seed{42, r};
            const auto path = simulate_path(t, s, spec.b, seed);
            const auto direct = count_events(t.qparams(), path, spec);
            const auto streamed = simulate_jump_count(t, s, spec, seed);
            ASSERT_EQ(streamed.per_unit_interval, direct.per_unit_interval) << r;
            ASSERT_EQ(streamed.total, direct.total);
            seen += direct.total;
        }
    }
    EXPECT_GT(seen, 150);
}
