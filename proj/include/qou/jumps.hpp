#pragma once

// Boundary-to-boundary jumps on dyadic paths: a jump at step i means the chain
// sits within epsilon of -L at time (i-1)/2^n and within epsilon of +L at i/2^n.

#include <cstdint>
#include <numbers>
#include <vector>

#include "json.hpp"

#include "qou/error.hpp"
#include "qou/qseries.hpp"
#include "qou/sampler.hpp"

namespace qou {

/// Margin width epsilon and the unit-time window (a, b].
struct JumpSpec {
    double epsilon = 0.1;
    std::int64_t a = 0;
    std::int64_t b = 1;

    void validate(const QParams& qp, const char* op) const {
        if (!(epsilon > 0.0 && epsilon < qp.L()))
            throw InvalidArgument(op, "epsilon must lie in (0, L) with L = " + std::to_string(qp.L()));
        if (a < 0 || a >= b) throw InvalidArgument(op, "window (a, b] needs 0 <= a < b");
    }
};

struct JumpEvent {
    std::int64_t step_index = 0;
    double y_from = 0.0;
    double y_to = 0.0;

    friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

struct JumpCount {
    double epsilon = 0.0;
    int n = 0;
    std::int64_t a = 0;
    std::int64_t b = 1;
    std::vector<std::int64_t> per_unit_interval;
    std::int64_t total = 0;
};

namespace detail {

inline void check_window(const PathGrid& path, const JumpSpec& spec, const char* op) {
    if (spec.b > path.horizon)
        throw WindowOutOfRange(op, "window (" + std::to_string(spec.a) + ", " + std::to_string(spec.b) +
                                       "] exceeds path horizon " + std::to_string(path.horizon));
    if (path.values.size() != static_cast<std::size_t>(path.horizon * path.steps_per_unit()) + 1)
        throw InvalidArgument(op, "path length is not horizon * 2^n + 1");
}

}  // namespace detail

/// Every step i in the window with values[i-1] < -L + eps and values[i] > L - eps,
/// in increasing order.
inline std::vector<JumpEvent> detect_jumps(const QParams& qp, const PathGrid& path, const JumpSpec& spec) {
    constexpr const char* op = "detect_jumps";
    spec.validate(qp, op);
    detail::check_window(path, spec, op);
    const double lo = -qp.L() + spec.epsilon;
    const double hi = qp.L() - spec.epsilon;
    const std::int64_t first = spec.a * path.steps_per_unit() + 1;
    const std::int64_t last = spec.b * path.steps_per_unit();
    std::vector<JumpEvent> events;
    for (std::int64_t i = first; i <= last; ++i) {
        const double from = path.values[static_cast<std::size_t>(i - 1)];
        const double to = path.values[static_cast<std::size_t>(i)];
        if (from < lo && to > hi) events.push_back({i, from, to});
    }
    return events;
}

/// Unit interval (a + k, a + k + 1] that contains grid step i, as k.
inline std::int64_t interval_of_step(std::int64_t step, int n, std::int64_t a) {
    return ((step - 1) >> n) - a;
}

inline JumpCount count_events(const QParams& qp, const PathGrid& path, const JumpSpec& spec) {
    const auto events = detect_jumps(qp, path, spec);
    JumpCount c{spec.epsilon, path.n, spec.a, spec.b, std::vector<std::int64_t>(spec.b - spec.a, 0), 0};
    for (const auto& e : events) ++c.per_unit_interval[interval_of_step(e.step_index, path.n, spec.a)];
    c.total = static_cast<std::int64_t>(events.size());
    return c;
}

/// J_i = 1{N((i-1, i], eps) >= 1} for each unit interval of the window.
inline std::vector<int> bernoulli_indicators(const JumpCount& count) {
    std::vector<int> out(count.per_unit_interval.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = count.per_unit_interval[i] >= 1 ? 1 : 0;
    return out;
}

/// W: the number of unit intervals in the window that contain a jump.
inline std::int64_t occupied_intervals(const JumpCount& count) {
    std::int64_t w = 0;
    for (auto v : count.per_unit_interval) w += v >= 1 ? 1 : 0;
    return w;
}

inline nlohmann::ordered_json to_json(const JumpCount& c) {
    nlohmann::ordered_json j;
    j["epsilon"] = c.epsilon;
    j["n"] = c.n;
    j["window"] = {c.a, c.b};
    j["per_interval"] = c.per_unit_interval;
    j["total"] = c.total;
    return j;
}

/// Simulates the chain of simulate_path(table, spec.b, seed) without storing it
/// and returns count_events on it.  Steps are taken in angle coordinates; a
/// step is confirmed with the same comparisons as detect_jumps on the mapped
/// values, after a cheap angle prefilter with a small safety margin.
/// `stationary` must be built for table.qparams(); sharing one across calls
/// avoids recomputing its envelope.
inline JumpCount simulate_jump_count(const TransitionTable& table, const StationarySampler& stationary,
                                     const JumpSpec& spec, const RngSeed& seed) {
    constexpr const char* op = "simulate_jump_count";
    const QParams& qp = table.qparams();
    spec.validate(qp, op);
    const double L = table.L();
    const double lo = -L + spec.epsilon;
    const double hi = L - spec.epsilon;
    constexpr double guard = 1e-9;
    const double th_lo = detail::support_angle(L, lo) + guard;
    const double th_hi = detail::support_angle(L, hi) - guard;
    const int n = table.n();
    JumpCount c{spec.epsilon, n, spec.a, spec.b, std::vector<std::int64_t>(spec.b - spec.a, 0), 0};

    Rng rng(seed);
    const double x0 = stationary(rng);
    double theta = detail::support_angle(L, x0);
    const std::int64_t first = spec.a << n;
    const std::int64_t last = spec.b << n;
    for (std::int64_t i = 1; i <= first; ++i) theta = table.sample_angle(theta, rng.uniform());
    // First predecessor value: x0 itself when the window starts at 0.
    double prev_theta = theta;
    bool prev_is_x0 = first == 0;
    for (std::int64_t i = first + 1; i <= last; ++i) {
        theta = table.sample_angle(theta, rng.uniform());
        if (prev_theta < th_lo && theta > th_hi) {
            const double from = prev_is_x0 ? x0 : detail::support_point(L, prev_theta);
            const double to = detail::support_point(L, theta);
            if (from < lo && to > hi) {
                ++c.per_unit_interval[interval_of_step(i, n, spec.a)];
                ++c.total;
            }
        }
        prev_theta = theta;
        prev_is_x0 = false;
    }
    return c;
}

inline JumpCount simulate_jump_count(const TransitionTable& table, const JumpSpec& spec, const RngSeed& seed) {
    return simulate_jump_count(table, StationarySampler(table.qparams()), spec, seed);
}

}  // namespace qou
