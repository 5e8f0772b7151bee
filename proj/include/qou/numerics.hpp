#pragma once

// Adaptive Gauss-Kronrod quadrature (global error-driven bisection), an
// edge substitution for square-root endpoint behaviour, tensorised 2-D
// integration and bracketed inversion of monotone functions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qou/error.hpp"
#include "qou/qseries.hpp"

namespace qou {

struct QuadConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_subdivisions = 60;

    void validate(const char* op) const {
        if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
            throw InvalidArgument(op, "QuadConfig tolerances must be > 0");
        if (max_subdivisions < 1) throw InvalidArgument(op, "QuadConfig.max_subdivisions must be >= 1");
    }

    double target(double value) const { return std::max(abs_tol, rel_tol * std::abs(value)); }
};

struct QuadResult {
    double value = 0.0;
    double err_estimate = 0.0;
    long evaluations = 0;
};

/// One accepted subinterval of an adaptive integration.
struct QuadLeaf {
    double a;
    double b;
    double value;
    double error;
};

enum class Endpoint { lower, upper };

namespace detail {

/// 21-point Kronrod rule with its embedded 10-point Gauss rule, mapped to [a, b].
class GaussKronrod21 {
  public:
    static const GaussKronrod21& instance() {
        static const GaussKronrod21 rule;
        return rule;
    }

    struct Estimate {
        double kronrod;
        double error;
    };

    template <class F>
    Estimate apply(F& f, double a, double b, const char* op) const {
        const double center = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        std::array<double, 21> fv{};
        std::size_t m = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i] == 0.0) {
                fv[m++] = f(center);
            } else {
                fv[m++] = f(center - half * nodes_[i]);
                fv[m++] = f(center + half * nodes_[i]);
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            if (!std::isfinite(fv[i])) {
                std::ostringstream msg;
                msg << "integrand returned a non-finite value on [" << a << ", " << b << "]";
                throw NonFinite(op, msg.str());
            }
        }
        double resk = 0.0;
        double resg = 0.0;
        double resabs = 0.0;
        m = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            double sum;
            double abs_sum;
            if (nodes_[i] == 0.0) {
                sum = fv[m];
                abs_sum = std::abs(fv[m]);
                ++m;
            } else {
                sum = fv[m] + fv[m + 1];
                abs_sum = std::abs(fv[m]) + std::abs(fv[m + 1]);
                m += 2;
            }
            resk += kronrod_w_[i] * sum;
            resg += gauss_w_[i] * sum;
            resabs += kronrod_w_[i] * abs_sum;
        }
        // Error heuristic of QUADPACK's qk21.
        const double mean = 0.5 * resk;
        double resasc = 0.0;
        m = 0;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i] == 0.0) {
                resasc += kronrod_w_[i] * std::abs(fv[m] - mean);
                ++m;
            } else {
                resasc += kronrod_w_[i] * (std::abs(fv[m] - mean) + std::abs(fv[m + 1] - mean));
                m += 2;
            }
        }
        const double habs = std::abs(half);
        resk *= half;
        resabs *= habs;
        resasc *= habs;
        double err = std::abs((resk - resg * half));
        if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
        constexpr double eps = std::numeric_limits<double>::epsilon();
        constexpr double tiny = std::numeric_limits<double>::min();
        if (resabs > tiny / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
        return {resk, err};
    }

  private:
    GaussKronrod21() {
        using gk = boost::math::quadrature::gauss_kronrod<double, 21>;
        using g = boost::math::quadrature::gauss<double, 10>;
        const auto& xk = gk::abscissa();
        const auto& wk = gk::weights();
        const auto& xg = g::abscissa();
        const auto& wg = g::weights();
        nodes_.assign(xk.begin(), xk.end());
        kronrod_w_.assign(wk.begin(), wk.end());
        gauss_w_.assign(xk.size(), 0.0);
        for (std::size_t j = 0; j < xg.size(); ++j) {
            for (std::size_t i = 0; i < xk.size(); ++i) {
                if (std::abs(xk[i] - xg[j]) < 1e-14) gauss_w_[i] = wg[j];
            }
        }
    }

    std::vector<double> nodes_;
    std::vector<double> kronrod_w_;
    std::vector<double> gauss_w_;
};

struct PendingLeaf {
    QuadLeaf leaf;
    int depth;
    bool operator<(const PendingLeaf& other) const { return leaf.error < other.leaf.error; }
};

}  // namespace detail

/// Adaptive integration over consecutive segments [points[i], points[i+1]].
/// Intervals with the largest error estimate are bisected until the summed
/// estimate meets cfg; each bisection counts against cfg.max_subdivisions.
/// When `leaves` is non-null it receives the final partition sorted by position.
template <class F>
QuadResult integrate_1d(F&& f, std::span<const double> points, const QuadConfig& cfg,
                        std::vector<QuadLeaf>* leaves = nullptr) {
    constexpr const char* op = "integrate_1d";
    cfg.validate(op);
    if (points.size() < 2) throw InvalidArgument(op, "need at least two breakpoints");
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(points[i] < points[i + 1])) {
            std::ostringstream msg;
            msg << "breakpoints must be strictly increasing (got " << points[i] << " then "
                << points[i + 1] << ")";
            throw InvalidArgument(op, msg.str());
        }
    }
    const auto& rule = detail::GaussKronrod21::instance();
    std::priority_queue<detail::PendingLeaf> heap;
    std::vector<QuadLeaf> done;  // intervals too small to split further
    QuadResult result;
    double total = 0.0;
    double total_err = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const auto est = rule.apply(f, points[i], points[i + 1], op);
        result.evaluations += 21;
        heap.push({{points[i], points[i + 1], est.kronrod, est.error}, 0});
        total += est.kronrod;
        total_err += est.error;
    }
    int subdivisions = 0;
    while (total_err > cfg.target(total) && !heap.empty()) {
        const auto worst = heap.top();
        const double mid = 0.5 * (worst.leaf.a + worst.leaf.b);
        if (!(mid > worst.leaf.a && mid < worst.leaf.b) || worst.depth > 200) {
            heap.pop();
            done.push_back(worst.leaf);
            continue;
        }
        if (subdivisions >= cfg.max_subdivisions) {
            std::ostringstream msg;
            msg << "error estimate " << total_err << " still above target " << cfg.target(total)
                << " after " << subdivisions << " subdivisions (value " << total << ")";
            throw MaxSubdivisionsExceeded(op, msg.str());
        }
        heap.pop();
        ++subdivisions;
        const auto left = rule.apply(f, worst.leaf.a, mid, op);
        const auto right = rule.apply(f, mid, worst.leaf.b, op);
        result.evaluations += 42;
        total += left.kronrod + right.kronrod - worst.leaf.value;
        total_err += left.error + right.error - worst.leaf.error;
        heap.push({{worst.leaf.a, mid, left.kronrod, left.error}, worst.depth + 1});
        heap.push({{mid, worst.leaf.b, right.kronrod, right.error}, worst.depth + 1});
    }
    // Re-sum in positional order so the value does not depend on heap history.
    while (!heap.empty()) {
        done.push_back(heap.top().leaf);
        heap.pop();
    }
    std::sort(done.begin(), done.end(), [](const QuadLeaf& l, const QuadLeaf& r) { return l.a < r.a; });
    result.value = 0.0;
    result.err_estimate = 0.0;
    for (const auto& leaf : done) {
        result.value += leaf.value;
        result.err_estimate += leaf.error;
    }
    if (result.err_estimate > cfg.target(result.value)) {
        std::ostringstream msg;
        msg << "error estimate " << result.err_estimate << " above target "
            << cfg.target(result.value) << ": intervals reached floating-point resolution";
        throw MaxSubdivisionsExceeded(op, msg.str());
    }
    if (leaves != nullptr) *leaves = std::move(done);
    return result;
}

template <class F>
QuadResult integrate_1d(F&& f, double a, double b, const QuadConfig& cfg) {
    if (!(a < b)) {
        std::ostringstream msg;
        msg << "requires a < b (got a = " << a << ", b = " << b << ")";
        throw InvalidArgument("integrate_1d", msg.str());
    }
    const std::array<double, 2> pts{a, b};
    return integrate_1d(std::forward<F>(f), std::span<const double>(pts), cfg);
}

/// Integral of f over the margin [-L, -L + width] (lower) or [L - width, L]
/// (upper) through y = -L + u^2 (resp. L - u^2), which turns a sqrt(L -+ y)
/// endpoint factor into a smooth one.
template <class F>
QuadResult integrate_edge(F&& f, Endpoint endpoint, double width, const QParams& qp,
                          const QuadConfig& cfg) {
    constexpr const char* op = "integrate_edge";
    if (!(width > 0.0 && width < 2.0 * qp.L())) {
        std::ostringstream msg;
        msg << "width = " << width << " must lie in (0, 2L) = (0, " << 2.0 * qp.L() << ")";
        throw InvalidArgument(op, msg.str());
    }
    const double L = qp.L();
    const double umax = std::sqrt(width);
    if (endpoint == Endpoint::lower) {
        return integrate_1d([&](double u) { return 2.0 * u * f(-L + u * u); }, 0.0, umax, cfg);
    }
    return integrate_1d([&](double u) { return 2.0 * u * f(L - u * u); }, 0.0, umax, cfg);
}

struct Box {
    double x0, x1, y0, y1;
};

/// How an axis of a Box is parametrised before integration.
enum class AxisMap {
    linear,
    lower_edge,  // t = t0 + u^2
    upper_edge,  // t = t1 - u^2
};

namespace detail {

struct AxisTransform {
    double lo, hi;  // range of the integration variable
    AxisMap map;
    double t0, t1;

    AxisTransform(double a, double b, AxisMap m) : map(m), t0(a), t1(b) {
        lo = 0.0;
        hi = (m == AxisMap::linear) ? 0.0 : std::sqrt(b - a);
        if (m == AxisMap::linear) {
            lo = a;
            hi = b;
        }
    }
    double point(double u) const {
        switch (map) {
            case AxisMap::lower_edge: return t0 + u * u;
            case AxisMap::upper_edge: return t1 - u * u;
            default: return u;
        }
    }
    double jacobian(double u) const { return map == AxisMap::linear ? 1.0 : 2.0 * u; }
};

}  // namespace detail

/// Nested (tensorised) adaptive integration of f(x, y) over a box.  The
/// reported error adds the outer estimate to the inner estimates weighted by
/// the outer measure.
template <class F>
QuadResult integrate_2d(F&& f, const Box& box, const QuadConfig& cfg,
                        AxisMap x_map = AxisMap::linear, AxisMap y_map = AxisMap::linear) {
    constexpr const char* op = "integrate_2d";
    cfg.validate(op);
    if (!(box.x0 < box.x1 && box.y0 < box.y1)) throw InvalidArgument(op, "degenerate box");
    const detail::AxisTransform xt(box.x0, box.x1, x_map);
    const detail::AxisTransform yt(box.y0, box.y1, y_map);
    QuadConfig inner = cfg;
    inner.abs_tol = cfg.abs_tol / (4.0 * (xt.hi - xt.lo));
    inner.rel_tol = cfg.rel_tol / 4.0;
    long inner_evals = 0;
    double weighted_inner_err = 0.0;
    auto outer = integrate_1d(
        [&](double u) {
            const double x = xt.point(u);
            const auto r = integrate_1d(
                [&](double v) { return yt.jacobian(v) * f(x, yt.point(v)); }, yt.lo, yt.hi, inner);
            inner_evals += r.evaluations;
            const double jac = xt.jacobian(u);
            weighted_inner_err = std::max(weighted_inner_err, jac * r.err_estimate);
            return jac * r.value;
        },
        xt.lo, xt.hi, cfg);
    outer.evaluations += inner_evals;
    outer.err_estimate += weighted_inner_err * (xt.hi - xt.lo);
    return outer;
}

/// Solve F(x) = target for nondecreasing F on [a, b] by Illinois-type false
/// position with bisection safeguards.  Returns x with |F(x) - target| <=
/// cfg.abs_tol, or the bracket midpoint once the bracket collapses to
/// floating-point resolution (F may jump there).
template <class F>
double invert_monotone(F&& func, double target, double a, double b, const QuadConfig& cfg) {
    constexpr const char* op = "invert_monotone";
    cfg.validate(op);
    if (!(a < b)) throw InvalidArgument(op, "bracket requires a < b");
    double fa = func(a) - target;
    double fb = func(b) - target;
    if (!std::isfinite(fa) || !std::isfinite(fb)) throw NonFinite(op, "F is non-finite at the bracket ends");
    if (fa > cfg.abs_tol || fb < -cfg.abs_tol) {
        std::ostringstream msg;
        msg << "target " << target << " outside [F(a), F(b)] = [" << fa + target << ", "
            << fb + target << "]";
        throw BracketInvalid(op, msg.str());
    }
    if (std::abs(fa) <= cfg.abs_tol) return a;
    if (std::abs(fb) <= cfg.abs_tol) return b;
    int side = 0;
    for (int iter = 0; iter < 400; ++iter) {
        double x;
        // Every fourth step is a plain bisection; it bounds the worst case.
        if (iter % 4 == 3) {
            x = 0.5 * (a + b);
        } else {
            x = (a * fb - b * fa) / (fb - fa);
            if (!(x > a && x < b)) x = 0.5 * (a + b);
        }
        const double fx = func(x) - target;
        if (!std::isfinite(fx)) throw NonFinite(op, "F returned a non-finite value");
        if (std::abs(fx) <= cfg.abs_tol) return x;
        if (fx < 0.0) {
            a = x;
            fa = fx;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = x;
            fb = fx;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
        if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)) ||
            b - a <= std::numeric_limits<double>::min())
            return 0.5 * (a + b);
    }
    return 0.5 * (a + b);
}

}  // namespace qou
