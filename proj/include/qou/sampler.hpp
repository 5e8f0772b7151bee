#pragma once

// Sampling from the stationary law and the transition kernel, and simulation
// of the chain observed on the dyadic grid i / 2^n.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "qou/density.hpp"
#include "qou/error.hpp"
#include "qou/numerics.hpp"
#include "qou/parallel.hpp"
#include "qou/qseries.hpp"
#include "qou/rng.hpp"

namespace qou {

/// Rejection sampler for p^(q) with a uniform proposal on [-L, L].
class StationarySampler {
  public:
    explicit StationarySampler(const QParams& qp, const SeriesConfig& cfg = {})
        : density_(qp, cfg), L_(qp.L()) {
        // sup p: grid scan, then golden-section refinement around the best node.
        constexpr int kGrid = 4000;
        int best = 0;
        double best_val = -1.0;
        for (int i = 0; i <= kGrid; ++i) {
            const double v = density_(node(i, kGrid));
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        double a = node(std::max(best - 1, 0), kGrid);
        double b = node(std::min(best + 1, kGrid), kGrid);
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = b - g * (b - a);
        double d = a + g * (b - a);
        double fc = density_(c), fd = density_(d);
        for (int it = 0; it < 200 && b - a > 1e-15 * L_; ++it) {
            if (fc > fd) {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = density_(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = density_(d);
            }
        }
        sup_ = std::max({best_val, fc, fd}) * (1.0 + 1e-9);
    }

    double sup() const noexcept { return sup_; }
    /// Expected proposals per accepted draw, M = 2 L sup p.
    double envelope_constant() const noexcept { return 2.0 * L_ * sup_; }

    double operator()(Rng& rng, std::int64_t* trials = nullptr) const {
        std::int64_t count = 0;
        while (true) {
            ++count;
            const double x = -L_ + 2.0 * L_ * rng.uniform();
            if (rng.uniform() * sup_ < density_(x)) {
                if (trials) *trials += count;
                return x;
            }
        }
    }

  private:
    double node(int i, int n) const { return -L_ + 2.0 * L_ * i / n; }

    MarginalDensity density_;
    double L_;
    double sup_ = 0.0;
};

/// One stationary draw from the stream `seed`.
inline double sample_stationary(const QParams& qp, const RngSeed& seed) {
    Rng rng(seed);
    return StationarySampler(qp)(rng);
}

struct TableConfig {
    int nx = 512;
    int nu = 1024;
    double tail_floor = 1e-13;                   // smallest positive probability level
    QuadConfig row_quad{1e-15, 1e-13, 20000};    // per-row integration of the kernel
    double root_rel_tol = 1e-12;                 // relative accuracy of each quantile's mass
    double edge_scale = 2.0;                     // row interpolation scale near the edges, in units of delta

    void validate(const char* op) const {
        if (nx < 2 || nu < 2) throw InvalidArgument(op, "table needs Nx >= 2 and Nu >= 2");
        if (!(tail_floor > 0.0 && tail_floor < 1e-3)) throw InvalidArgument(op, "tail_floor must lie in (0, 1e-3)");
        if (!(root_rel_tol > 0.0)) throw InvalidArgument(op, "root_rel_tol must be > 0");
        row_quad.validate(op);
    }
};

namespace detail {

/// Probability levels: 0, a geometric lower tail from tail_floor up to u_star,
/// a uniform block on [u_star, 1 - u_star], the mirrored upper tail, and 1.
/// The split is chosen so that the spacing is continuous at u_star, where the
/// geometric step c u_star meets the uniform step h; among such splits the
/// one minimising the larger of the two linear-interpolation error models
/// (c^2 u_star / 4 for a 1/u quantile tail, pi h^2 / 4 for a Cauchy core) is used.
struct UGrid {
    std::vector<double> levels;
    int tail = 0;          // geometric levels per side
    int mid = 0;           // uniform levels, including u_star and 1 - u_star
    double u_star = 0.0;
    double h = 0.0;        // uniform spacing
    double floor = 0.0;
    double log_ratio = 0.0;  // c

    UGrid(int nu, double tail_floor) {
        if (nu < 16) {
            for (int j = 0; j < nu; ++j) levels.push_back(static_cast<double>(j) / (nu - 1));
            mid = nu;
            return;
        }
        floor = tail_floor;
        double best_err = std::numeric_limits<double>::infinity();
        for (int t = nu / 16; 2 * t + 4 <= nu; ++t) {
            const int m = nu - 2 - 2 * t;
            // Continuity c u* = (1 - 2 u*) / (m - 1) with c = log(u*/floor) / t; bisect on u*.
            double lo = 10.0 * floor, hi = 0.25;
            for (int it = 0; it < 200; ++it) {
                const double us = 0.5 * (lo + hi);
                const double c = std::log(us / floor) / t;
                if (c * us < (1.0 - 2.0 * us) / (m - 1)) lo = us; else hi = us;
            }
            const double c = std::log(lo / floor) / t;
            const double step = (1.0 - 2.0 * lo) / (m - 1);
            const double err = std::max(c * c * lo / 4.0, std::numbers::pi * step * step / 4.0);
            if (err < best_err) {
                best_err = err;
                tail = t;
                mid = m;
                u_star = lo;
                log_ratio = c;
                h = step;
            }
        }
        // Recompute c so that floor e^{c tail} hits u_star exactly.
        log_ratio = std::log(u_star / floor) / tail;
        std::vector<double> lower;
        for (int i = 0; i < tail; ++i) lower.push_back(floor * std::exp(log_ratio * i));
        levels.push_back(0.0);
        for (double u : lower) levels.push_back(u);
        for (int j = 0; j < mid; ++j) levels.push_back(j + 1 == mid ? 1.0 - u_star : u_star + h * j);
        for (auto it = lower.rbegin(); it != lower.rend(); ++it) levels.push_back(1.0 - *it);
        levels.push_back(1.0);
    }

    /// Index j with levels[j] <= u < levels[j + 1], for u in [0, 1).
    int locate(double u) const noexcept {
        const int last = static_cast<int>(levels.size()) - 2;
        int j;
        if (tail == 0) {
            j = static_cast<int>(u * (mid - 1));
        } else if (u < u_star) {
            j = u < floor ? 0 : 1 + static_cast<int>(std::log(u / floor) / log_ratio);
        } else if (u < 1.0 - u_star) {
            j = tail + 1 + static_cast<int>((u - u_star) / h);
        } else {
            const double v = 1.0 - u;
            j = v < floor ? last : tail + mid + (tail - 1 - static_cast<int>(std::log(v / floor) / log_ratio));
        }
        j = std::clamp(j, 0, last);
        while (j > 0 && levels[j] > u) --j;
        while (j < last && levels[j + 1] <= u) ++j;
        return j;
    }
};

/// Gauss-Legendre rule used for partial integrals inside a quadrature leaf.
class GaussLegendre20 {
  public:
    static const GaussLegendre20& instance() {
        static const GaussLegendre20 rule;
        return rule;
    }
    template <class F>
    double apply(F& f, double a, double b) const {
        const double c = 0.5 * (a + b), h = 0.5 * (b - a);
        double s = 0.0;
        for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * (f(c - h * x_[i]) + f(c + h * x_[i]));
        return s * h;
    }

  private:
    GaussLegendre20() {
        using g = boost::math::quadrature::gauss<double, 20>;
        x_.assign(g::abscissa().begin(), g::abscissa().end());
        w_.assign(g::weights().begin(), g::weights().end());
    }
    std::vector<double> x_, w_;
};

/// Solves offset + int_{a}^{theta} g = target (from_left) or
/// offset + int_{theta}^{b} g = target (from the right) for theta in [a, b],
/// g >= 0, by Newton steps safeguarded with bisection.
template <class G>
double solve_in_leaf(G& g, double a, double b, double leaf_value, double offset, double target, bool from_left,
                     double tol) {
    const auto& gl = GaussLegendre20::instance();
    const double r = target - offset;  // mass to accumulate inside the leaf
    auto excess = [&](double th) {
        const double part = from_left ? gl.apply(g, a, th) : gl.apply(g, th, b);
        return part - r;
    };
    double lo = a, hi = b;
    double frac = leaf_value > 0.0 ? std::clamp(r / leaf_value, 0.0, 1.0) : 0.5;
    double th = from_left ? a + (b - a) * frac : b - (b - a) * frac;
    for (int it = 0; it < 200; ++it) {
        if (th <= lo || th >= hi) th = 0.5 * (lo + hi);
        const double e = excess(th);
        if (std::abs(e) <= tol) return th;
        // From the left the accumulated mass increases with theta, from the right it decreases.
        const bool theta_too_large = from_left ? (e > 0.0) : (e < 0.0);
        if (theta_too_large) {
            hi = th;
        } else {
            lo = th;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(hi))) break;
        const double slope = g(th);
        double next = slope > 0.0 ? (from_left ? th - e / slope : th + e / slope) : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        th = next;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Conditional quantiles of p_{0,delta}(x, .) on a cosine-spaced x grid (with
/// extra rows next to the edges) and an endpoint-refined probability grid.
/// Both x and the quantiles are stored as angles theta with x = -L cos(theta);
/// interpolation happens in those coordinates, where the kernel has width of
/// order delta everywhere.  Immutable after build; safe to share between threads.
class TransitionTable {
  public:
    static TransitionTable build(const QParams& qp, int n, const TableConfig& cfg = {},
                                 int threads = 1, const SeriesConfig& scfg = {}) {
        constexpr const char* op = "build_transition_table";
        cfg.validate(op);
        if (n < 0 || n > 27) throw InvalidArgument(op, "n must lie in [0, 27]");
        TransitionTable t(qp, n, cfg);
        const TransitionKernel kernel(qp, t.delta_, scfg);
        const int nu = static_cast<int>(t.ugrid_.levels.size());
        t.angles_.assign(static_cast<std::size_t>(cfg.nx) * nu, 0.0);
        t.quantiles_.assign(t.angles_.size(), 0.0);
        t.row_mass_.assign(cfg.nx, 0.0);
        parallel_for(cfg.nx, threads, [&](std::int64_t i) { t.build_row(static_cast<int>(i), kernel, cfg); });
        return t;
    }

    const QParams& qparams() const noexcept { return qp_; }
    double L() const noexcept { return L_; }
    int n() const noexcept { return n_; }
    double delta() const noexcept { return delta_; }
    const std::vector<double>& x_grid() const noexcept { return x_grid_; }
    const std::vector<double>& u_grid() const noexcept { return ugrid_.levels; }
    int nx() const noexcept { return static_cast<int>(x_grid_.size()); }
    int nu() const noexcept { return static_cast<int>(ugrid_.levels.size()); }
    /// Quantile of p_{0,delta}(x_grid[i], .) at level u_grid[j].
    double quantile(int i, int j) const noexcept { return quantiles_[index(i, j)]; }
    /// The same quantile as an angle theta with y = -L cos(theta).
    double quantile_angle(int i, int j) const noexcept { return angles_[index(i, j)]; }
    /// Kernel mass of row i as integrated during the build (ideally 1).
    double row_mass(int i) const noexcept { return row_mass_[i]; }
    const TableConfig& config() const noexcept { return cfg_; }

    /// Transition step in angle coordinates: bilinear interpolation of the
    /// angle quantile surface at (theta, u), clamped to [0, pi].
    double sample_angle(double theta, double u) const noexcept {
        theta = std::clamp(theta, 0.0, std::numbers::pi);
        const int i = locate_row(theta);
        const double wx = std::clamp((row_coord(theta) - omega_grid_[i]) * inv_domega_[i], 0.0, 1.0);
        const int j = ugrid_.locate(u);
        const double wu = (u - ugrid_.levels[j]) * inv_du_[j];
        const double* r0 = &angles_[index(i, j)];
        const double* r1 = r0 + nu();
        const double v0 = r0[0] + wu * (r0[1] - r0[0]);
        const double v1 = r1[0] + wu * (r1[1] - r1[0]);
        return std::clamp(v0 + wx * (v1 - v0), 0.0, std::numbers::pi);
    }

    const std::vector<double>& theta_grid() const noexcept { return theta_grid_; }

    /// Transition step in state coordinates, |x| <= L; the result lies in [-L, L].
    double sample(double x, double u) const noexcept {
        return detail::support_point(L_, sample_angle(detail::support_angle(L_, x), u));
    }

  private:
    TransitionTable(const QParams& qp, int n, const TableConfig& cfg)
        : qp_(qp), L_(qp.L()), n_(n), delta_(std::ldexp(1.0, -n)), cfg_(cfg), ugrid_(cfg.nu, cfg.tail_floor) {
        constexpr double pi = std::numbers::pi;
        const int nx = cfg.nx;
        // Rows are uniform in theta except for a refined block at each end of
        // width 16 delta (at most pi/6) holding nx/8 rows: next to the
        // boundary the kernel changes shape on the scale delta.
        fine_rows_ = nx >= 32 ? nx / 8 : 0;
        fine_width_ = std::min(16.0 * delta_, pi / 6.0);
        const int coarse = nx - 2 * fine_rows_;
        theta_grid_.resize(nx);
        if (fine_rows_ == 0) {
            for (int i = 0; i < nx; ++i) theta_grid_[i] = pi * i / (nx - 1);
            fine_step_ = 0.0;
            coarse_step_ = pi / (nx - 1);
        } else {
            fine_step_ = fine_width_ / fine_rows_;
            coarse_step_ = (pi - 2.0 * fine_width_) / (coarse - 1);
            for (int i = 0; i < fine_rows_; ++i) {
                theta_grid_[i] = i * fine_step_;
                theta_grid_[nx - 1 - i] = pi - i * fine_step_;
            }
            for (int k = 0; k < coarse; ++k) theta_grid_[fine_rows_ + k] = fine_width_ + k * coarse_step_;
            theta_grid_[fine_rows_ + coarse - 1] = pi - fine_width_;
        }
        theta_grid_.front() = 0.0;
        theta_grid_.back() = pi;
        edge_scale_ = cfg.edge_scale * delta_;
        omega_grid_.resize(nx);
        for (int i = 0; i < nx; ++i) omega_grid_[i] = row_coord(theta_grid_[i]);
        inv_domega_.assign(nx, 0.0);
        for (int i = 0; i + 1 < nx; ++i) inv_domega_[i] = 1.0 / (omega_grid_[i + 1] - omega_grid_[i]);
        x_grid_.resize(nx);
        for (int i = 0; i < nx; ++i) x_grid_[i] = detail::support_point(L_, theta_grid_[i]);
        x_grid_.front() = -L_;
        x_grid_.back() = L_;
        const auto& lv = ugrid_.levels;
        inv_du_.resize(lv.size());
        for (std::size_t j = 0; j + 1 < lv.size(); ++j) inv_du_[j] = 1.0 / (lv[j + 1] - lv[j]);
    }

    /// Row index i with theta_grid[i] <= theta <= theta_grid[i + 1].
    int locate_row(double theta) const noexcept {
        const int last = nx() - 2;
        int i;
        if (fine_rows_ == 0) {
            i = static_cast<int>(theta / coarse_step_);
        } else if (theta < fine_width_) {
            i = static_cast<int>(theta / fine_step_);
        } else if (theta <= std::numbers::pi - fine_width_) {
            i = fine_rows_ + static_cast<int>((theta - fine_width_) / coarse_step_);
        } else {
            i = nx() - 1 - fine_rows_ + static_cast<int>((theta - (std::numbers::pi - fine_width_)) / fine_step_);
        }
        i = std::clamp(i, 0, last);
        while (i > 0 && theta_grid_[i] > theta) --i;
        while (i < last && theta_grid_[i + 1] < theta) ++i;
        return i;
    }

    std::size_t index(int i, int j) const noexcept { return static_cast<std::size_t>(i) * ugrid_.levels.size() + j; }

    /// Interpolation coordinate across rows: sqrt(theta^2 + c^2) on the lower
    /// half and its mirror image on the upper half, c = edge_scale * delta.
    /// The kernel from theta is even in theta about each boundary, so the
    /// quantiles are smooth in this coordinate down to theta = 0.
    double row_coord(double theta) const noexcept {
        constexpr double half_pi = 0.5 * std::numbers::pi;
        const double c2 = edge_scale_ * edge_scale_;
        if (theta <= half_pi) return std::sqrt(theta * theta + c2);
        const double r = std::numbers::pi - theta;
        return 2.0 * std::sqrt(half_pi * half_pi + c2) - std::sqrt(r * r + c2);
    }

    void build_row(int i, const TransitionKernel& kernel, const TableConfig& cfg) {
        const double x = x_grid_[i];
        const double L = L_;
        auto g = [&](double th) { return kernel(x, detail::support_point(L, th)) * L * std::sin(th); };
        const double th_x = theta_grid_[i];
        std::vector<double> pts{0.0};
        if (th_x > 0.0 && th_x < std::numbers::pi) pts.push_back(th_x);
        pts.push_back(std::numbers::pi);
        std::vector<QuadLeaf> leaves;
        try {
            integrate_1d(g, std::span<const double>(pts), cfg.row_quad, &leaves);
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "row x = " << x << ": " << e.what();
            throw Error("build_transition_table", msg.str());
        }
        const std::size_t k = leaves.size();
        std::vector<double> left(k + 1, 0.0), right(k + 1, 0.0);
        for (std::size_t m = 0; m < k; ++m) left[m + 1] = left[m] + leaves[m].value;
        for (std::size_t m = k; m-- > 0;) right[m] = right[m + 1] + leaves[m].value;
        const double total = left[k];
        row_mass_[i] = total;

        const auto& lv = ugrid_.levels;
        double* row = &angles_[index(i, 0)];
        const std::size_t last = lv.size() - 1;
        row[0] = 0.0;
        row[last] = std::numbers::pi;
        for (std::size_t j = 1; j < last; ++j) {
            const double u = lv[j];
            if (u <= 0.5) {
                const double target = u * total;
                // Leaf m with left[m] <= target < left[m + 1].
                std::size_t m = static_cast<std::size_t>(
                    std::upper_bound(left.begin(), left.end(), target) - left.begin());
                m = std::clamp<std::size_t>(m, 1, k) - 1;
                row[j] = detail::solve_in_leaf(g, leaves[m].a, leaves[m].b, leaves[m].value, left[m], target, true,
                                               cfg.root_rel_tol * target);
            } else {
                const double target = (1.0 - u) * total;
                // Leaf m with right[m + 1] <= target < right[m]; right is nonincreasing.
                std::size_t m = k;
                while (m > 0 && right[m - 1] <= target) --m;
                m = std::clamp<std::size_t>(m, 1, k) - 1;
                row[j] = detail::solve_in_leaf(g, leaves[m].a, leaves[m].b, leaves[m].value, right[m + 1], target,
                                               false, cfg.root_rel_tol * target);
            }
        }
        double* qrow = &quantiles_[index(i, 0)];
        for (std::size_t j = 0; j <= last; ++j) {
            if (j > 0) row[j] = std::max(row[j], row[j - 1]);
            qrow[j] = detail::support_point(L, row[j]);
        }
    }

    QParams qp_;
    double L_;
    int n_;
    double delta_;
    TableConfig cfg_;
    detail::UGrid ugrid_;
    std::vector<double> x_grid_;
    std::vector<double> angles_;     // row-major Nx x Nu, quantiles as angles
    std::vector<double> quantiles_;  // the same in state coordinates
    std::vector<double> row_mass_;
    std::vector<double> inv_du_;
    std::vector<double> theta_grid_;
    std::vector<double> omega_grid_;
    std::vector<double> inv_domega_;
    double edge_scale_ = 0.0;
    int fine_rows_ = 0;
    double fine_width_ = 0.0;
    double fine_step_ = 0.0;
    double coarse_step_ = 0.0;
};

inline TransitionTable build_transition_table(const QParams& qp, int n, int nx, int nu,
                                              const TableConfig& base = {}, int threads = 1) {
    TableConfig cfg = base;
    cfg.nx = nx;
    cfg.nu = nu;
    return TransitionTable::build(qp, n, cfg, threads);
}

inline double sample_transition(const TransitionTable& table, double x, double u) { return table.sample(x, u); }

/// Resolution error of the table at source point x: the largest
/// |F(Q(u)) - u| over the midpoints u of all probability cells, where Q is the
/// interpolated table and F the quadrature conditional CDF.
inline double table_cdf_error(const TransitionTable& table, double x, const QuadConfig& cfg = {}) {
    const auto& lv = table.u_grid();
    std::vector<double> us, ys;
    for (std::size_t j = 0; j + 1 < lv.size(); ++j) {
        us.push_back(0.5 * (lv[j] + lv[j + 1]));
        ys.push_back(table.sample(x, us.back()));
    }
    const auto F = conditional_cdf_sorted(table.qparams(), table.delta(), std::clamp(x, -table.L(), table.L()),
                                          std::span<const double>(ys), cfg);
    double worst = 0.0;
    for (std::size_t j = 0; j < us.size(); ++j) worst = std::max(worst, std::abs(F[j] - us[j]));
    return worst;
}

/// The chain observed at times i / 2^n, i = 0 .. horizon 2^n.
struct PathGrid {
    int n = 0;
    std::int64_t horizon = 1;
    std::vector<double> values;
    RngSeed seed;

    std::int64_t steps_per_unit() const noexcept { return std::int64_t{1} << n; }
};

/// Draws X_0 from the stationary law, then one table lookup per step with
/// uniforms from the same stream.  The chain is advanced in angle coordinates
/// (TransitionTable::sample_angle) and each value is mapped back to [-L, L].
inline PathGrid simulate_path(const TransitionTable& table, const StationarySampler& stationary,
                              std::int64_t horizon, const RngSeed& seed) {
    if (horizon < 1) throw InvalidArgument("simulate_path", "horizon must be >= 1");
    PathGrid path;
    path.n = table.n();
    path.horizon = horizon;
    path.seed = seed;
    const std::int64_t steps = horizon * path.steps_per_unit();
    path.values.resize(static_cast<std::size_t>(steps) + 1);
    Rng rng(seed);
    const double L = table.L();
    path.values[0] = stationary(rng);
    double theta = detail::support_angle(L, path.values[0]);
    for (std::int64_t i = 1; i <= steps; ++i) {
        theta = table.sample_angle(theta, rng.uniform());
        path.values[static_cast<std::size_t>(i)] = detail::support_point(L, theta);
    }
    return path;
}

inline PathGrid simulate_path(const TransitionTable& table, std::int64_t horizon, const RngSeed& seed) {
    return simulate_path(table, StationarySampler(table.qparams()), horizon, seed);
}

namespace detail {

/// i / 2^n written exactly in fixed-point decimal with n fractional digits.
inline std::string dyadic_time(std::int64_t i, int n) {
    std::string s = std::to_string(i >> n);
    if (n == 0) return s;
    unsigned __int128 frac = static_cast<unsigned __int128>(i & ((std::int64_t{1} << n) - 1));
    for (int k = 0; k < n; ++k) frac *= 5;
    std::string digits(static_cast<std::size_t>(n), '0');
    for (int k = n - 1; k >= 0; --k) {
        digits[static_cast<std::size_t>(k)] = static_cast<char>('0' + static_cast<int>(frac % 10));
        frac /= 10;
    }
    return s + "." + digits;
}

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

}  // namespace detail

/// CSV with header `t,x`, one row per grid point.
inline void write_path_csv(std::ostream& os, const PathGrid& path) {
    os << "t,x\n";
    for (std::size_t i = 0; i < path.values.size(); ++i)
        os << detail::dyadic_time(static_cast<std::int64_t>(i), path.n) << ',' << detail::format_double(path.values[i])
           << '\n';
}

/// Parses the CSV written by write_path_csv; n and the horizon are recovered
/// from the time column, which must be the exact dyadic grid.
inline PathGrid read_path_csv(std::istream& is) {
    constexpr const char* op = "read_path_csv";
    std::string line;
    if (!std::getline(is, line) || line.substr(0, 3) != "t,x") throw InvalidArgument(op, "missing `t,x` header");
    std::vector<double> ts, xs;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw InvalidArgument(op, "malformed row: " + line);
        double t = 0.0, x = 0.0;
        const char* b = line.data();
        const auto r1 = std::from_chars(b, b + comma, t);
        const auto r2 = std::from_chars(b + comma + 1, b + line.size(), x);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || r2.ptr != b + line.size())
            throw InvalidArgument(op, "malformed row: " + line);
        ts.push_back(t);
        xs.push_back(x);
    }
    if (ts.size() < 2) throw InvalidArgument(op, "a path needs at least two rows");
    const double horizon_d = ts.back();
    const auto horizon = static_cast<std::int64_t>(horizon_d);
    if (horizon < 1 || static_cast<double>(horizon) != horizon_d)
        throw InvalidArgument(op, "final time must be a positive integer");
    const std::int64_t steps = static_cast<std::int64_t>(ts.size()) - 1;
    if (steps % horizon != 0) throw InvalidArgument(op, "row count is not horizon * 2^n + 1");
    const std::int64_t per_unit = steps / horizon;
    int n = 0;
    while ((std::int64_t{1} << n) < per_unit) ++n;
    if ((std::int64_t{1} << n) != per_unit) throw InvalidArgument(op, "steps per unit time is not a power of two");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts[i] != std::ldexp(static_cast<double>(i), -n)) {
            std::ostringstream msg;
            msg << "row " << i + 1 << ": t = " << ts[i] << " is not " << i << "/2^" << n;
            throw InvalidArgument(op, msg.str());
        }
    }
    PathGrid path;
    path.n = n;
    path.horizon = horizon;
    path.values = std::move(xs);
    return path;
}

}  // namespace qou
