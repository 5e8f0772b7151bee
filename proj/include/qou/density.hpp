#pragma once

// Stationary marginal density and transition density of the q-Ornstein-Uhlenbeck
// process, and the quantities derived from them by quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "qou/error.hpp"
#include "qou/numerics.hpp"
#include "qou/qseries.hpp"

namespace qou {

/// A state-space point with the density value there.
struct DensityPoint {
    double x;
    double value;
};

/// Arguments of p_{0,t}(x, y); only the elapsed time t enters the kernel.
struct TransitionQuery {
    double t;
    double x;
    double y;
};

/// p(x) = sqrt(1-q) (q)_inf / (2 pi) * sqrt(4 - (1-q) x^2) * prod_{k>=1} [(1+q^k)^2 - (1-q) x^2 q^k]
/// with the product factors and constants cached for one q.
class MarginalDensity {
  public:
    static constexpr int kLinearTermLimit = 50;

    explicit MarginalDensity(const QParams& qp, const SeriesConfig& cfg = {})
        : q_(qp.q()), L_(qp.L()), s_(qp.sqrt_one_minus_q()) {
        cfg.validate("marginal_pdf");
        prefactor_ = s_ * qp.qq_inf() / (2.0 * std::numbers::pi);
        const int terms = detail::terms_needed(std::abs(q_), 7.0, 1, cfg, "marginal_pdf");
        double pw = q_;
        for (int k = 1; k < terms; ++k, pw *= q_) qk_.push_back(pw);
    }

    double L() const noexcept { return L_; }

    /// Zero outside (-L, L).
    double operator()(double x) const noexcept {
        const double ax = std::abs(x);
        if (!(ax < L_)) return 0.0;
        const double edge = s_ * std::sqrt((L_ - ax) * (L_ + ax));  // sqrt(4 - (1-q) x^2)
        const double c = (1.0 - q_) * x * x;
        if (static_cast<int>(qk_.size()) < kLinearTermLimit) {
            double prod = 1.0;
            for (double a : qk_) prod *= 1.0 + a * (2.0 + a - c);
            return prefactor_ * edge * prod;
        }
        double log_sum = 0.0;
        for (double a : qk_) log_sum += std::log1p(a * (2.0 + a - c));
        return prefactor_ * edge * std::exp(log_sum);
    }

  private:
    double q_;
    double L_;
    double s_;
    double prefactor_ = 0.0;
    std::vector<double> qk_;  // q^k, k >= 1
};

/// p_{0,t}(x, y) = (e^{-2t}; q)_inf * prod_k 1/phi_{q,k}(t, x, y) * p(y) for one (q, t).
class TransitionKernel {
  public:
    TransitionKernel(const QParams& qp, double t, const SeriesConfig& cfg = {})
        : marginal_(qp, cfg), product_(qp, t, cfg), t_(t) {
        front_ = qpochhammer_inf(std::exp(-2.0 * t), qp, cfg);
    }

    double t() const noexcept { return t_; }
    const MarginalDensity& marginal() const noexcept { return marginal_; }

    /// p_{0,t}(x, y) / p(y); requires |x|, |y| <= L.
    double ratio(double x, double y) const noexcept { return front_ * product_.inverse(x, y); }

    /// p_{0,t}(x, y); requires |x| <= L, zero for y outside the open support.
    double operator()(double x, double y) const noexcept {
        const double py = marginal_(y);
        if (py == 0.0) return 0.0;
        return ratio(x, y) * py;
    }

  private:
    MarginalDensity marginal_;
    KernelProduct product_;
    double t_;
    double front_ = 0.0;
};

namespace detail {

/// y = -L cos(theta) written so that the distance to the nearer endpoint keeps
/// full relative precision.
inline double support_point(double L, double theta) {
    if (theta <= 0.5 * std::numbers::pi) {
        const double s = std::sin(0.5 * theta);
        return -L + 2.0 * L * s * s;
    }
    const double c = std::cos(0.5 * theta);
    return L - 2.0 * L * c * c;
}

inline double support_angle(double L, double y) {
    return std::acos(std::clamp(-y / L, -1.0, 1.0));
}

/// Integral of f over [y_lo, y_hi] within the support using y = -L cos(theta);
/// the Jacobian L sin(theta) absorbs the sqrt endpoint behaviour of p.  Extra
/// breakpoints (peaks of f) are given in y.
template <class F>
QuadResult integrate_support(F&& f, double L, double y_lo, double y_hi,
                             std::initializer_list<double> peaks, const QuadConfig& cfg,
                             std::vector<QuadLeaf>* leaves = nullptr) {
    const double th_lo = support_angle(L, y_lo);
    const double th_hi = support_angle(L, y_hi);
    std::vector<double> pts{th_lo};
    std::vector<double> inner;
    for (double p : peaks) {
        const double th = support_angle(L, p);
        if (th > th_lo && th < th_hi) inner.push_back(th);
    }
    std::sort(inner.begin(), inner.end());
    for (double th : inner)
        if (th > pts.back()) pts.push_back(th);
    if (th_hi > pts.back()) pts.push_back(th_hi);
    if (pts.size() < 2) return {};
    return integrate_1d(
        [&](double th) { return f(support_point(L, th)) * L * std::sin(th); },
        std::span<const double>(pts), cfg, leaves);
}

inline void check_time(double t, const char* op) {
    if (!(t > 0.0) || !std::isfinite(t)) {
        std::ostringstream msg;
        msg << "elapsed time t = " << t << " must be finite and > 0";
        throw DomainError(op, msg.str());
    }
}

}  // namespace detail

inline double marginal_pdf(const QParams& qp, double x, const SeriesConfig& cfg = {}) {
    return MarginalDensity(qp, cfg)(x);
}

inline double transition_pdf(const QParams& qp, const TransitionQuery& query,
                             const SeriesConfig& cfg = {}) {
    constexpr const char* op = "transition_pdf";
    detail::check_time(query.t, op);
    detail::check_support(qp, query.x, op, "x");
    detail::check_support(qp, query.y, op, "y");
    return TransitionKernel(qp, query.t, cfg)(query.x, query.y);
}

/// P(X <= x) under the stationary law, by edge-substituted quadrature from the
/// nearer endpoint.
inline double marginal_cdf(const QParams& qp, double x, const QuadConfig& cfg = {},
                           const SeriesConfig& scfg = {}) {
    const double L = qp.L();
    if (x <= -L) return 0.0;
    if (x >= L) return 1.0;
    const MarginalDensity p(qp, scfg);
    double value;
    if (x <= 0.0) {
        value = integrate_edge(p, Endpoint::lower, x + L, qp, cfg).value;
    } else {
        value = 1.0 - integrate_edge(p, Endpoint::upper, L - x, qp, cfg).value;
    }
    return std::clamp(value, 0.0, 1.0);
}

/// P(X_t <= y | X_0 = x).
inline double conditional_cdf(const QParams& qp, double t, double x, double y,
                              const QuadConfig& cfg = {}, const SeriesConfig& scfg = {}) {
    constexpr const char* op = "conditional_cdf";
    detail::check_time(t, op);
    detail::check_support(qp, x, op, "x");
    const double L = qp.L();
    if (y <= -L) return 0.0;
    if (y >= L) y = L;
    const TransitionKernel kernel(qp, t, scfg);
    const auto r = detail::integrate_support([&](double z) { return kernel(x, z); }, L, -L, y,
                                             {x}, cfg);
    return std::clamp(r.value, 0.0, 1.0);
}

namespace detail {

/// CDF values at nondecreasing points ys by accumulating integrals of f over
/// consecutive gaps, starting from -L.
template <class F>
std::vector<double> cumulative_support(F&& f, double L, std::span<const double> ys, double peak,
                                       const QuadConfig& cfg, const char* op) {
    std::vector<double> out(ys.size());
    double acc = 0.0;
    double prev = -L;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        if (i > 0 && ys[i] < ys[i - 1]) throw InvalidArgument(op, "points must be sorted");
        const double y = std::clamp(ys[i], -L, L);
        if (y > prev) {
            acc += integrate_support(f, L, prev, y, {peak}, cfg).value;
            prev = y;
        }
        out[i] = std::clamp(acc, 0.0, 1.0);
    }
    return out;
}

}  // namespace detail

/// marginal_cdf at each of the sorted points ys, in one left-to-right pass.
inline std::vector<double> marginal_cdf_sorted(const QParams& qp, std::span<const double> ys,
                                               const QuadConfig& cfg = {}, const SeriesConfig& scfg = {}) {
    const MarginalDensity p(qp, scfg);
    return detail::cumulative_support(p, qp.L(), ys, 0.0, cfg, "marginal_cdf_sorted");
}

/// conditional_cdf(qp, t, x, y) at each of the sorted points ys, in one pass.
inline std::vector<double> conditional_cdf_sorted(const QParams& qp, double t, double x,
                                                  std::span<const double> ys, const QuadConfig& cfg = {},
                                                  const SeriesConfig& scfg = {}) {
    constexpr const char* op = "conditional_cdf_sorted";
    detail::check_time(t, op);
    detail::check_support(qp, x, op, "x");
    const TransitionKernel kernel(qp, t, scfg);
    return detail::cumulative_support([&](double z) { return kernel(x, z); }, qp.L(), ys, x, cfg, op);
}

/// E X^r under the stationary law.
inline double moment(const QParams& qp, int r, const QuadConfig& cfg = {},
                     const SeriesConfig& scfg = {}) {
    if (r < 0) throw InvalidArgument("moment", "order r must be >= 0");
    const MarginalDensity p(qp, scfg);
    const double L = qp.L();
    return detail::integrate_support([&](double y) { return std::pow(y, r) * p(y); }, L, -L, L,
                                     {0.0}, cfg)
        .value;
}

/// |int p_{0,s}(x, z) p_{0,t}(z, y) dz - p_{0,s+t}(x, y)|
inline double chapman_kolmogorov_residual(const QParams& qp, double s, double t, double x,
                                          double y, const QuadConfig& cfg = {},
                                          const SeriesConfig& scfg = {}) {
    constexpr const char* op = "chapman_kolmogorov_residual";
    detail::check_time(s, op);
    detail::check_time(t, op);
    detail::check_support(qp, x, op, "x");
    detail::check_support(qp, y, op, "y");
    const TransitionKernel first(qp, s, scfg);
    const TransitionKernel second(qp, t, scfg);
    const TransitionKernel direct(qp, s + t, scfg);
    const double L = qp.L();
    const auto composed = detail::integrate_support(
        [&](double z) {
            const double a = first(x, z);
            return a == 0.0 ? 0.0 : a * second(z, y);
        },
        L, -L, L, {x, y}, cfg);
    return std::abs(composed.value - direct(x, y));
}

/// Sharp upper bound of p_{0,t}(x, y)/p(y):  (e^{-2t}; q)_inf / (e^{-t}; q)_inf^4.
inline double ratio_upper_bound(const QParams& qp, double t, const SeriesConfig& cfg = {}) {
    detail::check_time(t, "ratio_upper_bound");
    const double e = qpochhammer_inf(std::exp(-t), qp, cfg);
    return qpochhammer_inf(std::exp(-2.0 * t), qp, cfg) / (e * e * e * e);
}

/// Lower bound C(x, rho, q) of p_{0,t}(x, y)/p(y), rho = e^{-t}, obtained by
/// replacing every phi_{q,k} with its maximum over y in the support:
///   (1 + rho^2 q^{2k})^2 + 2 sqrt(1-q) (1 + rho^2 q^{2k}) |x rho q^k| + (1-q) rho^2 x^2 q^{2k}.
inline double ratio_lower_bound(const QParams& qp, double x, double rho,
                                const SeriesConfig& cfg = {}) {
    constexpr const char* op = "ratio_lower_bound";
    detail::check_support(qp, x, op, "x");
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError(op, "rho must lie in (0, 1)");
    const double q = qp.q();
    const double one_minus_q = 1.0 - q;
    const int terms = detail::terms_needed(std::abs(q), 19.0, 0, cfg, op);
    double log_sum = 0.0;
    double pw = 1.0;
    for (int k = 0; k < terms; ++k, pw *= q) {
        const double a = rho * pw;
        const double a2 = a * a;
        log_sum += std::log1p(a2 * (2.0 + a2) + 2.0 * qp.sqrt_one_minus_q() * (1.0 + a2) * std::abs(x * a) +
                              one_minus_q * a2 * x * x);
    }
    return qpochhammer_inf(rho * rho, qp, cfg) * std::exp(-log_sum);
}

/// The same construction with the cross term written as
///   2 (1-q) (1 + rho^2 q^k) |x rho q^{2k}|.
/// It coincides with ratio_lower_bound at q = 0 and is reported for comparison;
/// it is not a valid lower bound for q > 0.
inline double ratio_lower_bound_q2k(const QParams& qp, double x, double rho,
                                    const SeriesConfig& cfg = {}) {
    constexpr const char* op = "ratio_lower_bound_q2k";
    detail::check_support(qp, x, op, "x");
    if (!(rho > 0.0 && rho < 1.0)) throw DomainError(op, "rho must lie in (0, 1)");
    const double q = qp.q();
    const double one_minus_q = 1.0 - q;
    const int terms = detail::terms_needed(std::abs(q), 19.0, 0, cfg, op);
    double log_sum = 0.0;
    double pw = 1.0;
    for (int k = 0; k < terms; ++k, pw *= q) {
        const double r2qk = rho * rho * pw;
        const double r2q2k = r2qk * pw;
        log_sum += std::log1p(r2q2k * (2.0 + r2q2k) +
                              2.0 * one_minus_q * (1.0 + r2qk) * std::abs(x * rho * pw * pw) +
                              one_minus_q * r2q2k * x * x);
    }
    return qpochhammer_inf(rho * rho, qp, cfg) * std::exp(-log_sum);
}

}  // namespace qou
