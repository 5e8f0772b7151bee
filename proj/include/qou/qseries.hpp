#pragma once

// Infinite q-products and the kernel factor functions of the q-Ornstein-Uhlenbeck
// process.  All products converge geometrically in |q|; truncation is decided
// a priori from the bound |log f_k| <= 2 c |q|^k, valid once c |q|^k <= 1/2,
// where c bounds the deviation |f_k - 1| <= c |q|^k of the k-th factor.

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qou/error.hpp"

namespace qou {

struct SeriesConfig {
    double tol = 1e-12;    // absolute bound on the neglected log-tail
    int max_terms = 10000;

    void validate(const char* op) const {
        if (!(tol > 0.0)) throw InvalidArgument(op, "SeriesConfig.tol must be > 0");
        if (max_terms < 1) throw InvalidArgument(op, "SeriesConfig.max_terms must be >= 1");
    }
};

namespace detail {

/// Smallest K >= first such that the log-tail of factors k >= K is below
/// cfg.tol, given |f_k - 1| <= dev * |q|^k.
inline int terms_needed(double abs_q, double dev, int first, const SeriesConfig& cfg,
                        const char* op) {
    if (dev == 0.0) return first;
    double pw = std::pow(abs_q, first);
    int k = first;
    while (true) {
        const double tail = 2.0 * dev * pw / (1.0 - abs_q);
        if (dev * pw <= 0.5 && tail < cfg.tol) return k;
        if (k - first >= cfg.max_terms) {
            std::ostringstream msg;
            msg << "tail bound " << tail << " exceeds tol " << cfg.tol << " after "
                << cfg.max_terms << " terms (|q| = " << abs_q << ")";
            throw NonConvergent(op, msg.str());
        }
        pw *= abs_q;
        ++k;
    }
}

}  // namespace detail

/// (a;q)_inf = prod_{k>=0} (1 - a q^k).
inline double qpochhammer_inf(double a, double q, const SeriesConfig& cfg = {}) {
    constexpr const char* op = "qpochhammer_inf";
    cfg.validate(op);
    if (!(std::abs(q) < 1.0)) throw DomainError(op, "q must lie in the open interval (-1, 1)");
    if (!std::isfinite(a)) throw DomainError(op, "a must be finite");
    const int terms = detail::terms_needed(std::abs(q), std::abs(a), 0, cfg, op);

    bool all_positive = true;
    double pw = 1.0;
    for (int k = 0; k < terms; ++k, pw *= q) {
        if (1.0 - a * pw <= 0.0) {
            all_positive = false;
            break;
        }
    }
    pw = 1.0;
    if (all_positive) {
        double log_sum = 0.0;
        for (int k = 0; k < terms; ++k, pw *= q) log_sum += std::log1p(-a * pw);
        return std::exp(log_sum);
    }
    double prod = 1.0;
    for (int k = 0; k < terms; ++k, pw *= q) prod *= 1.0 - a * pw;
    return prod;
}

class QParams;
inline double qpochhammer_inf(double a, const QParams& qp, const SeriesConfig& cfg = {});

/// Model parameter q with the support half-width L = 2/sqrt(1-q) and (q;q)_inf.
class QParams {
  public:
    explicit QParams(double q, const SeriesConfig& cfg = {}) : q_(q) {
        if (!(q > -1.0 && q < 1.0)) {
            std::ostringstream msg;
            msg << "q = " << q << " is outside the open interval (-1, 1)";
            throw DomainError("QParams", msg.str());
        }
        sqrt_one_minus_q_ = std::sqrt(1.0 - q);
        L_ = 2.0 / sqrt_one_minus_q_;
        qq_inf_ = qpochhammer_inf(q, q, cfg);
    }

    double q() const noexcept { return q_; }
    double L() const noexcept { return L_; }
    double sqrt_one_minus_q() const noexcept { return sqrt_one_minus_q_; }
    /// (q;q)_inf
    double qq_inf() const noexcept { return qq_inf_; }

    bool in_support(double x) const noexcept { return std::abs(x) <= L_; }

  private:
    double q_;
    double sqrt_one_minus_q_;
    double L_;
    double qq_inf_;
};

inline double qpochhammer_inf(double a, const QParams& qp, const SeriesConfig& cfg) {
    return qpochhammer_inf(a, qp.q(), cfg);
}

/// Poisson limit parameter
///   alpha_q = (1 - q)^{3/2} / (18 pi^2) * prod_{k>=1} (1 - q^k)^7 / (1 + q^k)^4.
/// Each factor is combined before accumulation so that alternating signs of
/// q^k for q < 0 cancel term by term.
inline double alpha_q(const QParams& qp, const SeriesConfig& cfg = {}) {
    constexpr const char* op = "alpha_q";
    cfg.validate(op);
    const double q = qp.q();
    const int terms = detail::terms_needed(std::abs(q), 11.0, 1, cfg, op);
    double log_sum = 0.0;
    double pw = q;
    for (int k = 1; k < terms; ++k, pw *= q)
        log_sum += 7.0 * std::log1p(-pw) - 4.0 * std::log1p(pw);
    const double one_minus_q = 1.0 - q;
    return one_minus_q * std::sqrt(one_minus_q) / (18.0 * std::numbers::pi * std::numbers::pi) *
           std::exp(log_sum);
}

namespace detail {

inline void check_support(const QParams& qp, double x, const char* op, const char* name) {
    if (!(std::abs(x) <= qp.L())) {
        std::ostringstream msg;
        msg << name << " = " << x << " lies outside the support [-" << qp.L() << ", " << qp.L()
            << "]";
        throw DomainError(op, msg.str());
    }
}

/// L^2 - x y, evaluated without cancellation when x and y share a sign and
/// sit near the same endpoint; symmetric in (x, y) bit for bit.
inline double support_gap(double L, double x, double y) {
    if (x * y <= 0.0) return L * L - x * y;
    const double ax = std::abs(x);
    const double ay = std::abs(y);
    return 0.5 * ((L - ax) * (L + ay) + (L - ay) * (L + ax));
}

/// phi_{q,0}(delta, x, y) in the form
///   e^{-2 delta} [ s (s + (1-q)(L^2 - x y)) + (1-q)(x - y)^2 ],  s = 4 sinh^2(delta/2),
/// which keeps full relative accuracy on the diagonal for small delta.
inline double phi0_stable(double one_minus_q, double L, double exp_m2d, double four_sh2,
                          double x, double y) {
    const double d = x - y;
    return exp_m2d * (four_sh2 * (four_sh2 + one_minus_q * support_gap(L, x, y)) +
                      one_minus_q * d * d);
}

/// Generic factor (1 - a^2)^2 - (1-q) a (1 + a^2) x y + (1-q) a^2 (x^2 + y^2).
inline double phi_general(double one_minus_q, double a, double x, double y) {
    const double a2 = a * a;
    const double om = 1.0 - a2;
    return om * om - one_minus_q * a * (1.0 + a2) * (x * y) +
           one_minus_q * a2 * (x * x + y * y);
}

/// The same factor minus one, for log1p accumulation.
inline double phi_general_minus_one(double one_minus_q, double a, double x, double y) {
    const double a2 = a * a;
    return a2 * (a2 - 2.0) - one_minus_q * a * (1.0 + a2) * (x * y) +
           one_minus_q * a2 * (x * x + y * y);
}

}  // namespace detail

/// phi_{q,k}(delta, x, y), the k-th factor of the transition-kernel denominator.
inline double phi(const QParams& qp, int k, double delta, double x, double y) {
    constexpr const char* op = "phi";
    if (k < 0) throw InvalidArgument(op, "k must be >= 0");
    if (!(delta > 0.0)) throw DomainError(op, "delta must be > 0");
    detail::check_support(qp, x, op, "x");
    detail::check_support(qp, y, op, "y");
    const double one_minus_q = 1.0 - qp.q();
    if (k == 0) {
        const double sh = std::sinh(0.5 * delta);
        return detail::phi0_stable(one_minus_q, qp.L(), std::exp(-2.0 * delta), 4.0 * sh * sh,
                                   x, y);
    }
    const double a = std::exp(-delta) * std::pow(qp.q(), k);
    return detail::phi_general(one_minus_q, a, x, y);
}

/// psi_{q,k}(y1, y2): the delta -> 0 limit of phi_{q,k}.
inline double psi(const QParams& qp, int k, double y1, double y2) {
    constexpr const char* op = "psi";
    if (k < 0) throw InvalidArgument(op, "k must be >= 0");
    detail::check_support(qp, y1, op, "y1");
    detail::check_support(qp, y2, op, "y2");
    const double one_minus_q = 1.0 - qp.q();
    if (k == 0) {
        const double d = y1 - y2;
        return one_minus_q * d * d;
    }
    return detail::phi_general(one_minus_q, std::pow(qp.q(), k), y1, y2);
}

/// Psi_q(y1, y2) = prod_{k>=0} 1 / psi_{q,k}(y1, y2).
inline double Psi_inf(const QParams& qp, double y1, double y2, const SeriesConfig& cfg = {}) {
    constexpr const char* op = "Psi_inf";
    cfg.validate(op);
    detail::check_support(qp, y1, op, "y1");
    detail::check_support(qp, y2, op, "y2");
    const double q = qp.q();
    const double one_minus_q = 1.0 - q;
    const double d = y1 - y2;
    const double psi0 = one_minus_q * d * d;
    if (psi0 == 0.0) {
        std::ostringstream msg;
        msg << "psi_{q,0}(y1, y2) vanishes on the diagonal y1 = y2 = " << y1;
        throw SingularInput(op, msg.str());
    }
    const int terms = detail::terms_needed(std::abs(q), 19.0, 1, cfg, op);
    double log_sum = 0.0;
    double pw = q;
    for (int k = 1; k < terms; ++k, pw *= q)
        log_sum += std::log1p(detail::phi_general_minus_one(one_minus_q, pw, y1, y2));
    return std::exp(-log_sum) / psi0;
}

/// Precomputed factors of prod_{k>=0} 1/phi_{q,k}(delta, x, y) for a fixed
/// (q, delta).  Immutable; safe to share between threads.
class KernelProduct {
  public:
    /// Above this many active factors the product is accumulated in log domain.
    static constexpr int kLinearTermLimit = 50;

    KernelProduct(const QParams& qp, double delta, const SeriesConfig& cfg = {})
        : one_minus_q_(1.0 - qp.q()), L_(qp.L()), delta_(delta) {
        constexpr const char* op = "KernelProduct";
        cfg.validate(op);
        if (!(delta > 0.0)) throw DomainError(op, "delta must be > 0");
        exp_m2d_ = std::exp(-2.0 * delta);
        const double sh = std::sinh(0.5 * delta);
        four_sh2_ = 4.0 * sh * sh;
        const int terms = detail::terms_needed(std::abs(qp.q()), 19.0 * std::exp(-delta), 1, cfg, op);
        const double e = std::exp(-delta);
        double pw = qp.q();
        for (int k = 1; k < terms; ++k, pw *= qp.q()) a_.push_back(e * pw);
    }

    double delta() const noexcept { return delta_; }
    int active_terms() const noexcept { return static_cast<int>(a_.size()) + 1; }

    /// prod_{k>=0} 1/phi_{q,k}(delta, x, y); caller guarantees |x|, |y| <= L.
    double inverse(double x, double y) const noexcept {
        const double phi0 = detail::phi0_stable(one_minus_q_, L_, exp_m2d_, four_sh2_, x, y);
        if (active_terms() <= kLinearTermLimit) {
            double prod = phi0;
            for (double a : a_) prod *= detail::phi_general(one_minus_q_, a, x, y);
            return 1.0 / prod;
        }
        double log_sum = 0.0;
        for (double a : a_) log_sum += std::log1p(detail::phi_general_minus_one(one_minus_q_, a, x, y));
        return std::exp(-log_sum) / phi0;
    }

  private:
    double one_minus_q_;
    double L_;
    double delta_;
    double exp_m2d_ = 0.0;
    double four_sh2_ = 0.0;
    std::vector<double> a_;  // e^{-delta} q^k, k >= 1
};

}  // namespace qou
