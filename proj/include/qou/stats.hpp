#pragma once

// Goodness-of-fit and summary statistics used by the sampler checks and the
// Monte Carlo experiments.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "qou/error.hpp"

namespace qou::stats {

/// Two-sided Kolmogorov-Smirnov statistic sup |F_N - F| for sorted samples,
/// given F at each sample.
inline double ks_statistic(std::span<const double> cdf_at_sorted_samples) {
    const auto n = static_cast<double>(cdf_at_sorted_samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < cdf_at_sorted_samples.size(); ++i) {
        const double f = cdf_at_sorted_samples[i];
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

/// KS statistic of raw samples against a CDF callable.
template <class Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
    std::sort(samples.begin(), samples.end());
    std::vector<double> f(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) f[i] = cdf(samples[i]);
    return ks_statistic(std::span<const double>(f));
}

/// Critical value of the two-sided KS test at the 0.1% level, large-N form.
inline double ks_critical_0001(std::size_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

inline double binomial_stderr(double p, std::int64_t trials) {
    if (trials <= 0) return 0.0;
    return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(trials));
}

/// One-sided 95% upper bound on a probability after zero events in `trials`.
inline double rule_of_three(std::int64_t trials) { return 3.0 / static_cast<double>(trials); }

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

/// Least-squares slope of y on x.
inline double ls_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("ls_slope", "need >= 2 paired points");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

/// Histogram of nonnegative integer counts: hist[k] = #{i : w[i] = k}.
inline std::vector<std::int64_t> histogram(std::span<const std::int64_t> w) {
    std::int64_t top = 0;
    for (auto v : w) {
        if (v < 0) throw InvalidArgument("histogram", "counts must be >= 0");
        top = std::max(top, v);
    }
    std::vector<std::int64_t> h(static_cast<std::size_t>(top) + 1, 0);
    for (auto v : w) ++h[static_cast<std::size_t>(v)];
    return h;
}

/// Total-variation distance between the empirical law of a histogram and Poisson(lambda).
inline double tv_distance_poisson(std::span<const std::int64_t> hist, double lambda) {
    std::int64_t total = 0;
    for (auto h : hist) total += h;
    if (total == 0) throw InvalidArgument("tv_distance_poisson", "empty histogram");
    const boost::math::poisson_distribution<double> pois(std::max(lambda, 1e-300));
    double sum = 0.0;
    double covered = 0.0;
    for (std::size_t k = 0; k < hist.size(); ++k) {
        const double pk = lambda > 0.0 ? boost::math::pdf(pois, static_cast<double>(k)) : (k == 0 ? 1.0 : 0.0);
        covered += pk;
        sum += std::abs(static_cast<double>(hist[k]) / static_cast<double>(total) - pk);
    }
    sum += std::max(0.0, 1.0 - covered);
    return 0.5 * sum;
}

struct ChiSquareResult {
    double statistic = 0.0;
    int bins = 0;
    int df = 0;
    double p_value = 1.0;  // 1 when df < 1: nothing to test
};

/// Pearson goodness of fit of a count histogram to Poisson(lambda) with lambda
/// estimated from the data.  Cells are merged from k = 0 upward until each
/// expected count is at least `min_expected`; the last cell pools the upper
/// tail.  df = cells - 2.
inline ChiSquareResult chi_square_poisson(std::span<const std::int64_t> hist, double lambda,
                                          double min_expected = 5.0) {
    std::int64_t total = 0;
    for (auto h : hist) total += h;
    if (total == 0) throw InvalidArgument("chi_square_poisson", "empty histogram");
    ChiSquareResult res;
    if (!(lambda > 0.0)) return res;
    const boost::math::poisson_distribution<double> pois(lambda);
    const double n = static_cast<double>(total);
    std::vector<double> obs, expct;
    double o = 0.0, e = 0.0;
    for (std::size_t k = 0;; ++k) {
        o += k < hist.size() ? static_cast<double>(hist[k]) : 0.0;
        e += n * boost::math::pdf(pois, static_cast<double>(k));
        const double tail = n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(k)));
        if (tail < min_expected) {
            // The current cell absorbs the rest of the support.
            for (std::size_t j = k + 1; j < hist.size(); ++j) o += static_cast<double>(hist[j]);
            e += tail;
            if (e < min_expected && !obs.empty()) {
                obs.back() += o;
                expct.back() += e;
            } else {
                obs.push_back(o);
                expct.push_back(e);
            }
            break;
        }
        if (e >= min_expected) {
            obs.push_back(o);
            expct.push_back(e);
            o = e = 0.0;
        }
    }
    for (std::size_t i = 0; i < obs.size(); ++i) res.statistic += (obs[i] - expct[i]) * (obs[i] - expct[i]) / expct[i];
    res.bins = static_cast<int>(obs.size());
    res.df = res.bins - 2;
    res.p_value = res.df >= 1 ? boost::math::gamma_q(0.5 * res.df, 0.5 * res.statistic) : 1.0;
    return res;
}

}  // namespace qou::stats
