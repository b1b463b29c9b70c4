#pragma once

// Small-sample statistics for the experiment harness: summary moments and
// an exact one-sided Mann-Whitney test (every labeling enumerated, so the
// p-value is exact for the tiny group sizes used here).

#include <algorithm>
#include <bit>
#include <cmath>
#include <vector>

#include "matrix.hpp"

namespace rnnlab {

inline double mean(const Vector& v) {
    require(!v.empty(), "mean: empty sample");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// Sample standard deviation (n - 1 denominator); zero for a single point.
inline double sample_std(const Vector& v) {
    require(!v.empty(), "sample_std: empty sample");
    if (v.size() == 1) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double median(Vector v) {
    require(!v.empty(), "median: empty sample");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

// U statistic for the "a" side: pairs where a < b, ties counted half.
inline double mw_u(const std::vector<double>& pool, unsigned a_mask) {
    const int total = static_cast<int>(pool.size());
    double u = 0.0;
    for (int i = 0; i < total; ++i) {
        if (!(a_mask >> i & 1u)) continue;
        for (int j = 0; j < total; ++j) {
            if (a_mask >> j & 1u) continue;
            if (pool[i] < pool[j]) u += 1.0;
            else if (pool[i] == pool[j]) u += 0.5;
        }
    }
    return u;
}

}  // namespace detail

// Exact one-sided Mann-Whitney p-value for the alternative "samples in a
// tend to be smaller than samples in b". Enumerates all C(n+m, n) group
// labelings of the pooled values, so group sizes must stay small
// (n + m <= 24).
inline double mann_whitney_p_less(const Vector& a, const Vector& b) {
    const int n = static_cast<int>(a.size());
    const int m = static_cast<int>(b.size());
    require(n >= 1 && m >= 1, "mann_whitney_p_less: empty group");
    require(n + m <= 24, "mann_whitney_p_less: exact enumeration limited to n+m <= 24");

    std::vector<double> pool;
    pool.reserve(n + m);
    pool.insert(pool.end(), a.begin(), a.end());
    pool.insert(pool.end(), b.begin(), b.end());

    const unsigned observed_mask = (1u << n) - 1u;
    const double u_obs = detail::mw_u(pool, observed_mask);

    long count = 0, total = 0;
    const unsigned limit = 1u << (n + m);
    for (unsigned mask = 0; mask < limit; ++mask) {
        if (std::popcount(mask) != n) continue;
        ++total;
        if (detail::mw_u(pool, mask) >= u_obs) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace rnnlab
