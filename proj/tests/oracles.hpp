#pragma once

// Reference computations used only by the tests. They are written from the
// definitions, without the shortcuts used by the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mclust/util/matrix.hpp"

namespace oracle {

using mclust::Matrix;

// M_s as the literal quadruple sum over firm pairs and other securities.
inline std::vector<long long> motifs_literal(const Matrix<std::uint8_t>& a) {
    const std::size_t ns = a.rows(), nf = a.cols();
    std::vector<long long> m(ns, 0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f + 1 < nf; ++f)
            for (std::size_t g = f + 1; g < nf; ++g)
                for (std::size_t t = 0; t < ns; ++t)
                    if (t != s) m[s] += a(s, f) * a(s, g) * a(t, f) * a(t, g);
    return m;
}

// <M_s> as the literal expectation of the quadruple sum under independent edges.
inline std::vector<double> expected_motifs_literal(const Matrix<double>& p) {
    const std::size_t ns = p.rows(), nf = p.cols();
    std::vector<double> m(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f + 1 < nf; ++f)
            for (std::size_t g = f + 1; g < nf; ++g)
                for (std::size_t t = 0; t < ns; ++t)
                    if (t != s) m[s] += p(s, f) * p(s, g) * p(t, f) * p(t, g);
    return m;
}

// Fraction of values <= x.
inline double ecdf(const std::vector<double>& xs, double x) {
    std::size_t c = 0;
    for (double v : xs) c += v <= x;
    return static_cast<double>(c) / static_cast<double>(xs.size());
}

inline double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> pts(a);
    pts.insert(pts.end(), b.begin(), b.end());
    double d = 0.0;
    for (double x : pts) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
    return d;
}

// Permutation p-values. The pooled sample is sorted once; each draw only
// shuffles group labels.
struct PermutationOracle {
    std::vector<double> pooled;      // sorted
    std::vector<double> midrank;     // of pooled
    std::size_t na = 0, nb = 0;

    PermutationOracle(const std::vector<double>& a, const std::vector<double>& b) : na(a.size()), nb(b.size()) {
        pooled = a;
        pooled.insert(pooled.end(), b.begin(), b.end());
        std::sort(pooled.begin(), pooled.end());
        midrank.resize(pooled.size());
        for (std::size_t i = 0; i < pooled.size();) {
            std::size_t j = i;
            while (j + 1 < pooled.size() && pooled[j + 1] == pooled[i]) ++j;
            for (std::size_t k = i; k <= j; ++k) midrank[k] = 0.5 * static_cast<double>(i + j) + 1.0;
            i = j + 1;
        }
    }

    // labels[i] = true when pooled[i] belongs to b.
    double ks(const std::vector<bool>& labels) const {
        double ca = 0, cb = 0, d = 0;
        for (std::size_t i = 0; i < pooled.size();) {
            std::size_t j = i;
            while (j < pooled.size() && pooled[j] == pooled[i]) {
                (labels[j] ? cb : ca) += 1;
                ++j;
            }
            d = std::max(d, std::abs(ca / static_cast<double>(na) - cb / static_cast<double>(nb)));
            i = j;
        }
        return d;
    }

    double mww_deviation(const std::vector<bool>& labels) const {
        double rb = 0;
        for (std::size_t i = 0; i < pooled.size(); ++i)
            if (labels[i]) rb += midrank[i];
        const double u = rb - static_cast<double>(nb) * (static_cast<double>(nb) + 1) / 2;
        return std::abs(u - static_cast<double>(na) * static_cast<double>(nb) / 2);
    }

    std::vector<bool> labels_of(const std::vector<double>& b) const {
        // Assign b's values to matching pooled slots.
        std::vector<bool> labels(pooled.size(), false);
        std::vector<double> sb(b);
        std::sort(sb.begin(), sb.end());
        std::size_t i = 0;
        for (double v : sb) {
            while (pooled[i] != v || labels[i]) ++i;
            labels[i] = true;
        }
        return labels;
    }

    template <typename Stat>
    double p_value(const std::vector<double>& b, std::size_t draws, std::uint64_t seed, Stat stat) const {
        const double observed = stat(labels_of(b));
        std::vector<bool> labels(pooled.size(), false);
        std::fill(labels.begin() + static_cast<std::ptrdiff_t>(na), labels.end(), true);
        std::mt19937_64 gen(seed);
        std::size_t hits = 0;
        for (std::size_t d = 0; d < draws; ++d) {
            std::shuffle(labels.begin(), labels.end(), gen);
            if (stat(labels) >= observed - 1e-12) ++hits;
        }
        return static_cast<double>(hits) / static_cast<double>(draws);
    }

    double ks_p(const std::vector<double>& b, std::size_t draws, std::uint64_t seed) const {
        return p_value(b, draws, seed, [this](const std::vector<bool>& l) { return ks(l); });
    }
    double mww_p(const std::vector<double>& b, std::size_t draws, std::uint64_t seed) const {
        return p_value(b, draws, seed, [this](const std::vector<bool>& l) { return mww_deviation(l); });
    }
};

// Tercile membership by an explicit sort of (score, id) pairs: -1 low, 0 middle, +1 high.
inline std::vector<std::pair<std::string, int>> terciles(std::vector<std::pair<double, std::string>> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size(), third = n / 3;
    std::vector<std::pair<std::string, int>> out;
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(xs[i].second, i < third ? -1 : (i + third >= n ? 1 : 0));
    std::sort(out.begin(), out.end());
    return out;
}

// Sample moments from their definitions.
inline double central_moment(const std::vector<double>& x, int k) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double s = 0;
    for (double v : x) s += std::pow(v - m, k);
    return s / static_cast<double>(x.size());
}

}  // namespace oracle
