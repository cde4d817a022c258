#pragma once

// Brute-force maximum-entropy ensemble over all 2^(n_F n_S) configurations of a
// small bipartite graph. The probabilities are obtained by maximizing Shannon
// entropy subject to expected-degree and normalization constraints directly on
// the enumerated configurations (Newton on the convex dual), never using the
// factorized link-probability form. It is the reference the fast solver and the
// motif expectation are checked against.

#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "mclust/market_graph.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/matrix.hpp"

namespace mclust::synth {

inline constexpr std::size_t kEnumerationCellCap = 16;

struct EnsembleEnumeration {
    std::size_t n_firms = 0;
    std::size_t n_securities = 0;
    // Indexed by configuration mask; bit s * n_F + f holds a_sf.
    std::vector<double> probabilities;
    std::vector<double> hamiltonian;  // H(X) = sum_f beta_f d_f(X) + sum_s beta_s d_s(X)
    double log_partition = 0.0;       // ln Z, Z = sum_X exp(-H(X))
    double entropy = 0.0;             // -sum_X P ln P
    std::vector<double> beta_firm;
    std::vector<double> beta_security;
    Matrix<double> marginals;            // P(a_sf = 1), n_S x n_F
    std::vector<double> expected_motifs;  // sum_X P(X) M_s(X)
    double residual = 0.0;                // max |<d> - d_obs|
    std::size_t iterations = 0;

    std::size_t configurations() const noexcept { return probabilities.size(); }
};

// M_s(X) evaluated as the literal nested sum over firm pairs and other securities.
inline void literal_motif_counts(std::uint32_t mask, std::size_t ns, std::size_t nf, std::vector<double>& m) {
    auto a = [&](std::size_t s, std::size_t f) { return (mask >> (s * nf + f)) & 1U; };
    m.assign(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f)
            for (std::size_t g = f + 1; g < nf; ++g) {
                if (!(a(s, f) && a(s, g))) continue;
                for (std::size_t t = 0; t < ns; ++t)
                    if (t != s) m[s] += static_cast<double>(a(t, f) * a(t, g));
            }
}

inline EnsembleEnumeration enumerate_ensemble(const BipartiteSnapshot& snap, double tolerance = 1e-12,
                                              std::size_t max_iterations = 1000) {
    const std::size_t ns = snap.n_securities(), nf = snap.n_firms(), cells = ns * nf;
    if (cells == 0) throw InputError("cannot enumerate an empty snapshot");
    if (cells > kEnumerationCellCap)
        throw InputError("enumeration limited to " + std::to_string(kEnumerationCellCap) + " cells, got " +
                         std::to_string(cells));
    const std::size_t k = nf + ns;
    const std::size_t nconf = std::size_t{1} << cells;

    // Degree vector of every configuration (firms first, then securities),
    // grouped into classes: the weight of a configuration depends on it only
    // through its degrees.
    std::vector<std::uint32_t> class_of(nconf);
    std::vector<std::uint8_t> deg;  // class-major, k entries per class
    std::vector<double> log_count;
    {
        std::unordered_map<std::uint64_t, std::uint32_t> index;
        std::vector<std::uint8_t> d(k);
        std::vector<double> count;
        for (std::size_t x = 0; x < nconf; ++x) {
            std::fill(d.begin(), d.end(), 0);
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t f = 0; f < nf; ++f)
                    if ((x >> (s * nf + f)) & 1U) {
                        ++d[f];
                        ++d[nf + s];
                    }
            std::uint64_t key = 0;
            for (std::size_t i = 0; i < k; ++i) key = key * 17 + d[i];
            auto [it, fresh] = index.emplace(key, static_cast<std::uint32_t>(count.size()));
            if (fresh) {
                count.push_back(0.0);
                deg.insert(deg.end(), d.begin(), d.end());
            }
            count[it->second] += 1.0;
            class_of[x] = it->second;
        }
        for (double c : count) log_count.push_back(std::log(c));
    }
    const std::size_t nclass = log_count.size();
    Eigen::VectorXd target(k);
    for (std::size_t f = 0; f < nf; ++f) target[f] = snap.firm_degrees[f];
    for (std::size_t s = 0; s < ns; ++s) target[nf + s] = snap.security_degrees[s];

    std::vector<double> logw(nclass);
    // Dual objective ln Z(beta) + beta . d_obs, with <d> and Cov(d) on request.
    auto evaluate = [&](const Eigen::VectorXd& beta, Eigen::VectorXd* mean, Eigen::MatrixXd* cov) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < nclass; ++c) {
            double e = log_count[c];
            for (std::size_t i = 0; i < k; ++i) e -= beta[i] * deg[c * k + i];
            logw[c] = e;
            mx = std::max(mx, e);
        }
        double z = 0.0;
        std::vector<double> m(k, 0.0), second(cov ? k * k : 0, 0.0);
        for (std::size_t c = 0; c < nclass; ++c) {
            const double w = std::exp(logw[c] - mx);
            if (w == 0.0) continue;
            z += w;
            const auto* d = &deg[c * k];
            for (std::size_t i = 0; i < k; ++i) {
                if (!d[i]) continue;
                const double wi = w * d[i];
                m[i] += wi;
                if (cov)
                    for (std::size_t j = 0; j <= i; ++j) second[i * k + j] += wi * d[j];
            }
        }
        if (mean)
            for (std::size_t i = 0; i < k; ++i) (*mean)[i] = m[i] / z;
        if (cov)
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j <= i; ++j)
                    (*cov)(i, j) = (*cov)(j, i) = second[i * k + j] / z - (m[i] / z) * (m[j] / z);
        return mx + std::log(z) + beta.dot(target);
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(k), mean(k);
    Eigen::MatrixXd cov(k, k);
    double obj = evaluate(beta, &mean, &cov);
    double residual = (mean - target).cwiseAbs().maxCoeff();
    std::size_t it = 0;
    while (residual > tolerance && it < max_iterations) {
        ++it;
        const Eigen::VectorXd grad = target - mean;
        Eigen::MatrixXd h = cov;
        h.diagonal().array() += 1e-14 + 1e-12 * cov.diagonal().maxCoeff();
        const Eigen::VectorXd step = -h.ldlt().solve(grad);
        // Backtracking on the objective; near divergent directions the
        // objective is flat to rounding, so a shrinking residual also counts.
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
            Eigen::VectorXd trial = beta + t * step;
            Eigen::VectorXd tmean(k);
            const double tobj = evaluate(trial, &tmean, nullptr);
            const double tres = (tmean - target).cwiseAbs().maxCoeff();
            if (std::isfinite(tobj) &&
                (tobj < obj - 1e-4 * t * std::abs(grad.dot(step)) || tres < residual * (1.0 - 1e-4 * t))) {
                beta = trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        obj = evaluate(beta, &mean, &cov);
        residual = (mean - target).cwiseAbs().maxCoeff();
    }

    EnsembleEnumeration e;
    e.n_firms = nf;
    e.n_securities = ns;
    e.residual = residual;
    e.iterations = it;
    e.beta_firm.assign(beta.data(), beta.data() + nf);
    e.beta_security.assign(beta.data() + nf, beta.data() + k);
    // Final distribution.
    double mx = -std::numeric_limits<double>::infinity();
    e.hamiltonian.resize(nconf);
    std::vector<double> class_h(nclass, 0.0);
    for (std::size_t c = 0; c < nclass; ++c)
        for (std::size_t i = 0; i < k; ++i) class_h[c] += beta[i] * deg[c * k + i];
    for (std::size_t x = 0; x < nconf; ++x) {
        e.hamiltonian[x] = class_h[class_of[x]];
        mx = std::max(mx, -e.hamiltonian[x]);
    }
    double z = 0.0;
    for (std::size_t x = 0; x < nconf; ++x) z += std::exp(-e.hamiltonian[x] - mx);
    e.log_partition = mx + std::log(z);
    e.probabilities.resize(nconf);
    e.marginals = Matrix<double>(ns, nf, 0.0);
    e.expected_motifs.assign(ns, 0.0);
    std::vector<double> m;
    for (std::size_t x = 0; x < nconf; ++x) {
        const double p = std::exp(-e.hamiltonian[x] - e.log_partition);
        e.probabilities[x] = p;
        if (p <= 0.0) continue;
        e.entropy -= p * std::log(p);
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t f = 0; f < nf; ++f)
                if ((x >> (s * nf + f)) & 1U) e.marginals(s, f) += p;
        literal_motif_counts(static_cast<std::uint32_t>(x), ns, nf, m);
        for (std::size_t s = 0; s < ns; ++s) e.expected_motifs[s] += p * m[s];
    }
    return e;
}

}  // namespace mclust::synth
