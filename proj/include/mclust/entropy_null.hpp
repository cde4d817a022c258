#pragma once

// Maximum-entropy grandcanonical null model for a binary bipartite graph with
// expected degrees fixed to the observed ones. Link probabilities take the
// factorized form p_sf = x_f x_s / (1 + x_f x_s).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mclust/market_graph.hpp"
#include "mclust/util/error.hpp"
#include "mclust/util/matrix.hpp"
#include "mclust/util/rng.hpp"

namespace mclust {

struct SolverConfig {
    double tolerance = 1e-10;  // max-norm on degree residuals
    std::size_t max_iterations = 100000;
    double damping = 1.0;
    // Multiplies the initial hidden variables by random factors in [0.5, 2].
    // Only used to check that the answer does not depend on the starting point.
    std::optional<std::uint64_t> init_jitter_seed;

    void validate() const {
        if (!(tolerance > 0)) throw UsageError("solver tolerance must be positive");
        if (max_iterations < 1) throw UsageError("solver max_iterations must be >= 1");
        if (!(damping > 0 && damping <= 1)) throw UsageError("solver damping must lie in (0,1]");
    }
};

// Cell state after structural analysis of the degree constraints.
enum class Pin : std::uint8_t { free, zero, one };

struct NullModel {
    // NaN for nodes without any free pair (their probabilities are all pinned).
    std::vector<double> x_firm;
    std::vector<double> x_security;
    Matrix<double> link_prob;  // n_S x n_F
    Matrix<Pin> pins;          // n_S x n_F
    double residual = 0.0;
    std::size_t iterations = 0;

    std::size_t n_firms() const noexcept { return x_firm.size(); }
    std::size_t n_securities() const noexcept { return x_security.size(); }

    // Pairs (s, f) whose probability is forced to exactly one.
    std::vector<std::pair<std::size_t, std::size_t>> forced_ones() const { return pinned(Pin::one); }
    std::vector<std::pair<std::size_t, std::size_t>> forced_zeros() const { return pinned(Pin::zero); }

    // Lagrange multipliers beta = -ln x.
    double beta_firm(std::size_t f) const { return -std::log(x_firm[f]); }
    double beta_security(std::size_t s) const { return -std::log(x_security[s]); }

private:
    std::vector<std::pair<std::size_t, std::size_t>> pinned(Pin which) const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t s = 0; s < pins.rows(); ++s)
            for (std::size_t f = 0; f < pins.cols(); ++f)
                if (pins(s, f) == which) out.emplace_back(s, f);
        return out;
    }
};

// Thrown when the iteration does not reach the tolerance. Carries the best iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, NullModel best)
        : Error(what), best_(std::move(best)) {}
    double best_residual() const noexcept { return best_.residual; }
    const NullModel& best() const noexcept { return best_; }

private:
    NullModel best_;
};

namespace detail {

// A cell is free iff it lies on an alternating cycle of the observed graph:
// existing links oriented security -> firm, absent links firm -> security.
// Cells whose endpoints fall in different strongly connected components take
// the same value in every fractional matrix with the observed margins.
inline Matrix<Pin> structural_pins(const Matrix<std::uint8_t>& adj) {
    const std::size_t ns = adj.rows(), nf = adj.cols(), n = ns + nf;
    // Node ids: securities 0..ns-1, firms ns..n-1.
    auto for_each_succ = [&](std::size_t v, auto&& fn) {
        if (v < ns) {
            for (std::size_t f = 0; f < nf; ++f)
                if (adj(v, f)) fn(ns + f);
        } else {
            const std::size_t f = v - ns;
            for (std::size_t s = 0; s < ns; ++s)
                if (!adj(s, f)) fn(s);
        }
    };
    // Iterative Tarjan.
    constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> index(n, unvisited), low(n, 0), comp(n, unvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> succs(n);
    for (std::size_t v = 0; v < n; ++v) for_each_succ(v, [&](std::size_t w) { succs[v].push_back(w); });
    std::size_t counter = 0, ncomp = 0;
    struct Frame {
        std::size_t v;
        std::size_t next;
    };
    std::vector<Frame> call;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            auto& fr = call.back();
            if (fr.next < succs[fr.v].size()) {
                std::size_t w = succs[fr.v][fr.next++];
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[fr.v] = std::min(low[fr.v], index[w]);
                }
                continue;
            }
            const std::size_t v = fr.v;
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
        }
    }
    Matrix<Pin> pins(ns, nf, Pin::free);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f)
            if (comp[s] != comp[ns + f]) pins(s, f) = adj(s, f) ? Pin::one : Pin::zero;
    return pins;
}

inline double link(double xf, double xs) {
    const double z = xf * xs;
    return z / (1.0 + z);
}

}  // namespace detail

// Solves the degree-constrained maximum-entropy ensemble.
//
// Pairs that are structurally fixed (e.g. every pair incident to a firm that
// trades all securities) are pinned to 0 or 1 first; the remaining pairs are
// fitted by damped fixed-point sweeps over firms and then securities:
//   x_f <- r_f / sum_s x_s / (1 + x_f x_s),
// where r_f is the degree left after pinned ones.
inline NullModel solve_null_model(const BipartiteSnapshot& snap, const SolverConfig& cfg = {}) {
    cfg.validate();
    if (snap.empty()) throw InputError("cannot solve null model for an empty snapshot");
    const std::size_t ns = snap.n_securities(), nf = snap.n_firms();
    for (int d : snap.firm_degrees)
        if (d <= 0) throw InputError("snapshot contains a zero-degree firm");
    for (int d : snap.security_degrees)
        if (d <= 0) throw InputError("snapshot contains a zero-degree security");

    NullModel model;
    model.pins = detail::structural_pins(snap.adjacency);

    // Free-pair adjacency lists and residual degrees.
    std::vector<std::vector<std::uint32_t>> free_of_firm(nf), free_of_sec(ns);
    std::vector<double> rf(nf), rs(ns);
    for (std::size_t f = 0; f < nf; ++f) rf[f] = snap.firm_degrees[f];
    for (std::size_t s = 0; s < ns; ++s) rs[s] = snap.security_degrees[s];
    std::size_t free_links = 0;
    double free_mass = 0.0;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f) {
            switch (model.pins(s, f)) {
                case Pin::one:
                    rf[f] -= 1;
                    rs[s] -= 1;
                    break;
                case Pin::free:
                    free_of_firm[f].push_back(static_cast<std::uint32_t>(s));
                    free_of_sec[s].push_back(static_cast<std::uint32_t>(f));
                    ++free_links;
                    break;
                case Pin::zero: break;
            }
        }
    for (double r : rf) free_mass += r;

    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> xf(nf, nan), xs(ns, nan);
    const double scale = free_mass > 0 ? std::sqrt(free_mass) : 1.0;
    std::optional<Engine> jitter;
    if (cfg.init_jitter_seed) jitter.emplace(make_engine(*cfg.init_jitter_seed, "null-init"));
    std::uniform_real_distribution<double> logu(std::log(0.5), std::log(2.0));
    for (std::size_t f = 0; f < nf; ++f)
        if (!free_of_firm[f].empty()) xf[f] = rf[f] / scale * (jitter ? std::exp(logu(*jitter)) : 1.0);
    for (std::size_t s = 0; s < ns; ++s)
        if (!free_of_sec[s].empty()) xs[s] = rs[s] / scale * (jitter ? std::exp(logu(*jitter)) : 1.0);

    auto residual_of = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double worst = 0.0;
        for (std::size_t f = 0; f < nf; ++f) {
            if (free_of_firm[f].empty()) continue;
            double sum = 0.0;
            for (auto s : free_of_firm[f]) sum += detail::link(a[f], b[s]);
            worst = std::max(worst, std::abs(sum - rf[f]));
        }
        for (std::size_t s = 0; s < ns; ++s) {
            if (free_of_sec[s].empty()) continue;
            double sum = 0.0;
            for (auto f : free_of_sec[s]) sum += detail::link(a[f], b[s]);
            worst = std::max(worst, std::abs(sum - rs[s]));
        }
        return worst;
    };

    double damping = cfg.damping;
    double residual = free_links ? residual_of(xf, xs) : 0.0;
    std::vector<double> best_xf = xf, best_xs = xs;
    double best_residual = residual;
    std::size_t it = 0;
    while (residual > cfg.tolerance && it < cfg.max_iterations) {
        ++it;
        for (std::size_t f = 0; f < nf; ++f) {
            if (free_of_firm[f].empty()) continue;
            double denom = 0.0;
            for (auto s : free_of_firm[f]) denom += xs[s] / (1.0 + xf[f] * xs[s]);
            const double target = rf[f] / denom;
            xf[f] = damping == 1.0 ? target : (1.0 - damping) * xf[f] + damping * target;
        }
        for (std::size_t s = 0; s < ns; ++s) {
            if (free_of_sec[s].empty()) continue;
            double denom = 0.0;
            for (auto f : free_of_sec[s]) denom += xf[f] / (1.0 + xf[f] * xs[s]);
            const double target = rs[s] / denom;
            xs[s] = damping == 1.0 ? target : (1.0 - damping) * xs[s] + damping * target;
        }
        const double next = residual_of(xf, xs);
        if (!std::isfinite(next)) break;
        // Growing residual signals oscillation.
        if (next > residual && damping > 1.0 / 1024) damping *= 0.5;
        residual = next;
        if (residual < best_residual) {
            best_residual = residual;
            best_xf = xf;
            best_xs = xs;
        }
    }

    model.x_firm = std::move(best_xf);
    model.x_security = std::move(best_xs);
    model.residual = best_residual;
    model.iterations = it;
    model.link_prob = Matrix<double>(ns, nf, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f) {
            switch (model.pins(s, f)) {
                case Pin::one: model.link_prob(s, f) = 1.0; break;
                case Pin::zero: model.link_prob(s, f) = 0.0; break;
                case Pin::free: model.link_prob(s, f) = detail::link(model.x_firm[f], model.x_security[s]); break;
            }
        }
    if (!(best_residual <= cfg.tolerance)) {
        throw ConvergenceError("null model did not converge within " + std::to_string(cfg.max_iterations) +
                                   " iterations (best residual " + std::to_string(best_residual) + ")",
                               std::move(model));
    }
    return model;
}

struct ExpectedDegrees {
    std::vector<double> firms;
    std::vector<double> securities;
};

// Row and column sums of the link-probability matrix.
inline ExpectedDegrees expected_degrees(const NullModel& model) {
    ExpectedDegrees out{std::vector<double>(model.link_prob.cols(), 0.0),
                        std::vector<double>(model.link_prob.rows(), 0.0)};
    for (std::size_t s = 0; s < model.link_prob.rows(); ++s)
        for (std::size_t f = 0; f < model.link_prob.cols(); ++f) {
            out.firms[f] += model.link_prob(s, f);
            out.securities[s] += model.link_prob(s, f);
        }
    return out;
}

inline nlohmann::json null_model_to_json(const NullModel& model, bool include_link_prob = false) {
    auto finite_or_null = [](const std::vector<double>& xs) {
        nlohmann::json arr = nlohmann::json::array();
        for (double x : xs) arr.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
        return arr;
    };
    nlohmann::json ones = nlohmann::json::array(), zeros = nlohmann::json::array();
    for (auto [s, f] : model.forced_ones()) ones.push_back({s, f});
    for (auto [s, f] : model.forced_zeros()) zeros.push_back({s, f});
    nlohmann::json j{{"x_firm", finite_or_null(model.x_firm)},
                     {"x_security", finite_or_null(model.x_security)},
                     {"pinned_ones", std::move(ones)},
                     {"pinned_zeros", std::move(zeros)},
                     {"residual", model.residual},
                     {"iterations", model.iterations}};
    if (include_link_prob) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t s = 0; s < model.link_prob.rows(); ++s) {
            auto r = model.link_prob.row(s);
            rows.push_back(std::vector<double>(r.begin(), r.end()));
        }
        j["link_prob"] = std::move(rows);
    }
    return j;
}

}  // namespace mclust
