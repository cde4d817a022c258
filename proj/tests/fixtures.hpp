#pragma once

#include <random>
#include <string>
#include <vector>

#include "mclust/market_graph.hpp"
#include "mclust/synth.hpp"
#include "mclust/util/rng.hpp"

namespace fixtures {

using namespace mclust;

// Rows are securities; '1' marks a link.
inline BipartiteSnapshot snapshot_of(const std::vector<std::string>& rows, YearMonth month = {2013, 1}) {
    const std::size_t ns = rows.size(), nf = rows.empty() ? 0 : rows[0].size();
    Matrix<std::uint8_t> adj(ns, nf, 0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f) adj(s, f) = rows[s][f] == '1';
    return make_snapshot(month, synth::node_names('F', nf), synth::node_names('S', ns), adj);
}

// Random snapshot; zero-degree nodes are dropped, so the shape may shrink.
inline BipartiteSnapshot random_snapshot(std::uint64_t seed, std::size_t ns, std::size_t nf, double density) {
    auto gen = make_engine(seed, "fixture-snapshot");
    std::bernoulli_distribution link(density);
    Matrix<std::uint8_t> adj(ns, nf, 0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t f = 0; f < nf; ++f) adj(s, f) = link(gen);
    return make_snapshot({2013, 1}, synth::node_names('F', nf), synth::node_names('S', ns), adj);
}

// Every snapshot with exactly the given shape and no zero-degree node.
inline std::vector<BipartiteSnapshot> all_snapshots(std::size_t ns, std::size_t nf) {
    std::vector<BipartiteSnapshot> out;
    const std::size_t cells = ns * nf;
    for (std::uint32_t mask = 0; mask < (1U << cells); ++mask) {
        Matrix<std::uint8_t> adj(ns, nf, 0);
        for (std::size_t c = 0; c < cells; ++c) adj(c / nf, c % nf) = (mask >> c) & 1U;
        auto snap = make_snapshot({2013, 1}, synth::node_names('F', nf), synth::node_names('S', ns), adj);
        if (snap.n_firms() == nf && snap.n_securities() == ns) out.push_back(std::move(snap));
    }
    return out;
}

}  // namespace fixtures
