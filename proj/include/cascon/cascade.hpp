#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cascon/graph.hpp"
#include "cascon/rng.hpp"

namespace cascon {

// Marker for nodes that never activate within the observation window.
inline constexpr double kNeverActivated = std::numeric_limits<double>::infinity();

// One simulated diffusion: activation time per node, infinity when the node
// was not reached within the window. Exactly one node (the root) has time 0.
struct Cascade {
    std::vector<double> times;
    int root = 0;

    bool activated(int v) const { return times[v] != kNeverActivated; }
    int num_activated() const;
};

struct CascadeSet {
    std::vector<Cascade> cascades;
    double window = 0.0;
    int num_nodes = 0;
};

// Continuous-time diffusion from a uniformly drawn root: every edge carries
// an independent rate-1 exponential delay and a node's activation time is its
// shortest delay-weighted distance from the root. Times beyond T become the
// never-activated marker.
Cascade simulate_cascade(const Graph& g, double T, Rng& rng);

// q independent cascades with per-cascade seeds derived from (seed, index).
CascadeSet simulate_cascades(const Graph& g, int q, double T, std::uint64_t seed);

// One line per cascade: `root;node:time,node:time,...` listing only finite
// times (6 decimal places), ordered by (time, node).
std::string format_cascades(const CascadeSet& cs);
CascadeSet parse_cascades(const std::string& text, int num_nodes, double T);

}  // namespace cascon
