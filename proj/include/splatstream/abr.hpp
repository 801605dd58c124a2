#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splatstream/metrics.hpp"
#include "splatstream/tiling.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

struct QoEWeights {
    double w_quality{1.0};
    double w_stall_time{0.25};   // per second
    double w_stall_count{0.1};   // per event
};

// w_quality*avg_quality - w_stall_time*stall_seconds - w_stall_count*stalls.
double qoe(double avg_quality, double stall_seconds, std::size_t stall_count,
           const QoEWeights& w);

struct LevelOption {
    std::uint64_t size_bytes{0};
    double utility{0.0};
};

// Multiple-choice knapsack: exactly one of four levels per tile, maximize
// total utility under a byte budget. Sizes and utilities must be
// non-decreasing with level within a tile.
struct SelectionProblem {
    std::vector<int> tile_ids;
    std::vector<std::array<LevelOption, 4>> options;  // parallel to tile_ids
    std::uint64_t budget_bytes{0};
    std::uint64_t granularity_bytes{1024};

    void validate() const;
};

struct Assignment {
    std::map<int, int> level_per_tile;  // tile id -> level 1..4
    std::uint64_t total_bytes{0};
    double total_utility{0.0};
};

// Exact DP over the budget discretized at the problem granularity (sizes
// rounded up, so the budget is never violated). Ties break toward lower total
// bytes, then the lexicographically smallest level vector in tile order.
// Throws InfeasibleError when even all-level-1 does not fit.
Assignment select_qualities(const SelectionProblem& problem);

// Exhaustive 4^n enumeration with the identical objective and tie rules.
// Throws SizeError above 12 tiles.
Assignment brute_force_select(const SelectionProblem& problem);

// Tiles whose AABB intersects the camera frustum (6-plane test, conservative),
// ordered by tile id.
std::vector<int> visible_tiles(const std::vector<AdaptiveTile>& tiles, const Camera& cam);
bool aabb_in_frustum(const Aabb& box, const Camera& cam);

// Harmonic mean of the last min(k, len) samples; zeros are excluded, an
// all-zero window yields 0. Throws ParameterError on empty history.
double predict_bandwidth(const std::vector<double>& history_mbps, std::size_t k);

std::string selection_problem_json(const SelectionProblem& p);
std::string assignment_json(const Assignment& a);

}  // namespace splatstream
