#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/gof.hpp"
#include "splatstream/splat.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

struct GridCoord {
    int i{0}, j{0}, k{0};
    bool operator==(const GridCoord&) const = default;
    auto operator<=>(const GridCoord&) const = default;
};

struct GridCell {
    GridCoord id;
    Aabb aabb;
    std::vector<std::uint32_t> member_indices;
};

// Uniform partition of a bounding box. Cells are stored in lexicographic
// (i,j,k) order and cover the box exhaustively; a primitive exactly on an
// interior boundary plane belongs to the lower-index cell.
struct Grid {
    int res_i{1}, res_j{1}, res_k{1};
    Aabb box;
    std::vector<GridCell> cells;

    std::size_t cell_count() const { return cells.size(); }
    std::size_t linear(const GridCoord& c) const {
        return (std::size_t(c.i) * res_j + c.j) * res_k + c.k;
    }
    const GridCell& cell(const GridCoord& c) const { return cells[linear(c)]; }
    bool in_range(const GridCoord& c) const {
        return c.i >= 0 && c.i < res_i && c.j >= 0 && c.j < res_j && c.k >= 0 && c.k < res_k;
    }
    GridCoord coord_of_position(const Vec3& p) const;
    std::vector<GridCoord> neighbors6(const GridCoord& c) const;
};

struct SaliencyWeights {
    double w_intra{0.25};
    double w_inter{0.25};
    double w_dyn{0.5};
};

struct SaliencyRecord {
    double s_intra{0.0};
    double s_inter{0.0};
    double s_dyn{0.0};
    double fused{0.0};
};

struct AdaptiveTile {
    int id{0};
    std::vector<GridCoord> cells;  // grid-connected under 6-neighborhood
    Aabb aabb;                     // union of member cell boxes
    double saliency{0.0};          // mean fused saliency of member cells
    std::vector<std::uint32_t> member_indices;
};

// resolution^3 cells over the cloud bbox. Throws ParameterError on zero.
Grid grid_partition(const GaussianCloud& cloud, int resolution);
Grid grid_partition(const GaussianCloud& cloud, int ri, int rj, int rk);
// Same, but over a caller-supplied box (positions outside clamp to edge cells).
Grid grid_partition_in_box(const GaussianCloud& cloud, const Aabb& box, int ri, int rj, int rk);

// Intra-cell dispersion: opacity-weighted positional covariance trace,
// normalized by (cell_diagonal/2)^2 and clamped to [0,1].
double intra_cell_dispersion(const GridCell& cell, const GaussianCloud& cloud);

// (s_intra, s_inter) for every cell. s_inter is the L2 distance between a
// cell's (density, mean opacity, mean DC luma) feature vector and the mean of
// its 6-neighbors', features min-max normalized over the grid, divided by
// sqrt(3). Empty cells score (0,0).
std::vector<std::array<double, 2>> static_saliency(const Grid& grid, const GaussianCloud& cloud);

// Motion term between matching cells of the first and last frames:
// mean mutual-NN displacement / cell diagonal + |density change| /
// max(densities, 1), clamped to [0,1]. Throws ParameterError on id mismatch.
double dynamic_saliency(const GridCell& cell_first, const GridCell& cell_last,
                        const GaussianCloud& cloud_first, const GaussianCloud& cloud_last);

// w_intra*s_intra + w_inter*s_inter + w_dyn*s_dyn. Weights must sum to 1.
double fuse_saliency(const SaliencyRecord& r, const SaliencyWeights& w);

// Full per-GoF saliency: static terms on the keyframe grid, dynamic term
// between the keyframe and the last reconstructed frame (assigned into the
// keyframe grid box).
std::vector<SaliencyRecord> compute_gof_saliency(const GoF& gof, const Grid& grid,
                                                 const SaliencyWeights& weights);

// Greedy region growing: seeds in descending fused saliency (ties by id),
// BFS across 6-neighbors while |sal(seed)-sal(candidate)| <= epsilon and the
// tile holds fewer than max_cells_per_tile cells. Partitions the grid.
std::vector<AdaptiveTile> merge_tiles(const Grid& grid, const std::vector<double>& fused,
                                      double epsilon, std::size_t max_cells_per_tile);

// One tile per grid cell (the NT/32T/64T baselines).
std::vector<AdaptiveTile> tiles_from_cells(const Grid& grid, const std::vector<double>& fused);

// CSV rows: gof,i,j,k,s_intra,s_inter,s_dyn,fused
std::string saliency_csv(std::uint32_t gof_index, const Grid& grid,
                         const std::vector<SaliencyRecord>& records);

// JSON document: tile id -> cells, aabb, saliency, member indices.
std::string tiling_json(const std::vector<AdaptiveTile>& tiles);
std::vector<AdaptiveTile> parse_tiling_json(const std::string& text);

}  // namespace splatstream
