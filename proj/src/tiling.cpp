#include "splatstream/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "splatstream/error.hpp"
#include "splatstream/kdtree.hpp"

namespace splatstream {

namespace {

int axis_index(double v, double lo, double width, int res) {
    if (res <= 1 || width <= 0.0) return 0;
    // ceil(u)-1 sends boundary values to the lower-index cell.
    double u = (v - lo) / width;
    int idx = static_cast<int>(std::ceil(u)) - 1;
    return std::clamp(idx, 0, res - 1);
}

double luma(const GaussianPrimitive& p) {
    return 0.299 * p.sh[0] + 0.587 * p.sh[1] + 0.114 * p.sh[2];
}

}  // namespace

GridCoord Grid::coord_of_position(const Vec3& p) const {
    Vec3 ext = box.extent();
    return {axis_index(p.x(), box.min.x(), ext.x() / res_i, res_i),
            axis_index(p.y(), box.min.y(), ext.y() / res_j, res_j),
            axis_index(p.z(), box.min.z(), ext.z() / res_k, res_k)};
}

std::vector<GridCoord> Grid::neighbors6(const GridCoord& c) const {
    static constexpr int d[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                    {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    std::vector<GridCoord> out;
    for (const auto& dd : d) {
        GridCoord n{c.i + dd[0], c.j + dd[1], c.k + dd[2]};
        if (in_range(n)) out.push_back(n);
    }
    return out;
}

Grid grid_partition_in_box(const GaussianCloud& cloud, const Aabb& box, int ri, int rj, int rk) {
    if (ri < 1 || rj < 1 || rk < 1) throw ParameterError("grid resolution must be >= 1");
    Grid grid;
    grid.res_i = ri;
    grid.res_j = rj;
    grid.res_k = rk;
    grid.box = box;
    if (grid.box.empty()) grid.box = Aabb::of(Vec3::Zero(), Vec3::Zero());

    Vec3 ext = grid.box.extent();
    Vec3 step(ext.x() / ri, ext.y() / rj, ext.z() / rk);
    grid.cells.resize(std::size_t(ri) * rj * rk);
    for (int i = 0; i < ri; ++i)
        for (int j = 0; j < rj; ++j)
            for (int k = 0; k < rk; ++k) {
                GridCell& cell = grid.cells[grid.linear({i, j, k})];
                cell.id = {i, j, k};
                Vec3 lo = grid.box.min + Vec3(i * step.x(), j * step.y(), k * step.z());
                Vec3 hi(i + 1 == ri ? grid.box.max.x() : lo.x() + step.x(),
                        j + 1 == rj ? grid.box.max.y() : lo.y() + step.y(),
                        k + 1 == rk ? grid.box.max.z() : lo.z() + step.z());
                cell.aabb = Aabb::of(lo, hi);
            }
    for (std::uint32_t idx = 0; idx < cloud.size(); ++idx) {
        GridCoord c = grid.coord_of_position(cloud.primitives[idx].position);
        grid.cells[grid.linear(c)].member_indices.push_back(idx);
    }
    return grid;
}

Grid grid_partition(const GaussianCloud& cloud, int ri, int rj, int rk) {
    return grid_partition_in_box(cloud, cloud.bbox, ri, rj, rk);
}

Grid grid_partition(const GaussianCloud& cloud, int resolution) {
    return grid_partition(cloud, resolution, resolution, resolution);
}

double intra_cell_dispersion(const GridCell& cell, const GaussianCloud& cloud) {
    if (cell.member_indices.size() < 2) return 0.0;
    double wsum = 0.0;
    Vec3 mean = Vec3::Zero();
    for (auto idx : cell.member_indices) {
        const auto& p = cloud.primitives[idx];
        wsum += p.opacity;
        mean += p.opacity * p.position;
    }
    if (wsum <= 0.0) return 0.0;
    mean /= wsum;
    double trace = 0.0;
    for (auto idx : cell.member_indices) {
        const auto& p = cloud.primitives[idx];
        trace += p.opacity * (p.position - mean).squaredNorm();
    }
    trace /= wsum;
    double half_diag = 0.5 * cell.aabb.diagonal();
    if (half_diag <= 0.0) return 0.0;
    return std::clamp(trace / (half_diag * half_diag), 0.0, 1.0);
}

std::vector<std::array<double, 2>> static_saliency(const Grid& grid, const GaussianCloud& cloud) {
    const std::size_t n = grid.cell_count();
    std::vector<std::array<double, 3>> features(n);  // density, mean opacity, mean luma
    for (std::size_t c = 0; c < n; ++c) {
        const GridCell& cell = grid.cells[c];
        double vol = cell.aabb.extent().prod();
        double count = double(cell.member_indices.size());
        double op = 0.0, lu = 0.0;
        for (auto idx : cell.member_indices) {
            op += cloud.primitives[idx].opacity;
            lu += luma(cloud.primitives[idx]);
        }
        if (count > 0) {
            op /= count;
            lu /= count;
        }
        features[c] = {vol > 0 ? count / vol : count, op, lu};
    }
    // Min-max normalize each feature over the grid.
    for (int f = 0; f < 3; ++f) {
        double lo = features[0][f], hi = features[0][f];
        for (const auto& fv : features) {
            lo = std::min(lo, fv[f]);
            hi = std::max(hi, fv[f]);
        }
        double range = hi - lo;
        for (auto& fv : features) fv[f] = range > 0 ? (fv[f] - lo) / range : 0.0;
    }

    std::vector<std::array<double, 2>> out(n);
    for (std::size_t c = 0; c < n; ++c) {
        const GridCell& cell = grid.cells[c];
        if (cell.member_indices.empty()) {
            out[c] = {0.0, 0.0};
            continue;
        }
        double s_intra = intra_cell_dispersion(cell, cloud);
        auto nbs = grid.neighbors6(cell.id);
        double s_inter = 0.0;
        if (!nbs.empty()) {
            std::array<double, 3> mean{};
            for (const auto& nb : nbs)
                for (int f = 0; f < 3; ++f) mean[f] += features[grid.linear(nb)][f];
            double d2 = 0.0;
            for (int f = 0; f < 3; ++f) {
                mean[f] /= double(nbs.size());
                double d = features[c][f] - mean[f];
                d2 += d * d;
            }
            s_inter = std::clamp(std::sqrt(d2) / std::sqrt(3.0), 0.0, 1.0);
        }
        out[c] = {s_intra, s_inter};
    }
    return out;
}

double dynamic_saliency(const GridCell& cell_first, const GridCell& cell_last,
                        const GaussianCloud& cloud_first, const GaussianCloud& cloud_last) {
    if (!(cell_first.id == cell_last.id))
        throw ParameterError("dynamic_saliency cells must share the same grid id");
    std::size_t n_first = cell_first.member_indices.size();
    std::size_t n_last = cell_last.member_indices.size();
    if (n_first == 0 && n_last == 0) return 0.0;

    double motion = 0.0;
    if (n_first > 0 && n_last > 0) {
        std::vector<Vec3> a(n_first), b(n_last);
        for (std::size_t i = 0; i < n_first; ++i)
            a[i] = cloud_first.primitives[cell_first.member_indices[i]].position;
        for (std::size_t j = 0; j < n_last; ++j)
            b[j] = cloud_last.primitives[cell_last.member_indices[j]].position;
        KdTree3 ta(a), tb(b);
        double sum = 0.0;
        std::size_t matched = 0;
        for (std::uint32_t i = 0; i < n_first; ++i) {
            auto fwd = tb.nearest(a[i]);
            auto back = ta.nearest(b[fwd.index]);
            if (back.index == i) {
                sum += std::sqrt(fwd.dist_sq);
                ++matched;
            }
        }
        double diag = cell_first.aabb.diagonal();
        if (matched > 0 && diag > 0) motion = (sum / double(matched)) / diag;
    }
    double density = std::abs(double(n_last) - double(n_first)) /
                     std::max({double(n_first), double(n_last), 1.0});
    return std::clamp(motion + density, 0.0, 1.0);
}

double fuse_saliency(const SaliencyRecord& r, const SaliencyWeights& w) {
    if (w.w_intra < 0 || w.w_inter < 0 || w.w_dyn < 0 ||
        std::abs(w.w_intra + w.w_inter + w.w_dyn - 1.0) > 1e-9)
        throw ParameterError("saliency weights must be non-negative and sum to 1");
    double fused = w.w_intra * r.s_intra + w.w_inter * r.s_inter + w.w_dyn * r.s_dyn;
    return std::clamp(fused, 0.0, 1.0);
}

std::vector<SaliencyRecord> compute_gof_saliency(const GoF& gof, const Grid& grid,
                                                 const SaliencyWeights& weights) {
    std::vector<SaliencyRecord> records(grid.cell_count());
    auto stat = static_saliency(grid, gof.keyframe);
    GaussianCloud last = reconstruct_frame(gof, gof.track.frame_count - 1);
    Grid last_grid = grid_partition_in_box(last, grid.box, grid.res_i, grid.res_j, grid.res_k);
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        records[c].s_intra = stat[c][0];
        records[c].s_inter = stat[c][1];
        records[c].s_dyn =
            dynamic_saliency(grid.cells[c], last_grid.cells[c], gof.keyframe, last);
        records[c].fused = fuse_saliency(records[c], weights);
    }
    return records;
}

std::vector<AdaptiveTile> merge_tiles(const Grid& grid, const std::vector<double>& fused,
                                      double epsilon, std::size_t max_cells_per_tile) {
    if (epsilon < 0) throw ParameterError("epsilon must be >= 0");
    if (max_cells_per_tile < 1) throw ParameterError("max_cells_per_tile must be >= 1");
    if (fused.size() != grid.cell_count())
        throw ParameterError("fused saliency size does not match grid");

    std::vector<std::size_t> order(grid.cell_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (fused[a] != fused[b]) return fused[a] > fused[b];
        return grid.cells[a].id < grid.cells[b].id;
    });

    std::vector<bool> assigned(grid.cell_count(), false);
    std::vector<AdaptiveTile> tiles;
    for (std::size_t seed : order) {
        if (assigned[seed]) continue;
        AdaptiveTile tile;
        tile.id = static_cast<int>(tiles.size());
        double seed_sal = fused[seed];

        std::deque<std::size_t> frontier{seed};
        assigned[seed] = true;
        while (!frontier.empty() && tile.cells.size() < max_cells_per_tile) {
            std::size_t c = frontier.front();
            frontier.pop_front();
            tile.cells.push_back(grid.cells[c].id);
            tile.aabb.expand(grid.cells[c].aabb);
            tile.saliency += fused[c];
            const auto& members = grid.cells[c].member_indices;
            tile.member_indices.insert(tile.member_indices.end(), members.begin(), members.end());
            for (const auto& nb : grid.neighbors6(grid.cells[c].id)) {
                std::size_t nl = grid.linear(nb);
                if (assigned[nl] || std::abs(seed_sal - fused[nl]) > epsilon) continue;
                if (tile.cells.size() + frontier.size() >= max_cells_per_tile) break;
                assigned[nl] = true;
                frontier.push_back(nl);
            }
        }
        // Cells queued but not admitted return to the pool.
        for (std::size_t c : frontier) assigned[c] = false;
        tile.saliency /= double(tile.cells.size());
        std::sort(tile.member_indices.begin(), tile.member_indices.end());
        tiles.push_back(std::move(tile));
    }
    return tiles;
}

std::vector<AdaptiveTile> tiles_from_cells(const Grid& grid, const std::vector<double>& fused) {
    if (fused.size() != grid.cell_count())
        throw ParameterError("fused saliency size does not match grid");
    std::vector<AdaptiveTile> tiles;
    tiles.reserve(grid.cell_count());
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        AdaptiveTile t;
        t.id = static_cast<int>(c);
        t.cells = {grid.cells[c].id};
        t.aabb = grid.cells[c].aabb;
        t.saliency = fused[c];
        t.member_indices = grid.cells[c].member_indices;
        tiles.push_back(std::move(t));
    }
    return tiles;
}

std::string saliency_csv(std::uint32_t gof_index, const Grid& grid,
                         const std::vector<SaliencyRecord>& records) {
    std::ostringstream out;
    out << "gof,i,j,k,s_intra,s_inter,s_dyn,fused\n";
    out.precision(9);
    for (std::size_t c = 0; c < grid.cell_count(); ++c) {
        const auto& id = grid.cells[c].id;
        const auto& r = records[c];
        out << gof_index << ',' << id.i << ',' << id.j << ',' << id.k << ',' << r.s_intra << ','
            << r.s_inter << ',' << r.s_dyn << ',' << r.fused << '\n';
    }
    return out.str();
}

std::string tiling_json(const std::vector<AdaptiveTile>& tiles) {
    nlohmann::json doc;
    doc["tiles"] = nlohmann::json::array();
    for (const auto& t : tiles) {
        nlohmann::json jt;
        jt["id"] = t.id;
        jt["saliency"] = t.saliency;
        jt["aabb"] = {{"min", {t.aabb.min.x(), t.aabb.min.y(), t.aabb.min.z()}},
                      {"max", {t.aabb.max.x(), t.aabb.max.y(), t.aabb.max.z()}}};
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : t.cells) cells.push_back({c.i, c.j, c.k});
        jt["cells"] = std::move(cells);
        jt["members"] = t.member_indices;
        doc["tiles"].push_back(std::move(jt));
    }
    return doc.dump(2) + "\n";
}

std::vector<AdaptiveTile> parse_tiling_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    std::vector<AdaptiveTile> tiles;
    for (const auto& jt : doc.at("tiles")) {
        AdaptiveTile t;
        t.id = jt.at("id");
        t.saliency = jt.at("saliency");
        t.aabb = Aabb::of(Vec3(jt["aabb"]["min"][0], jt["aabb"]["min"][1], jt["aabb"]["min"][2]),
                          Vec3(jt["aabb"]["max"][0], jt["aabb"]["max"][1], jt["aabb"]["max"][2]));
        for (const auto& jc : jt.at("cells"))
            t.cells.push_back(GridCoord{jc[0], jc[1], jc[2]});
        t.member_indices = jt.at("members").get<std::vector<std::uint32_t>>();
        tiles.push_back(std::move(t));
    }
    return tiles;
}

}  // namespace splatstream
