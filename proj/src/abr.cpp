#include "splatstream/abr.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "splatstream/error.hpp"

namespace splatstream {

double qoe(double avg_quality, double stall_seconds, std::size_t stall_count,
           const QoEWeights& w) {
    return w.w_quality * avg_quality - w.w_stall_time * stall_seconds -
           w.w_stall_count * double(stall_count);
}

void SelectionProblem::validate() const {
    if (tile_ids.size() != options.size())
        throw ParameterError("tile_ids and options must be parallel");
    if (granularity_bytes == 0) throw ParameterError("granularity must be positive");
    for (std::size_t t = 0; t < options.size(); ++t) {
        for (int l = 1; l < 4; ++l) {
            if (options[t][l].size_bytes < options[t][l - 1].size_bytes)
                throw ParameterError("sizes must be non-decreasing with level");
            if (options[t][l].utility < options[t][l - 1].utility)
                throw ParameterError("utilities must be non-decreasing with level");
        }
    }
}

namespace {

std::uint64_t units_round_up(std::uint64_t bytes, std::uint64_t granularity) {
    return (bytes + granularity - 1) / granularity;
}

Assignment finish(const SelectionProblem& p, const std::vector<int>& levels) {
    Assignment a;
    for (std::size_t t = 0; t < p.tile_ids.size(); ++t) {
        a.level_per_tile[p.tile_ids[t]] = levels[t] + 1;
        a.total_bytes += p.options[t][levels[t]].size_bytes;
        a.total_utility += p.options[t][levels[t]].utility;
    }
    return a;
}

}  // namespace

Assignment select_qualities(const SelectionProblem& p) {
    p.validate();
    const std::size_t n = p.tile_ids.size();
    if (n == 0) return {};

    std::uint64_t budget_units = p.budget_bytes / p.granularity_bytes;
    std::vector<std::array<std::uint64_t, 4>> unit_size(n);
    std::uint64_t min_total = 0, max_total = 0;
    for (std::size_t t = 0; t < n; ++t) {
        for (int l = 0; l < 4; ++l)
            unit_size[t][l] = units_round_up(p.options[t][l].size_bytes, p.granularity_bytes);
        min_total += unit_size[t][0];
        max_total += unit_size[t][3];
    }
    if (min_total > budget_units)
        throw InfeasibleError("level-1 sizes alone exceed the budget");
    // Budget beyond the all-level-4 cost changes nothing; keep the table small.
    budget_units = std::min(budget_units, max_total);

    const std::size_t cols = std::size_t(budget_units) + 1;
    // Suffix DP: best[(b)] = lexicographic max of (utility, -bytes) over tiles
    // t..n-1 within b units. choice[t][b] records the smallest level achieving
    // it, which makes the reconstructed level vector lexicographically minimal.
    struct Score {
        double utility{-1.0};  // -1 = infeasible
        std::uint64_t bytes{0};
    };
    std::vector<Score> next(cols), cur(cols);
    std::vector<std::vector<std::uint8_t>> choice(n, std::vector<std::uint8_t>(cols, 255));

    for (auto& s : next) s = {0.0, 0};
    for (std::size_t ti = n; ti-- > 0;) {
        for (std::size_t b = 0; b < cols; ++b) {
            Score best;  // infeasible
            std::uint8_t best_level = 255;
            for (int l = 0; l < 4; ++l) {
                std::uint64_t s = unit_size[ti][l];
                if (s > b) break;  // sizes non-decreasing: larger levels cannot fit either
                const Score& tail = next[b - s];
                if (tail.utility < 0) continue;
                double util = p.options[ti][l].utility + tail.utility;
                std::uint64_t bytes = p.options[ti][l].size_bytes + tail.bytes;
                if (util > best.utility ||
                    (util == best.utility && (best_level == 255 || bytes < best.bytes))) {
                    best = {util, bytes};
                    best_level = std::uint8_t(l);
                }
            }
            cur[b] = best;
            choice[ti][b] = best_level;
        }
        std::swap(cur, next);
    }

    std::vector<int> levels(n);
    std::uint64_t b = budget_units;
    for (std::size_t t = 0; t < n; ++t) {
        std::uint8_t l = choice[t][b];
        levels[t] = l;
        b -= unit_size[t][l];
    }
    return finish(p, levels);
}

Assignment brute_force_select(const SelectionProblem& p) {
    p.validate();
    const std::size_t n = p.tile_ids.size();
    if (n > 12) throw SizeError("brute force capped at 12 tiles");
    if (n == 0) return {};

    const std::uint64_t budget_units = p.budget_bytes / p.granularity_bytes;

    std::vector<int> levels(n, 0), best_levels;
    double best_utility = -1.0;
    std::uint64_t best_bytes = 0;
    bool found = false;
    for (;;) {
        std::uint64_t units = 0, bytes = 0;
        double utility = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            units += units_round_up(p.options[t][levels[t]].size_bytes, p.granularity_bytes);
            bytes += p.options[t][levels[t]].size_bytes;
            utility += p.options[t][levels[t]].utility;
        }
        if (units <= budget_units) {
            bool better = !found || utility > best_utility ||
                          (utility == best_utility && bytes < best_bytes) ||
                          (utility == best_utility && bytes == best_bytes &&
                           std::lexicographical_compare(levels.begin(), levels.end(),
                                                        best_levels.begin(), best_levels.end()));
            if (better) {
                found = true;
                best_utility = utility;
                best_bytes = bytes;
                best_levels = levels;
            }
        }
        // Odometer over level vectors.
        std::size_t t = n;
        while (t-- > 0) {
            if (++levels[t] < 4) break;
            levels[t] = 0;
            if (t == 0) {
                if (!found) throw InfeasibleError("no feasible assignment");
                return finish(p, best_levels);
            }
        }
    }
}

bool aabb_in_frustum(const Aabb& box, const Camera& cam) {
    Vec3 f = cam.forward(), r = cam.right(), u = cam.up();
    double tan_v = std::tan(0.5 * cam.vertical_fov);
    double tan_h = tan_v * cam.aspect;

    // Inward-pointing plane normals; a point p is inside iff n.(p - o) >= 0
    // for all six (o is the camera position except for near/far).
    struct Plane {
        Vec3 n;
        Vec3 o;
    };
    const Plane planes[6] = {
        {f, cam.position + cam.near_plane * f},
        {-f, cam.position + cam.far_plane * f},
        {(r + tan_h * f).normalized(), cam.position},
        {(-r + tan_h * f).normalized(), cam.position},
        {(u + tan_v * f).normalized(), cam.position},
        {(-u + tan_v * f).normalized(), cam.position},
    };
    for (const auto& pl : planes) {
        // Most-inside corner of the box w.r.t. this plane.
        Vec3 corner(pl.n.x() >= 0 ? box.max.x() : box.min.x(),
                    pl.n.y() >= 0 ? box.max.y() : box.min.y(),
                    pl.n.z() >= 0 ? box.max.z() : box.min.z());
        if (pl.n.dot(corner - pl.o) < 0) return false;  // fully outside
    }
    return true;
}

std::vector<int> visible_tiles(const std::vector<AdaptiveTile>& tiles, const Camera& cam) {
    std::vector<int> out;
    for (const auto& t : tiles)
        if (aabb_in_frustum(t.aabb, cam)) out.push_back(t.id);
    std::sort(out.begin(), out.end());
    return out;
}

double predict_bandwidth(const std::vector<double>& history_mbps, std::size_t k) {
    if (history_mbps.empty()) throw ParameterError("bandwidth history is empty");
    if (k < 1) throw ParameterError("window must be >= 1");
    std::size_t take = std::min(k, history_mbps.size());
    double inv_sum = 0.0;
    std::size_t nonzero = 0;
    for (std::size_t i = history_mbps.size() - take; i < history_mbps.size(); ++i) {
        if (history_mbps[i] > 0.0) {
            inv_sum += 1.0 / history_mbps[i];
            ++nonzero;
        }
    }
    if (nonzero == 0) return 0.0;
    return double(nonzero) / inv_sum;
}

std::string selection_problem_json(const SelectionProblem& p) {
    nlohmann::json doc;
    doc["budget_bytes"] = p.budget_bytes;
    doc["granularity_bytes"] = p.granularity_bytes;
    doc["tiles"] = nlohmann::json::array();
    for (std::size_t t = 0; t < p.tile_ids.size(); ++t) {
        nlohmann::json jt;
        jt["id"] = p.tile_ids[t];
        jt["options"] = nlohmann::json::array();
        for (const auto& o : p.options[t])
            jt["options"].push_back({{"size_bytes", o.size_bytes}, {"utility", o.utility}});
        doc["tiles"].push_back(std::move(jt));
    }
    return doc.dump(2) + "\n";
}

std::string assignment_json(const Assignment& a) {
    nlohmann::json doc;
    doc["total_bytes"] = a.total_bytes;
    doc["total_utility"] = a.total_utility;
    doc["levels"] = nlohmann::json::object();
    for (const auto& [tile, level] : a.level_per_tile)
        doc["levels"][std::to_string(tile)] = level;
    return doc.dump(2) + "\n";
}

}  // namespace splatstream
