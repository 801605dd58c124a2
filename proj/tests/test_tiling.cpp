#include <doctest.h>

#include <random>
#include <set>

#include "helpers.hpp"
#include "splatstream/error.hpp"
#include "splatstream/gof.hpp"
#include "splatstream/tiling.hpp"

using namespace splatstream;
using splatstream::testing::random_cloud;
using splatstream::testing::random_primitive;

namespace {

GaussianPrimitive at(const Vec3& pos, double opacity = 0.8) {
    GaussianPrimitive p;
    p.position = pos;
    p.opacity = opacity;
    p.scale = Vec3(0.01, 0.01, 0.01);
    return p;
}

}  // namespace

TEST_CASE("grid_partition assigns every primitive to exactly one cell") {
    std::mt19937_64 rng(31);
    GaussianCloud cloud = random_cloud(rng, 200);
    Grid grid = grid_partition(cloud, 4);
    REQUIRE(grid.cells.size() == 64);
    std::set<std::uint32_t> seen;
    for (const auto& cell : grid.cells)
        for (auto idx : cell.member_indices) CHECK(seen.insert(idx).second);
    CHECK(seen.size() == cloud.size());
    CHECK_THROWS_AS(grid_partition(cloud, 0), ParameterError);
}

TEST_CASE("resolution 1 is a single cell holding everything") {
    std::mt19937_64 rng(32);
    GaussianCloud cloud = random_cloud(rng, 50);
    Grid grid = grid_partition(cloud, 1);
    REQUIRE(grid.cells.size() == 1);
    CHECK(grid.cells[0].member_indices.size() == 50);
}

TEST_CASE("octant centers land one per cell, boundaries go low") {
    std::vector<GaussianPrimitive> prims;
    for (double x : {0.25, 0.75})
        for (double y : {0.25, 0.75})
            for (double z : {0.25, 0.75}) prims.push_back(at({x, y, z}));
    // Pin the bbox to the unit cube.
    prims.push_back(at({0, 0, 0}));
    prims.push_back(at({1, 1, 1}));
    GaussianCloud cloud(prims);
    Grid grid = grid_partition(cloud, 2);
    for (const auto& cell : grid.cells) {
        CHECK(cell.member_indices.size() >= 1);
        CHECK(cell.member_indices.size() <= 2);
    }

    // A primitive exactly on the mid plane belongs to the lower-index cell.
    prims.push_back(at({0.5, 0.25, 0.25}));
    GaussianCloud cloud2(prims);
    Grid grid2 = grid_partition(cloud2, 2);
    auto& low = grid2.cell({0, 0, 0}).member_indices;
    CHECK(std::count(low.begin(), low.end(), std::uint32_t(prims.size() - 1)) == 1);
}

TEST_CASE("intra dispersion: small cells score zero, opposite corners saturate") {
    GaussianCloud cloud({at({0, 0, 0}, 1.0), at({1, 1, 1}, 1.0)});
    Grid grid = grid_partition(cloud, 1);
    CHECK(intra_cell_dispersion(grid.cells[0], cloud) == doctest::Approx(1.0).epsilon(1e-6));

    GaussianCloud single({at({0.3, 0.3, 0.3})});
    Grid g1 = grid_partition(single, 1);
    CHECK(intra_cell_dispersion(g1.cells[0], single) == 0.0);
}

TEST_CASE("homogeneous grids have zero inter-cell saliency") {
    // Identical content in every octant.
    std::vector<GaussianPrimitive> prims;
    for (double x : {0.25, 0.75})
        for (double y : {0.25, 0.75})
            for (double z : {0.25, 0.75}) prims.push_back(at({x, y, z}, 0.5));
    prims.push_back(at({0, 0, 0}, 0.5));
    prims.push_back(at({1, 1, 1}, 0.5));
    // Give both pinning primitives the same SH as the rest (all default zero).
    GaussianCloud cloud(prims);
    Grid grid = grid_partition(cloud, 2);
    auto records = static_saliency(grid, cloud);
    // Every cell holds one or two primitives with identical features except
    // density; check the pure-feature part via a uniform lattice instead.
    std::vector<GaussianPrimitive> uniform;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k)
                uniform.push_back(at({0.125 + i * 0.25, 0.125 + j * 0.25, 0.125 + k * 0.25}, 0.5));
    uniform.push_back(at({0, 0, 0}, 0.5));
    uniform.push_back(at({1, 1, 1}, 0.5));
    GaussianCloud ucloud(uniform);
    Grid ugrid = grid_partition(ucloud, 2);
    auto urecords = static_saliency(ugrid, ucloud);
    for (const auto& r : urecords) CHECK(r[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("dynamic saliency: zero when frames match, closed form displacement") {
    GaussianCloud first({at({0.1, 0.1, 0.1}), at({0.9, 0.9, 0.9})});
    Grid g_first = grid_partition(first, 1);
    SUBCASE("identical frames") {
        CHECK(dynamic_saliency(g_first.cells[0], g_first.cells[0], first, first) == 0.0);
    }
    SUBCASE("uniform displacement of half the cell diagonal") {
        double diag = g_first.cells[0].aabb.diagonal();
        Vec3 shift = Vec3::Ones().normalized() * (diag / 2.0);
        std::vector<GaussianPrimitive> moved;
        for (const auto& p : first.primitives) {
            GaussianPrimitive q = p;
            q.position += shift;
            moved.push_back(q);
        }
        GaussianCloud last(moved);
        Grid g_last = grid_partition_in_box(last, g_first.box, 1, 1, 1);
        double s = dynamic_saliency(g_first.cells[0], g_last.cells[0], first, last);
        CHECK(s == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("empty cells score zero and mismatched ids throw") {
        GaussianCloud empty;
        Grid ge = grid_partition_in_box(empty, g_first.box, 1, 1, 1);
        CHECK(dynamic_saliency(g_first.cells[0], ge.cells[0], first, empty) ==
              doctest::Approx(1.0));  // all density vanished
        CHECK(dynamic_saliency(ge.cells[0], ge.cells[0], empty, empty) == 0.0);
        Grid g2 = grid_partition(first, 2);
        CHECK_THROWS_AS(
            dynamic_saliency(g2.cells[0], g2.cells[1], first, first), ParameterError);
    }
}

TEST_CASE("fuse_saliency is the weighted sum with validated weights") {
    SaliencyRecord r;
    r.s_intra = 0.3;
    r.s_inter = 0.6;
    r.s_dyn = 0.9;
    SaliencyWeights thirds{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    CHECK(fuse_saliency(r, thirds) == doctest::Approx(0.6));
    SaliencyWeights dyn_only{0.0, 0.0, 1.0};
    CHECK(fuse_saliency(r, dyn_only) == doctest::Approx(0.9));
    SaliencyRecord zero;
    CHECK(fuse_saliency(zero, thirds) == 0.0);
    SaliencyWeights bad{0.5, 0.5, 0.5};
    CHECK_THROWS_AS(fuse_saliency(r, bad), ParameterError);
}

TEST_CASE("merge_tiles: uniform saliency collapses, epsilon 0 splits") {
    std::mt19937_64 rng(33);
    GaussianCloud cloud = random_cloud(rng, 100);
    Grid grid = grid_partition(cloud, 3);

    std::vector<double> uniform(grid.cell_count(), 0.5);
    auto one = merge_tiles(grid, uniform, 0.1, grid.cell_count());
    CHECK(one.size() == 1);
    CHECK(one[0].cells.size() == grid.cell_count());

    std::vector<double> distinct(grid.cell_count());
    for (std::size_t c = 0; c < distinct.size(); ++c)
        distinct[c] = double(c) / double(distinct.size());
    auto split = merge_tiles(grid, distinct, 0.0, grid.cell_count());
    CHECK(split.size() == grid.cell_count());
}

TEST_CASE("merge_tiles follows the hand-traced 4x1x1 example") {
    // Cells along x with saliency (0.9, 0.9, 0.1, 0.1).
    std::vector<GaussianPrimitive> prims;
    for (int i = 0; i < 4; ++i) prims.push_back(at({i + 0.5, 0.5, 0.5}));
    prims.push_back(at({0, 0, 0}));
    prims.push_back(at({4, 1, 1}));
    GaussianCloud cloud(prims);
    Grid grid = grid_partition(cloud, 4, 1, 1);
    std::vector<double> sal = {0.9, 0.9, 0.1, 0.1};
    auto tiles = merge_tiles(grid, sal, 0.2, 4);
    REQUIRE(tiles.size() == 2);
    CHECK(tiles[0].cells == std::vector<GridCoord>{{0, 0, 0}, {1, 0, 0}});
    CHECK(tiles[1].cells == std::vector<GridCoord>{{2, 0, 0}, {3, 0, 0}});
    CHECK(tiles[0].saliency == doctest::Approx(0.9));
}

TEST_CASE("merge_tiles partitions the grid and respects the cap, deterministically") {
    std::mt19937_64 rng(34);
    GaussianCloud cloud = random_cloud(rng, 300);
    Grid grid = grid_partition(cloud, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> sal(grid.cell_count());
    for (auto& s : sal) s = unit(rng);

    auto tiles = merge_tiles(grid, sal, 0.25, 7);
    auto again = merge_tiles(grid, sal, 0.25, 7);
    REQUIRE(tiles.size() == again.size());
    std::set<GridCoord> covered;
    std::set<std::uint32_t> members;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        CHECK(tiles[t].cells.size() <= 7);
        CHECK(tiles[t].cells == again[t].cells);
        for (const auto& c : tiles[t].cells) CHECK(covered.insert(c).second);
        for (auto m : tiles[t].member_indices) CHECK(members.insert(m).second);
    }
    CHECK(covered.size() == grid.cell_count());
    CHECK(members.size() == cloud.size());
}

TEST_CASE("per-GoF saliency stays in range and fused obeys the weights") {
    std::mt19937_64 rng(35);
    std::vector<GaussianCloud> frames;
    GaussianCloud base = random_cloud(rng, 150);
    for (int f = 0; f < 4; ++f) {
        auto prims = base.primitives;
        for (std::size_t i = 0; i < 30; ++i) prims[i].position.x() += 0.02 * f;
        frames.emplace_back(std::move(prims));
    }
    GoF gof = build_deformation(frames);
    Grid grid = grid_partition(gof.keyframe, 3);
    SaliencyWeights w;
    auto records = compute_gof_saliency(gof, grid, w);
    REQUIRE(records.size() == grid.cell_count());
    for (const auto& r : records) {
        CHECK(r.s_intra >= 0.0);
        CHECK(r.s_intra <= 1.0);
        CHECK(r.s_inter >= 0.0);
        CHECK(r.s_inter <= 1.0);
        CHECK(r.s_dyn >= 0.0);
        CHECK(r.s_dyn <= 1.0);
        CHECK(r.fused ==
              doctest::Approx(w.w_intra * r.s_intra + w.w_inter * r.s_inter + w.w_dyn * r.s_dyn));
    }
    // Identical first/last frames zero the dynamic term everywhere.
    GoF static_gof = build_deformation({base, base, base});
    auto static_records = compute_gof_saliency(static_gof, grid_partition(base, 3), w);
    for (const auto& r : static_records) CHECK(r.s_dyn == 0.0);
}

TEST_CASE("tiling json and saliency csv round out the exports") {
    std::mt19937_64 rng(36);
    GaussianCloud cloud = random_cloud(rng, 60);
    Grid grid = grid_partition(cloud, 2);
    std::vector<double> sal(grid.cell_count(), 0.4);
    auto tiles = merge_tiles(grid, sal, 0.5, 8);
    std::string json = tiling_json(tiles);
    auto back = parse_tiling_json(json);
    REQUIRE(back.size() == tiles.size());
    CHECK(back[0].cells == tiles[0].cells);
    CHECK(back[0].member_indices == tiles[0].member_indices);
    CHECK(back[0].saliency == doctest::Approx(tiles[0].saliency));

    std::vector<SaliencyRecord> records(grid.cell_count());
    std::string csv = saliency_csv(0, grid, records);
    CHECK(csv.rfind("gof,i,j,k,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == long(grid.cell_count()) + 1);
}
