#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "splatstream/error.hpp"
#include "splatstream/gof.hpp"

using namespace splatstream;
using splatstream::testing::clouds_equal;
using splatstream::testing::random_primitive;

namespace {

// Jittered lattice with rigid per-frame motion: correspondences stay
// unambiguous because displacement never approaches the point spacing.
std::vector<GaussianCloud> lattice_motion(std::mt19937_64& rng, int side, std::size_t frames,
                                          const Vec3& step_per_frame) {
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::vector<GaussianPrimitive> base;
    for (int i = 0; i < side; ++i)
        for (int j = 0; j < side; ++j)
            for (int k = 0; k < side; ++k) {
                GaussianPrimitive p = random_primitive(rng);
                p.position = Vec3(i + jitter(rng), j + jitter(rng), k + jitter(rng));
                base.push_back(p);
            }
    std::vector<GaussianCloud> out;
    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<GaussianPrimitive> prims = base;
        for (auto& p : prims) p.position += double(f) * step_per_frame;
        out.emplace_back(std::move(prims));
    }
    return out;
}

}  // namespace

TEST_CASE("segment_gofs covers the sequence with fixed-length ranges") {
    auto exact = segment_gofs(90, 30);
    REQUIRE(exact.size() == 3);
    CHECK(exact[0] == std::pair<std::size_t, std::size_t>{0, 30});
    CHECK(exact[2] == std::pair<std::size_t, std::size_t>{60, 90});

    auto tail = segment_gofs(100, 30);
    REQUIRE(tail.size() == 4);
    CHECK(tail[3].second - tail[3].first == 10);

    CHECK_THROWS_AS(segment_gofs(10, 0), ParameterError);
}

TEST_CASE("static frames produce zero deltas and no churn") {
    std::mt19937_64 rng(21);
    auto frames = lattice_motion(rng, 3, 5, Vec3::Zero());
    GoF gof = build_deformation(frames);
    REQUIRE(gof.track.frames.size() == 4);
    for (const auto& fd : gof.track.frames) {
        CHECK(fd.matches.size() == frames[0].size());
        CHECK(fd.births.empty());
        CHECK(fd.deaths.empty());
    }
    // Grid-decoded displacement of a static primitive is exactly zero.
    SceneSplit split = split_foreground(gof, 1e-12);
    CHECK(split.fg_indices.empty());
    CHECK(split.background.size() == gof.keyframe.size());
}

TEST_CASE("uniform translation decodes within one quantization step") {
    std::mt19937_64 rng(22);
    Vec3 step(0.025, 0.0, 0.0);
    auto frames = lattice_motion(rng, 4, 6, step);
    GoF gof = build_deformation(frames);
    double q_step = gof.track.gof_bbox.diagonal() / 65535.0;
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const auto& fd = gof.track.frames[t - 1];
        REQUIRE(fd.matches.size() == frames[0].size());
        for (std::size_t m = 0; m < fd.matches.size(); ++m) {
            Vec3 decoded_delta = gof.track.dequantize_position(fd.pos_q[m]) -
                                 gof.keyframe.primitives[fd.matches[m].first].position;
            Vec3 expect = double(t) * step;
            for (int a = 0; a < 3; ++a)
                CHECK(std::abs(decoded_delta[a] - expect[a]) <= q_step);
        }
    }
}

TEST_CASE("a primitive appearing mid-GoF is a birth from that frame on") {
    std::mt19937_64 rng(23);
    auto frames = lattice_motion(rng, 2, 6, Vec3::Zero());
    GaussianPrimitive extra = random_primitive(rng);
    extra.position = Vec3(5.0, 5.0, 5.0);  // far from the lattice
    for (std::size_t f = 3; f < frames.size(); ++f) {
        auto prims = frames[f].primitives;
        prims.push_back(extra);
        frames[f] = GaussianCloud(std::move(prims));
    }
    GoF gof = build_deformation(frames);
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const auto& fd = gof.track.frames[t - 1];
        if (t < 3) {
            CHECK(fd.births.empty());
        } else {
            REQUIRE(fd.births.size() == 1);
            CHECK(fd.births[0].position == extra.position);
        }
    }
    GaussianCloud last = reconstruct_frame(gof, frames.size() - 1);
    CHECK(last.size() == frames.back().size());
}

TEST_CASE("reconstruct_frame returns the keyframe verbatim at k=0 and guards the range") {
    std::mt19937_64 rng(24);
    auto frames = lattice_motion(rng, 3, 4, Vec3(0.01, 0.01, 0.0));
    GoF gof = build_deformation(frames);
    CHECK(clouds_equal(reconstruct_frame(gof, 0), frames[0]));
    CHECK_THROWS_AS(reconstruct_frame(gof, frames.size()), RangeError);
    CHECK_THROWS_AS(build_deformation({}), ParameterError);
}

TEST_CASE("random 10-frame GoF reconstructs matched positions within one step") {
    std::mt19937_64 rng(25);
    for (int rep = 0; rep < 5; ++rep) {
        Vec3 step(0.02, -0.015, 0.01);
        auto frames = lattice_motion(rng, 4, 10, step);
        GoF gof = build_deformation(frames);
        double q_step = gof.track.gof_bbox.diagonal() / 65535.0;
        for (std::size_t k = 1; k < frames.size(); ++k) {
            GaussianCloud rec = reconstruct_frame(gof, k);
            const auto& fd = gof.track.frames[k - 1];
            REQUIRE(rec.size() == frames[k].size());
            for (std::size_t m = 0; m < fd.matches.size(); ++m) {
                const Vec3& truth = frames[k].primitives[fd.matches[m].second].position;
                for (int a = 0; a < 3; ++a)
                    CHECK(std::abs(rec.primitives[m].position[a] - truth[a]) <= q_step);
            }
        }
    }
}

TEST_CASE("deaths are recorded and reconstruction drops them") {
    std::mt19937_64 rng(26);
    auto frames = lattice_motion(rng, 3, 4, Vec3::Zero());
    // Remove the first lattice point from frames 2 and 3.
    for (std::size_t f = 2; f < frames.size(); ++f) {
        auto prims = frames[f].primitives;
        prims.erase(prims.begin());
        frames[f] = GaussianCloud(std::move(prims));
    }
    GoF gof = build_deformation(frames);
    CHECK(gof.track.frames[0].deaths.empty());
    REQUIRE(gof.track.frames[1].deaths.size() == 1);
    CHECK(gof.track.frames[1].deaths[0] == 0);
    CHECK(reconstruct_frame(gof, 2).size() == gof.keyframe.size() - 1);

    SceneSplit split = split_foreground(gof, 1e9);  // only churn marks foreground
    REQUIRE(split.fg_indices.size() == 1);
    CHECK(split.fg_indices[0] == 0);
}

TEST_CASE("split_foreground finds exactly the moving cluster") {
    std::mt19937_64 rng(27);
    auto frames = lattice_motion(rng, 3, 5, Vec3::Zero());
    std::size_t n = frames[0].size();
    // Translate the first 9 primitives by 1.0 per frame along x.
    for (std::size_t f = 1; f < frames.size(); ++f) {
        auto prims = frames[f].primitives;
        for (std::size_t i = 0; i < 9; ++i) prims[i].position.x() += double(f) * 1.0;
        frames[f] = GaussianCloud(std::move(prims));
    }
    GofBuildParams params;
    params.match_radius_frac = 0.9;  // keep the movers matched
    GoF gof = build_deformation(frames, params);

    SceneSplit split = split_foreground(gof, 0.1);
    REQUIRE(split.fg_indices.size() == 9);
    for (std::uint32_t i = 0; i < 9; ++i) CHECK(split.fg_indices[i] == i);
    CHECK(split.foreground.size() + split.background.size() == n);

    // Infinite threshold with no churn leaves the foreground empty.
    auto static_frames = lattice_motion(rng, 2, 3, Vec3::Zero());
    GoF static_gof = build_deformation(static_frames);
    CHECK(split_foreground(static_gof, std::numeric_limits<double>::infinity())
              .fg_indices.empty());
    CHECK_THROWS_AS(split_foreground(static_gof, -1.0), ParameterError);
}

TEST_CASE("gof container round-trips and static tracks beat raw frames") {
    std::mt19937_64 rng(28);
    auto frames = lattice_motion(rng, 3, 6, Vec3(0.01, 0.0, -0.01));
    // Add churn so births/deaths exercise the container too.
    {
        auto prims = frames[4].primitives;
        prims.push_back(random_primitive(rng));
        frames[4] = GaussianCloud(std::move(prims));
    }
    GoF gof = build_deformation(frames);
    gof.index = 3;
    std::string bytes = serialize_gof(gof);
    GoF back = parse_gof(bytes);
    CHECK(back.index == gof.index);
    CHECK(back.track.frame_count == gof.track.frame_count);
    CHECK(clouds_equal(back.keyframe, gof.keyframe));
    CHECK(serialize_gof(back) == bytes);
    for (std::size_t k = 0; k < frames.size(); ++k)
        CHECK(clouds_equal(reconstruct_frame(back, k), reconstruct_frame(gof, k)));

    // Track size: far below the raw frames it replaces (static-ish scene).
    std::uint64_t raw_replaced = 0;
    for (std::size_t f = 1; f < frames.size(); ++f) raw_replaced += raw_size_bytes(frames[f]);
    CHECK(gof.track.encoded_bytes() <= raw_replaced);
    CHECK_THROWS_AS(parse_gof(bytes.substr(0, bytes.size() / 2)), TruncationError);
}
