#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "splatstream/splat.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

// Quantized record of one frame relative to the GoF keyframe. Positions are
// stored as u16 fixed point over the GoF bounding box per axis; opacity deltas
// over [-1,1]; SH-DC deltas over [-2,2] per channel. Every record is
// independent of the others (all matches go keyframe -> this frame).
struct FrameDeformation {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> matches;  // key idx -> target idx
    std::vector<std::array<std::uint16_t, 3>> pos_q;               // per match
    std::vector<std::uint16_t> opacity_q;                          // per match
    std::vector<std::array<std::uint16_t, 3>> sh_dc_q;             // per match
    std::vector<GaussianPrimitive> births;                         // full records
    std::vector<std::uint32_t> deaths;                             // keyframe indices
};

struct DeformationTrack {
    std::uint32_t frame_count{1};
    Aabb gof_bbox;  // quantizer range; union over all frames of the GoF
    std::vector<FrameDeformation> frames;  // one per frame 1..frame_count-1

    // Per-axis quantizer: u16 code <-> position inside gof_bbox.
    std::array<std::uint16_t, 3> quantize_position(const Vec3& p) const;
    Vec3 dequantize_position(const std::array<std::uint16_t, 3>& q) const;

    // Wire size of the track section (see serialize_gof for the layout).
    std::uint64_t encoded_bytes() const;
};

struct GoF {
    std::uint32_t index{0};
    GaussianCloud keyframe;
    DeformationTrack track;
    double duration_s{0.0};
};

struct SceneSplit {
    GaussianCloud foreground;
    GaussianCloud background;
    std::vector<std::uint32_t> fg_indices;  // sorted keyframe indices
};

struct GofBuildParams {
    double fps{30.0};
    // Mutual-NN match radius as a fraction of the GoF bbox diagonal.
    double match_radius_frac{0.02};
    // Relative rotation/scale change beyond which a pair is re-encoded as
    // death + birth instead of a delta.
    double attr_rebirth_threshold{0.10};
};

// Contiguous [begin,end) frame ranges of length `gof_len` (last may be short).
std::vector<std::pair<std::size_t, std::size_t>> segment_gofs(std::size_t frame_count,
                                                              std::size_t gof_len);

// Builds keyframe + quantized per-frame deltas from explicit frames.
// frames[0] becomes the keyframe. Throws ParameterError on empty input.
GoF build_deformation(const std::vector<GaussianCloud>& frames,
                      const GofBuildParams& params = {});

// Frame k of the GoF; k = 0 returns the keyframe verbatim.
GaussianCloud reconstruct_frame(const GoF& gof, std::size_t k);

// Keyframe primitives whose grid-decoded displacement ever exceeds the
// threshold, or which die in any frame, go to the foreground.
SceneSplit split_foreground(const GoF& gof, double motion_threshold);

// Container: u64 PLY length + keyframe PLY + u64 track length + track section.
// Track section: u32 index, u32 frame_count, f64 bbox min/max (6), then per
// frame: u32 match count, (u32,u32) pairs, per-match u16 deltas (3 pos, 1
// opacity, 3 SH-DC), u32 birth count + 62xf32 records, u32 death count + u32
// indices. All little-endian.
std::string serialize_gof(const GoF& gof);
GoF parse_gof(const std::string& bytes);

void save_gof(const GoF& gof, const std::string& path);
GoF load_gof(const std::string& path);

}  // namespace splatstream
