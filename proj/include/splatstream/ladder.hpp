#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/splat.hpp"
#include "splatstream/tiling.hpp"

namespace splatstream {

// Masking score: opacity x geometric-mean ellipsoid radius. Zero iff the
// primitive is fully transparent.
double significance(const GaussianPrimitive& p);

struct QualityLevel {
    int level{4};  // 1..4, 4 = full quality
    std::vector<std::uint32_t> retained_indices;
    double threshold{0.0};
    std::uint64_t encoded_bytes{0};
    double gpsnr_vs_full{0.0};  // filled by the metrics/annotate stage
};

struct TileLadder {
    int tile_id{0};
    std::array<QualityLevel, 4> levels;
    double saliency{0.0};
};

struct LadderParams {
    std::array<double, 4> retention_targets{0.15, 0.40, 0.70, 1.0};
    double saliency_gain{0.3};
    double min_retention{0.05};
};

// Member indices whose significance is >= threshold.
std::vector<std::uint32_t> apply_mask(const std::vector<std::uint32_t>& members,
                                      const GaussianCloud& cloud, double threshold);

// Four nested levels per tile. Effective retention for levels 1..3 is
// clamp(target + gain*(saliency-0.5), min_retention, 1); level 4 retains all.
// Thresholds are per-tile significance quantiles. Throws ParameterError on
// non-increasing targets or a last target != 1.
TileLadder build_ladder(const AdaptiveTile& tile, const GaussianCloud& cloud,
                        const LadderParams& params = {});

inline constexpr std::size_t kTileHeaderBytes = 32;

// Blob: 32-byte header (magic 'GTIL', level, tile id, count, FNV-1a checksum)
// followed by the retained primitives as 62xf32 PLY-layout records.
std::string encode_tile(const QualityLevel& level, int tile_id, const GaussianCloud& cloud);

struct DecodedTile {
    int tile_id{0};
    int level{4};
    std::vector<GaussianPrimitive> primitives;
};

DecodedTile decode_tile(const std::string& blob);

// CSV rows: gof,tile,level,retained,bytes,threshold
std::string ladder_csv_header();
std::string ladder_csv_rows(std::uint32_t gof_index, const TileLadder& ladder);

}  // namespace splatstream
