#include "splatstream/ladder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "splatstream/error.hpp"

namespace splatstream {

double significance(const GaussianPrimitive& p) {
    return p.opacity * std::cbrt(p.scale.x() * p.scale.y() * p.scale.z());
}

std::vector<std::uint32_t> apply_mask(const std::vector<std::uint32_t>& members,
                                      const GaussianCloud& cloud, double threshold) {
    if (threshold < 0) throw ParameterError("mask threshold must be >= 0");
    std::vector<std::uint32_t> kept;
    for (auto idx : members)
        if (significance(cloud.primitives[idx]) >= threshold) kept.push_back(idx);
    return kept;
}

TileLadder build_ladder(const AdaptiveTile& tile, const GaussianCloud& cloud,
                        const LadderParams& params) {
    const auto& t = params.retention_targets;
    for (int l = 0; l < 4; ++l) {
        if (t[l] <= 0.0 || t[l] > 1.0 || (l > 0 && t[l] <= t[l - 1]))
            throw ParameterError("retention targets must be strictly increasing in (0,1]");
    }
    if (t[3] != 1.0) throw ParameterError("level-4 retention target must be 1.0");

    TileLadder ladder;
    ladder.tile_id = tile.id;
    ladder.saliency = tile.saliency;

    const std::size_t m = tile.member_indices.size();
    // One sorted order (significance desc, index asc) makes the levels nested
    // prefixes by construction.
    std::vector<std::uint32_t> by_sig = tile.member_indices;
    std::vector<double> sig(cloud.size());
    for (auto idx : tile.member_indices) sig[idx] = significance(cloud.primitives[idx]);
    std::sort(by_sig.begin(), by_sig.end(), [&](std::uint32_t a, std::uint32_t b) {
        return sig[a] != sig[b] ? sig[a] > sig[b] : a < b;
    });
    double max_sig = m > 0 ? sig[by_sig.front()] : 0.0;

    for (int l = 0; l < 4; ++l) {
        QualityLevel& level = ladder.levels[l];
        level.level = l + 1;
        double retention =
            l == 3 ? 1.0
                   : std::clamp(t[l] + params.saliency_gain * (tile.saliency - 0.5),
                                params.min_retention, 1.0);
        std::size_t k = l == 3 ? m
                               : std::min<std::size_t>(
                                     m, std::size_t(std::llround(retention * double(m))));
        level.retained_indices.assign(by_sig.begin(), by_sig.begin() + k);
        std::sort(level.retained_indices.begin(), level.retained_indices.end());
        // (1 - retention)-quantile of member significance; levels that retain
        // nothing sit just above the tile's maximum.
        level.threshold = k > 0 ? sig[by_sig[k - 1]] : max_sig + 1.0;
        if (l == 3) level.threshold = 0.0;
        level.encoded_bytes = kTileHeaderBytes + k * kRecordBytes;
    }
    return ladder;
}

namespace {

constexpr std::uint32_t kTileMagic = 0x4C495447;  // "GTIL"

std::uint64_t fnv1a64(const char* data, std::size_t n) {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t pos) {
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    return v;
}

}  // namespace

std::string encode_tile(const QualityLevel& level, int tile_id, const GaussianCloud& cloud) {
    std::string payload;
    payload.reserve(level.retained_indices.size() * kRecordBytes);
    for (auto idx : level.retained_indices) {
        auto raw = cloud.primitives[idx].to_stored();
        payload.append(reinterpret_cast<const char*>(raw.data()), kRecordBytes);
    }
    std::string out;
    out.reserve(kTileHeaderBytes + payload.size());
    put<std::uint32_t>(out, kTileMagic);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(level.level));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(tile_id));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(level.retained_indices.size()));
    put<std::uint64_t>(out, fnv1a64(payload.data(), payload.size()));
    out += payload;
    return out;
}

DecodedTile decode_tile(const std::string& blob) {
    if (blob.size() < kTileHeaderBytes) throw TruncationError("tile blob shorter than header");
    if (take<std::uint32_t>(blob, 0) != kTileMagic) throw FormatError("bad tile magic");
    DecodedTile tile;
    tile.level = static_cast<int>(take<std::uint32_t>(blob, 4));
    tile.tile_id = static_cast<int>(take<std::uint64_t>(blob, 8));
    auto count = take<std::uint64_t>(blob, 16);
    auto checksum = take<std::uint64_t>(blob, 24);
    if (blob.size() < kTileHeaderBytes + count * kRecordBytes)
        throw TruncationError("tile blob body truncated");
    if (fnv1a64(blob.data() + kTileHeaderBytes, count * kRecordBytes) != checksum)
        throw FormatError("tile checksum mismatch");
    tile.primitives.reserve(count);
    std::array<float, kStoredScalarsPerPrimitive> raw;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::memcpy(raw.data(), blob.data() + kTileHeaderBytes + i * kRecordBytes, kRecordBytes);
        tile.primitives.push_back(GaussianPrimitive::from_stored(raw));
    }
    return tile;
}

std::string ladder_csv_header() { return "gof,tile,level,retained,bytes,threshold\n"; }

std::string ladder_csv_rows(std::uint32_t gof_index, const TileLadder& ladder) {
    std::ostringstream out;
    out.precision(9);
    for (const auto& level : ladder.levels) {
        out << gof_index << ',' << ladder.tile_id << ',' << level.level << ','
            << level.retained_indices.size() << ',' << level.encoded_bytes << ','
            << level.threshold << '\n';
    }
    return out.str();
}

}  // namespace splatstream
