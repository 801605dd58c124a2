#include "splatstream/gof.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splatstream/error.hpp"
#include "splatstream/kdtree.hpp"

namespace splatstream {

namespace {

std::uint16_t quant_unit(double v, double lo, double range) {
    if (range <= 0.0) return 0;
    double u = (v - lo) / range * 65535.0;
    long q = std::lround(u);
    return static_cast<std::uint16_t>(std::clamp(q, 0L, 65535L));
}

double dequant_unit(std::uint16_t q, double lo, double range) {
    return lo + double(q) / 65535.0 * range;
}

// Deltas quantized over a symmetric range [-r, r].
std::uint16_t quant_delta(double d, double r) {
    return quant_unit(std::clamp(d, -r, r), -r, 2.0 * r);
}
double dequant_delta(std::uint16_t q, double r) { return dequant_unit(q, -r, 2.0 * r); }

double relative_scale_change(const Vec3& a, const Vec3& b) {
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
        worst = std::max(worst, std::abs(b[i] - a[i]) / std::max(a[i], 1e-12));
    return worst;
}

double quaternion_change(const Quat& a, const Quat& b) {
    double d1 = (a.coeffs() - b.coeffs()).norm();
    double d2 = (a.coeffs() + b.coeffs()).norm();
    return std::min(d1, d2);
}

}  // namespace

std::array<std::uint16_t, 3> DeformationTrack::quantize_position(const Vec3& p) const {
    Vec3 ext = gof_bbox.extent();
    return {quant_unit(p.x(), gof_bbox.min.x(), ext.x()),
            quant_unit(p.y(), gof_bbox.min.y(), ext.y()),
            quant_unit(p.z(), gof_bbox.min.z(), ext.z())};
}

Vec3 DeformationTrack::dequantize_position(const std::array<std::uint16_t, 3>& q) const {
    Vec3 ext = gof_bbox.extent();
    return {dequant_unit(q[0], gof_bbox.min.x(), ext.x()),
            dequant_unit(q[1], gof_bbox.min.y(), ext.y()),
            dequant_unit(q[2], gof_bbox.min.z(), ext.z())};
}

std::uint64_t DeformationTrack::encoded_bytes() const {
    std::uint64_t total = 4 + 4 + 6 * 8;  // index, frame_count, bbox
    for (const auto& f : frames) {
        total += 4 + f.matches.size() * (8 + 6 + 2 + 6);
        total += 4 + f.births.size() * kRecordBytes;
        total += 4 + f.deaths.size() * 4;
    }
    return total;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_gofs(std::size_t frame_count,
                                                              std::size_t gof_len) {
    if (gof_len == 0) throw ParameterError("gof_len must be >= 1");
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t begin = 0; begin < frame_count; begin += gof_len)
        ranges.emplace_back(begin, std::min(begin + gof_len, frame_count));
    return ranges;
}

GoF build_deformation(const std::vector<GaussianCloud>& frames, const GofBuildParams& params) {
    if (frames.empty()) throw ParameterError("build_deformation needs at least one frame");

    GoF gof;
    gof.keyframe = frames[0];
    gof.track.frame_count = static_cast<std::uint32_t>(frames.size());
    for (const auto& f : frames) gof.track.gof_bbox.expand(f.bbox);
    gof.duration_s = params.fps > 0 ? double(frames.size()) / params.fps : 0.0;

    const auto& key = gof.keyframe.primitives;
    std::vector<Vec3> key_pos(key.size());
    for (std::size_t i = 0; i < key.size(); ++i) key_pos[i] = key[i].position;
    KdTree3 key_tree(key_pos);

    double r_match = params.match_radius_frac * gof.track.gof_bbox.diagonal();
    double r_match_sq = r_match * r_match;

    for (std::size_t t = 1; t < frames.size(); ++t) {
        const auto& tgt = frames[t].primitives;
        std::vector<Vec3> tgt_pos(tgt.size());
        for (std::size_t j = 0; j < tgt.size(); ++j) tgt_pos[j] = tgt[j].position;
        KdTree3 tgt_tree(tgt_pos);

        FrameDeformation fd;
        std::vector<bool> target_taken(tgt.size(), false);
        for (std::uint32_t i = 0; i < key.size(); ++i) {
            auto fwd = tgt_tree.nearest(key_pos[i]);
            bool ok = fwd.dist_sq <= r_match_sq && !tgt.empty();
            if (ok) {
                auto back = key_tree.nearest(tgt_pos[fwd.index]);
                ok = back.index == i;
            }
            if (ok) {
                // Large rotation/scale changes cannot ride on a delta track.
                ok = relative_scale_change(key[i].scale, tgt[fwd.index].scale) <=
                         params.attr_rebirth_threshold &&
                     quaternion_change(key[i].rotation, tgt[fwd.index].rotation) <=
                         params.attr_rebirth_threshold;
            }
            if (!ok) {
                fd.deaths.push_back(i);
                continue;
            }
            const auto& tp = tgt[fwd.index];
            fd.matches.emplace_back(i, fwd.index);
            fd.pos_q.push_back(gof.track.quantize_position(tp.position));
            fd.opacity_q.push_back(quant_delta(tp.opacity - key[i].opacity, 1.0));
            fd.sh_dc_q.push_back({quant_delta(tp.sh[0] - key[i].sh[0], 2.0),
                                  quant_delta(tp.sh[1] - key[i].sh[1], 2.0),
                                  quant_delta(tp.sh[2] - key[i].sh[2], 2.0)});
            target_taken[fwd.index] = true;
        }
        for (std::uint32_t j = 0; j < tgt.size(); ++j)
            if (!target_taken[j]) fd.births.push_back(tgt[j]);
        gof.track.frames.push_back(std::move(fd));
    }
    return gof;
}

GaussianCloud reconstruct_frame(const GoF& gof, std::size_t k) {
    if (k >= gof.track.frame_count)
        throw RangeError("frame " + std::to_string(k) + " out of range, GoF has " +
                         std::to_string(gof.track.frame_count) + " frames");
    if (k == 0) return gof.keyframe;

    const FrameDeformation& fd = gof.track.frames[k - 1];
    std::vector<GaussianPrimitive> prims;
    prims.reserve(fd.matches.size() + fd.births.size());
    for (std::size_t m = 0; m < fd.matches.size(); ++m) {
        GaussianPrimitive p = gof.keyframe.primitives[fd.matches[m].first];
        p.position = gof.track.dequantize_position(fd.pos_q[m]);
        p.opacity = std::clamp(p.opacity + dequant_delta(fd.opacity_q[m], 1.0), 0.0, 1.0);
        for (int c = 0; c < 3; ++c) p.sh[c] += dequant_delta(fd.sh_dc_q[m][c], 2.0);
        prims.push_back(std::move(p));
    }
    for (const auto& b : fd.births) prims.push_back(b);
    return GaussianCloud(std::move(prims));
}

SceneSplit split_foreground(const GoF& gof, double motion_threshold) {
    if (motion_threshold < 0) throw ParameterError("motion_threshold must be >= 0");
    const auto& key = gof.keyframe.primitives;
    std::vector<bool> fg(key.size(), false);

    // Displacements are measured between grid-decoded endpoints so a truly
    // static primitive reports exactly zero.
    std::vector<Vec3> key_decoded(key.size());
    for (std::size_t i = 0; i < key.size(); ++i)
        key_decoded[i] =
            gof.track.dequantize_position(gof.track.quantize_position(key[i].position));

    for (const auto& fd : gof.track.frames) {
        for (std::size_t m = 0; m < fd.matches.size(); ++m) {
            std::uint32_t i = fd.matches[m].first;
            double disp = (gof.track.dequantize_position(fd.pos_q[m]) - key_decoded[i]).norm();
            if (disp > motion_threshold) fg[i] = true;
        }
        for (std::uint32_t i : fd.deaths) fg[i] = true;
    }

    SceneSplit split;
    std::vector<GaussianPrimitive> fg_prims, bg_prims;
    for (std::uint32_t i = 0; i < key.size(); ++i) {
        if (fg[i]) {
            split.fg_indices.push_back(i);
            fg_prims.push_back(key[i]);
        } else {
            bg_prims.push_back(key[i]);
        }
    }
    split.foreground = GaussianCloud(std::move(fg_prims));
    split.background = GaussianCloud(std::move(bg_prims));
    return split;
}

namespace {

template <typename T>
void put(std::string& out, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    out.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
    if (pos + sizeof(T) > in.size()) throw TruncationError("GoF container ends mid-field");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

std::string serialize_gof(const GoF& gof) {
    std::string track;
    put<std::uint32_t>(track, gof.index);
    put<std::uint32_t>(track, gof.track.frame_count);
    for (int a = 0; a < 3; ++a) put<double>(track, gof.track.gof_bbox.min[a]);
    for (int a = 0; a < 3; ++a) put<double>(track, gof.track.gof_bbox.max[a]);
    for (const auto& fd : gof.track.frames) {
        put<std::uint32_t>(track, static_cast<std::uint32_t>(fd.matches.size()));
        for (const auto& [ki, ti] : fd.matches) {
            put<std::uint32_t>(track, ki);
            put<std::uint32_t>(track, ti);
        }
        for (std::size_t m = 0; m < fd.matches.size(); ++m) {
            for (int a = 0; a < 3; ++a) put<std::uint16_t>(track, fd.pos_q[m][a]);
            put<std::uint16_t>(track, fd.opacity_q[m]);
            for (int c = 0; c < 3; ++c) put<std::uint16_t>(track, fd.sh_dc_q[m][c]);
        }
        put<std::uint32_t>(track, static_cast<std::uint32_t>(fd.births.size()));
        for (const auto& b : fd.births) {
            auto raw = b.to_stored();
            track.append(reinterpret_cast<const char*>(raw.data()), kRecordBytes);
        }
        put<std::uint32_t>(track, static_cast<std::uint32_t>(fd.deaths.size()));
        for (std::uint32_t d : fd.deaths) put<std::uint32_t>(track, d);
    }

    std::string ply = write_ply(gof.keyframe);
    std::string out;
    out.reserve(16 + ply.size() + track.size());
    put<std::uint64_t>(out, ply.size());
    out += ply;
    put<std::uint64_t>(out, track.size());
    out += track;
    return out;
}

GoF parse_gof(const std::string& bytes) {
    std::size_t pos = 0;
    auto ply_len = take<std::uint64_t>(bytes, pos);
    if (pos + ply_len > bytes.size()) throw TruncationError("GoF container: keyframe truncated");
    GoF gof;
    gof.keyframe = parse_ply(bytes.substr(pos, ply_len));
    pos += ply_len;
    auto track_len = take<std::uint64_t>(bytes, pos);
    if (pos + track_len > bytes.size()) throw TruncationError("GoF container: track truncated");

    gof.index = take<std::uint32_t>(bytes, pos);
    gof.track.frame_count = take<std::uint32_t>(bytes, pos);
    if (gof.track.frame_count == 0) throw FormatError("GoF frame_count must be >= 1");
    for (int a = 0; a < 3; ++a) gof.track.gof_bbox.min[a] = take<double>(bytes, pos);
    for (int a = 0; a < 3; ++a) gof.track.gof_bbox.max[a] = take<double>(bytes, pos);
    gof.track.frames.resize(gof.track.frame_count - 1);
    for (auto& fd : gof.track.frames) {
        auto n_matches = take<std::uint32_t>(bytes, pos);
        fd.matches.resize(n_matches);
        for (auto& [ki, ti] : fd.matches) {
            ki = take<std::uint32_t>(bytes, pos);
            ti = take<std::uint32_t>(bytes, pos);
        }
        fd.pos_q.resize(n_matches);
        fd.opacity_q.resize(n_matches);
        fd.sh_dc_q.resize(n_matches);
        for (std::uint32_t m = 0; m < n_matches; ++m) {
            for (int a = 0; a < 3; ++a) fd.pos_q[m][a] = take<std::uint16_t>(bytes, pos);
            fd.opacity_q[m] = take<std::uint16_t>(bytes, pos);
            for (int c = 0; c < 3; ++c) fd.sh_dc_q[m][c] = take<std::uint16_t>(bytes, pos);
        }
        auto n_births = take<std::uint32_t>(bytes, pos);
        fd.births.reserve(n_births);
        for (std::uint32_t b = 0; b < n_births; ++b) {
            if (pos + kRecordBytes > bytes.size())
                throw TruncationError("GoF container: birth record truncated");
            std::array<float, kStoredScalarsPerPrimitive> raw;
            std::memcpy(raw.data(), bytes.data() + pos, kRecordBytes);
            pos += kRecordBytes;
            fd.births.push_back(GaussianPrimitive::from_stored(raw));
        }
        auto n_deaths = take<std::uint32_t>(bytes, pos);
        fd.deaths.resize(n_deaths);
        for (auto& d : fd.deaths) d = take<std::uint32_t>(bytes, pos);
    }
    return gof;
}

void save_gof(const GoF& gof, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    std::string bytes = serialize_gof(gof);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to " + path);
}

GoF load_gof(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_gof(ss.str());
}

}  // namespace splatstream
