#include "splatstream/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "splatstream/error.hpp"

namespace splatstream {

namespace {

constexpr double kBytesPerSecondPerMbps = 1e6 / 8.0;

}  // namespace

double BandwidthTrace::mbps_at(double t) const {
    if (samples.empty()) return 0.0;
    // Last sample with time <= t; before the first sample, the first holds.
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const auto& s) { return v < s.first; });
    if (it == samples.begin()) return it->second;
    return std::prev(it)->second;
}

double BandwidthTrace::finish_time(double t0, double bytes) const {
    if (bytes <= 0.0) return t0;
    if (samples.empty()) return std::numeric_limits<double>::infinity();
    double t = t0;
    double remaining = bytes;
    // Walk the segments that overlap [t0, inf); the last one extends forever.
    std::size_t i = 0;
    while (i + 1 < samples.size() && samples[i + 1].first <= t) ++i;
    for (; i < samples.size(); ++i) {
        double rate = samples[i].second * kBytesPerSecondPerMbps;
        double seg_end =
            i + 1 < samples.size() ? samples[i + 1].first : std::numeric_limits<double>::infinity();
        if (rate > 0.0) {
            double needed = remaining / rate;
            if (t + needed <= seg_end) return t + needed;
            remaining -= rate * (seg_end - t);
        }
        if (seg_end == std::numeric_limits<double>::infinity())
            return std::numeric_limits<double>::infinity();
        t = seg_end;
    }
    return std::numeric_limits<double>::infinity();
}

double BandwidthTrace::integral_bytes(double t0, double t1) const {
    if (samples.empty() || t1 <= t0) return 0.0;
    double total = 0.0;
    double t = t0;
    std::size_t i = 0;
    while (i + 1 < samples.size() && samples[i + 1].first <= t) ++i;
    for (; i < samples.size() && t < t1; ++i) {
        double seg_end =
            i + 1 < samples.size() ? samples[i + 1].first : std::numeric_limits<double>::infinity();
        double end = std::min(seg_end, t1);
        total += samples[i].second * kBytesPerSecondPerMbps * (end - t);
        t = end;
    }
    return total;
}

BandwidthTrace gen_trace(TraceKind kind, double duration_s, double step_s, std::uint64_t seed) {
    if (duration_s <= 0.0 || step_s <= 0.0)
        throw ParameterError("trace duration and step must be positive");
    if (kind == TraceKind::File) throw ParameterError("gen_trace needs Std5G or Ext5G");

    std::mt19937_64 rng(seed);
    BandwidthTrace trace;
    trace.kind = kind;
    std::size_t n = std::size_t(std::ceil(duration_s / step_s)) + 1;

    if (kind == TraceKind::Std5G) {
        constexpr double lo = 350.0, hi = 700.0, sigma = 25.0;
        std::uniform_real_distribution<double> start(lo, hi);
        std::normal_distribution<double> step(0.0, sigma);
        double x = start(rng);
        for (std::size_t i = 0; i < n; ++i) {
            trace.samples.emplace_back(double(i) * step_s, x);
            x += step(rng);
            while (x < lo || x > hi) {  // reflect at the bounds
                if (x < lo) x = 2 * lo - x;
                if (x > hi) x = 2 * hi - x;
            }
        }
    } else {
        constexpr double hi = 1200.0, outage_prob = 0.1;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> target_dist(0.0, hi);
        std::uniform_real_distribution<double> dwell_dist(1.0, 5.0);
        double target = unit(rng) < outage_prob ? 0.0 : target_dist(rng);
        double regime_end = dwell_dist(rng);
        for (std::size_t i = 0; i < n; ++i) {
            double t = double(i) * step_s;
            while (t >= regime_end) {
                target = unit(rng) < outage_prob ? 0.0 : target_dist(rng);
                regime_end += dwell_dist(rng);
            }
            trace.samples.emplace_back(t, target);
        }
    }
    return trace;
}

std::string bandwidth_trace_csv(const BandwidthTrace& trace) {
    std::ostringstream out;
    out << "t_seconds,mbps\n";
    out.precision(12);
    for (const auto& [t, mbps] : trace.samples) out << t << ',' << mbps << '\n';
    return out.str();
}

BandwidthTrace parse_bandwidth_trace_csv(const std::string& text) {
    BandwidthTrace trace;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("t_seconds", 0) == 0) continue;
        }
        std::istringstream ls(line);
        double t, mbps;
        char comma;
        if (!(ls >> t >> comma >> mbps) || comma != ',')
            throw FormatError("bad bandwidth trace row: " + line);
        if (mbps < 0) throw ValueError("negative bandwidth in trace");
        if (t <= prev_t) throw FormatError("trace times must be strictly increasing");
        prev_t = t;
        trace.samples.emplace_back(t, mbps);
    }
    if (trace.samples.empty()) throw FormatError("empty bandwidth trace");
    return trace;
}

const Camera& FovTrace::camera_at(double t) const {
    if (samples.empty()) throw ParameterError("FoV trace is empty");
    auto it = std::upper_bound(samples.begin(), samples.end(), t,
                               [](double v, const auto& s) { return v < s.first; });
    if (it == samples.begin()) return it->second;
    return std::prev(it)->second;
}

std::string fov_trace_csv(const FovTrace& trace) {
    std::ostringstream out;
    out << "t_seconds,px,py,pz,qw,qx,qy,qz,vfov_rad,aspect,near,far\n";
    out.precision(12);
    for (const auto& [t, cam] : trace.samples) {
        out << t << ',' << cam.position.x() << ',' << cam.position.y() << ','
            << cam.position.z() << ',' << cam.orientation.w() << ',' << cam.orientation.x()
            << ',' << cam.orientation.y() << ',' << cam.orientation.z() << ','
            << cam.vertical_fov << ',' << cam.aspect << ',' << cam.near_plane << ','
            << cam.far_plane << '\n';
    }
    return out.str();
}

FovTrace parse_fov_trace_csv(const std::string& text) {
    FovTrace trace;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    double prev_t = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line.rfind("t_seconds", 0) == 0) continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double t, px, py, pz, qw, qx, qy, qz, vfov, aspect, near_p, far_p;
        if (!(ls >> t >> px >> py >> pz >> qw >> qx >> qy >> qz >> vfov >> aspect >> near_p >>
              far_p))
            throw FormatError("bad FoV trace row: " + line);
        if (t <= prev_t) throw FormatError("trace times must be strictly increasing");
        prev_t = t;
        Camera cam;
        cam.position = Vec3(px, py, pz);
        cam.orientation = Quat(qw, qx, qy, qz).normalized();
        cam.vertical_fov = vfov;
        cam.aspect = aspect;
        cam.near_plane = near_p;
        cam.far_plane = far_p;
        trace.samples.emplace_back(t, cam);
    }
    if (trace.samples.empty()) throw FormatError("empty FoV trace");
    return trace;
}

double Manifest::video_duration() const {
    double d = 0.0;
    for (const auto& g : gofs) d += g.duration_s;
    return d;
}

void Manifest::validate() const {
    if (fps <= 0) throw ValueError("manifest fps must be positive");
    for (const auto& g : gofs) {
        if (g.duration_s <= 0) throw ValueError("GoF durations must be positive");
        for (const auto& t : g.tiles)
            for (const auto& l : t.levels)
                if (l.reconstructed_bytes < l.encoded_bytes)
                    throw ValueError("reconstructed bytes below encoded bytes");
    }
}

namespace {

nlohmann::json aabb_to_json(const Aabb& b) {
    return {{"min", {b.min.x(), b.min.y(), b.min.z()}},
            {"max", {b.max.x(), b.max.y(), b.max.z()}}};
}

Aabb aabb_from_json(const nlohmann::json& j) {
    return Aabb::of(Vec3(j["min"][0], j["min"][1], j["min"][2]),
                    Vec3(j["max"][0], j["max"][1], j["max"][2]));
}

}  // namespace

std::string manifest_json(const Manifest& m) {
    nlohmann::json doc;
    doc["fps"] = m.fps;
    doc["video_duration_s"] = m.video_duration();
    doc["gofs"] = nlohmann::json::array();
    for (const auto& g : m.gofs) {
        nlohmann::json jg;
        jg["index"] = g.index;
        jg["duration_s"] = g.duration_s;
        jg["tiles"] = nlohmann::json::array();
        for (const auto& t : g.tiles) {
            nlohmann::json jt;
            jt["tile_id"] = t.tile_id;
            jt["saliency"] = t.saliency;
            jt["aabb"] = aabb_to_json(t.aabb);
            jt["decode_ms_per_frame"] = t.decode_ms_per_frame;
            jt["levels"] = nlohmann::json::array();
            for (const auto& l : t.levels)
                jt["levels"].push_back({{"level", l.level},
                                        {"encoded_bytes", l.encoded_bytes},
                                        {"reconstructed_bytes", l.reconstructed_bytes},
                                        {"gpsnr_vs_full", l.gpsnr_vs_full}});
            jg["tiles"].push_back(std::move(jt));
        }
        doc["gofs"].push_back(std::move(jg));
    }
    return doc.dump(2) + "\n";
}

Manifest parse_manifest_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    Manifest m;
    m.fps = doc.at("fps");
    for (const auto& jg : doc.at("gofs")) {
        ManifestGof g;
        g.index = jg.at("index");
        g.duration_s = jg.at("duration_s");
        for (const auto& jt : jg.at("tiles")) {
            ManifestTile t;
            t.tile_id = jt.at("tile_id");
            t.saliency = jt.at("saliency");
            t.aabb = aabb_from_json(jt.at("aabb"));
            t.decode_ms_per_frame = jt.at("decode_ms_per_frame");
            const auto& jl = jt.at("levels");
            if (jl.size() != 4) throw FormatError("manifest tile needs exactly 4 levels");
            for (int l = 0; l < 4; ++l) {
                t.levels[l].level = jl[l].at("level");
                t.levels[l].encoded_bytes = jl[l].at("encoded_bytes");
                t.levels[l].reconstructed_bytes = jl[l].at("reconstructed_bytes");
                t.levels[l].gpsnr_vs_full = jl[l].at("gpsnr_vs_full");
            }
            g.tiles.push_back(std::move(t));
        }
        m.gofs.push_back(std::move(g));
    }
    m.validate();
    return m;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_manifest_json(ss.str());
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << manifest_json(m);
}

DeliveryMode choose_mode(const ManifestTile& tile, int level, std::uint64_t headroom_bytes,
                         double decode_budget_ms) {
    const ManifestLevel& l = tile.levels[level - 1];
    std::uint64_t extra = l.reconstructed_bytes - l.encoded_bytes;
    if (tile.decode_ms_per_frame > decode_budget_ms && extra <= headroom_bytes)
        return DeliveryMode::Reconstructed;
    return DeliveryMode::Encoded;
}

namespace {

// Buffer/stall bookkeeping between download-completion events.
struct PlaybackState {
    double buffer_s{0.0};
    double played_s{0.0};
    double stall_s{0.0};
    std::size_t stall_count{0};
    double last_stall_end{-1.0};
    double stall_epsilon{1e-9};

    // Advance wall time from t0 to t1 with no arrivals in between.
    void advance(double t0, double t1) {
        if (t1 <= t0) return;
        double span = t1 - t0;
        double play = std::min(buffer_s, span);
        buffer_s -= play;
        played_s += play;
        double stall = span - play;
        if (stall > stall_epsilon) {
            double stall_begin = t0 + play;
            bool contiguous = last_stall_end >= 0 && stall_begin - last_stall_end <= stall_epsilon;
            if (!contiguous) ++stall_count;
            stall_s += stall;
            last_stall_end = t1;
        }
    }
};

}  // namespace

SessionReport simulate_session(const Manifest& manifest, const BandwidthTrace& bw,
                               const FovTrace& fov, const SimulatorConfig& cfg) {
    manifest.validate();
    if (manifest.gofs.empty()) throw ParameterError("manifest has no GoFs");
    double video_d = manifest.video_duration();
    double last_gof_start = video_d - manifest.gofs.back().duration_s;
    if (bw.duration() + 1e-9 < video_d)
        throw TraceCoverageError("bandwidth trace shorter than the video");
    if (fov.duration() + 1e-9 < last_gof_start)
        throw TraceCoverageError("FoV trace does not reach the last GoF");

    const double session_cap = std::max(bw.duration(), video_d);
    SessionReport report;
    PlaybackState state;
    state.stall_epsilon = cfg.stall_epsilon_s;

    double t = 0.0;        // wall clock
    double media_t = 0.0;  // start time of the current GoF in media time
    bool truncated = false;

    for (const auto& gof : manifest.gofs) {
        GofReport row;
        row.gof = gof.index;
        row.duration_s = gof.duration_s;

        if (truncated) {
            report.gofs.push_back(std::move(row));
            media_t += gof.duration_s;
            continue;
        }

        const Camera& cam = fov.camera_at(media_t);
        std::vector<AdaptiveTile> boxes;
        boxes.reserve(gof.tiles.size());
        for (const auto& tile : gof.tiles) {
            AdaptiveTile at;
            at.id = tile.tile_id;
            at.aabb = tile.aabb;
            boxes.push_back(std::move(at));
        }
        std::vector<int> visible = visible_tiles(boxes, cam);

        std::vector<double> history;
        for (const auto& [st, mbps] : bw.samples) {
            if (st > t) break;
            history.push_back(mbps);
        }
        double predicted = history.empty() ? 0.0 : predict_bandwidth(history, cfg.predictor_window);
        double budget_real =
            predicted * kBytesPerSecondPerMbps * gof.duration_s * cfg.safety_factor;
        std::uint64_t budget =
            std::uint64_t(std::min(std::max(budget_real, 0.0), 9.0e18));

        std::map<int, const ManifestTile*> by_id;
        for (const auto& tile : gof.tiles) by_id[tile.tile_id] = &tile;

        // Drop the least salient visible tiles until the MCKP fits. The last
        // tile is never dropped: it is requested at level 1 even over budget,
        // so a starved session keeps one pending download (and one stall).
        std::vector<int> active = visible;
        Assignment assignment;
        for (;;) {
            if (active.empty()) break;
            SelectionProblem problem;
            problem.budget_bytes = budget;
            problem.granularity_bytes = cfg.dp_granularity_bytes;
            for (int id : active) {
                const ManifestTile& tile = *by_id.at(id);
                problem.tile_ids.push_back(id);
                std::array<LevelOption, 4> opts;
                for (int l = 0; l < 4; ++l) {
                    opts[l].size_bytes = tile.levels[l].encoded_bytes;
                    double norm = std::clamp(tile.levels[l].gpsnr_vs_full / cfg.gpsnr_cap_db,
                                             0.0, 1.0);
                    opts[l].utility = tile.saliency * norm;
                }
                // The quantile masks keep utilities monotone already; enforce
                // anyway so rounding noise cannot break the solver contract.
                for (int l = 1; l < 4; ++l)
                    opts[l].utility = std::max(opts[l].utility, opts[l - 1].utility);
                problem.options.push_back(opts);
            }
            try {
                assignment = select_qualities(problem);
                break;
            } catch (const InfeasibleError&) {
                if (active.size() == 1) {
                    assignment = Assignment{};
                    assignment.level_per_tile[active[0]] = 1;
                    assignment.total_bytes = by_id.at(active[0])->levels[0].encoded_bytes;
                    assignment.total_utility = 0.0;
                    break;
                }
                auto worst = std::min_element(
                    active.begin(), active.end(), [&](int a, int b) {
                        double sa = by_id.at(a)->saliency, sb = by_id.at(b)->saliency;
                        if (sa != sb) return sa < sb;
                        return a > b;  // among equals drop the higher id first
                    });
                row.dropped_tiles.push_back(*worst);
                active.erase(worst);
            }
        }
        std::sort(row.dropped_tiles.begin(), row.dropped_tiles.end());
        row.selected_levels = assignment.level_per_tile;

        // Dual-mode delivery: spend leftover budget on pre-reconstructed tiles
        // for the heaviest decoders first.
        std::uint64_t encoded_total = assignment.total_bytes;
        std::uint64_t headroom = budget > encoded_total ? budget - encoded_total : 0;
        std::vector<int> by_saliency = active;
        std::sort(by_saliency.begin(), by_saliency.end(), [&](int a, int b) {
            double sa = by_id.at(a)->saliency, sb = by_id.at(b)->saliency;
            if (sa != sb) return sa > sb;
            return a < b;
        });
        std::uint64_t download_bytes = 0;
        double decode_ms = 0.0;
        for (int id : by_saliency) {
            const ManifestTile& tile = *by_id.at(id);
            int level = assignment.level_per_tile.at(id);
            DeliveryMode mode = choose_mode(tile, level, headroom, cfg.decode_budget_ms);
            row.modes[id] = mode;
            const ManifestLevel& lv = tile.levels[level - 1];
            if (mode == DeliveryMode::Reconstructed) {
                headroom -= lv.reconstructed_bytes - lv.encoded_bytes;
                download_bytes += lv.reconstructed_bytes;
            } else {
                download_bytes += lv.encoded_bytes;
                decode_ms += tile.decode_ms_per_frame;
            }
        }
        row.downloaded_bytes = download_bytes;
        row.decode_ms = decode_ms;

        // Size-weighted mean normalized GPSNR; dropped visible tiles count as
        // zero quality at their minimum (level-1) weight.
        double wsum = 0.0, qsum = 0.0;
        for (int id : active) {
            const ManifestTile& tile = *by_id.at(id);
            const ManifestLevel& lv = tile.levels[assignment.level_per_tile.at(id) - 1];
            double w = double(lv.encoded_bytes);
            wsum += w;
            qsum += w * std::clamp(lv.gpsnr_vs_full / cfg.gpsnr_cap_db, 0.0, 1.0);
        }
        for (int id : row.dropped_tiles) wsum += double(by_id.at(id)->levels[0].encoded_bytes);
        row.quality = wsum > 0 ? qsum / wsum : 0.0;

        // Download, then credit the buffer.
        double done = bw.finish_time(t, double(download_bytes));
        double stall_before = state.stall_s;
        if (done > session_cap) {
            state.advance(t, session_cap);
            t = session_cap;
            truncated = true;
            row.quality = 0.0;
            row.stall_s = state.stall_s - stall_before;
            report.gofs.push_back(std::move(row));
            media_t += gof.duration_s;
            continue;
        }
        state.advance(t, done);
        t = done;
        state.buffer_s += gof.duration_s;
        row.stall_s = state.stall_s - stall_before;
        row.delivered = true;
        report.downloaded_bytes += download_bytes;
        report.gofs.push_back(std::move(row));
        media_t += gof.duration_s;
    }

    // Drain whatever is buffered after the last arrival.
    if (!truncated && state.buffer_s > 0) {
        double end = t + state.buffer_s;
        state.advance(t, end);
        t = end;
    }

    report.wall_clock_s = t;
    report.played_s = state.played_s;
    report.total_stall_s = state.stall_s;
    report.stall_count = state.stall_count;

    double dsum = 0.0, qsum = 0.0;
    for (const auto& row : report.gofs) {
        dsum += row.duration_s;
        qsum += row.duration_s * row.quality;
    }
    report.mean_quality = dsum > 0 ? qsum / dsum : 0.0;
    report.qoe = qoe(report.mean_quality, report.total_stall_s, report.stall_count,
                     cfg.qoe_weights);
    return report;
}

std::string session_report_json(const SessionReport& r) {
    nlohmann::json doc;
    doc["totals"] = {{"stall_s", r.total_stall_s},
                     {"stall_count", r.stall_count},
                     {"mean_quality", r.mean_quality},
                     {"qoe", r.qoe},
                     {"wall_clock_s", r.wall_clock_s},
                     {"played_s", r.played_s},
                     {"downloaded_bytes", r.downloaded_bytes}};
    doc["gofs"] = nlohmann::json::array();
    for (const auto& g : r.gofs) {
        nlohmann::json jg;
        jg["gof"] = g.gof;
        jg["duration_s"] = g.duration_s;
        jg["downloaded_bytes"] = g.downloaded_bytes;
        jg["decode_ms"] = g.decode_ms;
        jg["stall_s"] = g.stall_s;
        jg["quality"] = g.quality;
        jg["delivered"] = g.delivered;
        jg["levels"] = nlohmann::json::object();
        for (const auto& [tile, level] : g.selected_levels)
            jg["levels"][std::to_string(tile)] = level;
        jg["modes"] = nlohmann::json::object();
        for (const auto& [tile, mode] : g.modes)
            jg["modes"][std::to_string(tile)] =
                mode == DeliveryMode::Reconstructed ? "reconstructed" : "encoded";
        jg["dropped"] = g.dropped_tiles;
        doc["gofs"].push_back(std::move(jg));
    }
    return doc.dump(2) + "\n";
}

std::string session_report_csv(const SessionReport& r) {
    std::ostringstream out;
    out << "gof,duration_s,downloaded_bytes,decode_ms,stall_s,quality,delivered,dropped\n";
    out.precision(9);
    for (const auto& g : r.gofs) {
        out << g.gof << ',' << g.duration_s << ',' << g.downloaded_bytes << ',' << g.decode_ms
            << ',' << g.stall_s << ',' << g.quality << ',' << (g.delivered ? 1 : 0) << ',';
        for (std::size_t i = 0; i < g.dropped_tiles.size(); ++i) {
            if (i) out << ';';
            out << g.dropped_tiles[i];
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace splatstream
