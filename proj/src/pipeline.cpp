#include "splatstream/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "splatstream/error.hpp"
#include "splatstream/metrics.hpp"
#include "splatstream/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace splatstream {

std::string tiling_mode_name(TilingMode mode) {
    switch (mode) {
        case TilingMode::AT: return "AT";
        case TilingMode::NT: return "NT";
        case TilingMode::T32: return "32T";
        case TilingMode::T64: return "64T";
    }
    return "AT";
}

TilingMode tiling_mode_from_name(const std::string& name) {
    if (name == "AT") return TilingMode::AT;
    if (name == "NT") return TilingMode::NT;
    if (name == "32T") return TilingMode::T32;
    if (name == "64T") return TilingMode::T64;
    throw ParameterError("unknown tiling mode: " + name + " (expected AT, NT, 32T or 64T)");
}

namespace {

std::string trace_kind_name(TraceKind kind) {
    switch (kind) {
        case TraceKind::Std5G: return "Std5G";
        case TraceKind::Ext5G: return "Ext5G";
        case TraceKind::File: return "File";
    }
    return "File";
}

TraceKind trace_kind_from_name(const std::string& name) {
    if (name == "Std5G") return TraceKind::Std5G;
    if (name == "Ext5G") return TraceKind::Ext5G;
    if (name == "File") return TraceKind::File;
    throw ParameterError("unknown trace kind: " + name);
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path.string() + " for writing");
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) throw Error("short write to " + path.string());
}

std::string zero_pad(std::uint64_t v, int width) {
    std::string s = std::to_string(v);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

bool glob_match(const std::string& pattern, const std::string& name) {
    // '*' and '?' in the filename component only.
    std::size_t p = 0, n = 0, star = std::string::npos, star_n = 0;
    while (n < name.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
            ++p;
            ++n;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            star_n = n;
        } else if (star != std::string::npos) {
            p = star + 1;
            n = ++star_n;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
    fs::path pat(pattern);
    fs::path dir = pat.parent_path();
    if (dir.empty()) dir = ".";
    std::string leaf = pat.filename().string();
    if (dir.string().find_first_of("*?") != std::string::npos)
        throw ParameterError("wildcards are only supported in the filename: " + pattern);
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (glob_match(leaf, entry.path().filename().string())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Paths {
    fs::path out;
    explicit Paths(const PipelineConfig& cfg) : out(cfg.output_dir) {}

    fs::path ingest_index() const { return out / "ingest" / "index.json"; }
    fs::path ingest_frame(std::size_t f) const {
        return out / "ingest" / ("frame_" + zero_pad(f, 5) + ".ply");
    }
    fs::path gof_index() const { return out / "gof" / "index.json"; }
    fs::path gof_bin(std::size_t g) const {
        return out / "gof" / ("gof_" + zero_pad(g, 3) + ".bin");
    }
    fs::path tiles_json(const std::string& mode, std::size_t g) const {
        return out / "tiles" / mode / ("gof_" + zero_pad(g, 3) + "_tiles.json");
    }
    fs::path saliency_csv_path(const std::string& mode, std::size_t g) const {
        return out / "tiles" / mode / ("gof_" + zero_pad(g, 3) + "_saliency.csv");
    }
    fs::path ladder_blob(const std::string& mode, std::size_t g, int tile, int level) const {
        return out / "ladders" / mode /
               ("gof_" + zero_pad(g, 3) + "_tile_" + zero_pad(tile, 4) + "_L" +
                std::to_string(level) + ".bin");
    }
    fs::path ladder_index(const std::string& mode) const {
        return out / "ladders" / mode / "index.json";
    }
    fs::path ladder_csv_path(const std::string& mode) const {
        return out / "ladders" / mode / "ladders.csv";
    }
    fs::path metrics_csv(const std::string& mode) const {
        return out / "ladders" / mode / "metrics.csv";
    }
    fs::path manifest(const std::string& mode) const {
        return out / ("manifest_" + mode + ".json");
    }
    fs::path manifest_primary() const { return out / "manifest.json"; }
    fs::path report_json(const std::string& mode, const std::string& trace) const {
        return out / "reports" / ("session_" + mode + "_" + trace + ".json");
    }
    fs::path report_csv(const std::string& mode, const std::string& trace) const {
        return out / "reports" / ("session_" + mode + "_" + trace + ".csv");
    }
    fs::path summary_csv() const { return out / "reports" / "summary.csv"; }
};

Grid make_grid(const PipelineConfig& cfg, TilingMode mode, const GaussianCloud& keyframe) {
    switch (mode) {
        case TilingMode::AT:
            return grid_partition(keyframe, cfg.grid_resolution);
        case TilingMode::NT:
            return grid_partition(keyframe, 1);
        case TilingMode::T32:
            return grid_partition(keyframe, 4, 4, 2);
        case TilingMode::T64:
            return grid_partition(keyframe, 4, 4, 4);
    }
    throw ParameterError("bad tiling mode");
}

void run_stage(const char* name, const std::function<void()>& body) {
    try {
        body();
    } catch (const Error& e) {
        throw Error("stage " + std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error("stage " + std::string(name) + ": " + e.what());
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (input_glob.empty()) throw ParameterError("input_glob is empty");
    if (output_dir.empty()) throw ParameterError("output_dir is empty");
    if (fps <= 0) throw ParameterError("fps must be positive");
    if (gof_len < 1) throw ParameterError("gof_len must be >= 1");
    if (grid_resolution < 1) throw ParameterError("grid_resolution must be >= 1");
    if (merge_epsilon < 0) throw ParameterError("merge_epsilon must be >= 0");
    if (max_cells_per_tile < 1) throw ParameterError("max_cells_per_tile must be >= 1");
    if (std::abs(saliency_weights.w_intra + saliency_weights.w_inter + saliency_weights.w_dyn -
                 1.0) > 1e-9 ||
        saliency_weights.w_intra < 0 || saliency_weights.w_inter < 0 || saliency_weights.w_dyn < 0)
        throw ParameterError("saliency weights must be non-negative and sum to 1");
    const auto& t = ladder.retention_targets;
    for (int l = 0; l < 4; ++l)
        if (t[l] <= 0.0 || t[l] > 1.0 || (l > 0 && t[l] <= t[l - 1]))
            throw ParameterError("retention targets must be strictly increasing in (0,1]");
    if (t[3] != 1.0) throw ParameterError("last retention target must be 1.0");
    if (std::abs(lambda_geo + lambda_col - 1.0) > 1e-9)
        throw ParameterError("lambda_geo + lambda_col must equal 1");
    if (sim.qoe_weights.w_quality < 0 || sim.qoe_weights.w_stall_time < 0 ||
        sim.qoe_weights.w_stall_count < 0)
        throw ParameterError("QoE weights must be non-negative");
    if (sim.safety_factor <= 0) throw ParameterError("safety factor must be positive");
    if (sim.predictor_window < 1) throw ParameterError("predictor window must be >= 1");
    if (sim.dp_granularity_bytes == 0) throw ParameterError("dp granularity must be positive");
    if (trace_step_s <= 0) throw ParameterError("trace step must be positive");
    if (tiling_modes.empty()) throw ParameterError("at least one tiling mode required");
    if (trace_kinds.empty() && bandwidth_file.empty())
        throw ParameterError("need trace kinds or a bandwidth file");
    if (match_radius_frac <= 0) throw ParameterError("match radius must be positive");
    if (decode_ms_per_primitive < 0) throw ParameterError("decode cost must be >= 0");
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json doc = json::parse(text);
    PipelineConfig cfg;
    cfg.input_glob = doc.value("input_glob", cfg.input_glob);
    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
    cfg.fps = doc.value("fps", cfg.fps);
    cfg.gof_len = doc.value("gof_len", cfg.gof_len);
    cfg.match_radius_frac = doc.value("match_radius_frac", cfg.match_radius_frac);
    cfg.attr_rebirth_threshold = doc.value("attr_rebirth_threshold", cfg.attr_rebirth_threshold);
    cfg.grid_resolution = doc.value("grid_resolution", cfg.grid_resolution);
    if (doc.contains("saliency_weights")) {
        const auto& w = doc["saliency_weights"];
        cfg.saliency_weights.w_intra = w.value("intra", cfg.saliency_weights.w_intra);
        cfg.saliency_weights.w_inter = w.value("inter", cfg.saliency_weights.w_inter);
        cfg.saliency_weights.w_dyn = w.value("dyn", cfg.saliency_weights.w_dyn);
    }
    cfg.merge_epsilon = doc.value("merge_epsilon", cfg.merge_epsilon);
    cfg.max_cells_per_tile = doc.value("max_cells_per_tile", cfg.max_cells_per_tile);
    if (doc.contains("tiling_modes")) {
        cfg.tiling_modes.clear();
        for (const auto& m : doc["tiling_modes"])
            cfg.tiling_modes.push_back(tiling_mode_from_name(m.get<std::string>()));
    }
    if (doc.contains("retention_targets")) {
        const auto& rt = doc["retention_targets"];
        if (rt.size() != 4) throw ParameterError("retention_targets needs 4 entries");
        for (int l = 0; l < 4; ++l) cfg.ladder.retention_targets[l] = rt[l];
    }
    cfg.ladder.saliency_gain = doc.value("saliency_gain", cfg.ladder.saliency_gain);
    cfg.ladder.min_retention = doc.value("min_retention", cfg.ladder.min_retention);
    cfg.lambda_geo = doc.value("lambda_geo", cfg.lambda_geo);
    cfg.lambda_col = doc.value("lambda_col", cfg.lambda_col);
    cfg.decode_ms_per_primitive = doc.value("decode_ms_per_primitive", cfg.decode_ms_per_primitive);
    if (doc.contains("qoe_weights")) {
        const auto& w = doc["qoe_weights"];
        cfg.sim.qoe_weights.w_quality = w.value("quality", cfg.sim.qoe_weights.w_quality);
        cfg.sim.qoe_weights.w_stall_time = w.value("stall_time", cfg.sim.qoe_weights.w_stall_time);
        cfg.sim.qoe_weights.w_stall_count =
            w.value("stall_count", cfg.sim.qoe_weights.w_stall_count);
    }
    cfg.sim.safety_factor = doc.value("safety_factor", cfg.sim.safety_factor);
    cfg.sim.predictor_window = doc.value("predictor_window", cfg.sim.predictor_window);
    cfg.sim.decode_budget_ms = doc.value("decode_budget_ms", cfg.sim.decode_budget_ms);
    cfg.sim.dp_granularity_bytes = doc.value("dp_granularity_bytes", cfg.sim.dp_granularity_bytes);
    if (doc.contains("trace_kinds")) {
        cfg.trace_kinds.clear();
        for (const auto& k : doc["trace_kinds"])
            cfg.trace_kinds.push_back(trace_kind_from_name(k.get<std::string>()));
    }
    cfg.trace_step_s = doc.value("trace_step_s", cfg.trace_step_s);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.bandwidth_file = doc.value("bandwidth_file", cfg.bandwidth_file);
    cfg.fov_file = doc.value("fov_file", cfg.fov_file);
    cfg.orbit_radius_frac = doc.value("orbit_radius_frac", cfg.orbit_radius_frac);
    cfg.fov_vertical = doc.value("fov_vertical", cfg.fov_vertical);
    cfg.fov_aspect = doc.value("fov_aspect", cfg.fov_aspect);
    cfg.fov_near = doc.value("fov_near", cfg.fov_near);
    cfg.fov_far = doc.value("fov_far", cfg.fov_far);
    cfg.validate();
    return cfg;
}

std::string PipelineConfig::to_json() const {
    json doc;
    doc["input_glob"] = input_glob;
    doc["output_dir"] = output_dir;
    doc["fps"] = fps;
    doc["gof_len"] = gof_len;
    doc["match_radius_frac"] = match_radius_frac;
    doc["attr_rebirth_threshold"] = attr_rebirth_threshold;
    doc["grid_resolution"] = grid_resolution;
    doc["saliency_weights"] = {{"intra", saliency_weights.w_intra},
                               {"inter", saliency_weights.w_inter},
                               {"dyn", saliency_weights.w_dyn}};
    doc["merge_epsilon"] = merge_epsilon;
    doc["max_cells_per_tile"] = max_cells_per_tile;
    json modes = json::array();
    for (auto m : tiling_modes) modes.push_back(tiling_mode_name(m));
    doc["tiling_modes"] = std::move(modes);
    doc["retention_targets"] = ladder.retention_targets;
    doc["saliency_gain"] = ladder.saliency_gain;
    doc["min_retention"] = ladder.min_retention;
    doc["lambda_geo"] = lambda_geo;
    doc["lambda_col"] = lambda_col;
    doc["decode_ms_per_primitive"] = decode_ms_per_primitive;
    doc["qoe_weights"] = {{"quality", sim.qoe_weights.w_quality},
                          {"stall_time", sim.qoe_weights.w_stall_time},
                          {"stall_count", sim.qoe_weights.w_stall_count}};
    doc["safety_factor"] = sim.safety_factor;
    doc["predictor_window"] = sim.predictor_window;
    doc["decode_budget_ms"] = sim.decode_budget_ms;
    doc["dp_granularity_bytes"] = sim.dp_granularity_bytes;
    json kinds = json::array();
    for (auto k : trace_kinds) kinds.push_back(trace_kind_name(k));
    doc["trace_kinds"] = std::move(kinds);
    doc["trace_step_s"] = trace_step_s;
    doc["seed"] = seed;
    doc["bandwidth_file"] = bandwidth_file;
    doc["fov_file"] = fov_file;
    doc["orbit_radius_frac"] = orbit_radius_frac;
    doc["fov_vertical"] = fov_vertical;
    doc["fov_aspect"] = fov_aspect;
    doc["fov_near"] = fov_near;
    doc["fov_far"] = fov_far;
    return doc.dump(2) + "\n";
}

PipelineConfig load_config(const std::string& path) {
    return PipelineConfig::from_json(read_file(path));
}

PipelineConfig apply_override(const PipelineConfig& cfg, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ParameterError("override must look like key=value: " + assignment);
    std::string key = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    json doc = json::parse(cfg.to_json());
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        auto dot = key.find('.', start);
        std::string part = key.substr(start, dot - start);
        if (dot == std::string::npos) {
            json parsed;
            try {
                parsed = json::parse(value);
            } catch (const json::parse_error&) {
                parsed = value;  // plain string
            }
            (*node)[part] = parsed;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
    return PipelineConfig::from_json(doc.dump());
}

void stage_ingest(const PipelineConfig& cfg) {
    run_stage("ingest", [&] {
        auto inputs = expand_glob(cfg.input_glob);
        if (inputs.empty())
            throw Error("no input frames match '" + cfg.input_glob + "'");
        Paths paths(cfg);
        json index;
        index["fps"] = cfg.fps;
        index["frame_count"] = inputs.size();
        json frames = json::array();
        for (std::size_t f = 0; f < inputs.size(); ++f) {
            GaussianCloud cloud;
            try {
                cloud = load_ply(inputs[f].string());
            } catch (const Error& e) {
                throw Error(inputs[f].string() + ": " + e.what());
            }
            write_file(paths.ingest_frame(f), write_ply(cloud));
            frames.push_back({{"source", inputs[f].string()},
                              {"file", paths.ingest_frame(f).filename().string()},
                              {"primitives", cloud.size()},
                              {"raw_bytes", raw_size_bytes(cloud)}});
        }
        index["frames"] = std::move(frames);
        write_file(paths.ingest_index(), index.dump(2) + "\n");
    });
}

namespace {

std::size_t ingest_frame_count(const Paths& paths) {
    json index = json::parse(read_file(paths.ingest_index()));
    return index.at("frame_count").get<std::size_t>();
}

std::size_t gof_count(const Paths& paths) {
    json index = json::parse(read_file(paths.gof_index()));
    return index.at("count").get<std::size_t>();
}

}  // namespace

void stage_gof(const PipelineConfig& cfg) {
    run_stage("gof", [&] {
        Paths paths(cfg);
        std::size_t frame_count = ingest_frame_count(paths);
        auto ranges = segment_gofs(frame_count, cfg.gof_len);

        GofBuildParams params;
        params.fps = cfg.fps;
        params.match_radius_frac = cfg.match_radius_frac;
        params.attr_rebirth_threshold = cfg.attr_rebirth_threshold;

        json index;
        index["count"] = ranges.size();
        json entries = json::array();
        for (std::size_t g = 0; g < ranges.size(); ++g) {
            std::vector<GaussianCloud> frames;
            for (std::size_t f = ranges[g].first; f < ranges[g].second; ++f)
                frames.push_back(load_ply(paths.ingest_frame(f).string()));
            GoF gof = build_deformation(frames, params);
            gof.index = static_cast<std::uint32_t>(g);
            save_gof(gof, paths.gof_bin(g).string());
            entries.push_back({{"index", g},
                               {"range", {ranges[g].first, ranges[g].second}},
                               {"duration_s", gof.duration_s},
                               {"keyframe_primitives", gof.keyframe.size()},
                               {"track_bytes", gof.track.encoded_bytes()}});
        }
        index["gofs"] = std::move(entries);
        write_file(paths.gof_index(), index.dump(2) + "\n");
    });
}

void stage_tile(const PipelineConfig& cfg) {
    run_stage("tile", [&] {
        Paths paths(cfg);
        std::size_t n_gofs = gof_count(paths);
        for (TilingMode mode : cfg.tiling_modes) {
            std::string mode_name = tiling_mode_name(mode);
            for (std::size_t g = 0; g < n_gofs; ++g) {
                GoF gof = load_gof(paths.gof_bin(g).string());
                Grid grid = make_grid(cfg, mode, gof.keyframe);
                auto records = compute_gof_saliency(gof, grid, cfg.saliency_weights);
                std::vector<double> fused(records.size());
                for (std::size_t c = 0; c < records.size(); ++c) fused[c] = records[c].fused;
                std::vector<AdaptiveTile> tiles =
                    mode == TilingMode::AT
                        ? merge_tiles(grid, fused, cfg.merge_epsilon, cfg.max_cells_per_tile)
                        : tiles_from_cells(grid, fused);
                write_file(paths.tiles_json(mode_name, g), tiling_json(tiles));
                write_file(paths.saliency_csv_path(mode_name, g),
                           saliency_csv(static_cast<std::uint32_t>(g), grid, records));
            }
        }
    });
}

void stage_ladder(const PipelineConfig& cfg) {
    run_stage("ladder", [&] {
        Paths paths(cfg);
        std::size_t n_gofs = gof_count(paths);
        for (TilingMode mode : cfg.tiling_modes) {
            std::string mode_name = tiling_mode_name(mode);
            json index;
            index["gofs"] = json::array();
            std::string csv = ladder_csv_header();
            for (std::size_t g = 0; g < n_gofs; ++g) {
                GoF gof = load_gof(paths.gof_bin(g).string());
                auto tiles = parse_tiling_json(read_file(paths.tiles_json(mode_name, g)));
                json jg;
                jg["index"] = g;
                jg["tiles"] = json::array();
                for (const auto& tile : tiles) {
                    TileLadder ladder = build_ladder(tile, gof.keyframe, cfg.ladder);
                    json jt;
                    jt["tile_id"] = ladder.tile_id;
                    jt["saliency"] = ladder.saliency;
                    json levels = json::array();
                    for (const auto& level : ladder.levels) {
                        write_file(paths.ladder_blob(mode_name, g, ladder.tile_id, level.level),
                                   encode_tile(level, ladder.tile_id, gof.keyframe));
                        levels.push_back({{"level", level.level},
                                          {"retained", level.retained_indices.size()},
                                          {"bytes", level.encoded_bytes},
                                          {"threshold", level.threshold}});
                    }
                    jt["levels"] = std::move(levels);
                    jg["tiles"].push_back(std::move(jt));
                    csv += ladder_csv_rows(static_cast<std::uint32_t>(g), ladder);
                }
                index["gofs"].push_back(std::move(jg));
            }
            write_file(paths.ladder_index(mode_name), index.dump(2) + "\n");
            write_file(paths.ladder_csv_path(mode_name), csv);
        }
    });
}

void stage_annotate(const PipelineConfig& cfg) {
    run_stage("annotate", [&] {
        Paths paths(cfg);
        std::size_t n_gofs = gof_count(paths);
        json gof_index = json::parse(read_file(paths.gof_index()));

        bool primary_written = false;
        for (TilingMode mode : cfg.tiling_modes) {
            std::string mode_name = tiling_mode_name(mode);
            json ladder_index = json::parse(read_file(paths.ladder_index(mode_name)));

            Manifest manifest;
            manifest.fps = cfg.fps;
            std::string csv = "gof,tile,level,gpsnr_db\n";

            for (std::size_t g = 0; g < n_gofs; ++g) {
                const json& jgof = gof_index["gofs"][g];
                std::uint64_t track_bytes = jgof.at("track_bytes");
                std::uint64_t key_count = jgof.at("keyframe_primitives");
                std::size_t frame_count =
                    jgof.at("range")[1].get<std::size_t>() - jgof.at("range")[0].get<std::size_t>();
                auto tiles = parse_tiling_json(read_file(paths.tiles_json(mode_name, g)));

                ManifestGof mg;
                mg.index = static_cast<std::uint32_t>(g);
                mg.duration_s = jgof.at("duration_s");

                const json& jtiles = ladder_index["gofs"][g]["tiles"];
                for (std::size_t ti = 0; ti < tiles.size(); ++ti) {
                    const AdaptiveTile& tile = tiles[ti];
                    if (tile.member_indices.empty()) continue;  // nothing to ship

                    auto full = decode_tile(
                        read_file(paths.ladder_blob(mode_name, g, tile.id, 4)));
                    GaussianCloud full_cloud(full.primitives);

                    ManifestTile mt;
                    mt.tile_id = tile.id;
                    mt.saliency = tile.saliency;
                    mt.aabb = tile.aabb;
                    mt.decode_ms_per_frame =
                        cfg.decode_ms_per_primitive * double(tile.member_indices.size());

                    const json& jlevels = jtiles[ti]["levels"];
                    for (int l = 0; l < 4; ++l) {
                        std::uint64_t blob_bytes = jlevels[l].at("bytes");
                        std::uint64_t retained = jlevels[l].at("retained");
                        double gpsnr;
                        if (retained == 0) {
                            gpsnr = 0.0;  // nothing delivered
                        } else if (l == 3) {
                            gpsnr = cfg.sim.gpsnr_cap_db;
                        } else {
                            auto part = decode_tile(
                                read_file(paths.ladder_blob(mode_name, g, tile.id, l + 1)));
                            GaussianCloud part_cloud(part.primitives);
                            GpsnrParams gp;
                            gp.lambda_geo = cfg.lambda_geo;
                            gp.lambda_col = cfg.lambda_col;
                            gp.use_icp = part_cloud.size() >= 3 && full_cloud.size() >= 3;
                            gpsnr = geometric_psnr(full_cloud, part_cloud, gp);
                        }
                        std::uint64_t track_share =
                            key_count > 0 ? std::uint64_t(double(track_bytes) * double(retained) /
                                                          double(key_count))
                                          : 0;
                        ManifestLevel ml;
                        ml.level = l + 1;
                        ml.encoded_bytes = blob_bytes + track_share;
                        ml.reconstructed_bytes =
                            std::max<std::uint64_t>(frame_count * blob_bytes, ml.encoded_bytes);
                        ml.gpsnr_vs_full = gpsnr;
                        mt.levels[l] = ml;

                        csv += std::to_string(g) + "," + std::to_string(tile.id) + "," +
                               std::to_string(l + 1) + "," + std::to_string(gpsnr) + "\n";
                    }
                    mg.tiles.push_back(std::move(mt));
                }
                manifest.gofs.push_back(std::move(mg));
            }
            write_file(paths.metrics_csv(mode_name), csv);
            save_manifest(manifest, paths.manifest(mode_name).string());
            if (!primary_written) {
                save_manifest(manifest, paths.manifest_primary().string());
                primary_written = true;
            }
        }
    });
}

namespace {

// Scene extent for the generated FoV orbit: union of first-GoF tile boxes.
Aabb manifest_scene_box(const Manifest& m) {
    Aabb box;
    if (!m.gofs.empty())
        for (const auto& t : m.gofs.front().tiles) box.expand(t.aabb);
    if (box.empty()) box = Aabb::of(Vec3::Zero(), Vec3::Ones());
    return box;
}

}  // namespace

void stage_simulate(const PipelineConfig& cfg) {
    run_stage("simulate", [&] {
        Paths paths(cfg);
        for (TilingMode mode : cfg.tiling_modes) {
            std::string mode_name = tiling_mode_name(mode);
            Manifest manifest = load_manifest(paths.manifest(mode_name).string());
            double duration = manifest.video_duration();

            Aabb scene = manifest_scene_box(manifest);
            FovTrace fov;
            if (!cfg.fov_file.empty()) {
                fov = parse_fov_trace_csv(read_file(cfg.fov_file));
            } else {
                fov = gen_orbit_fov(scene.center(), cfg.orbit_radius_frac * scene.diagonal(),
                                    duration, cfg.trace_step_s, cfg.fov_vertical, cfg.fov_aspect,
                                    cfg.fov_near, cfg.fov_far);
            }

            struct Run {
                std::string name;
                BandwidthTrace trace;
            };
            std::vector<Run> runs;
            if (!cfg.bandwidth_file.empty()) {
                runs.push_back({"file", parse_bandwidth_trace_csv(read_file(cfg.bandwidth_file))});
            } else {
                for (TraceKind kind : cfg.trace_kinds)
                    runs.push_back(
                        {trace_kind_name(kind),
                         gen_trace(kind, duration, cfg.trace_step_s, cfg.seed)});
            }
            for (const auto& run : runs) {
                SessionReport report = simulate_session(manifest, run.trace, fov, cfg.sim);
                write_file(paths.report_json(mode_name, run.name), session_report_json(report));
                write_file(paths.report_csv(mode_name, run.name), session_report_csv(report));
            }
        }
    });
}

void stage_report(const PipelineConfig& cfg) {
    run_stage("report", [&] {
        Paths paths(cfg);
        std::ostringstream out;
        out << "mode,trace,downloaded_bytes,stall_s,stall_count,mean_quality,qoe,wall_clock_s\n";
        out.precision(9);
        bool any = false;
        for (TilingMode mode : cfg.tiling_modes) {
            std::string mode_name = tiling_mode_name(mode);
            std::vector<std::string> traces;
            if (!cfg.bandwidth_file.empty()) {
                traces.push_back("file");
            } else {
                for (TraceKind kind : cfg.trace_kinds) traces.push_back(trace_kind_name(kind));
            }
            for (const auto& trace : traces) {
                fs::path p = paths.report_json(mode_name, trace);
                if (!fs::exists(p)) throw Error("missing session report " + p.string());
                json doc = json::parse(read_file(p));
                const json& t = doc.at("totals");
                out << mode_name << ',' << trace << ',' << t.at("downloaded_bytes") << ','
                    << t.at("stall_s").get<double>() << ',' << t.at("stall_count").get<long>()
                    << ',' << t.at("mean_quality").get<double>() << ','
                    << t.at("qoe").get<double>() << ',' << t.at("wall_clock_s").get<double>()
                    << '\n';
                any = true;
            }
        }
        if (!any) throw Error("no session reports found under " + (paths.out / "reports").string());
        write_file(paths.summary_csv(), out.str());
    });
}

int run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    stage_ingest(cfg);
    stage_gof(cfg);
    stage_tile(cfg);
    stage_ladder(cfg);
    stage_annotate(cfg);
    stage_simulate(cfg);
    stage_report(cfg);
    return 0;
}

}  // namespace splatstream
