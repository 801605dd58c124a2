#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "splatstream/abr.hpp"
#include "splatstream/error.hpp"
#include "splatstream/gof.hpp"
#include "splatstream/ladder.hpp"
#include "splatstream/metrics.hpp"
#include "splatstream/pipeline.hpp"
#include "splatstream/simulator.hpp"
#include "splatstream/splat.hpp"
#include "splatstream/synth.hpp"
#include "splatstream/tiling.hpp"

namespace py = pybind11;
using namespace splatstream;

namespace {

Eigen::Vector4d quat_to_vec(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }
Quat vec_to_quat(const Eigen::Vector4d& v) { return Quat(v[0], v[1], v[2], v[3]); }

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Tiled, multi-quality 3D Gaussian splatting video streaming toolkit";

    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<TruncationError>(m, "TruncationError", PyExc_ValueError);
    py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
    py::register_exception<ValueError>(m, "ValueError", PyExc_ValueError);
    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<RangeError>(m, "RangeError", PyExc_IndexError);
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
    py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
    py::register_exception<SizeError>(m, "SizeError", PyExc_ValueError);
    py::register_exception<TraceCoverageError>(m, "TraceCoverageError", PyExc_ValueError);

    py::class_<Aabb>(m, "Aabb")
        .def(py::init<>())
        .def_static("of", &Aabb::of)
        .def_readwrite("min", &Aabb::min)
        .def_readwrite("max", &Aabb::max)
        .def("diagonal", &Aabb::diagonal)
        .def("center", &Aabb::center)
        .def("contains", &Aabb::contains)
        .def("empty", &Aabb::empty);

    // --- splat model ---
    py::class_<GaussianPrimitive>(m, "GaussianPrimitive")
        .def(py::init<>())
        .def_readwrite("position", &GaussianPrimitive::position)
        .def_readwrite("normal", &GaussianPrimitive::normal)
        .def_readwrite("sh", &GaussianPrimitive::sh)
        .def_readwrite("opacity", &GaussianPrimitive::opacity)
        .def_readwrite("scale", &GaussianPrimitive::scale)
        .def_property(
            "rotation", [](const GaussianPrimitive& p) { return quat_to_vec(p.rotation); },
            [](GaussianPrimitive& p, const Eigen::Vector4d& v) {
                p.rotation = vec_to_quat(v).normalized();
            },
            "unit quaternion as (w, x, y, z)");

    py::class_<GaussianCloud>(m, "GaussianCloud")
        .def(py::init<>())
        .def(py::init<std::vector<GaussianPrimitive>>())
        .def_readonly("primitives", &GaussianCloud::primitives)
        .def_readonly("bbox", &GaussianCloud::bbox)
        .def("__len__", &GaussianCloud::size);

    py::class_<FrameSequence>(m, "FrameSequence")
        .def(py::init<>())
        .def_readwrite("frames", &FrameSequence::frames)
        .def_readwrite("fps", &FrameSequence::fps);

    m.def("parse_ply",
          [](const py::bytes& b) { return parse_ply(std::string(b)); });
    m.def("write_ply", [](const GaussianCloud& c) { return py::bytes(write_ply(c)); });
    m.def("load_ply", &load_ply);
    m.def("save_ply", &save_ply);
    m.def("raw_size_bytes", &raw_size_bytes);
    m.def("raw_gbps", &raw_gbps);
    m.def("covariance_of", &covariance_of);
    m.def("significance", &significance);

    // --- GoF builder ---
    py::class_<GofBuildParams>(m, "GofBuildParams")
        .def(py::init<>())
        .def_readwrite("fps", &GofBuildParams::fps)
        .def_readwrite("match_radius_frac", &GofBuildParams::match_radius_frac)
        .def_readwrite("attr_rebirth_threshold", &GofBuildParams::attr_rebirth_threshold);

    py::class_<DeformationTrack>(m, "DeformationTrack")
        .def_readonly("frame_count", &DeformationTrack::frame_count)
        .def_readonly("gof_bbox", &DeformationTrack::gof_bbox)
        .def("encoded_bytes", &DeformationTrack::encoded_bytes);

    py::class_<GoF>(m, "GoF")
        .def_readonly("index", &GoF::index)
        .def_readonly("keyframe", &GoF::keyframe)
        .def_readonly("track", &GoF::track)
        .def_readonly("duration_s", &GoF::duration_s);

    py::class_<SceneSplit>(m, "SceneSplit")
        .def_readonly("foreground", &SceneSplit::foreground)
        .def_readonly("background", &SceneSplit::background)
        .def_readonly("fg_indices", &SceneSplit::fg_indices);

    m.def("segment_gofs", &segment_gofs);
    m.def("build_deformation", &build_deformation, py::arg("frames"),
          py::arg("params") = GofBuildParams{});
    m.def("reconstruct_frame", &reconstruct_frame);
    m.def("split_foreground", &split_foreground);
    m.def("serialize_gof", [](const GoF& g) { return py::bytes(serialize_gof(g)); });
    m.def("parse_gof", [](const py::bytes& b) { return parse_gof(std::string(b)); });
    m.def("save_gof", &save_gof);
    m.def("load_gof", &load_gof);

    // --- saliency tiler ---
    py::class_<GridCoord>(m, "GridCoord")
        .def(py::init<>())
        .def_readwrite("i", &GridCoord::i)
        .def_readwrite("j", &GridCoord::j)
        .def_readwrite("k", &GridCoord::k);

    py::class_<GridCell>(m, "GridCell")
        .def_readonly("id", &GridCell::id)
        .def_readonly("aabb", &GridCell::aabb)
        .def_readonly("member_indices", &GridCell::member_indices);

    py::class_<Grid>(m, "Grid")
        .def_readonly("res_i", &Grid::res_i)
        .def_readonly("res_j", &Grid::res_j)
        .def_readonly("res_k", &Grid::res_k)
        .def_readonly("box", &Grid::box)
        .def_readonly("cells", &Grid::cells);

    py::class_<SaliencyWeights>(m, "SaliencyWeights")
        .def(py::init<>())
        .def_readwrite("w_intra", &SaliencyWeights::w_intra)
        .def_readwrite("w_inter", &SaliencyWeights::w_inter)
        .def_readwrite("w_dyn", &SaliencyWeights::w_dyn);

    py::class_<SaliencyRecord>(m, "SaliencyRecord")
        .def(py::init<>())
        .def_readwrite("s_intra", &SaliencyRecord::s_intra)
        .def_readwrite("s_inter", &SaliencyRecord::s_inter)
        .def_readwrite("s_dyn", &SaliencyRecord::s_dyn)
        .def_readwrite("fused", &SaliencyRecord::fused);

    py::class_<AdaptiveTile>(m, "AdaptiveTile")
        .def(py::init<>())
        .def_readwrite("id", &AdaptiveTile::id)
        .def_readwrite("cells", &AdaptiveTile::cells)
        .def_readwrite("aabb", &AdaptiveTile::aabb)
        .def_readwrite("saliency", &AdaptiveTile::saliency)
        .def_readwrite("member_indices", &AdaptiveTile::member_indices);

    m.def("grid_partition",
          py::overload_cast<const GaussianCloud&, int>(&grid_partition));
    m.def("grid_partition",
          py::overload_cast<const GaussianCloud&, int, int, int>(&grid_partition));
    m.def("static_saliency", &static_saliency);
    m.def("dynamic_saliency", &dynamic_saliency);
    m.def("fuse_saliency", &fuse_saliency);
    m.def("compute_gof_saliency", &compute_gof_saliency);
    m.def("merge_tiles", &merge_tiles);
    m.def("tiles_from_cells", &tiles_from_cells);
    m.def("tiling_json", &tiling_json);

    // --- quality ladder ---
    py::class_<QualityLevel>(m, "QualityLevel")
        .def_readonly("level", &QualityLevel::level)
        .def_readonly("retained_indices", &QualityLevel::retained_indices)
        .def_readonly("threshold", &QualityLevel::threshold)
        .def_readonly("encoded_bytes", &QualityLevel::encoded_bytes)
        .def_readonly("gpsnr_vs_full", &QualityLevel::gpsnr_vs_full);

    py::class_<TileLadder>(m, "TileLadder")
        .def_readonly("tile_id", &TileLadder::tile_id)
        .def_readonly("levels", &TileLadder::levels)
        .def_readonly("saliency", &TileLadder::saliency);

    py::class_<LadderParams>(m, "LadderParams")
        .def(py::init<>())
        .def_readwrite("retention_targets", &LadderParams::retention_targets)
        .def_readwrite("saliency_gain", &LadderParams::saliency_gain)
        .def_readwrite("min_retention", &LadderParams::min_retention);

    py::class_<DecodedTile>(m, "DecodedTile")
        .def_readonly("tile_id", &DecodedTile::tile_id)
        .def_readonly("level", &DecodedTile::level)
        .def_readonly("primitives", &DecodedTile::primitives);

    m.def("apply_mask", &apply_mask);
    m.def("build_ladder", &build_ladder, py::arg("tile"), py::arg("cloud"),
          py::arg("params") = LadderParams{});
    m.def("encode_tile", [](const QualityLevel& level, int tile_id, const GaussianCloud& cloud) {
        return py::bytes(encode_tile(level, tile_id, cloud));
    });
    m.def("decode_tile", [](const py::bytes& b) { return decode_tile(std::string(b)); });

    // --- metrics ---
    py::class_<RigidTransform>(m, "RigidTransform")
        .def(py::init<>())
        .def_readwrite("rotation", &RigidTransform::rotation)
        .def_readwrite("translation", &RigidTransform::translation)
        .def("apply", &RigidTransform::apply);

    py::class_<Camera>(m, "Camera")
        .def(py::init<>())
        .def_readwrite("position", &Camera::position)
        .def_property(
            "orientation", [](const Camera& c) { return quat_to_vec(c.orientation); },
            [](Camera& c, const Eigen::Vector4d& v) { c.orientation = vec_to_quat(v).normalized(); })
        .def_readwrite("vertical_fov", &Camera::vertical_fov)
        .def_readwrite("aspect", &Camera::aspect)
        .def_readwrite("near_plane", &Camera::near_plane)
        .def_readwrite("far_plane", &Camera::far_plane)
        .def_static("look_at", &Camera::look_at, py::arg("eye"), py::arg("target"),
                    py::arg("up_hint"), py::arg("vertical_fov"), py::arg("aspect"),
                    py::arg("near_plane"), py::arg("far_plane"));

    py::class_<Image>(m, "Image")
        .def(py::init<int, int>())
        .def_readonly("width", &Image::width)
        .def_readonly("height", &Image::height)
        .def_readwrite("pixels", &Image::pixels);

    py::class_<GpsnrParams>(m, "GpsnrParams")
        .def(py::init<>())
        .def_readwrite("lambda_geo", &GpsnrParams::lambda_geo)
        .def_readwrite("lambda_col", &GpsnrParams::lambda_col)
        .def_readwrite("use_icp", &GpsnrParams::use_icp)
        .def_readwrite("icp_max_iters", &GpsnrParams::icp_max_iters)
        .def_readwrite("icp_tol", &GpsnrParams::icp_tol)
        .def_readwrite("density_k", &GpsnrParams::density_k)
        .def_readwrite("cap_db", &GpsnrParams::cap_db);

    py::class_<RenderParams>(m, "RenderParams")
        .def(py::init<>())
        .def_readwrite("sh_degree", &RenderParams::sh_degree)
        .def_readwrite("sigma_cutoff", &RenderParams::sigma_cutoff);

    m.def("icp_align", &icp_align, py::arg("src"), py::arg("dst"), py::arg("max_iters") = 50,
          py::arg("tol") = 1e-9);
    m.def("geometric_psnr", &geometric_psnr, py::arg("reference"), py::arg("test"),
          py::arg("params") = GpsnrParams{});
    m.def("render", &render, py::arg("cloud"), py::arg("cam"), py::arg("width"),
          py::arg("height"), py::arg("params") = RenderParams{});
    m.def("image_psnr", &image_psnr);
    m.def("encode_ppm", [](const Image& img) { return py::bytes(encode_ppm(img)); });
    m.def("save_ppm", &save_ppm);

    // --- ABR optimizer ---
    py::class_<QoEWeights>(m, "QoEWeights")
        .def(py::init<>())
        .def_readwrite("w_quality", &QoEWeights::w_quality)
        .def_readwrite("w_stall_time", &QoEWeights::w_stall_time)
        .def_readwrite("w_stall_count", &QoEWeights::w_stall_count);

    py::class_<LevelOption>(m, "LevelOption")
        .def(py::init<>())
        .def_readwrite("size_bytes", &LevelOption::size_bytes)
        .def_readwrite("utility", &LevelOption::utility);

    py::class_<SelectionProblem>(m, "SelectionProblem")
        .def(py::init<>())
        .def_readwrite("tile_ids", &SelectionProblem::tile_ids)
        .def_readwrite("options", &SelectionProblem::options)
        .def_readwrite("budget_bytes", &SelectionProblem::budget_bytes)
        .def_readwrite("granularity_bytes", &SelectionProblem::granularity_bytes);

    py::class_<Assignment>(m, "Assignment")
        .def(py::init<>())
        .def_readonly("level_per_tile", &Assignment::level_per_tile)
        .def_readonly("total_bytes", &Assignment::total_bytes)
        .def_readonly("total_utility", &Assignment::total_utility);

    m.def("qoe", &qoe);
    m.def("select_qualities", &select_qualities);
    m.def("brute_force_select", &brute_force_select);
    m.def("visible_tiles", &visible_tiles);
    m.def("predict_bandwidth", &predict_bandwidth);
    m.def("selection_problem_json", &selection_problem_json);
    m.def("assignment_json", &assignment_json);

    // --- simulator ---
    py::enum_<TraceKind>(m, "TraceKind")
        .value("Std5G", TraceKind::Std5G)
        .value("Ext5G", TraceKind::Ext5G)
        .value("File", TraceKind::File);

    py::class_<BandwidthTrace>(m, "BandwidthTrace")
        .def(py::init<>())
        .def_readwrite("kind", &BandwidthTrace::kind)
        .def_readwrite("samples", &BandwidthTrace::samples)
        .def("duration", &BandwidthTrace::duration)
        .def("mbps_at", &BandwidthTrace::mbps_at)
        .def("finish_time", &BandwidthTrace::finish_time)
        .def("integral_bytes", &BandwidthTrace::integral_bytes);

    py::class_<FovTrace>(m, "FovTrace")
        .def(py::init<>())
        .def_readwrite("samples", &FovTrace::samples)
        .def("duration", &FovTrace::duration)
        .def("camera_at", &FovTrace::camera_at);

    py::class_<ManifestLevel>(m, "ManifestLevel")
        .def(py::init<>())
        .def_readwrite("level", &ManifestLevel::level)
        .def_readwrite("encoded_bytes", &ManifestLevel::encoded_bytes)
        .def_readwrite("reconstructed_bytes", &ManifestLevel::reconstructed_bytes)
        .def_readwrite("gpsnr_vs_full", &ManifestLevel::gpsnr_vs_full);

    py::class_<ManifestTile>(m, "ManifestTile")
        .def(py::init<>())
        .def_readwrite("tile_id", &ManifestTile::tile_id)
        .def_readwrite("saliency", &ManifestTile::saliency)
        .def_readwrite("aabb", &ManifestTile::aabb)
        .def_readwrite("decode_ms_per_frame", &ManifestTile::decode_ms_per_frame)
        .def_readwrite("levels", &ManifestTile::levels);

    py::class_<ManifestGof>(m, "ManifestGof")
        .def(py::init<>())
        .def_readwrite("index", &ManifestGof::index)
        .def_readwrite("duration_s", &ManifestGof::duration_s)
        .def_readwrite("tiles", &ManifestGof::tiles);

    py::class_<Manifest>(m, "Manifest")
        .def(py::init<>())
        .def_readwrite("fps", &Manifest::fps)
        .def_readwrite("gofs", &Manifest::gofs)
        .def("video_duration", &Manifest::video_duration)
        .def("validate", &Manifest::validate);

    py::enum_<DeliveryMode>(m, "DeliveryMode")
        .value("Encoded", DeliveryMode::Encoded)
        .value("Reconstructed", DeliveryMode::Reconstructed);

    py::class_<SimulatorConfig>(m, "SimulatorConfig")
        .def(py::init<>())
        .def_readwrite("qoe_weights", &SimulatorConfig::qoe_weights)
        .def_readwrite("safety_factor", &SimulatorConfig::safety_factor)
        .def_readwrite("predictor_window", &SimulatorConfig::predictor_window)
        .def_readwrite("decode_budget_ms", &SimulatorConfig::decode_budget_ms)
        .def_readwrite("dp_granularity_bytes", &SimulatorConfig::dp_granularity_bytes)
        .def_readwrite("gpsnr_cap_db", &SimulatorConfig::gpsnr_cap_db)
        .def_readwrite("stall_epsilon_s", &SimulatorConfig::stall_epsilon_s);

    py::class_<GofReport>(m, "GofReport")
        .def_readonly("gof", &GofReport::gof)
        .def_readonly("duration_s", &GofReport::duration_s)
        .def_readonly("selected_levels", &GofReport::selected_levels)
        .def_readonly("modes", &GofReport::modes)
        .def_readonly("dropped_tiles", &GofReport::dropped_tiles)
        .def_readonly("downloaded_bytes", &GofReport::downloaded_bytes)
        .def_readonly("decode_ms", &GofReport::decode_ms)
        .def_readonly("stall_s", &GofReport::stall_s)
        .def_readonly("quality", &GofReport::quality)
        .def_readonly("delivered", &GofReport::delivered);

    py::class_<SessionReport>(m, "SessionReport")
        .def_readonly("gofs", &SessionReport::gofs)
        .def_readonly("total_stall_s", &SessionReport::total_stall_s)
        .def_readonly("stall_count", &SessionReport::stall_count)
        .def_readonly("mean_quality", &SessionReport::mean_quality)
        .def_readonly("qoe", &SessionReport::qoe)
        .def_readonly("wall_clock_s", &SessionReport::wall_clock_s)
        .def_readonly("played_s", &SessionReport::played_s)
        .def_readonly("downloaded_bytes", &SessionReport::downloaded_bytes);

    m.def("gen_trace", &gen_trace);
    m.def("bandwidth_trace_csv", &bandwidth_trace_csv);
    m.def("parse_bandwidth_trace_csv", &parse_bandwidth_trace_csv);
    m.def("fov_trace_csv", &fov_trace_csv);
    m.def("parse_fov_trace_csv", &parse_fov_trace_csv);
    m.def("manifest_json", &manifest_json);
    m.def("parse_manifest_json", &parse_manifest_json);
    m.def("load_manifest", &load_manifest);
    m.def("save_manifest", &save_manifest);
    m.def("choose_mode", &choose_mode);
    m.def("simulate_session", &simulate_session, py::arg("manifest"), py::arg("bw"),
          py::arg("fov"), py::arg("cfg") = SimulatorConfig{});
    m.def("session_report_json", &session_report_json);
    m.def("session_report_csv", &session_report_csv);

    // --- synth scenes ---
    py::class_<ClusterSpec>(m, "ClusterSpec")
        .def(py::init<>())
        .def_readwrite("count", &ClusterSpec::count)
        .def_readwrite("center", &ClusterSpec::center)
        .def_readwrite("spread", &ClusterSpec::spread)
        .def_readwrite("velocity", &ClusterSpec::velocity)
        .def_readwrite("opacity_min", &ClusterSpec::opacity_min)
        .def_readwrite("opacity_max", &ClusterSpec::opacity_max)
        .def_readwrite("scale_min", &ClusterSpec::scale_min)
        .def_readwrite("scale_max", &ClusterSpec::scale_max)
        .def_readwrite("base_color", &ClusterSpec::base_color);

    py::class_<SceneSpec>(m, "SceneSpec")
        .def(py::init<>())
        .def_readwrite("clusters", &SceneSpec::clusters)
        .def_readwrite("seed", &SceneSpec::seed)
        .def_static("from_json", &SceneSpec::from_json)
        .def("to_json", &SceneSpec::to_json);

    m.def("gen_sequence", &gen_sequence);
    m.def("gen_orbit_fov", &gen_orbit_fov);
    m.def("gen_static_fov", &gen_static_fov);

    // --- pipeline ---
    py::enum_<TilingMode>(m, "TilingMode")
        .value("AT", TilingMode::AT)
        .value("NT", TilingMode::NT)
        .value("T32", TilingMode::T32)
        .value("T64", TilingMode::T64);

    py::class_<PipelineConfig>(m, "PipelineConfig")
        .def(py::init<>())
        .def_readwrite("input_glob", &PipelineConfig::input_glob)
        .def_readwrite("output_dir", &PipelineConfig::output_dir)
        .def_readwrite("fps", &PipelineConfig::fps)
        .def_readwrite("gof_len", &PipelineConfig::gof_len)
        .def_readwrite("grid_resolution", &PipelineConfig::grid_resolution)
        .def_readwrite("saliency_weights", &PipelineConfig::saliency_weights)
        .def_readwrite("merge_epsilon", &PipelineConfig::merge_epsilon)
        .def_readwrite("max_cells_per_tile", &PipelineConfig::max_cells_per_tile)
        .def_readwrite("tiling_modes", &PipelineConfig::tiling_modes)
        .def_readwrite("ladder", &PipelineConfig::ladder)
        .def_readwrite("lambda_geo", &PipelineConfig::lambda_geo)
        .def_readwrite("lambda_col", &PipelineConfig::lambda_col)
        .def_readwrite("decode_ms_per_primitive", &PipelineConfig::decode_ms_per_primitive)
        .def_readwrite("sim", &PipelineConfig::sim)
        .def_readwrite("trace_kinds", &PipelineConfig::trace_kinds)
        .def_readwrite("trace_step_s", &PipelineConfig::trace_step_s)
        .def_readwrite("seed", &PipelineConfig::seed)
        .def_readwrite("bandwidth_file", &PipelineConfig::bandwidth_file)
        .def_readwrite("fov_file", &PipelineConfig::fov_file)
        .def_readwrite("orbit_radius_frac", &PipelineConfig::orbit_radius_frac)
        .def_readwrite("fov_vertical", &PipelineConfig::fov_vertical)
        .def("validate", &PipelineConfig::validate)
        .def_static("from_json", &PipelineConfig::from_json)
        .def("to_json", &PipelineConfig::to_json);

    m.def("load_config", &load_config);
    m.def("stage_ingest", &stage_ingest);
    m.def("stage_gof", &stage_gof);
    m.def("stage_tile", &stage_tile);
    m.def("stage_ladder", &stage_ladder);
    m.def("stage_annotate", &stage_annotate);
    m.def("stage_simulate", &stage_simulate);
    m.def("stage_report", &stage_report);
    m.def("run_pipeline", &run_pipeline);
}
