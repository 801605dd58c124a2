#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splatstream/error.hpp"
#include "splatstream/pipeline.hpp"
#include "splatstream/simulator.hpp"
#include "splatstream/synth.hpp"

namespace fs = std::filesystem;
using namespace splatstream;

namespace {

struct ConfigArgs {
    std::string config_path;
    std::string input_glob;
    std::string output_dir;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "pipeline config JSON");
    cmd->add_option("-i,--input", args.input_glob, "input frame glob (overrides config)");
    cmd->add_option("-o,--out", args.output_dir, "output directory (overrides config)");
    cmd->add_option("--set", args.overrides, "override a config key, e.g. --set gof_len=10");
}

PipelineConfig resolve_config(const ConfigArgs& args) {
    PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    if (!args.input_glob.empty()) cfg.input_glob = args.input_glob;
    if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
    for (const auto& assignment : args.overrides) cfg = apply_override(cfg, assignment);
    cfg.validate();
    return cfg;
}

int run_checked(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tiled multi-quality 3DGS video streaming toolkit"};
    app.require_subcommand(1);

    ConfigArgs args;
    struct StageCmd {
        const char* name;
        const char* help;
        void (*fn)(const PipelineConfig&);
    };
    const StageCmd stages[] = {
        {"ingest", "validate and normalize input frames", stage_ingest},
        {"gof", "segment frames and build deformation tracks", stage_gof},
        {"tile", "compute saliency and build tiles", stage_tile},
        {"ladder", "build per-tile quality ladders and encode blobs", stage_ladder},
        {"annotate", "measure per-level quality and emit the manifest", stage_annotate},
        {"simulate", "run streaming sessions against traces", stage_simulate},
        {"report", "aggregate session reports into the comparison matrix", stage_report},
    };
    std::vector<std::pair<CLI::App*, const StageCmd*>> stage_cmds;
    for (const auto& stage : stages) {
        CLI::App* cmd = app.add_subcommand(stage.name, stage.help);
        add_config_options(cmd, args);
        stage_cmds.emplace_back(cmd, &stage);
    }
    CLI::App* run_cmd = app.add_subcommand("run", "run the full pipeline end to end");
    add_config_options(run_cmd, args);

    // Scene generator.
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic frame sequence");
    std::string synth_spec, synth_out{"frames"};
    std::size_t synth_frames = 30;
    double synth_fps = 30.0;
    std::uint64_t synth_seed = 1;
    synth_cmd->add_option("--spec", synth_spec, "scene spec JSON (default: two-cluster scene)");
    synth_cmd->add_option("--frames", synth_frames, "frame count")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--fps", synth_fps, "frames per second")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", synth_seed, "random seed");
    synth_cmd->add_option("-o,--out", synth_out, "output directory for numbered PLY files");

    // Bandwidth trace generator.
    CLI::App* trace_cmd = app.add_subcommand("trace", "generate a bandwidth trace CSV");
    std::string trace_kind{"Std5G"}, trace_out{"trace.csv"};
    double trace_duration = 30.0, trace_step = 0.25;
    std::uint64_t trace_seed = 7;
    trace_cmd->add_option("--kind", trace_kind, "Std5G or Ext5G");
    trace_cmd->add_option("--duration", trace_duration, "seconds")->check(CLI::PositiveNumber);
    trace_cmd->add_option("--step", trace_step, "sample step seconds")->check(CLI::PositiveNumber);
    trace_cmd->add_option("--seed", trace_seed, "random seed");
    trace_cmd->add_option("-o,--out", trace_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    for (const auto& [cmd, stage] : stage_cmds) {
        if (cmd->parsed())
            return run_checked([&] { stage->fn(resolve_config(args)); });
    }
    if (run_cmd->parsed())
        return run_checked([&] { run_pipeline(resolve_config(args)); });

    if (synth_cmd->parsed()) {
        return run_checked([&] {
            SceneSpec spec;
            if (!synth_spec.empty()) {
                std::ifstream f(synth_spec);
                if (!f) throw Error("cannot open " + synth_spec);
                std::ostringstream ss;
                ss << f.rdbuf();
                spec = SceneSpec::from_json(ss.str());
            } else {
                ClusterSpec moving;
                moving.count = 1500;
                moving.center = Vec3(0.5, 0.0, 0.0);
                moving.velocity = Vec3(0.4, 0.0, 0.0);
                moving.base_color = Vec3(0.8, 0.3, 0.2);
                ClusterSpec still;
                still.count = 3500;
                still.center = Vec3(-0.5, 0.0, 0.0);
                still.spread = 0.6;
                still.base_color = Vec3(0.2, 0.4, 0.7);
                spec.clusters = {moving, still};
            }
            spec.seed = synth_seed;
            FrameSequence seq = gen_sequence(spec, synth_frames, synth_fps);
            fs::create_directories(synth_out);
            for (std::size_t f = 0; f < seq.frames.size(); ++f) {
                char name[32];
                std::snprintf(name, sizeof(name), "frame_%05zu.ply", f);
                save_ply(seq.frames[f], (fs::path(synth_out) / name).string());
            }
            std::cout << "wrote " << seq.frames.size() << " frames to " << synth_out << "\n";
        });
    }

    if (trace_cmd->parsed()) {
        return run_checked([&] {
            TraceKind kind = trace_kind == "Std5G"  ? TraceKind::Std5G
                             : trace_kind == "Ext5G" ? TraceKind::Ext5G
                                                     : throw ParameterError("unknown trace kind: " +
                                                                            trace_kind);
            BandwidthTrace trace = gen_trace(kind, trace_duration, trace_step, trace_seed);
            std::ofstream f(trace_out, std::ios::trunc);
            if (!f) throw Error("cannot open " + trace_out + " for writing");
            f << bandwidth_trace_csv(trace);
            std::cout << "wrote " << trace.samples.size() << " samples to " << trace_out << "\n";
        });
    }
    return 0;
}
