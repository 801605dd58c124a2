#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/abr.hpp"
#include "splatstream/gof.hpp"
#include "splatstream/ladder.hpp"
#include "splatstream/simulator.hpp"
#include "splatstream/tiling.hpp"

namespace splatstream {

enum class TilingMode { AT, NT, T32, T64 };

std::string tiling_mode_name(TilingMode mode);
TilingMode tiling_mode_from_name(const std::string& name);

struct PipelineConfig {
    // IO
    std::string input_glob;   // e.g. "frames/*.ply"; one '*'/'?' pattern in the filename
    std::string output_dir{"out"};
    double fps{30.0};

    // GoF construction
    std::size_t gof_len{30};
    double match_radius_frac{0.02};
    double attr_rebirth_threshold{0.10};

    // Tiling
    int grid_resolution{8};
    SaliencyWeights saliency_weights{};
    double merge_epsilon{0.15};
    std::size_t max_cells_per_tile{16};
    std::vector<TilingMode> tiling_modes{TilingMode::AT};

    // Quality ladder
    LadderParams ladder{};

    // Metrics
    double lambda_geo{0.8};
    double lambda_col{0.2};

    // Manifest / delivery model
    double decode_ms_per_primitive{1e-4};

    // Simulation
    SimulatorConfig sim{};
    std::vector<TraceKind> trace_kinds{TraceKind::Std5G};
    double trace_step_s{0.25};
    std::uint64_t seed{7};
    std::string bandwidth_file;  // overrides generated traces when set
    std::string fov_file;        // overrides the generated orbit when set
    double orbit_radius_frac{1.6};  // orbit radius as a fraction of the scene diagonal
    double fov_vertical{0.9};
    double fov_aspect{16.0 / 9.0};
    double fov_near{0.01};
    double fov_far{1000.0};

    void validate() const;
    static PipelineConfig from_json(const std::string& text);
    std::string to_json() const;
};

PipelineConfig load_config(const std::string& path);

// Apply a "dotted.key=value" override onto the JSON form of the config.
PipelineConfig apply_override(const PipelineConfig& cfg, const std::string& assignment);

// Stages; each reads its inputs from disk artifacts and is idempotent.
void stage_ingest(const PipelineConfig& cfg);
void stage_gof(const PipelineConfig& cfg);
void stage_tile(const PipelineConfig& cfg);
void stage_ladder(const PipelineConfig& cfg);
void stage_annotate(const PipelineConfig& cfg);
void stage_simulate(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

// All stages in order. Returns 0 on success; errors carry the stage name.
int run_pipeline(const PipelineConfig& cfg);

}  // namespace splatstream
