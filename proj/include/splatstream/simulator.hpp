#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splatstream/abr.hpp"
#include "splatstream/metrics.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

enum class TraceKind { Std5G, Ext5G, File };

// Piecewise-constant bandwidth over time; the last sample holds forever.
struct BandwidthTrace {
    TraceKind kind{TraceKind::File};
    std::vector<std::pair<double, double>> samples;  // (t_seconds, mbps), t ascending from 0

    double duration() const { return samples.empty() ? 0.0 : samples.back().first; }
    double mbps_at(double t) const;
    // Wall-clock time at which `bytes` finish downloading when starting at t0;
    // +inf if the remaining rate is zero forever.
    double finish_time(double t0, double bytes) const;
    // Exact integral of the byte rate over [t0, t1].
    double integral_bytes(double t0, double t1) const;
};

// Std5G: bounded random walk in [350,700] Mbps, step sigma 25, reflecting.
// Ext5G: regime switching over [0,1200] with 1-5 s dwells, uniform jump
// targets and explicit zero-rate outages. Deterministic in the seed.
BandwidthTrace gen_trace(TraceKind kind, double duration_s, double step_s, std::uint64_t seed);

std::string bandwidth_trace_csv(const BandwidthTrace& trace);
BandwidthTrace parse_bandwidth_trace_csv(const std::string& text);

struct FovTrace {
    std::vector<std::pair<double, Camera>> samples;  // t ascending

    double duration() const { return samples.empty() ? 0.0 : samples.back().first; }
    const Camera& camera_at(double t) const;
};

std::string fov_trace_csv(const FovTrace& trace);
FovTrace parse_fov_trace_csv(const std::string& text);

struct ManifestLevel {
    int level{4};
    std::uint64_t encoded_bytes{0};
    std::uint64_t reconstructed_bytes{0};
    double gpsnr_vs_full{0.0};  // dB
};

struct ManifestTile {
    int tile_id{0};
    double saliency{0.0};
    Aabb aabb;
    double decode_ms_per_frame{0.0};
    std::array<ManifestLevel, 4> levels;
};

struct ManifestGof {
    std::uint32_t index{0};
    double duration_s{0.0};
    std::vector<ManifestTile> tiles;
};

struct Manifest {
    double fps{30.0};
    std::vector<ManifestGof> gofs;

    double video_duration() const;
    void validate() const;
};

std::string manifest_json(const Manifest& m);
Manifest parse_manifest_json(const std::string& text);
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

enum class DeliveryMode { Encoded, Reconstructed };

// Prefer the pre-reconstructed payload only when decoding would miss the
// per-frame budget and the extra bytes fit in the headroom.
DeliveryMode choose_mode(const ManifestTile& tile, int level, std::uint64_t headroom_bytes,
                         double decode_budget_ms);

struct SimulatorConfig {
    QoEWeights qoe_weights{};
    double safety_factor{0.9};
    std::size_t predictor_window{5};
    double decode_budget_ms{1000.0 / 30.0};
    std::uint64_t dp_granularity_bytes{1024};
    double gpsnr_cap_db{100.0};
    // Stall intervals below this length are floating-point dust, not stalls.
    double stall_epsilon_s{1e-9};
};

struct GofReport {
    std::uint32_t gof{0};
    double duration_s{0.0};
    std::map<int, int> selected_levels;           // tile id -> level
    std::map<int, DeliveryMode> modes;            // tile id -> delivery mode
    std::vector<int> dropped_tiles;               // visible but infeasible
    std::uint64_t downloaded_bytes{0};
    double decode_ms{0.0};
    double stall_s{0.0};  // stall attributed to this GoF's download window
    double quality{0.0};  // size-weighted mean normalized GPSNR
    bool delivered{false};
};

struct SessionReport {
    std::vector<GofReport> gofs;
    double total_stall_s{0.0};
    std::size_t stall_count{0};
    double mean_quality{0.0};  // duration-weighted over GoFs
    double qoe{0.0};
    double wall_clock_s{0.0};
    double played_s{0.0};
    std::uint64_t downloaded_bytes{0};
};

std::string session_report_json(const SessionReport& r);
std::string session_report_csv(const SessionReport& r);

// Deterministic per-GoF request loop: FoV culling, harmonic-mean bandwidth
// prediction, MCKP level selection (dropping lowest-saliency tiles when even
// level 1 does not fit), dual-mode delivery, piecewise-exact download timing,
// buffer/stall accounting, QoE. Throws TraceCoverageError if a trace is short.
SessionReport simulate_session(const Manifest& manifest, const BandwidthTrace& bw,
                               const FovTrace& fov, const SimulatorConfig& cfg = {});

}  // namespace splatstream
