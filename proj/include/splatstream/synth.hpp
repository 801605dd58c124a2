#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/metrics.hpp"
#include "splatstream/simulator.hpp"
#include "splatstream/splat.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

// One blob of primitives with an optional constant velocity (units/second).
struct ClusterSpec {
    std::size_t count{100};
    Vec3 center{Vec3::Zero()};
    double spread{0.25};          // stddev of positions around the center
    Vec3 velocity{Vec3::Zero()};  // piecewise-linear motion: constant velocity
    double opacity_min{0.3};
    double opacity_max{0.95};
    double scale_min{0.01};
    double scale_max{0.08};
    Vec3 base_color{0.5, 0.5, 0.5};  // mean DC color before SH offset
};

struct SceneSpec {
    std::vector<ClusterSpec> clusters;
    std::uint64_t seed{1};

    static SceneSpec from_json(const std::string& text);
    std::string to_json() const;
};

// Deterministic frame sequence. Static clusters are bit-identical across
// frames; moving clusters advance by velocity/fps per frame. All generated
// scalars are quantized through float32 so PLY round-trips are exact.
FrameSequence gen_sequence(const SceneSpec& spec, std::size_t frames, double fps);

// A camera orbit around `target` at `radius`, sampled every step_s; looks at
// the target with the given optics. Deterministic.
FovTrace gen_orbit_fov(const Vec3& target, double radius, double duration_s, double step_s,
                       double vertical_fov, double aspect, double near_plane, double far_plane);

// A fixed camera for the whole duration.
FovTrace gen_static_fov(const Camera& cam, double duration_s);

}  // namespace splatstream
