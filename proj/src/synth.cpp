#include "splatstream/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include "splatstream/error.hpp"

namespace splatstream {

namespace {

float f32(double v) { return static_cast<float>(v); }

}  // namespace

SceneSpec SceneSpec::from_json(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text);
    SceneSpec spec;
    spec.seed = doc.value("seed", std::uint64_t{1});
    for (const auto& jc : doc.at("clusters")) {
        ClusterSpec c;
        c.count = jc.value("count", std::size_t{100});
        if (jc.contains("center"))
            c.center = Vec3(jc["center"][0], jc["center"][1], jc["center"][2]);
        c.spread = jc.value("spread", 0.25);
        if (jc.contains("velocity"))
            c.velocity = Vec3(jc["velocity"][0], jc["velocity"][1], jc["velocity"][2]);
        c.opacity_min = jc.value("opacity_min", 0.3);
        c.opacity_max = jc.value("opacity_max", 0.95);
        c.scale_min = jc.value("scale_min", 0.01);
        c.scale_max = jc.value("scale_max", 0.08);
        if (jc.contains("base_color"))
            c.base_color = Vec3(jc["base_color"][0], jc["base_color"][1], jc["base_color"][2]);
        spec.clusters.push_back(c);
    }
    if (spec.clusters.empty()) throw ParameterError("scene spec needs at least one cluster");
    return spec;
}

std::string SceneSpec::to_json() const {
    nlohmann::json doc;
    doc["seed"] = seed;
    doc["clusters"] = nlohmann::json::array();
    for (const auto& c : clusters) {
        doc["clusters"].push_back(
            {{"count", c.count},
             {"center", {c.center.x(), c.center.y(), c.center.z()}},
             {"spread", c.spread},
             {"velocity", {c.velocity.x(), c.velocity.y(), c.velocity.z()}},
             {"opacity_min", c.opacity_min},
             {"opacity_max", c.opacity_max},
             {"scale_min", c.scale_min},
             {"scale_max", c.scale_max},
             {"base_color", {c.base_color.x(), c.base_color.y(), c.base_color.z()}}});
    }
    return doc.dump(2) + "\n";
}

FrameSequence gen_sequence(const SceneSpec& spec, std::size_t frames, double fps) {
    if (frames < 1) throw ParameterError("need at least one frame");
    if (fps <= 0) throw ParameterError("fps must be positive");
    if (spec.clusters.empty()) throw ParameterError("scene spec needs at least one cluster");

    // Base primitives are drawn once; per-frame motion only shifts positions.
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    struct Base {
        GaussianPrimitive prim;
        Vec3 velocity;
    };
    std::vector<Base> base;
    for (const auto& c : spec.clusters) {
        for (std::size_t i = 0; i < c.count; ++i) {
            // Stored-domain scalars are drawn as float32 and activated exactly
            // the way parse_ply does, so write->parse is the identity.
            std::array<float, kStoredScalarsPerPrimitive> raw{};
            for (int a = 0; a < 3; ++a)
                raw[a] = f32(c.center[a] + c.spread * gauss(rng));
            raw[3] = raw[4] = raw[5] = 0.0f;  // normals unused
            for (int ch = 0; ch < 3; ++ch)
                raw[6 + ch] = f32((c.base_color[ch] - 0.5) / 0.28209479177387814 +
                                  0.2 * (unit(rng) - 0.5));
            for (int r = 0; r < 45; ++r) raw[9 + r] = f32(0.05 * (unit(rng) - 0.5));
            double opacity = c.opacity_min + (c.opacity_max - c.opacity_min) * unit(rng);
            opacity = std::clamp(opacity, 1e-4, 1.0 - 1e-4);
            raw[54] = f32(std::log(opacity / (1.0 - opacity)));
            for (int a = 0; a < 3; ++a) {
                double s = c.scale_min + (c.scale_max - c.scale_min) * unit(rng);
                raw[55 + a] = f32(std::log(s));
            }
            Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
            if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
            Quat q(Eigen::AngleAxisd(2.0 * std::numbers::pi * unit(rng), axis.normalized()));
            raw[58] = f32(q.w());
            raw[59] = f32(q.x());
            raw[60] = f32(q.y());
            raw[61] = f32(q.z());
            base.push_back({GaussianPrimitive::from_stored(raw), c.velocity});
        }
    }

    FrameSequence seq;
    seq.fps = fps;
    for (std::size_t f = 0; f < frames; ++f) {
        std::vector<GaussianPrimitive> prims;
        prims.reserve(base.size());
        double t = double(f) / fps;
        for (const auto& b : base) {
            GaussianPrimitive p = b.prim;
            if (!b.velocity.isZero()) {
                for (int a = 0; a < 3; ++a)
                    p.position[a] = double(f32(p.position[a] + b.velocity[a] * t));
            }
            prims.push_back(std::move(p));
        }
        seq.frames.emplace_back(std::move(prims));
    }
    return seq;
}

FovTrace gen_orbit_fov(const Vec3& target, double radius, double duration_s, double step_s,
                       double vertical_fov, double aspect, double near_plane, double far_plane) {
    if (duration_s <= 0 || step_s <= 0) throw ParameterError("duration and step must be positive");
    FovTrace trace;
    std::size_t n = std::size_t(std::ceil(duration_s / step_s)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        double t = double(i) * step_s;
        double angle = 2.0 * std::numbers::pi * t / duration_s;
        Vec3 eye = target + Vec3(radius * std::cos(angle), 0.3 * radius, radius * std::sin(angle));
        trace.samples.emplace_back(t, Camera::look_at(eye, target, Vec3::UnitY(), vertical_fov,
                                                      aspect, near_plane, far_plane));
    }
    return trace;
}

FovTrace gen_static_fov(const Camera& cam, double duration_s) {
    if (duration_s <= 0) throw ParameterError("duration must be positive");
    FovTrace trace;
    trace.samples.emplace_back(0.0, cam);
    trace.samples.emplace_back(duration_s, cam);
    return trace;
}

}  // namespace splatstream
