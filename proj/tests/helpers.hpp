#pragma once

#include <random>
#include <vector>

#include "splatstream/splat.hpp"
#include "splatstream/types.hpp"

namespace splatstream::testing {

// Random primitive built through the stored-scalar path so PLY round-trips
// are bit-exact by construction.
inline GaussianPrimitive random_primitive(std::mt19937_64& rng, double extent = 1.0) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<float, kStoredScalarsPerPrimitive> raw{};
    for (int a = 0; a < 3; ++a) raw[a] = float(extent * (unit(rng) * 2.0 - 1.0));
    for (int a = 3; a < 6; ++a) raw[a] = float(gauss(rng) * 0.1);
    for (int i = 6; i < 54; ++i) raw[i] = float(0.5 * (unit(rng) * 2.0 - 1.0));
    raw[54] = float(unit(rng) * 8.0 - 4.0);           // opacity logit
    for (int a = 0; a < 3; ++a) raw[55 + a] = float(unit(rng) * 4.0 - 5.0);  // log scale
    Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
    if (axis.norm() < 1e-9) axis = Vec3::UnitZ();
    Quat q(Eigen::AngleAxisd(unit(rng) * 6.283185307, axis.normalized()));
    raw[58] = float(q.w());
    raw[59] = float(q.x());
    raw[60] = float(q.y());
    raw[61] = float(q.z());
    return GaussianPrimitive::from_stored(raw);
}

inline GaussianCloud random_cloud(std::mt19937_64& rng, std::size_t n, double extent = 1.0) {
    std::vector<GaussianPrimitive> prims;
    prims.reserve(n);
    for (std::size_t i = 0; i < n; ++i) prims.push_back(random_primitive(rng, extent));
    return GaussianCloud(std::move(prims));
}

inline bool primitives_equal(const GaussianPrimitive& a, const GaussianPrimitive& b) {
    if (a.position != b.position || a.normal != b.normal) return false;
    if (a.sh != b.sh) return false;
    if (a.opacity != b.opacity || a.scale != b.scale) return false;
    return a.rotation.coeffs() == b.rotation.coeffs();
}

inline bool clouds_equal(const GaussianCloud& a, const GaussianCloud& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!primitives_equal(a.primitives[i], b.primitives[i])) return false;
    return true;
}

}  // namespace splatstream::testing
