#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/types.hpp"

namespace splatstream {

// Number of float32 scalars per primitive on the wire:
// 3 pos + 3 normal + 3 SH-DC + 45 SH-rest + 1 opacity logit + 3 log scale + 4 quaternion.
inline constexpr std::size_t kStoredScalarsPerPrimitive = 62;
inline constexpr std::size_t kRecordBytes = kStoredScalarsPerPrimitive * 4;

// One anisotropic Gaussian. Holds activated values: opacity in [0,1], scale as
// per-axis radii (> 0). The wire format stores opacity as a logit and scale as
// logs; use from_stored()/to_stored() to cross that boundary.
struct GaussianPrimitive {
    Vec3 position{Vec3::Zero()};
    Vec3 normal{Vec3::Zero()};  // parsed and preserved, semantically unused
    std::array<double, 48> sh{};  // 16 coefficients x RGB; [0..2] is the DC band
    double opacity{1.0};
    Vec3 scale{Vec3::Ones()};
    Quat rotation{1.0, 0.0, 0.0, 0.0};  // unit, (w,x,y,z)

    // Builds a primitive from raw stored scalars (the PLY parameterization).
    // Activation happens in double precision so that to_stored() inverts it
    // bit-exactly for float32 inputs.
    static GaussianPrimitive from_stored(const std::array<float, kStoredScalarsPerPrimitive>& raw);

    // Inverse of from_stored. Throws ValueError on non-finite results
    // (e.g. opacity exactly 0 or 1 has no finite logit).
    std::array<float, kStoredScalarsPerPrimitive> to_stored() const;
};

// Sigma = R * diag(scale)^2 * R^T; symmetric positive semi-definite.
Mat3 covariance_of(const GaussianPrimitive& p);

// One frame: an ordered list of primitives plus a cached bounding box.
// Treat as immutable once built.
struct GaussianCloud {
    std::vector<GaussianPrimitive> primitives;
    Aabb bbox;

    GaussianCloud() = default;
    explicit GaussianCloud(std::vector<GaussianPrimitive> prims);

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }
};

struct FrameSequence {
    std::vector<GaussianCloud> frames;
    double fps{30.0};
};

// Binary little-endian PLY with the fixed 62-float layout (see write_ply for
// the exact header). Throws FormatError / SchemaError / TruncationError.
GaussianCloud parse_ply(const std::string& bytes);
GaussianCloud load_ply(const std::string& path);

std::string write_ply(const GaussianCloud& cloud);
void save_ply(const GaussianCloud& cloud, const std::string& path);

// Uncompressed payload size: primitive count x 62 x 4 bytes (header excluded).
std::uint64_t raw_size_bytes(const GaussianCloud& cloud);

// Raw streaming rate for one frame repeated at `fps`, in gigabits per second.
double raw_gbps(const GaussianCloud& cloud, double fps);

}  // namespace splatstream
