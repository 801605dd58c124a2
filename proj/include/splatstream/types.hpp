#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <limits>

namespace splatstream {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Axis-aligned bounding box. Default-constructed box is empty (min > max).
struct Aabb {
    Vec3 min{Vec3::Constant(std::numeric_limits<double>::infinity())};
    Vec3 max{Vec3::Constant(-std::numeric_limits<double>::infinity())};

    bool empty() const { return (min.array() > max.array()).any(); }

    void expand(const Vec3& p) {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }

    void expand(const Aabb& other) {
        if (other.empty()) return;
        min = min.cwiseMin(other.min);
        max = max.cwiseMax(other.max);
    }

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }

    Vec3 extent() const { return empty() ? Vec3::Zero() : Vec3(max - min); }
    Vec3 center() const { return empty() ? Vec3::Zero() : Vec3(0.5 * (min + max)); }
    double diagonal() const { return extent().norm(); }

    static Aabb of(const Vec3& lo, const Vec3& hi) {
        Aabb b;
        b.min = lo;
        b.max = hi;
        return b;
    }
};

}  // namespace splatstream
