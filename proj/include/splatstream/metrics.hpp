#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splatstream/splat.hpp"
#include "splatstream/types.hpp"

namespace splatstream {

struct RigidTransform {
    Mat3 rotation{Mat3::Identity()};
    Vec3 translation{Vec3::Zero()};

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

// Pinhole camera. Orientation maps camera-local axes into world space; the
// camera looks along its local -z, +x is right, +y is up.
struct Camera {
    Vec3 position{Vec3::Zero()};
    Quat orientation{1.0, 0.0, 0.0, 0.0};
    double vertical_fov{1.0};  // radians, in (0, pi)
    double aspect{16.0 / 9.0};
    double near_plane{0.1};
    double far_plane{1000.0};

    Vec3 right() const { return orientation * Vec3::UnitX(); }
    Vec3 up() const { return orientation * Vec3::UnitY(); }
    Vec3 forward() const { return orientation * Vec3(0, 0, -1); }

    static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                          double vertical_fov, double aspect, double near_plane,
                          double far_plane);
};

struct Image {
    int width{0}, height{0};
    std::vector<float> pixels;  // RGB rows, [0,1]

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 0.0f) {}
    float& at(int x, int y, int c) { return pixels[(std::size_t(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return pixels[(std::size_t(y) * width + x) * 3 + c]; }
};

// Point-to-point ICP with k-d tree correspondences and a closed-form SVD fit
// per iteration; returns the transform mapping src toward dst. Throws
// DegenerateInputError for < 3 points or rank-deficient inputs.
RigidTransform icp_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         int max_iters = 50, double tol = 1e-9);

struct GpsnrParams {
    double lambda_geo{0.8};
    double lambda_col{0.2};
    bool use_icp{true};
    int icp_max_iters{30};
    double icp_tol{1e-9};
    int density_k{8};
    double cap_db{100.0};
};

// Bidirectional NN geometric PSNR with an SH-DC color term and inverse-density
// pair weights; the worse direction wins. See GpsnrParams for the knobs.
double geometric_psnr(const GaussianCloud& reference, const GaussianCloud& test,
                      const GpsnrParams& params = {});

struct RenderParams {
    int sh_degree{0};       // 0 = DC only
    double sigma_cutoff{3.0};
};

// Minimal depth-sorted EWA splatter: perspective projection, 2D covariance via
// the projection Jacobian, front-to-back alpha compositing, black background.
Image render(const GaussianCloud& cloud, const Camera& cam, int width, int height,
             const RenderParams& params = {});

// 10*log10(1/MSE) over all channels, capped at 100 dB.
double image_psnr(const Image& a, const Image& b);

// Binary PPM (P6, 8-bit).
std::string encode_ppm(const Image& img);
void save_ppm(const Image& img, const std::string& path);

// Real spherical harmonics radiance toward `dir` (unit), degrees 0..3,
// 3DGS coefficient layout, 0.5 offset, clamped to [0,1].
Vec3 eval_sh(int degree, const std::array<double, 48>& sh, const Vec3& dir);

}  // namespace splatstream
