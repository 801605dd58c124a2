#include "splatstream/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <Eigen/SVD>

#include "splatstream/error.hpp"
#include "splatstream/kdtree.hpp"

namespace splatstream {

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint,
                       double vertical_fov, double aspect, double near_plane,
                       double far_plane) {
    Camera cam;
    cam.position = eye;
    Vec3 f = (target - eye).normalized();
    Vec3 r = f.cross(up_hint).normalized();
    Vec3 u = r.cross(f);
    Mat3 basis;
    basis.col(0) = r;
    basis.col(1) = u;
    basis.col(2) = -f;  // camera looks along local -z
    cam.orientation = Quat(basis).normalized();
    cam.vertical_fov = vertical_fov;
    cam.aspect = aspect;
    cam.near_plane = near_plane;
    cam.far_plane = far_plane;
    return cam;
}

namespace {

void check_not_degenerate(const std::vector<Vec3>& pts, const char* side) {
    if (pts.size() < 3)
        throw DegenerateInputError(std::string(side) + " cloud has fewer than 3 points");
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= double(pts.size());
    Mat3 scatter = Mat3::Zero();
    for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
    Eigen::JacobiSVD<Mat3> svd(scatter);
    auto s = svd.singularValues();
    if (s(1) <= 1e-12 * std::max(s(0), 1e-300))
        throw DegenerateInputError(std::string(side) + " cloud is rank-deficient (collinear)");
}

RigidTransform kabsch(const std::vector<Vec3>& src, const std::vector<Vec3>& dst_corr) {
    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        mu_s += src[i];
        mu_d += dst_corr[i];
    }
    mu_s /= double(src.size());
    mu_d /= double(src.size());
    Mat3 h = Mat3::Zero();
    for (std::size_t i = 0; i < src.size(); ++i)
        h += (src[i] - mu_s) * (dst_corr[i] - mu_d).transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU(), v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
    RigidTransform t;
    t.rotation = v * d * u.transpose();
    t.translation = mu_d - t.rotation * mu_s;
    return t;
}

}  // namespace

RigidTransform icp_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                         int max_iters, double tol) {
    check_not_degenerate(src, "source");
    check_not_degenerate(dst, "destination");

    KdTree3 dst_tree(dst);
    RigidTransform t;
    double prev_rms = std::numeric_limits<double>::infinity();
    std::vector<Vec3> corr(src.size());
    for (int iter = 0; iter < max_iters; ++iter) {
        double sq_sum = 0.0;
        for (std::size_t i = 0; i < src.size(); ++i) {
            auto hit = dst_tree.nearest(t.apply(src[i]));
            corr[i] = dst[hit.index];
        }
        t = kabsch(src, corr);
        for (std::size_t i = 0; i < src.size(); ++i)
            sq_sum += (t.apply(src[i]) - corr[i]).squaredNorm();
        double rms = std::sqrt(sq_sum / double(src.size()));
        if (prev_rms - rms < tol) break;
        prev_rms = rms;
    }
    return t;
}

namespace {

struct DirectionalMse {
    double geo{0.0};
    double col{0.0};
};

// One NN direction of the GPSNR: iterate cloud A, match into cloud B, weight
// each pair by the inverse local density of A at the query point.
DirectionalMse nn_direction(const std::vector<Vec3>& a_pos, const std::vector<Vec3>& b_pos,
                            const GaussianCloud& a, const GaussianCloud& b, int density_k) {
    KdTree3 a_tree(a_pos);
    KdTree3 b_tree(b_pos);
    const std::size_t n = a_pos.size();
    const std::size_t k = std::min<std::size_t>(density_k, n - 1);

    std::vector<double> weights(n, 1.0);
    if (k >= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            auto hits = a_tree.knearest(a_pos[i], k, std::int64_t(i));
            double r = std::sqrt(hits.back().dist_sq);
            double volume = 4.0 / 3.0 * std::numbers::pi * r * r * r;
            weights[i] = volume / double(k);  // 1 / density
        }
    }
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    if (wsum <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
        wsum = double(n);
    }

    DirectionalMse mse;
    for (std::size_t i = 0; i < n; ++i) {
        auto hit = b_tree.nearest(a_pos[i]);
        mse.geo += weights[i] * hit.dist_sq;
        const auto& sa = a.primitives[i].sh;
        const auto& sb = b.primitives[hit.index].sh;
        double col = 0.0;
        for (int c = 0; c < 3; ++c) {
            double d = sa[c] - sb[c];
            col += d * d;
        }
        mse.col += weights[i] * col;
    }
    mse.geo /= wsum;
    mse.col /= wsum;
    return mse;
}

}  // namespace

double geometric_psnr(const GaussianCloud& reference, const GaussianCloud& test,
                      const GpsnrParams& params) {
    if (reference.empty() || test.empty())
        throw ParameterError("geometric_psnr requires non-empty clouds");
    if (std::abs(params.lambda_geo + params.lambda_col - 1.0) > 1e-9)
        throw ParameterError("lambda_geo + lambda_col must equal 1");

    std::vector<Vec3> ref_pos(reference.size()), test_pos(test.size());
    for (std::size_t i = 0; i < reference.size(); ++i) ref_pos[i] = reference.primitives[i].position;
    for (std::size_t i = 0; i < test.size(); ++i) test_pos[i] = test.primitives[i].position;

    if (params.use_icp) {
        RigidTransform t = icp_align(test_pos, ref_pos, params.icp_max_iters, params.icp_tol);
        for (auto& p : test_pos) p = t.apply(p);
    }

    DirectionalMse fwd = nn_direction(ref_pos, test_pos, reference, test, params.density_k);
    DirectionalMse bwd = nn_direction(test_pos, ref_pos, test, reference, params.density_k);

    double peak = std::max(reference.bbox.diagonal(), 1e-9);
    double mse_geo = std::max(fwd.geo, bwd.geo) / (peak * peak);
    double mse_col = std::max(fwd.col, bwd.col) / (2.0 * 2.0);  // SH-DC peak fixed at 2
    double combined = params.lambda_geo * mse_geo + params.lambda_col * mse_col;
    if (combined <= 0.0) return params.cap_db;
    return std::min(10.0 * std::log10(1.0 / combined), params.cap_db);
}

Vec3 eval_sh(int degree, const std::array<double, 48>& sh, const Vec3& dir) {
    // Standard real SH constants, 3DGS coefficient layout: sh[0..2] is the DC
    // band, f_rest is channel-major (15 coefficients for R, then G, then B).
    constexpr double c0 = 0.28209479177387814;
    constexpr double c1 = 0.4886025119029199;
    constexpr double c2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                              -1.0925484305920792, 0.5462742152960396};
    constexpr double c3[7] = {-0.5900435899266435, 2.890611442640554,  -0.4570457994644658,
                              0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                              -0.5900435899266435};
    auto rest = [&sh](int coeff, int ch) { return sh[3 + ch * 15 + (coeff - 1)]; };
    double x = dir.x(), y = dir.y(), z = dir.z();
    Vec3 out;
    for (int ch = 0; ch < 3; ++ch) {
        double v = c0 * sh[ch];
        if (degree >= 1)
            v += -c1 * y * rest(1, ch) + c1 * z * rest(2, ch) - c1 * x * rest(3, ch);
        if (degree >= 2) {
            double xx = x * x, yy = y * y, zz = z * z;
            v += c2[0] * x * y * rest(4, ch) + c2[1] * y * z * rest(5, ch) +
                 c2[2] * (2.0 * zz - xx - yy) * rest(6, ch) + c2[3] * x * z * rest(7, ch) +
                 c2[4] * (xx - yy) * rest(8, ch);
        }
        if (degree >= 3) {
            double xx = x * x, yy = y * y, zz = z * z;
            v += c3[0] * y * (3.0 * xx - yy) * rest(9, ch) + c3[1] * x * y * z * rest(10, ch) +
                 c3[2] * y * (4.0 * zz - xx - yy) * rest(11, ch) +
                 c3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * rest(12, ch) +
                 c3[4] * x * (4.0 * zz - xx - yy) * rest(13, ch) +
                 c3[5] * z * (xx - yy) * rest(14, ch) + c3[6] * x * (xx - 3.0 * yy) * rest(15, ch);
        }
        out[ch] = std::clamp(v + 0.5, 0.0, 1.0);
    }
    return out;
}

namespace {

struct Splat {
    double depth;
    Vec3 center_px;    // x, y in pixels; z unused
    double inv_cov[3]; // upper triangle of the inverted 2x2: a, b, c
    double radius_px;
    Vec3 color;
    double opacity;
    std::uint32_t source;
};

}  // namespace

Image render(const GaussianCloud& cloud, const Camera& cam, int width, int height,
             const RenderParams& params) {
    if (width <= 0 || height <= 0) throw ParameterError("image dimensions must be positive");
    Image img(width, height);

    Mat3 world_to_view = cam.orientation.toRotationMatrix().transpose();
    double tan_v = std::tan(0.5 * cam.vertical_fov);
    double fy = 0.5 * height / tan_v;
    double fx = 0.5 * width / (tan_v * cam.aspect);
    double cx = 0.5 * width, cy = 0.5 * height;

    std::vector<Splat> splats;
    splats.reserve(cloud.size());
    for (std::uint32_t idx = 0; idx < cloud.size(); ++idx) {
        const auto& p = cloud.primitives[idx];
        if (p.opacity <= 0.0) continue;
        Vec3 v = world_to_view * (p.position - cam.position);
        double depth = -v.z();
        if (depth < cam.near_plane || depth > cam.far_plane) continue;

        double px = cx + fx * v.x() / depth;
        double py = cy - fy * v.y() / depth;

        Mat3 cov_view = world_to_view * covariance_of(p) * world_to_view.transpose();
        // Jacobian of (px, py) w.r.t. view coordinates at the center.
        Eigen::Matrix<double, 2, 3> jac;
        jac << fx / depth, 0.0, fx * v.x() / (depth * depth),
               0.0, -fy / depth, -fy * v.y() / (depth * depth);
        Eigen::Matrix2d cov2 = jac * cov_view * jac.transpose();
        cov2(0, 0) += 1e-9;
        cov2(1, 1) += 1e-9;
        double det = cov2(0, 0) * cov2(1, 1) - cov2(0, 1) * cov2(1, 0);
        if (det <= 0.0) continue;

        double mid = 0.5 * (cov2(0, 0) + cov2(1, 1));
        double lambda_max = mid + std::sqrt(std::max(mid * mid - det, 0.0));
        double radius = params.sigma_cutoff * std::sqrt(lambda_max);
        if (px + radius < 0 || px - radius > width || py + radius < 0 || py - radius > height)
            continue;

        Splat s;
        s.depth = depth;
        s.center_px = Vec3(px, py, 0.0);
        s.inv_cov[0] = cov2(1, 1) / det;
        s.inv_cov[1] = -cov2(0, 1) / det;
        s.inv_cov[2] = cov2(0, 0) / det;
        s.radius_px = radius;
        s.color = eval_sh(params.sh_degree, p.sh, (p.position - cam.position).normalized());
        s.opacity = std::min(p.opacity, 0.999);
        s.source = idx;
        splats.push_back(s);
    }

    // Depth sort with a full attribute tie-break so the output is independent
    // of the input order; only fully identical primitives stay unordered, and
    // those commute under compositing.
    auto attr_less = [](const GaussianPrimitive& a, const GaussianPrimitive& b) {
        for (int i = 0; i < 3; ++i)
            if (a.position[i] != b.position[i]) return a.position[i] < b.position[i];
        if (a.opacity != b.opacity) return a.opacity < b.opacity;
        for (int i = 0; i < 3; ++i)
            if (a.scale[i] != b.scale[i]) return a.scale[i] < b.scale[i];
        for (int i = 0; i < 4; ++i)
            if (a.rotation.coeffs()[i] != b.rotation.coeffs()[i])
                return a.rotation.coeffs()[i] < b.rotation.coeffs()[i];
        for (int i = 0; i < 48; ++i)
            if (a.sh[i] != b.sh[i]) return a.sh[i] < b.sh[i];
        return false;
    };
    std::sort(splats.begin(), splats.end(), [&](const Splat& a, const Splat& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return attr_less(cloud.primitives[a.source], cloud.primitives[b.source]);
    });

    std::vector<float> transmittance(std::size_t(width) * height, 1.0f);
    const double q_cutoff = params.sigma_cutoff * params.sigma_cutoff;
    for (const auto& s : splats) {
        int x0 = std::max(0, int(std::floor(s.center_px.x() - s.radius_px)));
        int x1 = std::min(width - 1, int(std::ceil(s.center_px.x() + s.radius_px)));
        int y0 = std::max(0, int(std::floor(s.center_px.y() - s.radius_px)));
        int y1 = std::min(height - 1, int(std::ceil(s.center_px.y() + s.radius_px)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                float& t = transmittance[std::size_t(y) * width + x];
                if (t < 1e-4f) continue;
                double dx = (x + 0.5) - s.center_px.x();
                double dy = (y + 0.5) - s.center_px.y();
                double q = s.inv_cov[0] * dx * dx + 2.0 * s.inv_cov[1] * dx * dy +
                           s.inv_cov[2] * dy * dy;
                if (q > q_cutoff) continue;
                double alpha = s.opacity * std::exp(-0.5 * q);
                for (int c = 0; c < 3; ++c)
                    img.at(x, y, c) += float(double(t) * alpha * s.color[c]);
                t *= float(1.0 - alpha);
            }
        }
    }
    for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

double image_psnr(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw ParameterError("image_psnr dimension mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        double d = double(a.pixels[i]) - double(b.pixels[i]);
        sq += d * d;
    }
    double mse = a.pixels.empty() ? 0.0 : sq / double(a.pixels.size());
    if (mse <= 0.0) return 100.0;
    return std::min(10.0 * std::log10(1.0 / mse), 100.0);
}

std::string encode_ppm(const Image& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.reserve(out.size() + img.pixels.size());
    for (float v : img.pixels) {
        int byte = int(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
        out.push_back(char(std::clamp(byte, 0, 255)));
    }
    return out;
}

void save_ppm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    std::string bytes = encode_ppm(img);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace splatstream
