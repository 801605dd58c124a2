#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "helpers.hpp"
#include "splatstream/error.hpp"
#include "splatstream/splat.hpp"

using namespace splatstream;
using splatstream::testing::clouds_equal;
using splatstream::testing::random_cloud;

TEST_CASE("ply round-trip is the identity on random clouds") {
    std::mt19937_64 rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        GaussianCloud cloud = random_cloud(rng, 50);
        std::string bytes = write_ply(cloud);
        GaussianCloud back = parse_ply(bytes);
        CHECK(clouds_equal(cloud, back));
        CHECK(write_ply(back) == bytes);  // byte-level fixed point
    }
}

TEST_CASE("empty cloud writes a valid PLY with vertex count 0") {
    GaussianCloud empty;
    std::string bytes = write_ply(empty);
    CHECK(bytes.find("element vertex 0\n") != std::string::npos);
    CHECK(parse_ply(bytes).size() == 0);
}

TEST_CASE("unit scale stores zero log-scale, logit 0 parses to opacity one half") {
    std::array<float, kStoredScalarsPerPrimitive> raw{};
    raw[58] = 1.0f;  // identity quaternion
    GaussianPrimitive p = GaussianPrimitive::from_stored(raw);
    CHECK(p.opacity == doctest::Approx(0.5));
    CHECK(p.scale == Vec3::Ones());

    auto stored = p.to_stored();
    CHECK(stored[54] == 0.0f);
    CHECK(stored[55] == 0.0f);
    CHECK(stored[56] == 0.0f);
    CHECK(stored[57] == 0.0f);

    // Three-primitive fixture with stored opacity logit 0.
    GaussianCloud fixture(std::vector<GaussianPrimitive>(3, p));
    for (const auto& prim : parse_ply(write_ply(fixture)).primitives)
        CHECK(prim.opacity == doctest::Approx(0.5));
}

TEST_CASE("header without the opacity property is a SchemaError") {
    GaussianCloud cloud;
    std::string bytes = write_ply(cloud);
    auto pos = bytes.find("property float opacity\n");
    REQUIRE(pos != std::string::npos);
    bytes.erase(pos, std::string("property float opacity\n").size());
    CHECK_THROWS_AS(parse_ply(bytes), SchemaError);
}

TEST_CASE("malformed header and truncated body raise the right errors") {
    CHECK_THROWS_AS(parse_ply("not a ply\n"), FormatError);
    std::mt19937_64 rng(7);
    std::string bytes = write_ply(random_cloud(rng, 4));
    bytes.resize(bytes.size() - 10);
    CHECK_THROWS_AS(parse_ply(bytes), TruncationError);
}

TEST_CASE("write_ply rejects non-finite fields") {
    std::mt19937_64 rng(8);
    GaussianCloud cloud = random_cloud(rng, 1);
    cloud.primitives[0].opacity = 0.0;  // logit(-inf)
    CHECK_THROWS_AS(write_ply(cloud), ValueError);
    cloud.primitives[0].opacity = 0.5;
    cloud.primitives[0].position.x() = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(write_ply(cloud), ValueError);
}

TEST_CASE("raw_size_bytes is 248 per primitive and linear") {
    std::mt19937_64 rng(3);
    CHECK(raw_size_bytes(GaussianCloud{}) == 0);
    GaussianCloud one = random_cloud(rng, 1);
    CHECK(raw_size_bytes(one) == 248);

    GaussianCloud a = random_cloud(rng, 17), b = random_cloud(rng, 5);
    std::vector<GaussianPrimitive> both = a.primitives;
    both.insert(both.end(), b.primitives.begin(), b.primitives.end());
    CHECK(raw_size_bytes(GaussianCloud(both)) == raw_size_bytes(a) + raw_size_bytes(b));
}

TEST_CASE("200k primitives at 30 fps need about 49.6 MB and 11.9 Gbps") {
    std::vector<GaussianPrimitive> prims(200000);
    GaussianCloud frame(std::move(prims));
    CHECK(raw_size_bytes(frame) == 49'600'000);
    CHECK(raw_gbps(frame, 30.0) == doctest::Approx(11.904));
}

TEST_CASE("covariance of identity rotation is diag(scale^2)") {
    GaussianPrimitive p;
    p.scale = Vec3(2.0, 3.0, 0.5);
    Mat3 cov = covariance_of(p);
    CHECK((cov - Vec3(4.0, 9.0, 0.25).asDiagonal().toDenseMatrix()).norm() < 1e-12);
}

TEST_CASE("unit scale gives the identity covariance for any rotation") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 10; ++rep) {
        GaussianPrimitive p = splatstream::testing::random_primitive(rng);
        p.scale = Vec3::Ones();
        CHECK((covariance_of(p) - Mat3::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("covariance eigenvalues match the squared scales") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        GaussianPrimitive p = splatstream::testing::random_primitive(rng);
        p.scale = Vec3(2.0, 1.0, 1.0);
        Mat3 cov = covariance_of(p);
        CHECK((cov - cov.transpose()).norm() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 values = eig.eigenvalues();  // ascending
        CHECK(values[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(values[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(values[2] == doctest::Approx(4.0).epsilon(1e-9));
        CHECK(values.minCoeff() >= 0.0);
    }
}
