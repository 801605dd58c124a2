#include "splatstream/splat.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "splatstream/error.hpp"

namespace splatstream {

namespace {

const char* const kPropertyNames[kStoredScalarsPerPrimitive] = {
    "x", "y", "z", "nx", "ny", "nz",
    "f_dc_0", "f_dc_1", "f_dc_2",
    "f_rest_0", "f_rest_1", "f_rest_2", "f_rest_3", "f_rest_4", "f_rest_5", "f_rest_6",
    "f_rest_7", "f_rest_8", "f_rest_9", "f_rest_10", "f_rest_11", "f_rest_12", "f_rest_13",
    "f_rest_14", "f_rest_15", "f_rest_16", "f_rest_17", "f_rest_18", "f_rest_19", "f_rest_20",
    "f_rest_21", "f_rest_22", "f_rest_23", "f_rest_24", "f_rest_25", "f_rest_26", "f_rest_27",
    "f_rest_28", "f_rest_29", "f_rest_30", "f_rest_31", "f_rest_32", "f_rest_33", "f_rest_34",
    "f_rest_35", "f_rest_36", "f_rest_37", "f_rest_38", "f_rest_39", "f_rest_40", "f_rest_41",
    "f_rest_42", "f_rest_43", "f_rest_44",
    "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3"};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

GaussianPrimitive GaussianPrimitive::from_stored(
    const std::array<float, kStoredScalarsPerPrimitive>& raw) {
    GaussianPrimitive p;
    p.position = Vec3(raw[0], raw[1], raw[2]);
    p.normal = Vec3(raw[3], raw[4], raw[5]);
    for (int i = 0; i < 48; ++i) p.sh[i] = raw[6 + i];
    p.opacity = sigmoid(raw[54]);
    p.scale = Vec3(std::exp(double(raw[55])), std::exp(double(raw[56])), std::exp(double(raw[57])));
    // rot_0..3 = (w,x,y,z). Only renormalize when clearly off-unit so that
    // files we wrote ourselves round-trip bit-exactly.
    double w = raw[58], x = raw[59], y = raw[60], z = raw[61];
    double n2 = w * w + x * x + y * y + z * z;
    if (n2 < 1e-24) {
        p.rotation = Quat(1.0, 0.0, 0.0, 0.0);
    } else if (std::abs(n2 - 1.0) > 1e-6) {
        double n = std::sqrt(n2);
        p.rotation = Quat(w / n, x / n, y / n, z / n);
    } else {
        p.rotation = Quat(w, x, y, z);
    }
    return p;
}

std::array<float, kStoredScalarsPerPrimitive> GaussianPrimitive::to_stored() const {
    std::array<float, kStoredScalarsPerPrimitive> raw{};
    double vals[kStoredScalarsPerPrimitive];
    vals[0] = position.x();
    vals[1] = position.y();
    vals[2] = position.z();
    vals[3] = normal.x();
    vals[4] = normal.y();
    vals[5] = normal.z();
    for (int i = 0; i < 48; ++i) vals[6 + i] = sh[i];
    vals[54] = logit(opacity);
    vals[55] = std::log(scale.x());
    vals[56] = std::log(scale.y());
    vals[57] = std::log(scale.z());
    vals[58] = rotation.w();
    vals[59] = rotation.x();
    vals[60] = rotation.y();
    vals[61] = rotation.z();
    for (std::size_t i = 0; i < kStoredScalarsPerPrimitive; ++i) {
        if (!std::isfinite(vals[i])) {
            throw ValueError("non-finite stored value for property " +
                             std::string(kPropertyNames[i]));
        }
        raw[i] = static_cast<float>(vals[i]);
    }
    return raw;
}

Mat3 covariance_of(const GaussianPrimitive& p) {
    // The rotation may be unit only to float precision; renormalize so the
    // eigenvalues are exactly the squared scales.
    Mat3 r = p.rotation.normalized().toRotationMatrix();
    return r * p.scale.cwiseProduct(p.scale).asDiagonal() * r.transpose();
}

GaussianCloud::GaussianCloud(std::vector<GaussianPrimitive> prims)
    : primitives(std::move(prims)) {
    for (const auto& p : primitives) bbox.expand(p.position);
}

namespace {

// Pulls the next '\n'-terminated line out of `bytes` starting at `pos`.
std::string next_line(const std::string& bytes, std::size_t& pos) {
    auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("unterminated PLY header line");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

GaussianCloud parse_ply(const std::string& bytes) {
    std::size_t pos = 0;
    if (next_line(bytes, pos) != "ply") throw FormatError("missing 'ply' magic");
    if (next_line(bytes, pos) != "format binary_little_endian 1.0")
        throw FormatError("unsupported PLY format (need binary_little_endian 1.0)");

    std::uint64_t vertex_count = 0;
    bool have_element = false;
    std::size_t prop = 0;
    for (;;) {
        std::string line = next_line(bytes, pos);
        if (line == "end_header") break;
        if (line.rfind("comment", 0) == 0) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        if (tok == "element") {
            std::string name;
            ss >> name >> vertex_count;
            if (ss.fail() || name != "vertex")
                throw FormatError("expected 'element vertex N', got: " + line);
            if (have_element) throw FormatError("multiple element declarations");
            have_element = true;
        } else if (tok == "property") {
            if (!have_element) throw FormatError("property before element declaration");
            std::string type, name;
            ss >> type >> name;
            if (prop >= kStoredScalarsPerPrimitive)
                throw SchemaError("unexpected extra property: " + name);
            if (type != "float")
                throw SchemaError("property " + name + " must be float, got " + type);
            if (name != kPropertyNames[prop])
                throw SchemaError("expected property '" + std::string(kPropertyNames[prop]) +
                                  "' at position " + std::to_string(prop) + ", got '" + name + "'");
            ++prop;
        } else {
            throw FormatError("unrecognized header line: " + line);
        }
    }
    if (!have_element) throw FormatError("missing 'element vertex' declaration");
    if (prop != kStoredScalarsPerPrimitive)
        throw SchemaError("header lacks property '" + std::string(kPropertyNames[prop]) + "'");

    std::uint64_t need = vertex_count * kRecordBytes;
    if (bytes.size() - pos < need)
        throw TruncationError("body holds " + std::to_string(bytes.size() - pos) +
                              " bytes, need " + std::to_string(need));

    std::vector<GaussianPrimitive> prims;
    prims.reserve(vertex_count);
    std::array<float, kStoredScalarsPerPrimitive> raw;
    for (std::uint64_t v = 0; v < vertex_count; ++v) {
        std::memcpy(raw.data(), bytes.data() + pos, kRecordBytes);
        pos += kRecordBytes;
        prims.push_back(GaussianPrimitive::from_stored(raw));
    }
    return GaussianCloud(std::move(prims));
}

std::string write_ply(const GaussianCloud& cloud) {
    std::string out;
    out.reserve(2048 + cloud.size() * kRecordBytes);
    out += "ply\nformat binary_little_endian 1.0\nelement vertex ";
    out += std::to_string(cloud.size());
    out += "\n";
    for (const char* name : kPropertyNames) {
        out += "property float ";
        out += name;
        out += "\n";
    }
    out += "end_header\n";
    for (const auto& p : cloud.primitives) {
        auto raw = p.to_stored();
        const char* src = reinterpret_cast<const char*>(raw.data());
        out.append(src, kRecordBytes);
    }
    return out;
}

GaussianCloud load_ply(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_ply(ss.str());
}

void save_ply(const GaussianCloud& cloud, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    std::string bytes = write_ply(cloud);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to " + path);
}

std::uint64_t raw_size_bytes(const GaussianCloud& cloud) {
    return static_cast<std::uint64_t>(cloud.size()) * kRecordBytes;
}

double raw_gbps(const GaussianCloud& cloud, double fps) {
    return double(raw_size_bytes(cloud)) * 8.0 * fps / 1e9;
}

}  // namespace splatstream
