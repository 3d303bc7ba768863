#include "awnet/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace awnet {

Volume normalize(const Volume& v) {
    Volume out(v.dims);
    if (v.data.empty()) return out;
    auto [mn_it, mx_it] = std::minmax_element(v.data.begin(), v.data.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) return out; // constant volume -> all zeros
    const double range = mx - mn;
    for (std::size_t i = 0; i < v.data.size(); ++i)
        out.data[i] = static_cast<float>((v.data[i] - mn) / range);
    return out;
}

std::pair<Volume, LabelMap> generate_phantom(const PhantomSpec& spec) {
    if (spec.dims.d < 1 || spec.dims.h < 1 || spec.dims.w < 1)
        throw invalid_argument_error("generate_phantom: dims must be >= 1");
    if (spec.background_intensity < 0.0 || spec.background_intensity > 1.0)
        throw invalid_argument_error("generate_phantom: background_intensity outside [0,1]");
    std::set<int> labels_seen;
    for (const auto& e : spec.ellipsoids) {
        if (e.rz <= 0 || e.ry <= 0 || e.rx <= 0)
            throw invalid_argument_error("generate_phantom: ellipsoid radii must be > 0");
        if (e.intensity < 0.0 || e.intensity > 1.0)
            throw invalid_argument_error("generate_phantom: ellipsoid intensity outside [0,1]");
        if (e.label <= 0 || e.label > 255)
            throw invalid_argument_error("generate_phantom: ellipsoid label must be in 1..255");
        if (!labels_seen.insert(e.label).second)
            throw invalid_argument_error("generate_phantom: duplicate ellipsoid label");
    }
    if (spec.noise_sigma < 0.0)
        throw invalid_argument_error("generate_phantom: noise_sigma must be >= 0");

    Volume vol(spec.dims, static_cast<float>(spec.background_intensity));
    LabelMap map(spec.dims, 0);

    for (const auto& e : spec.ellipsoids) {
        // Tight bounding box keeps rasterization cheap for small ellipsoids.
        const int z0 = std::max(0, static_cast<int>(std::floor(e.cz - e.rz)));
        const int z1 = std::min(spec.dims.d - 1, static_cast<int>(std::ceil(e.cz + e.rz)));
        const int y0 = std::max(0, static_cast<int>(std::floor(e.cy - e.ry)));
        const int y1 = std::min(spec.dims.h - 1, static_cast<int>(std::ceil(e.cy + e.ry)));
        const int x0 = std::max(0, static_cast<int>(std::floor(e.cx - e.rx)));
        const int x1 = std::min(spec.dims.w - 1, static_cast<int>(std::ceil(e.cx + e.rx)));
        for (int z = z0; z <= z1; ++z)
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const double dz = (z - e.cz) / e.rz;
                    const double dy = (y - e.cy) / e.ry;
                    const double dx = (x - e.cx) / e.rx;
                    if (dz * dz + dy * dy + dx * dx <= 1.0) {
                        vol.at(z, y, x) = static_cast<float>(e.intensity);
                        map.at(z, y, x) = static_cast<std::uint8_t>(e.label);
                    }
                }
    }

    if (spec.noise_sigma > 0.0) {
        std::mt19937_64 rng(spec.seed);
        std::normal_distribution<double> gauss(0.0, spec.noise_sigma);
        for (auto& v : vol.data) {
            const double noisy = v + gauss(rng);
            v = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
        }
    }
    return {std::move(vol), std::move(map)};
}

namespace {

void put_u32(std::string& buf, std::uint32_t x) {
    buf.push_back(static_cast<char>(x & 0xff));
    buf.push_back(static_cast<char>((x >> 8) & 0xff));
    buf.push_back(static_cast<char>((x >> 16) & 0xff));
    buf.push_back(static_cast<char>((x >> 24) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    const auto b = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])); };
    return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error(io_error::kind::open_failed, path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error(io_error::kind::open_failed, path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out)
        throw io_error(io_error::kind::write_failed, path.string());
}

Dims parse_header(const std::string& buf, const char magic[4], const std::filesystem::path& path) {
    if (buf.size() < 4 || std::memcmp(buf.data(), magic, 4) != 0)
        throw io_error(io_error::kind::bad_magic, path.string());
    if (buf.size() < 16)
        throw io_error(io_error::kind::bad_header, path.string() + ": header shorter than 16 bytes");
    Dims dims;
    dims.d = static_cast<int>(get_u32(buf.data() + 4));
    dims.h = static_cast<int>(get_u32(buf.data() + 8));
    dims.w = static_cast<int>(get_u32(buf.data() + 12));
    if (dims.d < 1 || dims.h < 1 || dims.w < 1)
        throw io_error(io_error::kind::bad_header, path.string() + ": zero dimension");
    if (dims.count() > (std::size_t{1} << 31))
        throw io_error(io_error::kind::bad_header, path.string() + ": implausible voxel count");
    return dims;
}

} // namespace

void save_volume(const Volume& v, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(16 + 4 * v.data.size());
    buf.append("V3F1", 4);
    put_u32(buf, static_cast<std::uint32_t>(v.dims.d));
    put_u32(buf, static_cast<std::uint32_t>(v.dims.h));
    put_u32(buf, static_cast<std::uint32_t>(v.dims.w));
    static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
    const std::size_t payload = 4 * v.data.size();
    buf.resize(16 + payload);
    std::memcpy(buf.data() + 16, v.data.data(), payload);
    write_file(path, buf);
}

Volume load_volume(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    const Dims dims = parse_header(buf, "V3F1", path);
    const std::size_t payload = 4 * dims.count();
    if (buf.size() < 16 + payload)
        throw io_error(io_error::kind::truncated, path.string());
    if (buf.size() > 16 + payload)
        throw io_error(io_error::kind::trailing_data, path.string());
    Volume v(dims);
    std::memcpy(v.data.data(), buf.data() + 16, payload);
    return v;
}

void save_labels(const LabelMap& m, const std::filesystem::path& path) {
    std::string buf;
    buf.reserve(16 + m.labels.size());
    buf.append("L3U1", 4);
    put_u32(buf, static_cast<std::uint32_t>(m.dims.d));
    put_u32(buf, static_cast<std::uint32_t>(m.dims.h));
    put_u32(buf, static_cast<std::uint32_t>(m.dims.w));
    buf.append(reinterpret_cast<const char*>(m.labels.data()), m.labels.size());
    write_file(path, buf);
}

LabelMap load_labels(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    const Dims dims = parse_header(buf, "L3U1", path);
    const std::size_t payload = dims.count();
    if (buf.size() < 16 + payload)
        throw io_error(io_error::kind::truncated, path.string());
    if (buf.size() > 16 + payload)
        throw io_error(io_error::kind::trailing_data, path.string());
    LabelMap m(dims);
    std::memcpy(m.labels.data(), buf.data() + 16, payload);
    return m;
}

} // namespace awnet
