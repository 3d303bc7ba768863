#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "awnet/errors.hpp"

namespace awnet {

/// Grid extents, (D, H, W) with D slowest in memory.
struct Dims {
    int d = 0;
    int h = 0;
    int w = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(d) * static_cast<std::size_t>(h) *
               static_cast<std::size_t>(w);
    }
    bool operator==(const Dims&) const = default;
};

/// Single-channel 3D scalar field, row-major (D slowest, W fastest).
struct Volume {
    Dims dims;
    std::vector<float> data;

    Volume() = default;
    Volume(Dims dm, float fill = 0.0f)
        : dims(dm), data(dm.count(), fill) {}

    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dims.h + y) * dims.w + x;
    }
    float& at(int z, int y, int x) { return data[index(z, y, x)]; }
    float at(int z, int y, int x) const { return data[index(z, y, x)]; }

    bool operator==(const Volume&) const = default;
};

/// Integer cluster labels per voxel; 0 is background by convention.
struct LabelMap {
    Dims dims;
    std::vector<std::uint8_t> labels;

    LabelMap() = default;
    LabelMap(Dims dm, std::uint8_t fill = 0)
        : dims(dm), labels(dm.count(), fill) {}

    std::size_t index(int z, int y, int x) const {
        return (static_cast<std::size_t>(z) * dims.h + y) * dims.w + x;
    }
    std::uint8_t& at(int z, int y, int x) { return labels[index(z, y, x)]; }
    std::uint8_t at(int z, int y, int x) const { return labels[index(z, y, x)]; }

    bool operator==(const LabelMap&) const = default;
};

/// Synthetic ellipsoid phantom description. Coordinates are voxel indices
/// (z, y, x); no physical spacing.
struct PhantomSpec {
    struct Ellipsoid {
        double cz = 0, cy = 0, cx = 0;   // center
        double rz = 1, ry = 1, rx = 1;   // radii, > 0
        double intensity = 1.0;          // in [0, 1]
        int label = 1;                   // > 0, distinct per ellipsoid
    };

    Dims dims;
    double background_intensity = 0.0;
    std::vector<Ellipsoid> ellipsoids;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Min-max rescale to [0, 1]; constant volumes map to all zeros.
Volume normalize(const Volume& v);

/// Rasterize a phantom. A voxel inside an ellipsoid
/// ((x-c)^T diag(1/r^2) (x-c) <= 1) takes that ellipsoid's intensity and
/// label; later list entries win overlaps. Gaussian noise is added after
/// labeling, then values are clamped to [0, 1]. Deterministic in the seed.
std::pair<Volume, LabelMap> generate_phantom(const PhantomSpec& spec);

// ".vol3" format: magic "V3F1", three u32 (D, H, W), then D*H*W f32,
// everything little-endian. ".lbl3" is the same with magic "L3U1" and a
// u8 payload.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);
void save_labels(const LabelMap& m, const std::filesystem::path& path);
LabelMap load_labels(const std::filesystem::path& path);

} // namespace awnet
