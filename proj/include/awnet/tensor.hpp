#pragma once

#include <cstddef>
#include <vector>

#include "awnet/volume.hpp"

namespace awnet {

/// Dense (C, D, H, W) array of doubles, row-major with W fastest.
/// Feature maps, soft assignments, and gradients all use this shape.
struct Tensor {
    int c = 0, d = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int d_, int h_, int w_, double fill = 0.0)
        : c(c_), d(d_), h(h_), w(w_),
          v(static_cast<std::size_t>(c_) * d_ * h_ * w_, fill) {}

    std::size_t spatial() const {
        return static_cast<std::size_t>(d) * h * w;
    }
    std::size_t size() const { return v.size(); }

    std::size_t index(int ci, int z, int y, int x) const {
        return ((static_cast<std::size_t>(ci) * d + z) * h + y) * w + x;
    }
    double& at(int ci, int z, int y, int x) { return v[index(ci, z, y, x)]; }
    double at(int ci, int z, int y, int x) const { return v[index(ci, z, y, x)]; }

    double* channel(int ci) { return v.data() + static_cast<std::size_t>(ci) * spatial(); }
    const double* channel(int ci) const { return v.data() + static_cast<std::size_t>(ci) * spatial(); }

    bool same_shape(const Tensor& o) const {
        return c == o.c && d == o.d && h == o.h && w == o.w;
    }
    Dims dims() const { return Dims{d, h, w}; }
};

inline Tensor tensor_from_volume(const Volume& vol) {
    Tensor t(1, vol.dims.d, vol.dims.h, vol.dims.w);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        t.v[i] = vol.data[i];
    return t;
}

inline Volume volume_from_channel(const Tensor& t, int ci) {
    Volume vol(Dims{t.d, t.h, t.w});
    const double* ch = t.channel(ci);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        vol.data[i] = static_cast<float>(ch[i]);
    return vol;
}

} // namespace awnet
