#pragma once

#include <string>
#include <utility>

#include "awnet/params.hpp"
#include "awnet/tensor.hpp"

namespace awnet {

inline constexpr double kInstanceNormEps = 1e-5;

/// 3D convolution, stride 1. Kernel size 3 uses same padding, kernel size 1
/// none; spatial dims are preserved either way. Weight layout
/// [out_c][in_c][kz][ky][kx].
class Conv3d {
public:
    Conv3d(ParamStore& ps, const std::string& name, int in_c, int out_c, int kernel);

    Tensor forward(const Tensor& x);
    /// Accumulates weight/bias gradients, returns the input gradient.
    Tensor backward(const Tensor& grad_out);

    int in_channels() const { return in_c_; }
    int out_channels() const { return out_c_; }

private:
    ParamStore* ps_;
    int in_c_, out_c_, kernel_;
    std::size_t w_off_, b_off_;
    Tensor x_;
};

/// Per-channel learnable negative slope: out = x >= 0 ? x : alpha_c * x.
class PRelu {
public:
    PRelu(ParamStore& ps, const std::string& name, int channels);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    ParamStore* ps_;
    int channels_;
    std::size_t a_off_;
    Tensor x_;
};

/// Per-channel standardization over the sample's full spatial extent
/// (batch of one), followed by a learnable affine transform.
class InstanceNorm {
public:
    InstanceNorm(ParamStore& ps, const std::string& name, int channels,
                 double eps = kInstanceNormEps);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

private:
    ParamStore* ps_;
    int channels_;
    double eps_;
    std::size_t scale_off_, shift_off_;
    Tensor xhat_;
    std::vector<double> inv_std_;
};

/// Stateless instance normalization, used directly by tests and by
/// InstanceNorm internally.
Tensor instance_norm(const Tensor& x, const double* scale, const double* shift,
                     double eps, Tensor* xhat_out = nullptr,
                     std::vector<double>* inv_std_out = nullptr);

/// 2x2x2 max pooling with stride 2 and floor semantics on odd dims. The
/// pre-pool dims are reported so the matching upsample can restore them.
class MaxPool {
public:
    Tensor forward(const Tensor& x, Dims& pre_pool_dims);
    Tensor backward(const Tensor& grad_out);

private:
    Dims in_dims_;
    int channels_ = 0;
    std::vector<std::size_t> argmax_;
};

/// Trilinear interpolation to `target` (cell-centered sampling, the
/// align-corners-disabled convention). Target must not shrink any axis.
Tensor upsample_trilinear(const Tensor& x, Dims target);
/// Adjoint of upsample_trilinear: scatters grad_out back to `source` dims.
Tensor upsample_trilinear_backward(const Tensor& grad_out, Dims source);

/// Additive attention gate over a skip connection. The skip tensor x is
/// projected onto the coarser gating grid with a strided 1x1x1 map, fused
/// with the gating signal g, squeezed to per-voxel coefficients
/// alpha = sigmoid(psi^T relu(W_x x + W_g g + b_g) + b_psi), and alpha is
/// resampled trilinearly to x's grid. Output is alpha * x.
class AttentionGate {
public:
    AttentionGate(ParamStore& ps, const std::string& name, int x_channels, int g_channels);

    Tensor forward(const Tensor& x, const Tensor& g);
    /// Returns (grad wrt x, grad wrt g).
    std::pair<Tensor, Tensor> backward(const Tensor& grad_out);

    /// Attention coefficients on x's grid from the last forward.
    const Tensor& coefficients() const { return alpha_x_; }

private:
    ParamStore* ps_;
    int cx_, cg_, fint_;
    std::size_t wx_off_, wg_off_, bg_off_, psi_off_, bpsi_off_;
    Tensor x_, g_, q_pre_, alpha_g_, alpha_x_;
};

/// Two rounds of (3x3x3 conv, same padding -> PReLU -> instance norm).
class ConvModule {
public:
    ConvModule(ParamStore& ps, const std::string& name, int in_c, int out_c,
               int kernel = 3);

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& grad_out);

    int out_channels() const { return conv2_.out_channels(); }

private:
    Conv3d conv1_;
    PRelu act1_;
    InstanceNorm norm1_;
    Conv3d conv2_;
    PRelu act2_;
    InstanceNorm norm2_;
};

/// Per-voxel softmax over channels and its backward.
Tensor softmax_channels(const Tensor& z);
Tensor softmax_channels_backward(const Tensor& out, const Tensor& grad_out);

Tensor sigmoid(const Tensor& z);
Tensor sigmoid_backward(const Tensor& out, const Tensor& grad_out);

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Splits a concat gradient back into parts of a_channels / rest.
std::pair<Tensor, Tensor> split_channels(const Tensor& g, int a_channels);

void add_inplace(Tensor& a, const Tensor& b);

} // namespace awnet
