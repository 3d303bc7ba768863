#pragma once

#include <filesystem>
#include <memory>
#include <utility>
#include <vector>

#include "awnet/layers.hpp"
#include "awnet/params.hpp"
#include "awnet/tensor.hpp"

namespace awnet {

/// One attention U-Net: a contracting path of conv modules joined by max
/// pooling, an expanding path joined by trilinear upsampling, attention
/// gates on the skips, and a 1x1x1 head. `softmax_head` selects K-class
/// softmax (encoder) vs single-channel sigmoid (decoder).
class UNet {
public:
    UNet(ParamStore& ps, const std::string& prefix, const NetworkConfig& cfg,
         int in_channels, int out_channels, bool softmax_head);

    Tensor forward(const Tensor& x);
    /// Gradient wrt the head activation output in, gradient wrt input out.
    Tensor backward(const Tensor& grad_out);

    int out_channels() const { return out_channels_; }

private:
    int depth_;
    int out_channels_;
    bool softmax_;
    std::vector<ConvModule> modules_; // 2*depth+1: contracting, bottleneck, expanding
    std::vector<AttentionGate> gates_; // one per skip level
    std::vector<MaxPool> pools_;
    Conv3d head_;

    // forward caches
    std::vector<Dims> pre_pool_dims_;
    std::vector<Dims> up_source_dims_;
    std::vector<int> skip_channels_;
    Tensor activated_;
};

/// The full W-Net: encoder U-Net emitting a K-class soft assignment,
/// decoder U-Net reconstructing the input through a sigmoid head.
class WNet {
public:
    explicit WNet(const NetworkConfig& cfg);

    /// Fan-in-scaled random initialization, fully determined by the seed.
    void init_params();

    /// Encoder only (the inference path).
    Tensor encode(const Tensor& x);
    /// Encoder then decoder; returns (soft assignment, reconstruction).
    std::pair<Tensor, Tensor> forward(const Tensor& x);

    /// Joint objective: grad_p is the loss gradient applied directly to the
    /// soft assignment, grad_rec the one applied to the reconstruction.
    /// Both paths reach the encoder; the decoder sees only grad_rec.
    void backward(const Tensor& grad_p, const Tensor& grad_rec);
    /// N-Cuts-only step: backprop grad_p through the encoder alone.
    void backward_encoder(const Tensor& grad_p);
    /// Reconstruction-only step: backprop grad_rec through both U-Nets.
    void backward_reconstruction(const Tensor& grad_rec);

    ParamStore& params() { return *ps_; }
    const ParamStore& params() const { return *ps_; }
    const NetworkConfig& config() const { return cfg_; }

    void save(const std::filesystem::path& path) const;
    static WNet load(const std::filesystem::path& path);

    /// Offsets of decoder parameters inside the flat store (contiguous tail).
    std::size_t decoder_param_begin() const { return decoder_begin_; }

private:
    NetworkConfig cfg_;
    // Heap-held so layer back-pointers survive moves of the WNet itself.
    std::unique_ptr<ParamStore> ps_;
    std::size_t decoder_begin_ = 0;
    std::unique_ptr<UNet> encoder_;
    std::unique_ptr<UNet> decoder_;
};

} // namespace awnet
