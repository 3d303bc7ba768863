#include "awnet/wnet.hpp"

#include <cmath>
#include <random>

namespace awnet {

namespace {

int level_channels(const NetworkConfig& cfg, int level) {
    return cfg.base_channels << level;
}

} // namespace

UNet::UNet(ParamStore& ps, const std::string& prefix, const NetworkConfig& cfg,
           int in_channels, int out_channels, bool softmax_head)
    : depth_(cfg.depth), out_channels_(out_channels), softmax_(softmax_head),
      head_(ps, prefix + ".head", cfg.base_channels, out_channels, 1) {
    modules_.reserve(2 * depth_ + 1);
    // Contracting path; module l maps level l-1 width to level l width.
    modules_.emplace_back(ps, prefix + ".mod0", in_channels, level_channels(cfg, 0));
    for (int l = 1; l < depth_; ++l)
        modules_.emplace_back(ps, prefix + ".mod" + std::to_string(l),
                              level_channels(cfg, l - 1), level_channels(cfg, l));
    // Bottleneck.
    modules_.emplace_back(ps, prefix + ".mod" + std::to_string(depth_),
                          level_channels(cfg, depth_ - 1), level_channels(cfg, depth_));
    // Expanding path, deepest level first: input is the gated skip
    // concatenated with the upsampled deeper feature.
    for (int l = depth_ - 1; l >= 0; --l) {
        const int idx = depth_ + (depth_ - l);
        modules_.emplace_back(ps, prefix + ".mod" + std::to_string(idx),
                              level_channels(cfg, l) + level_channels(cfg, l + 1),
                              level_channels(cfg, l));
    }
    // Gates are registered after the modules, one per skip level; the
    // gating signal comes from one level deeper.
    gates_.reserve(depth_);
    for (int l = 0; l < depth_; ++l)
        gates_.emplace_back(ps, prefix + ".gate" + std::to_string(l),
                            level_channels(cfg, l), level_channels(cfg, l + 1));
    pools_.resize(depth_);
    pre_pool_dims_.resize(depth_);
    up_source_dims_.resize(depth_);
    skip_channels_.resize(depth_);
}

Tensor UNet::forward(const Tensor& x) {
    std::vector<Tensor> skips(depth_);
    Tensor h = x;
    for (int l = 0; l < depth_; ++l) {
        h = modules_[l].forward(h);
        skips[l] = h;
        skip_channels_[l] = h.c;
        h = pools_[l].forward(h, pre_pool_dims_[l]);
    }
    h = modules_[depth_].forward(h);
    for (int l = depth_ - 1; l >= 0; --l) {
        Tensor gated = gates_[l].forward(skips[l], h);
        up_source_dims_[l] = Dims{h.d, h.h, h.w};
        Tensor up = upsample_trilinear(h, pre_pool_dims_[l]);
        h = modules_[depth_ + (depth_ - l)].forward(concat_channels(gated, up));
    }
    Tensor z = head_.forward(h);
    activated_ = softmax_ ? softmax_channels(z) : sigmoid(z);
    return activated_;
}

Tensor UNet::backward(const Tensor& grad_out) {
    Tensor dz = softmax_ ? softmax_channels_backward(activated_, grad_out)
                         : sigmoid_backward(activated_, grad_out);
    Tensor dh = head_.backward(dz);
    std::vector<Tensor> dskips(depth_);
    for (int l = 0; l < depth_; ++l) {
        Tensor dcat = modules_[depth_ + (depth_ - l)].backward(dh);
        auto [dgated, dup] = split_channels(dcat, skip_channels_[l]);
        Tensor dh_up = upsample_trilinear_backward(dup, up_source_dims_[l]);
        auto [dskip, dh_gate] = gates_[l].backward(dgated);
        dskips[l] = std::move(dskip);
        add_inplace(dh_up, dh_gate);
        dh = std::move(dh_up);
    }
    dh = modules_[depth_].backward(dh);
    for (int l = depth_ - 1; l >= 0; --l) {
        Tensor dpool_in = pools_[l].backward(dh);
        add_inplace(dpool_in, dskips[l]);
        dh = modules_[l].backward(dpool_in);
    }
    return dh;
}

WNet::WNet(const NetworkConfig& cfg)
    : cfg_(validate_config(cfg)), ps_(std::make_unique<ParamStore>()) {
    encoder_ = std::make_unique<UNet>(*ps_, "enc", cfg_, 1, cfg_.k_classes, true);
    decoder_begin_ = ps_->size();
    decoder_ = std::make_unique<UNet>(*ps_, "dec", cfg_, cfg_.k_classes, 1, false);
}

void WNet::init_params() {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (const auto& e : ps_->entries()) {
        double* p = ps_->param(e.offset);
        const auto ends_with = [&](const char* suffix) {
            const std::string s(suffix);
            return e.name.size() >= s.size() &&
                   e.name.compare(e.name.size() - s.size(), s.size(), s) == 0;
        };
        if (ends_with(".weight") || ends_with(".w_x") || ends_with(".w_g") ||
            ends_with(".psi")) {
            // Fan-in = product of all extents past the leading output dim.
            std::size_t fan_in = 1;
            for (std::size_t i = 1; i < e.shape.size(); ++i)
                fan_in *= static_cast<std::size_t>(e.shape[i]);
            if (e.shape.size() == 1)
                fan_in = static_cast<std::size_t>(e.shape[0]);
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (std::size_t i = 0; i < e.size; ++i)
                p[i] = stddev * gauss(rng);
        } else if (ends_with(".norm_scale")) {
            for (std::size_t i = 0; i < e.size; ++i)
                p[i] = 1.0;
        } else if (ends_with(".prelu_alpha")) {
            for (std::size_t i = 0; i < e.size; ++i)
                p[i] = cfg_.prelu_init;
        } else {
            // biases, gate offsets, norm shifts
            for (std::size_t i = 0; i < e.size; ++i)
                p[i] = 0.0;
        }
    }
}

Tensor WNet::encode(const Tensor& x) {
    if (x.c != 1)
        throw invalid_argument_error("WNet: input must be single-channel");
    return encoder_->forward(x);
}

std::pair<Tensor, Tensor> WNet::forward(const Tensor& x) {
    Tensor p = encode(x);
    Tensor rec = decoder_->forward(p);
    return {std::move(p), std::move(rec)};
}

void WNet::backward(const Tensor& grad_p, const Tensor& grad_rec) {
    Tensor dp = decoder_->backward(grad_rec);
    add_inplace(dp, grad_p);
    encoder_->backward(dp);
}

void WNet::backward_encoder(const Tensor& grad_p) {
    encoder_->backward(grad_p);
}

void WNet::backward_reconstruction(const Tensor& grad_rec) {
    Tensor dp = decoder_->backward(grad_rec);
    encoder_->backward(dp);
}

void WNet::save(const std::filesystem::path& path) const {
    save_checkpoint(*ps_, cfg_, path);
}

WNet WNet::load(const std::filesystem::path& path) {
    CheckpointData ck = load_checkpoint(path);
    WNet net(ck.config);
    const auto& expected = net.ps_->entries();
    if (expected.size() != ck.entries.size())
        throw io_error(io_error::kind::bad_header,
                       path.string() + ": parameter entry count mismatch");
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const auto& want = expected[i];
        const auto& have = ck.entries[i];
        if (want.name != have.name || want.shape != have.shape)
            throw io_error(io_error::kind::bad_header,
                           path.string() + ": unexpected parameter entry '" + have.name + "'");
        std::copy(ck.data.begin() + static_cast<std::ptrdiff_t>(have.offset),
                  ck.data.begin() + static_cast<std::ptrdiff_t>(have.offset + have.size),
                  net.ps_->param(want.offset));
    }
    return net;
}

} // namespace awnet
