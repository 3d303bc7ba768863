#include "awnet/layers.hpp"

#include <algorithm>
#include <cmath>

namespace awnet {

// ---------------------------------------------------------------- Conv3d

Conv3d::Conv3d(ParamStore& ps, const std::string& name, int in_c, int out_c, int kernel)
    : ps_(&ps), in_c_(in_c), out_c_(out_c), kernel_(kernel) {
    if (kernel != 1 && kernel != 3)
        throw invalid_argument_error("Conv3d: kernel size must be 1 or 3");
    w_off_ = ps.add(name + ".weight", {out_c, in_c, kernel, kernel, kernel});
    b_off_ = ps.add(name + ".bias", {out_c});
}

Tensor Conv3d::forward(const Tensor& x) {
    if (x.c != in_c_)
        throw invalid_argument_error("Conv3d: input channel mismatch");
    x_ = x;
    const int D = x.d, H = x.h, W = x.w;
    Tensor out(out_c_, D, H, W);
    const double* weights = ps_->param(w_off_);
    const double* bias = ps_->param(b_off_);
    const std::size_t plane = x.spatial();

    for (int oc = 0; oc < out_c_; ++oc) {
        double* o = out.channel(oc);
        std::fill(o, o + plane, bias[oc]);
    }

    const int pad = kernel_ / 2;
    const int taps = kernel_ * kernel_ * kernel_;
    for (int oc = 0; oc < out_c_; ++oc) {
        double* o = out.channel(oc);
        for (int ic = 0; ic < in_c_; ++ic) {
            const double* in = x.channel(ic);
            const double* wk = weights + (static_cast<std::size_t>(oc) * in_c_ + ic) * taps;
            for (int kz = 0; kz < kernel_; ++kz)
                for (int ky = 0; ky < kernel_; ++ky)
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const double w = wk[(kz * kernel_ + ky) * kernel_ + kx];
                        const int dz = kz - pad, dy = ky - pad, dx = kx - pad;
                        const int z0 = std::max(0, -dz), z1 = std::min(D, D - dz);
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                        for (int z = z0; z < z1; ++z)
                            for (int y = y0; y < y1; ++y) {
                                double* orow = o + (static_cast<std::size_t>(z) * H + y) * W + x0;
                                const double* irow =
                                    in + (static_cast<std::size_t>(z + dz) * H + (y + dy)) * W + (x0 + dx);
                                const int len = x1 - x0;
                                for (int i = 0; i < len; ++i)
                                    orow[i] += w * irow[i];
                            }
                    }
        }
    }
    return out;
}

Tensor Conv3d::backward(const Tensor& grad_out) {
    if (grad_out.c != out_c_ || grad_out.d != x_.d || grad_out.h != x_.h || grad_out.w != x_.w)
        throw invalid_argument_error("Conv3d: gradient shape mismatch");
    const int D = x_.d, H = x_.h, W = x_.w;
    Tensor grad_in(in_c_, D, H, W);
    double* dw = ps_->grad(w_off_);
    double* db = ps_->grad(b_off_);
    const double* weights = ps_->param(w_off_);

    const std::size_t plane = x_.spatial();
    for (int oc = 0; oc < out_c_; ++oc) {
        const double* go = grad_out.channel(oc);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i)
            acc += go[i];
        db[oc] += acc;
    }

    const int pad = kernel_ / 2;
    const int taps = kernel_ * kernel_ * kernel_;
    for (int oc = 0; oc < out_c_; ++oc) {
        const double* go = grad_out.channel(oc);
        for (int ic = 0; ic < in_c_; ++ic) {
            const double* in = x_.channel(ic);
            double* gi = grad_in.channel(ic);
            const std::size_t wk_base = (static_cast<std::size_t>(oc) * in_c_ + ic) * taps;
            for (int kz = 0; kz < kernel_; ++kz)
                for (int ky = 0; ky < kernel_; ++ky)
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const std::size_t wi = wk_base + (kz * kernel_ + ky) * kernel_ + kx;
                        const double w = weights[wi];
                        const int dz = kz - pad, dy = ky - pad, dx = kx - pad;
                        const int z0 = std::max(0, -dz), z1 = std::min(D, D - dz);
                        const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                        double wgrad = 0.0;
                        for (int z = z0; z < z1; ++z)
                            for (int y = y0; y < y1; ++y) {
                                const double* grow = go + (static_cast<std::size_t>(z) * H + y) * W + x0;
                                const std::size_t in_base =
                                    (static_cast<std::size_t>(z + dz) * H + (y + dy)) * W + (x0 + dx);
                                const double* irow = in + in_base;
                                double* girow = gi + in_base;
                                const int len = x1 - x0;
                                for (int i = 0; i < len; ++i) {
                                    wgrad += grow[i] * irow[i];
                                    girow[i] += w * grow[i];
                                }
                            }
                        dw[wi] += wgrad;
                    }
        }
    }
    return grad_in;
}

// ----------------------------------------------------------------- PRelu

PRelu::PRelu(ParamStore& ps, const std::string& name, int channels)
    : ps_(&ps), channels_(channels) {
    a_off_ = ps.add(name + ".prelu_alpha", {channels});
}

Tensor PRelu::forward(const Tensor& x) {
    if (x.c != channels_)
        throw invalid_argument_error("PRelu: channel mismatch");
    x_ = x;
    Tensor out(x.c, x.d, x.h, x.w);
    const double* alpha = ps_->param(a_off_);
    const std::size_t plane = x.spatial();
    for (int c = 0; c < x.c; ++c) {
        const double a = alpha[c];
        const double* in = x.channel(c);
        double* o = out.channel(c);
        for (std::size_t i = 0; i < plane; ++i)
            o[i] = in[i] >= 0.0 ? in[i] : a * in[i];
    }
    return out;
}

Tensor PRelu::backward(const Tensor& grad_out) {
    Tensor grad_in(x_.c, x_.d, x_.h, x_.w);
    const double* alpha = ps_->param(a_off_);
    double* da = ps_->grad(a_off_);
    const std::size_t plane = x_.spatial();
    for (int c = 0; c < x_.c; ++c) {
        const double a = alpha[c];
        const double* in = x_.channel(c);
        const double* go = grad_out.channel(c);
        double* gi = grad_in.channel(c);
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            if (in[i] >= 0.0) {
                gi[i] = go[i];
            } else {
                gi[i] = a * go[i];
                acc += go[i] * in[i];
            }
        }
        da[c] += acc;
    }
    return grad_in;
}

// ---------------------------------------------------------- InstanceNorm

Tensor instance_norm(const Tensor& x, const double* scale, const double* shift,
                     double eps, Tensor* xhat_out, std::vector<double>* inv_std_out) {
    Tensor out(x.c, x.d, x.h, x.w);
    Tensor xhat(x.c, x.d, x.h, x.w);
    std::vector<double> inv_std(x.c);
    const std::size_t n = x.spatial();
    for (int c = 0; c < x.c; ++c) {
        const double* in = x.channel(c);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += in[i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = in[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[c] = is;
        double* xh = xhat.channel(c);
        double* o = out.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            xh[i] = (in[i] - mean) * is;
            o[i] = scale[c] * xh[i] + shift[c];
        }
    }
    if (xhat_out) *xhat_out = std::move(xhat);
    if (inv_std_out) *inv_std_out = std::move(inv_std);
    return out;
}

InstanceNorm::InstanceNorm(ParamStore& ps, const std::string& name, int channels, double eps)
    : ps_(&ps), channels_(channels), eps_(eps) {
    scale_off_ = ps.add(name + ".norm_scale", {channels});
    shift_off_ = ps.add(name + ".norm_shift", {channels});
}

Tensor InstanceNorm::forward(const Tensor& x) {
    if (x.c != channels_)
        throw invalid_argument_error("InstanceNorm: channel mismatch");
    return instance_norm(x, ps_->param(scale_off_), ps_->param(shift_off_), eps_,
                         &xhat_, &inv_std_);
}

Tensor InstanceNorm::backward(const Tensor& grad_out) {
    Tensor grad_in(xhat_.c, xhat_.d, xhat_.h, xhat_.w);
    const double* scale = ps_->param(scale_off_);
    double* dscale = ps_->grad(scale_off_);
    double* dshift = ps_->grad(shift_off_);
    const std::size_t n = xhat_.spatial();
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < xhat_.c; ++c) {
        const double* xh = xhat_.channel(c);
        const double* go = grad_out.channel(c);
        double* gi = grad_in.channel(c);
        double sum_go = 0.0, sum_go_xh = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum_go += go[i];
            sum_go_xh += go[i] * xh[i];
        }
        dshift[c] += sum_go;
        dscale[c] += sum_go_xh;
        const double k = scale[c] * inv_std_[c];
        const double mean_go = sum_go * inv_n;
        const double mean_go_xh = sum_go_xh * inv_n;
        for (std::size_t i = 0; i < n; ++i)
            gi[i] = k * (go[i] - mean_go - xh[i] * mean_go_xh);
    }
    return grad_in;
}

// --------------------------------------------------------------- MaxPool

Tensor MaxPool::forward(const Tensor& x, Dims& pre_pool_dims) {
    if (x.d < 2 || x.h < 2 || x.w < 2)
        throw invalid_argument_error("MaxPool: every spatial dim must be >= 2");
    in_dims_ = Dims{x.d, x.h, x.w};
    channels_ = x.c;
    pre_pool_dims = in_dims_;
    const int od = x.d / 2, oh = x.h / 2, ow = x.w / 2;
    Tensor out(x.c, od, oh, ow);
    argmax_.assign(out.size(), 0);
    for (int c = 0; c < x.c; ++c) {
        const double* in = x.channel(c);
        for (int z = 0; z < od; ++z)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    for (int pz = 0; pz < 2; ++pz)
                        for (int py = 0; py < 2; ++py)
                            for (int px = 0; px < 2; ++px) {
                                const std::size_t idx =
                                    (static_cast<std::size_t>(2 * z + pz) * x.h + (2 * y + py)) * x.w +
                                    (2 * xx + px);
                                if (in[idx] > best) { // ties keep the first window entry
                                    best = in[idx];
                                    best_idx = idx;
                                }
                            }
                    const std::size_t oidx = out.index(c, z, y, xx);
                    out.v[oidx] = best;
                    argmax_[oidx] = best_idx;
                }
    }
    return out;
}

Tensor MaxPool::backward(const Tensor& grad_out) {
    Tensor grad_in(channels_, in_dims_.d, in_dims_.h, in_dims_.w);
    for (int c = 0; c < channels_; ++c) {
        const double* go = grad_out.channel(c);
        double* gi = grad_in.channel(c);
        const std::size_t n_out = grad_out.spatial();
        const std::size_t* am = argmax_.data() + static_cast<std::size_t>(c) * n_out;
        for (std::size_t i = 0; i < n_out; ++i)
            gi[am[i]] += go[i];
    }
    return grad_in;
}

// ------------------------------------------------------------- trilinear

namespace {

struct AxisTaps {
    std::vector<int> i0, i1;
    std::vector<double> f;
};

// Cell-centered source coordinates: s = (t + 0.5) * in/out - 0.5, clamped.
AxisTaps axis_taps(int in, int out) {
    AxisTaps t;
    t.i0.resize(out);
    t.i1.resize(out);
    t.f.resize(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (int i = 0; i < out; ++i) {
        double s = (i + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        int i0 = static_cast<int>(s);
        if (i0 > in - 1) i0 = in - 1;
        t.i0[i] = i0;
        t.i1[i] = std::min(i0 + 1, in - 1);
        t.f[i] = s - i0;
    }
    return t;
}

} // namespace

Tensor upsample_trilinear(const Tensor& x, Dims target) {
    if (target.d < x.d || target.h < x.h || target.w < x.w)
        throw invalid_argument_error("upsample_trilinear: target smaller than input");
    if (target.d == x.d && target.h == x.h && target.w == x.w)
        return x;
    const AxisTaps tz = axis_taps(x.d, target.d);
    const AxisTaps ty = axis_taps(x.h, target.h);
    const AxisTaps tx = axis_taps(x.w, target.w);
    Tensor out(x.c, target.d, target.h, target.w);
    for (int c = 0; c < x.c; ++c) {
        const double* in = x.channel(c);
        double* o = out.channel(c);
        for (int z = 0; z < target.d; ++z) {
            const double fz = tz.f[z];
            const std::size_t z0 = static_cast<std::size_t>(tz.i0[z]) * x.h;
            const std::size_t z1 = static_cast<std::size_t>(tz.i1[z]) * x.h;
            for (int y = 0; y < target.h; ++y) {
                const double fy = ty.f[y];
                const std::size_t r00 = (z0 + ty.i0[y]) * x.w;
                const std::size_t r01 = (z0 + ty.i1[y]) * x.w;
                const std::size_t r10 = (z1 + ty.i0[y]) * x.w;
                const std::size_t r11 = (z1 + ty.i1[y]) * x.w;
                double* orow = o + (static_cast<std::size_t>(z) * target.h + y) * target.w;
                for (int xx = 0; xx < target.w; ++xx) {
                    const double fx = tx.f[xx];
                    const int x0 = tx.i0[xx], x1i = tx.i1[xx];
                    const double v00 = in[r00 + x0] * (1 - fx) + in[r00 + x1i] * fx;
                    const double v01 = in[r01 + x0] * (1 - fx) + in[r01 + x1i] * fx;
                    const double v10 = in[r10 + x0] * (1 - fx) + in[r10 + x1i] * fx;
                    const double v11 = in[r11 + x0] * (1 - fx) + in[r11 + x1i] * fx;
                    orow[xx] = (v00 * (1 - fy) + v01 * fy) * (1 - fz) +
                               (v10 * (1 - fy) + v11 * fy) * fz;
                }
            }
        }
    }
    return out;
}

Tensor upsample_trilinear_backward(const Tensor& grad_out, Dims source) {
    if (source.d == grad_out.d && source.h == grad_out.h && source.w == grad_out.w)
        return grad_out;
    const AxisTaps tz = axis_taps(source.d, grad_out.d);
    const AxisTaps ty = axis_taps(source.h, grad_out.h);
    const AxisTaps tx = axis_taps(source.w, grad_out.w);
    Tensor grad_in(grad_out.c, source.d, source.h, source.w);
    for (int c = 0; c < grad_out.c; ++c) {
        const double* go = grad_out.channel(c);
        double* gi = grad_in.channel(c);
        for (int z = 0; z < grad_out.d; ++z) {
            const double fz = tz.f[z];
            const std::size_t z0 = static_cast<std::size_t>(tz.i0[z]) * source.h;
            const std::size_t z1 = static_cast<std::size_t>(tz.i1[z]) * source.h;
            for (int y = 0; y < grad_out.h; ++y) {
                const double fy = ty.f[y];
                const std::size_t r00 = (z0 + ty.i0[y]) * source.w;
                const std::size_t r01 = (z0 + ty.i1[y]) * source.w;
                const std::size_t r10 = (z1 + ty.i0[y]) * source.w;
                const std::size_t r11 = (z1 + ty.i1[y]) * source.w;
                const double* grow = go + (static_cast<std::size_t>(z) * grad_out.h + y) * grad_out.w;
                for (int xx = 0; xx < grad_out.w; ++xx) {
                    const double fx = tx.f[xx];
                    const int x0 = tx.i0[xx], x1i = tx.i1[xx];
                    const double g = grow[xx];
                    const double g00 = g * (1 - fz) * (1 - fy);
                    const double g01 = g * (1 - fz) * fy;
                    const double g10 = g * fz * (1 - fy);
                    const double g11 = g * fz * fy;
                    gi[r00 + x0] += g00 * (1 - fx);
                    gi[r00 + x1i] += g00 * fx;
                    gi[r01 + x0] += g01 * (1 - fx);
                    gi[r01 + x1i] += g01 * fx;
                    gi[r10 + x0] += g10 * (1 - fx);
                    gi[r10 + x1i] += g10 * fx;
                    gi[r11 + x0] += g11 * (1 - fx);
                    gi[r11 + x1i] += g11 * fx;
                }
            }
        }
    }
    return grad_in;
}

// --------------------------------------------------------- AttentionGate

AttentionGate::AttentionGate(ParamStore& ps, const std::string& name, int x_channels,
                             int g_channels)
    : ps_(&ps), cx_(x_channels), cg_(g_channels),
      fint_(std::max(1, x_channels / 2)) {
    wx_off_ = ps.add(name + ".w_x", {fint_, cx_});
    wg_off_ = ps.add(name + ".w_g", {fint_, cg_});
    bg_off_ = ps.add(name + ".b_g", {fint_});
    psi_off_ = ps.add(name + ".psi", {fint_});
    bpsi_off_ = ps.add(name + ".b_psi", {1});
}

Tensor AttentionGate::forward(const Tensor& x, const Tensor& g) {
    if (x.c != cx_ || g.c != cg_)
        throw invalid_argument_error("AttentionGate: channel mismatch");
    // The gating grid must be reachable from x's grid by stride-2 sampling.
    if (2 * (g.d - 1) > x.d - 1 || 2 * (g.h - 1) > x.h - 1 || 2 * (g.w - 1) > x.w - 1)
        throw invalid_argument_error("AttentionGate: incompatible grids");
    x_ = x;
    g_ = g;
    const double* wx = ps_->param(wx_off_);
    const double* wg = ps_->param(wg_off_);
    const double* bg = ps_->param(bg_off_);
    const double* psi = ps_->param(psi_off_);
    const double bpsi = *ps_->param(bpsi_off_);

    q_pre_ = Tensor(fint_, g.d, g.h, g.w);
    for (int fi = 0; fi < fint_; ++fi) {
        double* q = q_pre_.channel(fi);
        const std::size_t ng = g.spatial();
        for (std::size_t i = 0; i < ng; ++i)
            q[i] = bg[fi];
        for (int cg = 0; cg < cg_; ++cg) {
            const double w = wg[static_cast<std::size_t>(fi) * cg_ + cg];
            const double* gc = g.channel(cg);
            for (std::size_t i = 0; i < ng; ++i)
                q[i] += w * gc[i];
        }
        for (int ci = 0; ci < cx_; ++ci) {
            const double w = wx[static_cast<std::size_t>(fi) * cx_ + ci];
            const double* xc = x.channel(ci);
            for (int z = 0; z < g.d; ++z)
                for (int y = 0; y < g.h; ++y)
                    for (int xx = 0; xx < g.w; ++xx)
                        q[(static_cast<std::size_t>(z) * g.h + y) * g.w + xx] +=
                            w * xc[(static_cast<std::size_t>(2 * z) * x.h + 2 * y) * x.w + 2 * xx];
        }
    }

    alpha_g_ = Tensor(1, g.d, g.h, g.w);
    {
        double* a = alpha_g_.channel(0);
        const std::size_t ng = g.spatial();
        for (std::size_t i = 0; i < ng; ++i) {
            double logit = bpsi;
            for (int fi = 0; fi < fint_; ++fi) {
                const double q = q_pre_.v[static_cast<std::size_t>(fi) * ng + i];
                logit += psi[fi] * (q > 0.0 ? q : 0.0);
            }
            a[i] = 1.0 / (1.0 + std::exp(-logit));
        }
    }

    alpha_x_ = upsample_trilinear(alpha_g_, Dims{x.d, x.h, x.w});

    Tensor out(x.c, x.d, x.h, x.w);
    const double* a = alpha_x_.channel(0);
    const std::size_t nx = x.spatial();
    for (int ci = 0; ci < cx_; ++ci) {
        const double* xc = x.channel(ci);
        double* o = out.channel(ci);
        for (std::size_t i = 0; i < nx; ++i)
            o[i] = a[i] * xc[i];
    }
    return out;
}

std::pair<Tensor, Tensor> AttentionGate::backward(const Tensor& grad_out) {
    const std::size_t nx = x_.spatial();
    const std::size_t ng = g_.spatial();
    const double* a_x = alpha_x_.channel(0);

    Tensor grad_x(x_.c, x_.d, x_.h, x_.w);
    Tensor d_alpha_x(1, x_.d, x_.h, x_.w);
    {
        double* da = d_alpha_x.channel(0);
        for (int ci = 0; ci < cx_; ++ci) {
            const double* go = grad_out.channel(ci);
            const double* xc = x_.channel(ci);
            double* gx = grad_x.channel(ci);
            for (std::size_t i = 0; i < nx; ++i) {
                gx[i] = go[i] * a_x[i];
                da[i] += go[i] * xc[i];
            }
        }
    }

    Tensor d_alpha_g = upsample_trilinear_backward(d_alpha_x, Dims{g_.d, g_.h, g_.w});

    // Through the sigmoid and the psi squeeze.
    const double* psi = ps_->param(psi_off_);
    double* dpsi = ps_->grad(psi_off_);
    double* dbpsi = ps_->grad(bpsi_off_);
    const double* a_g = alpha_g_.channel(0);
    Tensor d_q_pre(fint_, g_.d, g_.h, g_.w);
    {
        const double* dag = d_alpha_g.channel(0);
        for (std::size_t i = 0; i < ng; ++i) {
            const double dlogit = dag[i] * a_g[i] * (1.0 - a_g[i]);
            *dbpsi += dlogit;
            for (int fi = 0; fi < fint_; ++fi) {
                const std::size_t qi = static_cast<std::size_t>(fi) * ng + i;
                const double q = q_pre_.v[qi];
                if (q > 0.0)
                    dpsi[fi] += dlogit * q;
                // ReLU gate: only positive pre-activations pass gradient.
                d_q_pre.v[qi] = q > 0.0 ? psi[fi] * dlogit : 0.0;
            }
        }
    }

    const double* wx = ps_->param(wx_off_);
    const double* wg = ps_->param(wg_off_);
    double* dwx = ps_->grad(wx_off_);
    double* dwg = ps_->grad(wg_off_);
    double* dbg = ps_->grad(bg_off_);
    Tensor grad_g(g_.c, g_.d, g_.h, g_.w);

    for (int fi = 0; fi < fint_; ++fi) {
        const double* dq = d_q_pre.channel(fi);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < ng; ++i)
            acc_b += dq[i];
        dbg[fi] += acc_b;
        for (int cg = 0; cg < cg_; ++cg) {
            const double* gc = g_.channel(cg);
            double* ggc = grad_g.channel(cg);
            const double w = wg[static_cast<std::size_t>(fi) * cg_ + cg];
            double acc_w = 0.0;
            for (std::size_t i = 0; i < ng; ++i) {
                acc_w += dq[i] * gc[i];
                ggc[i] += w * dq[i];
            }
            dwg[static_cast<std::size_t>(fi) * cg_ + cg] += acc_w;
        }
        for (int ci = 0; ci < cx_; ++ci) {
            const double* xc = x_.channel(ci);
            double* gxc = grad_x.channel(ci);
            const double w = wx[static_cast<std::size_t>(fi) * cx_ + ci];
            double acc_w = 0.0;
            for (int z = 0; z < g_.d; ++z)
                for (int y = 0; y < g_.h; ++y)
                    for (int xx = 0; xx < g_.w; ++xx) {
                        const std::size_t gi = (static_cast<std::size_t>(z) * g_.h + y) * g_.w + xx;
                        const std::size_t xi =
                            (static_cast<std::size_t>(2 * z) * x_.h + 2 * y) * x_.w + 2 * xx;
                        acc_w += dq[gi] * xc[xi];
                        gxc[xi] += w * dq[gi];
                    }
            dwx[static_cast<std::size_t>(fi) * cx_ + ci] += acc_w;
        }
    }
    return {std::move(grad_x), std::move(grad_g)};
}

// ------------------------------------------------------------ ConvModule

ConvModule::ConvModule(ParamStore& ps, const std::string& name, int in_c, int out_c,
                       int kernel)
    : conv1_(ps, name + ".conv1", in_c, out_c, kernel),
      act1_(ps, name + ".conv1", out_c),
      norm1_(ps, name + ".conv1", out_c),
      conv2_(ps, name + ".conv2", out_c, out_c, kernel),
      act2_(ps, name + ".conv2", out_c),
      norm2_(ps, name + ".conv2", out_c) {}

Tensor ConvModule::forward(const Tensor& x) {
    Tensor h = norm1_.forward(act1_.forward(conv1_.forward(x)));
    return norm2_.forward(act2_.forward(conv2_.forward(h)));
}

Tensor ConvModule::backward(const Tensor& grad_out) {
    Tensor g = conv2_.backward(act2_.backward(norm2_.backward(grad_out)));
    return conv1_.backward(act1_.backward(norm1_.backward(g)));
}

// ------------------------------------------------------------ activations

Tensor softmax_channels(const Tensor& z) {
    Tensor out(z.c, z.d, z.h, z.w);
    const std::size_t n = z.spatial();
    for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < z.c; ++c)
            m = std::max(m, z.v[static_cast<std::size_t>(c) * n + i]);
        double sum = 0.0;
        for (int c = 0; c < z.c; ++c) {
            const double e = std::exp(z.v[static_cast<std::size_t>(c) * n + i] - m);
            out.v[static_cast<std::size_t>(c) * n + i] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < z.c; ++c)
            out.v[static_cast<std::size_t>(c) * n + i] *= inv;
    }
    return out;
}

Tensor softmax_channels_backward(const Tensor& out, const Tensor& grad_out) {
    Tensor grad_in(out.c, out.d, out.h, out.w);
    const std::size_t n = out.spatial();
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int c = 0; c < out.c; ++c) {
            const std::size_t idx = static_cast<std::size_t>(c) * n + i;
            dot += grad_out.v[idx] * out.v[idx];
        }
        for (int c = 0; c < out.c; ++c) {
            const std::size_t idx = static_cast<std::size_t>(c) * n + i;
            grad_in.v[idx] = out.v[idx] * (grad_out.v[idx] - dot);
        }
    }
    return grad_in;
}

Tensor sigmoid(const Tensor& z) {
    Tensor out(z.c, z.d, z.h, z.w);
    for (std::size_t i = 0; i < z.size(); ++i)
        out.v[i] = 1.0 / (1.0 + std::exp(-z.v[i]));
    return out;
}

Tensor sigmoid_backward(const Tensor& out, const Tensor& grad_out) {
    Tensor grad_in(out.c, out.d, out.h, out.w);
    for (std::size_t i = 0; i < out.size(); ++i)
        grad_in.v[i] = grad_out.v[i] * out.v[i] * (1.0 - out.v[i]);
    return grad_in;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.d != b.d || a.h != b.h || a.w != b.w)
        throw invalid_argument_error("concat_channels: spatial dims mismatch");
    Tensor out(a.c + b.c, a.d, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& g, int a_channels) {
    Tensor a(a_channels, g.d, g.h, g.w);
    Tensor b(g.c - a_channels, g.d, g.h, g.w);
    std::copy(g.v.begin(), g.v.begin() + static_cast<std::ptrdiff_t>(a.size()), a.v.begin());
    std::copy(g.v.begin() + static_cast<std::ptrdiff_t>(a.size()), g.v.end(), b.v.begin());
    return {std::move(a), std::move(b)};
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw invalid_argument_error("add_inplace: shape mismatch");
    for (std::size_t i = 0; i < a.size(); ++i)
        a.v[i] += b.v[i];
}

} // namespace awnet
