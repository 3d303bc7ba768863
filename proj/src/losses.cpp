#include "awnet/losses.hpp"

#include <cmath>
#include <cstddef>

namespace awnet {

double hard_ncut(const AffinityGraph& g, const LabelMap& labels, int k_classes) {
    if (labels.labels.size() != g.n)
        throw invalid_argument_error("hard_ncut: label map does not match graph size");
    if (k_classes < 1)
        throw invalid_argument_error("hard_ncut: need at least one class");
    for (auto l : labels.labels)
        if (l >= k_classes)
            throw invalid_argument_error("hard_ncut: label >= K");

    // assoc(A_k, A_k) over stored undirected edges counts each ordered pair
    // twice; assoc(A_k, V) is the degree sum over the cluster.
    std::vector<double> within(static_cast<std::size_t>(k_classes), 0.0);
    std::vector<double> total(static_cast<std::size_t>(k_classes), 0.0);
    for (const auto& e : g.edges) {
        if (labels.labels[e.u] == labels.labels[e.v])
            within[labels.labels[e.u]] += 2.0 * e.w;
    }
    for (std::size_t u = 0; u < g.n; ++u)
        total[labels.labels[u]] += g.degree_sums[u];

    double sum_ratios = 0.0;
    for (int k = 0; k < k_classes; ++k)
        sum_ratios += within[k] / (total[k] + kNcutEpsilon);
    return k_classes - sum_ratios;
}

namespace {

struct NcutTerms {
    std::vector<double> s;      // s_k(u) = sum_v w(u,v) p_k(v), flattened [k][u]
    std::vector<double> num;    // N_k
    std::vector<double> den;    // D_k (epsilon included)
};

NcutTerms ncut_terms(const AffinityGraph& g, const Tensor& p) {
    if (p.spatial() != g.n)
        throw invalid_argument_error("soft_ncut: assignment does not match graph size");
    const int K = p.c;
    const std::size_t n = g.n;
    NcutTerms t;
    t.s.assign(static_cast<std::size_t>(K) * n, 0.0);
    t.num.assign(K, 0.0);
    t.den.assign(K, kNcutEpsilon);

    for (int k = 0; k < K; ++k) {
        const double* pk = p.channel(k);
        double* sk = t.s.data() + static_cast<std::size_t>(k) * n;
        for (const auto& e : g.edges) {
            sk[e.u] += e.w * pk[e.v];
            sk[e.v] += e.w * pk[e.u];
        }
        double num = 0.0, den = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            num += pk[u] * sk[u];
            den += pk[u] * g.degree_sums[u];
        }
        t.num[k] = num;
        t.den[k] += den;
    }
    return t;
}

} // namespace

double soft_ncut(const AffinityGraph& g, const Tensor& p) {
    const NcutTerms t = ncut_terms(g, p);
    double j = p.c;
    for (int k = 0; k < p.c; ++k)
        j -= t.num[k] / t.den[k];
    return j;
}

double soft_ncut_grad(const AffinityGraph& g, const Tensor& p, Tensor& grad) {
    const NcutTerms t = ncut_terms(g, p);
    if (!grad.same_shape(p))
        grad = Tensor(p.c, p.d, p.h, p.w);
    const std::size_t n = g.n;
    double j = p.c;
    for (int k = 0; k < p.c; ++k) {
        const double ratio = t.num[k] / t.den[k];
        j -= ratio;
        const double* sk = t.s.data() + static_cast<std::size_t>(k) * n;
        double* gk = grad.channel(k);
        // d/dp_k(u) [N_k/D_k] = (2 s_k(u) D_k - N_k d(u)) / D_k^2; J subtracts it.
        const double inv_den = 1.0 / t.den[k];
        for (std::size_t u = 0; u < n; ++u)
            gk[u] = -(2.0 * sk[u] - ratio * g.degree_sums[u]) * inv_den;
    }
    return j;
}

namespace {

struct SsimStats {
    double mu_x, mu_y, var_x, var_y, cov;
    double a1, a2, b1, b2; // (2 mu_x mu_y + c1), (2 cov + c2), (mu^2 sums + c1), (var sums + c2)
};

SsimStats ssim_stats(std::span<const double> x, std::span<const double> y,
                     const SsimConstants& c) {
    if (x.size() != y.size() || x.empty())
        throw invalid_argument_error("ssim: inputs must be non-empty and of equal size");
    if (c.c1 <= 0 || c.c2 <= 0)
        throw invalid_argument_error("ssim: stabilizers must be > 0");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    SsimStats s{};
    s.mu_x = sx / n;
    s.mu_y = sy / n;
    double vx = 0, vy = 0, cov = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - s.mu_x;
        const double dy = y[i] - s.mu_y;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    s.var_x = vx / n;
    s.var_y = vy / n;
    s.cov = cov / n;
    s.a1 = 2.0 * s.mu_x * s.mu_y + c.c1;
    s.a2 = 2.0 * s.cov + c.c2;
    s.b1 = s.mu_x * s.mu_x + s.mu_y * s.mu_y + c.c1;
    s.b2 = s.var_x + s.var_y + c.c2;
    return s;
}

} // namespace

double ssim(std::span<const double> x, std::span<const double> y, const SsimConstants& c) {
    const SsimStats s = ssim_stats(x, y, c);
    return (s.a1 * s.a2) / (s.b1 * s.b2);
}

double ssim(const Volume& x, const Volume& y, const SsimConstants& c) {
    if (!(x.dims == y.dims))
        throw invalid_argument_error("ssim: volume dims mismatch");
    std::vector<double> xd(x.data.begin(), x.data.end());
    std::vector<double> yd(y.data.begin(), y.data.end());
    return ssim(std::span<const double>(xd), std::span<const double>(yd), c);
}

double ssim_grad(std::span<const double> x, std::span<const double> y,
                 const SsimConstants& c, std::span<double> grad_y) {
    const SsimStats s = ssim_stats(x, y, c);
    if (grad_y.size() != y.size())
        throw invalid_argument_error("ssim_grad: gradient span size mismatch");
    const double n = static_cast<double>(x.size());
    const double val = (s.a1 * s.a2) / (s.b1 * s.b2);
    // d mu_y / dy_i = 1/n, d var_y / dy_i = 2 (y_i - mu_y)/n,
    // d cov / dy_i = (x_i - mu_x)/n.
    const double d_a1 = 2.0 * s.mu_x / n;
    const double d_b1 = 2.0 * s.mu_y / n;
    const double denom = s.b1 * s.b2;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d_a2 = 2.0 * (x[i] - s.mu_x) / n;
        const double d_b2 = 2.0 * (y[i] - s.mu_y) / n;
        grad_y[i] = (d_a1 * s.a2 + s.a1 * d_a2) / denom -
                    val * (d_b1 / s.b1 + d_b2 / s.b2);
    }
    return val;
}

double reconstruction_loss(std::span<const double> x, std::span<const double> y,
                           const SsimConstants& c) {
    return 1.0 - ssim(x, y, c);
}

double reconstruction_loss(const Volume& x, const Volume& y, const SsimConstants& c) {
    return 1.0 - ssim(x, y, c);
}

} // namespace awnet
