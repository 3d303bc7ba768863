#include "awnet/crf.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace awnet {

namespace {

void validate(const Tensor& p0, const Volume& v, const CRFParams& p) {
    if (p0.d != v.dims.d || p0.h != v.dims.h || p0.w != v.dims.w)
        throw invalid_argument_error("mean_field: assignment and volume dims mismatch");
    if (p0.c < 1)
        throw invalid_argument_error("mean_field: need at least one class");
    if (p.iterations < 1)
        throw invalid_argument_error("mean_field: iterations must be >= 1");
    if (p.theta_gamma <= 0 || p.theta_alpha <= 0 || p.theta_beta <= 0)
        throw invalid_argument_error("mean_field: bandwidths must be > 0");
    if (p.truncation_radius < 1)
        throw invalid_argument_error("mean_field: truncation_radius must be >= 1");
    if (p.epsilon < 0)
        throw invalid_argument_error("mean_field: epsilon must be >= 0");
}

} // namespace

Tensor mean_field(const Tensor& p0, const Volume& v, const CRFParams& p) {
    validate(p0, v, p);
    const int K = p0.c;
    const int D = p0.d, H = p0.h, W = p0.w;
    const std::size_t n = p0.spatial();

    // Unaries; an exact zero in P0 with epsilon = 0 is a contract violation.
    Tensor phi(K, D, H, W);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        phi.v[i] = -std::log(p0.v[i] + p.epsilon);
        if (!std::isfinite(phi.v[i]))
            throw invalid_argument_error(
                "mean_field: non-finite unary potential (zero probability with epsilon 0?)");
    }

    // Spatial kernel factors per offset; only the intensity part of the
    // appearance kernel varies along the volume.
    struct Offset {
        int dz, dy, dx;
        double smooth;        // w_smooth * exp(-d^2 / (2 theta_gamma^2))
        double appear_space;  // w_appear * exp(-d^2 / (2 theta_alpha^2))
    };
    std::vector<Offset> offsets;
    const int r = p.truncation_radius;
    const double r2 = static_cast<double>(r) * r;
    for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (dz == 0 && dy == 0 && dx == 0)
                    continue;
                const double d2 = double(dz) * dz + double(dy) * dy + double(dx) * dx;
                if (d2 > r2)
                    continue;
                offsets.push_back(
                    {dz, dy, dx,
                     p.w_smooth * std::exp(-d2 / (2.0 * p.theta_gamma * p.theta_gamma)),
                     p.w_appear * std::exp(-d2 / (2.0 * p.theta_alpha * p.theta_alpha))});
            }
    const double inv_2tb2 = 1.0 / (2.0 * p.theta_beta * p.theta_beta);
    const bool no_pairwise = p.w_smooth == 0.0 && p.w_appear == 0.0;

    // Initialize Q from the unaries alone (= renormalized P0 + epsilon).
    Tensor q_cur(K, D, H, W);
    for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k)
            m = std::min(m, phi.v[static_cast<std::size_t>(k) * n + i]);
        double sum = 0.0;
        for (int k = 0; k < K; ++k) {
            const double e = std::exp(-(phi.v[static_cast<std::size_t>(k) * n + i] - m));
            q_cur.v[static_cast<std::size_t>(k) * n + i] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int k = 0; k < K; ++k)
            q_cur.v[static_cast<std::size_t>(k) * n + i] *= inv;
    }

    Tensor q_next(K, D, H, W);
    std::vector<double> message(K);
    for (int it = 0; it < p.iterations; ++it) {
        for (int z = 0; z < D; ++z)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const std::size_t u = (static_cast<std::size_t>(z) * H + y) * W + x;
                    for (int k = 0; k < K; ++k)
                        message[k] = 0.0;
                    if (!no_pairwise) {
                        const double iu = v.data[u];
                        for (const auto& o : offsets) {
                            const int zz = z + o.dz, yy = y + o.dy, xx = x + o.dx;
                            if (zz < 0 || zz >= D || yy < 0 || yy >= H || xx < 0 || xx >= W)
                                continue;
                            const std::size_t vv = (static_cast<std::size_t>(zz) * H + yy) * W + xx;
                            const double di = iu - v.data[vv];
                            const double kern = o.smooth + o.appear_space * std::exp(-di * di * inv_2tb2);
                            // Potts: each class pays the kernel mass of disagreeing neighbors.
                            for (int k = 0; k < K; ++k)
                                message[k] += kern * (1.0 - q_cur.v[static_cast<std::size_t>(k) * n + vv]);
                        }
                    }
                    double best = std::numeric_limits<double>::infinity();
                    for (int k = 0; k < K; ++k) {
                        const double energy = phi.v[static_cast<std::size_t>(k) * n + u] + message[k];
                        message[k] = energy;
                        best = std::min(best, energy);
                    }
                    double sum = 0.0;
                    for (int k = 0; k < K; ++k) {
                        const double e = std::exp(-(message[k] - best));
                        q_next.v[static_cast<std::size_t>(k) * n + u] = e;
                        sum += e;
                    }
                    const double inv = 1.0 / sum;
                    for (int k = 0; k < K; ++k)
                        q_next.v[static_cast<std::size_t>(k) * n + u] *= inv;
                }
        std::swap(q_cur, q_next);
    }
    return q_cur;
}

LabelMap map_labels(const Tensor& q) {
    LabelMap out(Dims{q.d, q.h, q.w});
    const std::size_t n = q.spatial();
    for (std::size_t i = 0; i < n; ++i) {
        int best_k = 0;
        double best = q.v[i];
        for (int k = 1; k < q.c; ++k) {
            const double val = q.v[static_cast<std::size_t>(k) * n + i];
            if (val > best) { // strict: ties keep the lowest class
                best = val;
                best_k = k;
            }
        }
        out.labels[i] = static_cast<std::uint8_t>(best_k);
    }
    return out;
}

} // namespace awnet
