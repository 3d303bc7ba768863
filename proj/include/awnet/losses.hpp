#pragma once

#include <span>

#include "awnet/affinity.hpp"
#include "awnet/tensor.hpp"
#include "awnet/volume.hpp"

namespace awnet {

/// Guard added to every N-Cut denominator. An empty cluster then scores a
/// zero association ratio and pays the full unit penalty.
inline constexpr double kNcutEpsilon = 1e-8;

/// SSIM stabilizers; defaults are (0.01 L)^2 and (0.03 L)^2 with dynamic
/// range L = 1 on normalized volumes.
struct SsimConstants {
    double c1 = 1e-4;
    double c2 = 9e-4;
};

/// Hard N-Cut of a labeling: K - sum_k assoc(A_k, A_k) / (assoc(A_k, V) + eps),
/// i.e. sum_k cut(A_k, V \ A_k) / assoc(A_k, V) with the epsilon guard.
/// Direct summation over the stored edges, oracle-grade.
double hard_ncut(const AffinityGraph& g, const LabelMap& labels, int k_classes);

/// Soft N-Cut value J = K - sum_k N_k / D_k with
///   N_k = sum_u p_k(u) sum_v w(u,v) p_k(v),
///   D_k = sum_u p_k(u) d(u) + eps.
/// J lies in [0, K].
double soft_ncut(const AffinityGraph& g, const Tensor& p);

/// Value plus analytic gradient with respect to every p_k(u).
double soft_ncut_grad(const AffinityGraph& g, const Tensor& p, Tensor& grad);

/// Global-statistics SSIM (product form), symmetric, equal to 1 iff the
/// inputs match. Population statistics over all voxels.
double ssim(std::span<const double> x, std::span<const double> y, const SsimConstants& c);
double ssim(const Volume& x, const Volume& y, const SsimConstants& c);

/// SSIM value plus analytic gradient with respect to y.
double ssim_grad(std::span<const double> x, std::span<const double> y,
                 const SsimConstants& c, std::span<double> grad_y);

/// 1 - SSIM(x, y): gradient-identical to -SSIM, non-negative for logging.
double reconstruction_loss(std::span<const double> x, std::span<const double> y,
                           const SsimConstants& c);
double reconstruction_loss(const Volume& x, const Volume& y, const SsimConstants& c);

/// Weighted sum of the two objectives; both weights default to 1.
inline double joint_loss(double j_ncut, double j_rec, double lambda_ncut = 1.0,
                         double lambda_rec = 1.0) {
    return lambda_ncut * j_ncut + lambda_rec * j_rec;
}

} // namespace awnet
