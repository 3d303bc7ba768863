#pragma once

#include "awnet/tensor.hpp"
#include "awnet/volume.hpp"

namespace awnet {

/// Mean-field parameters. The pairwise kernel is the standard dense-CRF
/// pair: a Gaussian smoothness term plus an appearance term that couples
/// spatial and intensity distance,
///   k(u,v) = w_smooth exp(-|Xu-Xv|^2 / (2 theta_gamma^2))
///          + w_appear exp(-|Xu-Xv|^2 / (2 theta_alpha^2)
///                         - (Iu-Iv)^2  / (2 theta_beta^2)),
/// truncated beyond `truncation_radius` voxels (Euclidean).
struct CRFParams {
    int iterations = 5;
    double w_smooth = 3.0;
    double theta_gamma = 3.0;
    double w_appear = 10.0;
    double theta_alpha = 8.0;
    double theta_beta = 0.1;
    int truncation_radius = 8;
    double epsilon = 1e-8; // unary log guard
};

/// Mean-field refinement of a soft assignment. Unaries are
/// phi_u(k) = -log(P0_k(u) + epsilon); compatibility is Potts; updates are
/// parallel (synchronous) per iteration and renormalized per voxel.
Tensor mean_field(const Tensor& p0, const Volume& v, const CRFParams& p);

/// Per-voxel argmax decoding; ties go to the lowest class index.
LabelMap map_labels(const Tensor& q);

} // namespace awnet
