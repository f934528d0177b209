#pragma once

#include "meshae/geometry.hpp"
#include "meshae/mesh.hpp"

#include <optional>
#include <vector>

namespace meshae {

/// Local patch around a face: up to K neighbors gathered breadth-first over
/// edge adjacency, ring by ring, each ring in ascending face-id order. The
/// center is excluded from members.
struct Patch {
    uint32_t center = 0;
    std::vector<uint32_t> members;
};

Patch build_patch(const Mesh& mesh, uint32_t face, int k);
std::vector<Patch> build_patches(const Mesh& mesh, int k);

/// Face convolution weights. All four matrices are fan_out x fan_in; bias is
/// optional (size 0 disables it).
struct ConvWeights {
    const MatX& w0;
    const MatX& w1;
    const MatX& w2;
    const MatX& w3;
    VecX bias;
};

struct ConvGrads {
    MatX w0, w1, w2, w3;
    VecX bias;
};

/// Forward caches: the aggregated patch sums, kept so backward does not
/// recompute them, plus the canonically sorted member lists.
struct ConvCache {
    MatX input;          // F x C_in
    MatX neigh_sum;      // sum of member features
    MatX center_diff;    // sum of |x_f - x_n|
    MatX pair_diff;      // sum over member pairs of |x_i - x_j|
    std::vector<std::vector<uint32_t>> sorted_members;
};

/// Conv(x_f) = W0 x_f + W1 sum_n x_n + W2 sum_n |x_f - x_n|
///           + W3 sum_{i<j} |x_i - x_j| (+ bias).
/// Sums iterate members in ascending face id regardless of the order the
/// patches list them, so the output is bitwise independent of member order.
MatX mesh_conv_forward(const MatX& features, const std::vector<Patch>& patches,
                       const ConvWeights& w, ConvCache* cache = nullptr);

/// Analytic gradients; |.| uses sign() with subgradient 0 at ties.
void mesh_conv_backward(const ConvCache& cache, const ConvWeights& w, const MatX& upstream,
                        MatX* grad_features, ConvGrads* grad_weights);

/// Per-face affine map (the W0-only layer): y_f = W x_f + bias.
MatX w0_conv_forward(const MatX& features, const MatX& w, const VecX& bias);
void w0_conv_backward(const MatX& features, const MatX& w, const MatX& upstream,
                      MatX* grad_features, MatX* grad_w, VecX* grad_bias);

} // namespace meshae
