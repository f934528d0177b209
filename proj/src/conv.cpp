#include "meshae/conv.hpp"

#include <algorithm>
#include <stdexcept>

namespace meshae {

Patch build_patch(const Mesh& mesh, uint32_t face, int k) {
    Patch p;
    p.center = face;
    if (k < 3) throw std::runtime_error("patch size K must be >= 3");

    std::vector<char> seen(mesh.face_count(), 0);
    seen[face] = 1;
    std::vector<uint32_t> ring(mesh.face_adjacency[face]);
    std::sort(ring.begin(), ring.end());
    while (!ring.empty() && p.members.size() < static_cast<size_t>(k)) {
        std::vector<uint32_t> next;
        for (uint32_t f : ring) {
            if (seen[f]) continue;
            seen[f] = 1;
            p.members.push_back(f);
            if (p.members.size() == static_cast<size_t>(k)) return p;
            for (uint32_t n : mesh.face_adjacency[f])
                if (!seen[n]) next.push_back(n);
        }
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end()), next.end());
        ring = std::move(next);
    }
    return p;
}

std::vector<Patch> build_patches(const Mesh& mesh, int k) {
    std::vector<Patch> out;
    out.reserve(mesh.face_count());
    for (uint32_t f = 0; f < mesh.face_count(); ++f) out.push_back(build_patch(mesh, f, k));
    return out;
}

namespace {

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

MatX mesh_conv_forward(const MatX& features, const std::vector<Patch>& patches,
                       const ConvWeights& w, ConvCache* cache) {
    const Eigen::Index f_count = features.rows();
    const Eigen::Index c_in = features.cols();
    if (w.w0.cols() != c_in) throw std::runtime_error("mesh_conv: channel mismatch");
    if (static_cast<Eigen::Index>(patches.size()) != f_count)
        throw std::runtime_error("mesh_conv: one patch per face required");

    MatX neigh_sum = MatX::Zero(f_count, c_in);
    MatX center_diff = MatX::Zero(f_count, c_in);
    MatX pair_diff = MatX::Zero(f_count, c_in);
    std::vector<std::vector<uint32_t>> sorted(f_count);

    for (Eigen::Index f = 0; f < f_count; ++f) {
        std::vector<uint32_t> mem = patches[static_cast<size_t>(f)].members;
        std::sort(mem.begin(), mem.end()); // canonical accumulation order
        for (uint32_t n : mem) {
            neigh_sum.row(f) += features.row(n);
            center_diff.row(f) += (features.row(f) - features.row(n)).cwiseAbs();
        }
        for (size_t i = 0; i < mem.size(); ++i)
            for (size_t j = i + 1; j < mem.size(); ++j)
                pair_diff.row(f) += (features.row(mem[i]) - features.row(mem[j])).cwiseAbs();
        sorted[static_cast<size_t>(f)] = std::move(mem);
    }

    MatX out = features * w.w0.transpose() + neigh_sum * w.w1.transpose() +
               center_diff * w.w2.transpose() + pair_diff * w.w3.transpose();
    if (w.bias.size() > 0) out.rowwise() += w.bias.transpose();

    if (cache) {
        cache->input = features;
        cache->neigh_sum = std::move(neigh_sum);
        cache->center_diff = std::move(center_diff);
        cache->pair_diff = std::move(pair_diff);
        cache->sorted_members = std::move(sorted);
    }
    return out;
}

void mesh_conv_backward(const ConvCache& cache, const ConvWeights& w, const MatX& upstream,
                        MatX* grad_features, ConvGrads* grad_weights) {
    const MatX& x = cache.input;
    const Eigen::Index f_count = x.rows();
    if (upstream.rows() != f_count || upstream.cols() != w.w0.rows())
        throw std::runtime_error("mesh_conv_backward: shape mismatch");

    if (grad_weights) {
        grad_weights->w0 = upstream.transpose() * x;
        grad_weights->w1 = upstream.transpose() * cache.neigh_sum;
        grad_weights->w2 = upstream.transpose() * cache.center_diff;
        grad_weights->w3 = upstream.transpose() * cache.pair_diff;
        grad_weights->bias = w.bias.size() > 0 ? VecX(upstream.colwise().sum().transpose()) : VecX();
    }

    if (!grad_features) return;

    MatX u0 = upstream * w.w0; // rows: upstream_f * W0
    MatX u1 = upstream * w.w1;
    MatX u2 = upstream * w.w2;
    MatX u3 = upstream * w.w3;

    MatX gx = std::move(u0);
    const Eigen::Index c_in = x.cols();
    Eigen::RowVectorXd delta(c_in);
    for (Eigen::Index f = 0; f < f_count; ++f) {
        const std::vector<uint32_t>& mem = cache.sorted_members[static_cast<size_t>(f)];
        for (uint32_t n : mem) {
            gx.row(n) += u1.row(f);
            for (Eigen::Index c = 0; c < c_in; ++c) {
                double s = sgn(x(f, c) - x(n, c)) * u2(f, c);
                gx(f, c) += s;
                gx(n, c) -= s;
            }
        }
        for (size_t i = 0; i < mem.size(); ++i) {
            for (size_t j = i + 1; j < mem.size(); ++j) {
                const uint32_t a = mem[i], b = mem[j];
                for (Eigen::Index c = 0; c < c_in; ++c) {
                    double s = sgn(x(a, c) - x(b, c)) * u3(f, c);
                    gx(a, c) += s;
                    gx(b, c) -= s;
                }
            }
        }
    }
    *grad_features = std::move(gx);
}

MatX w0_conv_forward(const MatX& features, const MatX& w, const VecX& bias) {
    if (w.cols() != features.cols()) throw std::runtime_error("w0_conv: channel mismatch");
    MatX out = features * w.transpose();
    if (bias.size() > 0) out.rowwise() += bias.transpose();
    return out;
}

void w0_conv_backward(const MatX& features, const MatX& w, const MatX& upstream,
                      MatX* grad_features, MatX* grad_w, VecX* grad_bias) {
    if (upstream.cols() != w.rows() || upstream.rows() != features.rows())
        throw std::runtime_error("w0_conv_backward: shape mismatch");
    if (grad_features) *grad_features = upstream * w;
    if (grad_w) *grad_w = upstream.transpose() * features;
    if (grad_bias) *grad_bias = upstream.colwise().sum().transpose();
}

} // namespace meshae
