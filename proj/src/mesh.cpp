#include "meshae/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace meshae {

std::vector<std::vector<uint32_t>> build_face_adjacency(const std::vector<FaceTriple>& faces,
                                                        size_t /*vertex_count*/) {
    // Sort-based edge grouping: one entry per (edge, face) incidence.
    struct EdgeRef {
        uint32_t a, b, face;
    };
    std::vector<EdgeRef> refs;
    refs.reserve(faces.size() * 3);
    for (uint32_t f = 0; f < faces.size(); ++f) {
        const FaceTriple& t = faces[f];
        for (int k = 0; k < 3; ++k) {
            uint32_t u = t[k], v = t[(k + 1) % 3];
            refs.push_back({std::min(u, v), std::max(u, v), f});
        }
    }
    std::sort(refs.begin(), refs.end(), [](const EdgeRef& x, const EdgeRef& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.b != y.b) return x.b < y.b;
        return x.face < y.face;
    });

    std::vector<std::vector<uint32_t>> adj(faces.size());
    size_t i = 0;
    while (i < refs.size()) {
        size_t j = i;
        while (j < refs.size() && refs[j].a == refs[i].a && refs[j].b == refs[i].b) ++j;
        for (size_t p = i; p < j; ++p)
            for (size_t q = i; q < j; ++q)
                if (p != q) adj[refs[p].face].push_back(refs[q].face);
        i = j;
    }
    for (auto& lst : adj) {
        std::sort(lst.begin(), lst.end());
        lst.erase(std::unique(lst.begin(), lst.end()), lst.end());
    }
    return adj;
}

void Mesh::rebuild_adjacency() { face_adjacency = build_face_adjacency(faces, vertices.size()); }

Mesh Mesh::create(std::vector<Vec3> vertices, std::vector<FaceTriple> faces) {
    for (size_t f = 0; f < faces.size(); ++f) {
        const FaceTriple& t = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (t[k] >= vertices.size())
                throw std::runtime_error("face " + std::to_string(f) + ": out-of-range index " +
                                         std::to_string(t[k]));
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw std::runtime_error("face " + std::to_string(f) + ": degenerate (repeated vertex index)");
    }
    Mesh m;
    m.vertices = std::move(vertices);
    m.faces = std::move(faces);
    m.rebuild_adjacency();
    return m;
}

Mesh normalize_unit_sphere(const Mesh& mesh) {
    if (mesh.vertices.empty()) throw std::runtime_error("normalize: empty mesh");
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : mesh.vertices) centroid += v;
    centroid /= static_cast<double>(mesh.vertices.size());

    double max_norm = 0.0;
    for (const Vec3& v : mesh.vertices) max_norm = std::max(max_norm, (v - centroid).norm());
    if (max_norm == 0.0) throw std::runtime_error("normalize: degenerate geometry (all vertices identical)");

    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = (v - centroid) / max_norm;
    return out;
}

Mesh augment(const Mesh& mesh, uint64_t seed, const AugmentConfig& cfg) {
    Rng rng(seed);
    double scale = rng.uniform(cfg.scale_min, cfg.scale_max);

    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    if (cfg.rotate) {
        // Uniform rotation from a normalized 4D gaussian quaternion.
        double q0 = rng.gaussian(), q1 = rng.gaussian(), q2 = rng.gaussian(), q3 = rng.gaussian();
        double n = std::sqrt(q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3);
        if (n == 0.0) n = 1.0;
        Eigen::Quaterniond q(q0 / n, q1 / n, q2 / n, q3 / n);
        rot = q.toRotationMatrix();
    }

    Mesh out = mesh;
    for (Vec3& v : out.vertices) v = rot * (scale * v);
    return out;
}

} // namespace meshae
