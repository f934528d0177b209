#pragma once

#include "meshae/geometry.hpp"
#include "meshae/rng.hpp"

#include <string>
#include <vector>

namespace meshae {

/// Triangle mesh: vertex coordinates, F x 3 face connectivity, and cached
/// edge adjacency. Immutable after construction in normal use; the pooling
/// code mutates its own working copies.
struct Mesh {
    std::vector<Vec3> vertices;
    std::vector<FaceTriple> faces;
    // face_adjacency[f] = sorted ids of faces sharing at least one edge with f.
    // Non-manifold edges (shared by >2 faces) contribute every sharer.
    std::vector<std::vector<uint32_t>> face_adjacency;

    size_t vertex_count() const { return vertices.size(); }
    size_t face_count() const { return faces.size(); }

    void rebuild_adjacency();

    /// Validates indices and face non-degeneracy, then computes adjacency.
    /// Throws std::runtime_error on out-of-range indices or repeated indices
    /// within a face.
    static Mesh create(std::vector<Vec3> vertices, std::vector<FaceTriple> faces);
};

std::vector<std::vector<uint32_t>> build_face_adjacency(const std::vector<FaceTriple>& faces,
                                                        size_t vertex_count);

/// Centers the vertex centroid at the origin and scales so the largest
/// vertex norm is exactly 1. Throws on all-identical vertices.
Mesh normalize_unit_sphere(const Mesh& mesh);

struct AugmentConfig {
    double scale_min = 0.9;
    double scale_max = 1.1;
    bool rotate = true; // uniform random 3D rotation
};

/// Random uniform scale + random rotation, deterministic for a given seed.
Mesh augment(const Mesh& mesh, uint64_t seed, const AugmentConfig& cfg = {});

} // namespace meshae
