#pragma once

#include "meshae/mesh.hpp"

namespace meshae {

/// Per-face 9D geometric features: row f = concat of the coordinates of the
/// face's three vertices, slots matching the face matrix column order.
MatX extract_geom_features(const Mesh& mesh);

/// Gradient of extract_geom_features w.r.t. the vertex coordinates.
MatX extract_geom_backward(const std::vector<FaceTriple>& faces, size_t vertex_count,
                           const MatX& grad_features);

struct ReconstructResult {
    MatX vertices;                // V x 3
    std::vector<uint32_t> counts; // contributions per vertex (3F total)
    bool has_unreferenced = false; // some vertex got no contribution (left zero)
};

/// Vertex j = mean of the slot coordinates over every (face, slot) that
/// references j, accumulated in ascending (face, slot) order. Vertices
/// referenced by no face come out zero with the warning flag set.
ReconstructResult reconstruct_vertices(const MatX& features9, const std::vector<FaceTriple>& faces,
                                       size_t vertex_count);

/// Gradient of reconstruct_vertices w.r.t. the 9D features (the map is linear).
MatX reconstruct_backward(const std::vector<FaceTriple>& faces,
                          const std::vector<uint32_t>& counts, const MatX& grad_vertices);

} // namespace meshae
