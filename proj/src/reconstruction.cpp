#include "meshae/reconstruction.hpp"

#include <stdexcept>

namespace meshae {

MatX extract_geom_features(const Mesh& mesh) {
    MatX out(static_cast<Eigen::Index>(mesh.face_count()), 9);
    for (size_t f = 0; f < mesh.face_count(); ++f)
        for (int k = 0; k < 3; ++k)
            out.block<1, 3>(static_cast<Eigen::Index>(f), 3 * k) =
                mesh.vertices[mesh.faces[f][k]].transpose();
    return out;
}

MatX extract_geom_backward(const std::vector<FaceTriple>& faces, size_t vertex_count,
                           const MatX& grad_features) {
    if (grad_features.rows() != static_cast<Eigen::Index>(faces.size()) || grad_features.cols() != 9)
        throw std::runtime_error("extract_geom_backward: shape mismatch");
    MatX gv = MatX::Zero(static_cast<Eigen::Index>(vertex_count), 3);
    for (size_t f = 0; f < faces.size(); ++f)
        for (int k = 0; k < 3; ++k)
            gv.row(faces[f][k]) += grad_features.block<1, 3>(static_cast<Eigen::Index>(f), 3 * k);
    return gv;
}

ReconstructResult reconstruct_vertices(const MatX& features9, const std::vector<FaceTriple>& faces,
                                       size_t vertex_count) {
    if (features9.rows() != static_cast<Eigen::Index>(faces.size()) || features9.cols() != 9)
        throw std::runtime_error("reconstruct_vertices: expected F x 9 features");
    ReconstructResult r;
    r.vertices = MatX::Zero(static_cast<Eigen::Index>(vertex_count), 3);
    r.counts.assign(vertex_count, 0);
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            uint32_t j = faces[f][k];
            if (j >= vertex_count) throw std::runtime_error("reconstruct_vertices: index out of range");
            r.vertices.row(j) += features9.block<1, 3>(static_cast<Eigen::Index>(f), 3 * k);
            r.counts[j]++;
        }
    }
    for (size_t j = 0; j < vertex_count; ++j) {
        if (r.counts[j] > 0)
            r.vertices.row(static_cast<Eigen::Index>(j)) /= static_cast<double>(r.counts[j]);
        else
            r.has_unreferenced = true;
    }
    return r;
}

MatX reconstruct_backward(const std::vector<FaceTriple>& faces,
                          const std::vector<uint32_t>& counts, const MatX& grad_vertices) {
    MatX gf = MatX::Zero(static_cast<Eigen::Index>(faces.size()), 9);
    for (size_t f = 0; f < faces.size(); ++f) {
        for (int k = 0; k < 3; ++k) {
            uint32_t j = faces[f][k];
            gf.block<1, 3>(static_cast<Eigen::Index>(f), 3 * k) =
                grad_vertices.row(j) / static_cast<double>(counts[j]);
        }
    }
    return gf;
}

} // namespace meshae
