#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <vector>

namespace meshae {

using Vec3 = Eigen::Vector3d;

// Per-face feature matrices are row-per-face; row-major keeps a face's
// channels contiguous.
using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VecX = Eigen::VectorXd;

using FaceTriple = std::array<uint32_t, 3>;

inline MatX vertices_to_matrix(const std::vector<Vec3>& v) {
    MatX m(static_cast<Eigen::Index>(v.size()), 3);
    for (size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
    return m;
}

inline std::vector<Vec3> matrix_to_vertices(const MatX& m) {
    std::vector<Vec3> v(static_cast<size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<size_t>(i)] = m.row(i).transpose();
    return v;
}

// Round through f32. Learnable state is kept on the f32 grid so the
// checkpoint's f32 payload round-trips bit-exactly.
inline double to_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

inline void quantize_f32_matrix(MatX& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_f32(m.data()[i]);
}

} // namespace meshae
