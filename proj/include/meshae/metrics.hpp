#pragma once

#include "meshae/mesh.hpp"

#include <string>
#include <vector>

namespace meshae {

/// Uniform-grid accelerated exact nearest neighbor over a fixed point set.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& points);

    struct Hit {
        size_t index;
        double dist_sq;
    };
    Hit nearest(const Vec3& query) const;

private:
    std::vector<Vec3> points_;
    Vec3 lo_;
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<std::vector<uint32_t>> cells_;

    size_t cell_index(int ix, int iy, int iz) const;
};

/// Symmetric mean squared nearest-neighbor distance between two vertex sets.
double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

struct NormalErrorResult {
    double value = 0.0;
    size_t skipped_faces = 0; // zero-area faces excluded from the mean
};

/// Mean of 1 - |cos(theta)| between each face normal of `rec` and the normal
/// of the ref face with the nearest centroid; winding-orientation invariant.
NormalErrorResult normal_error(const Mesh& ref, const Mesh& rec);

/// Mean absolute difference of per-vertex angle-deficit curvature
/// (2*pi - angle sum; pi for boundary vertices). Requires matching vertex
/// counts; vertices without incident faces are skipped.
double curvature_preservation(const Mesh& ref, const Mesh& rec);

struct MeshMetricsRow {
    std::string name;
    double cd = 0.0, ne = 0.0, cp = 0.0;
};

struct MetricReport {
    std::vector<MeshMetricsRow> per_mesh;
    double mean_cd = 0.0, mean_ne = 0.0, mean_cp = 0.0;

    void finalize(); // fills the means
    std::string to_text() const;
    std::string to_json_string() const;
};

} // namespace meshae
