#include "meshae/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace meshae {

PointGrid::PointGrid(const std::vector<Vec3>& points) : points_(points) {
    if (points_.empty()) throw std::runtime_error("PointGrid: empty point set");
    Vec3 hi = points_[0];
    lo_ = points_[0];
    for (const Vec3& p : points_) {
        lo_ = lo_.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double extent = (hi - lo_).maxCoeff();
    int per_axis = std::max(1, static_cast<int>(std::cbrt(static_cast<double>(points_.size()))));
    cell_ = extent > 0.0 ? extent / per_axis : 1.0;
    for (int d = 0; d < 3; ++d) {
        dims_[d] = std::max(1, static_cast<int>((hi[d] - lo_[d]) / cell_) + 1);
    }
    cells_.resize(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2]);
    for (size_t i = 0; i < points_.size(); ++i) {
        const Vec3& p = points_[i];
        int ix = std::min(dims_[0] - 1, static_cast<int>((p.x() - lo_.x()) / cell_));
        int iy = std::min(dims_[1] - 1, static_cast<int>((p.y() - lo_.y()) / cell_));
        int iz = std::min(dims_[2] - 1, static_cast<int>((p.z() - lo_.z()) / cell_));
        cells_[cell_index(ix, iy, iz)].push_back(static_cast<uint32_t>(i));
    }
}

size_t PointGrid::cell_index(int ix, int iy, int iz) const {
    return (static_cast<size_t>(iz) * dims_[1] + iy) * dims_[0] + ix;
}

PointGrid::Hit PointGrid::nearest(const Vec3& query) const {
    // integer cell of the query; may lie outside the grid
    int qx = static_cast<int>(std::floor((query.x() - lo_.x()) / cell_));
    int qy = static_cast<int>(std::floor((query.y() - lo_.y()) / cell_));
    int qz = static_cast<int>(std::floor((query.z() - lo_.z()) / cell_));

    Hit best{0, std::numeric_limits<double>::infinity()};
    int max_ring = std::max({dims_[0], dims_[1], dims_[2]}) +
                   std::max({std::abs(qx), std::abs(qy), std::abs(qz)}) + 2;

    for (int ring = 0; ring <= max_ring; ++ring) {
        // any point in an unscanned cell (Chebyshev distance > ring) is at
        // least (ring)*cell away from the query
        if (ring > 0 && best.dist_sq <= static_cast<double>(ring) * cell_ *
                                            static_cast<double>(ring) * cell_)
            break;
        for (int iz = qz - ring; iz <= qz + ring; ++iz) {
            if (iz < 0 || iz >= dims_[2]) continue;
            for (int iy = qy - ring; iy <= qy + ring; ++iy) {
                if (iy < 0 || iy >= dims_[1]) continue;
                bool face_z = std::abs(iz - qz) == ring;
                bool face_y = std::abs(iy - qy) == ring;
                for (int ix = qx - ring; ix <= qx + ring; ++ix) {
                    if (ix < 0 || ix >= dims_[0]) continue;
                    if (!face_z && !face_y && std::abs(ix - qx) != ring) continue; // shell only
                    for (uint32_t idx : cells_[cell_index(ix, iy, iz)]) {
                        double d = (points_[idx] - query).squaredNorm();
                        if (d < best.dist_sq) best = {idx, d};
                    }
                }
            }
        }
    }
    return best;
}

double chamfer_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::runtime_error("chamfer_distance: empty point set");
    PointGrid ga(a), gb(b);
    double ab = 0.0;
    for (const Vec3& p : a) ab += gb.nearest(p).dist_sq;
    double ba = 0.0;
    for (const Vec3& p : b) ba += ga.nearest(p).dist_sq;
    return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

namespace {

bool face_normal(const Mesh& m, size_t f, Vec3* out) {
    const FaceTriple& t = m.faces[f];
    Vec3 n = (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]);
    double len = n.norm();
    if (len < 1e-30) return false;
    *out = n / len;
    return true;
}

Vec3 face_centroid(const Mesh& m, size_t f) {
    const FaceTriple& t = m.faces[f];
    return (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
}

// angle deficit per vertex: 2*pi (pi on the boundary) minus the incident
// angle sum; vertices with no incident face are flagged with NaN
std::vector<double> angle_deficits(const Mesh& m) {
    std::vector<double> angle_sum(m.vertex_count(), 0.0);
    std::vector<uint32_t> incident(m.vertex_count(), 0);
    for (const FaceTriple& t : m.faces) {
        for (int k = 0; k < 3; ++k) {
            const Vec3& o = m.vertices[t[k]];
            Vec3 e1 = m.vertices[t[(k + 1) % 3]] - o;
            Vec3 e2 = m.vertices[t[(k + 2) % 3]] - o;
            double n1 = e1.norm(), n2 = e2.norm();
            if (n1 < 1e-30 || n2 < 1e-30) continue;
            double c = std::clamp(e1.dot(e2) / (n1 * n2), -1.0, 1.0);
            angle_sum[t[k]] += std::acos(c);
        }
        for (uint32_t v : t) incident[v]++;
    }

    // boundary vertex: endpoint of an edge with exactly one incident face
    std::unordered_map<uint64_t, uint32_t> edge_faces;
    for (const FaceTriple& t : m.faces) {
        for (int k = 0; k < 3; ++k) {
            uint32_t u = t[k], v = t[(k + 1) % 3];
            uint64_t key = (static_cast<uint64_t>(std::min(u, v)) << 32) | std::max(u, v);
            edge_faces[key]++;
        }
    }
    std::vector<char> boundary(m.vertex_count(), 0);
    for (const auto& [key, cnt] : edge_faces) {
        if (cnt == 1) {
            boundary[static_cast<uint32_t>(key >> 32)] = 1;
            boundary[static_cast<uint32_t>(key & 0xffffffffu)] = 1;
        }
    }

    std::vector<double> deficit(m.vertex_count());
    for (size_t v = 0; v < m.vertex_count(); ++v) {
        if (incident[v] == 0) {
            deficit[v] = std::numeric_limits<double>::quiet_NaN();
        } else {
            double full = boundary[v] ? std::numbers::pi : 2.0 * std::numbers::pi;
            deficit[v] = full - angle_sum[v];
        }
    }
    return deficit;
}

} // namespace

NormalErrorResult normal_error(const Mesh& ref, const Mesh& rec) {
    if (ref.face_count() == 0 || rec.face_count() == 0)
        throw std::runtime_error("normal_error: empty mesh");

    std::vector<Vec3> ref_centroids;
    std::vector<Vec3> ref_normals;
    std::vector<char> ref_valid;
    ref_centroids.reserve(ref.face_count());
    for (size_t f = 0; f < ref.face_count(); ++f) {
        ref_centroids.push_back(face_centroid(ref, f));
        Vec3 n = Vec3::Zero();
        ref_valid.push_back(face_normal(ref, f, &n) ? 1 : 0);
        ref_normals.push_back(n);
    }
    PointGrid grid(ref_centroids);

    NormalErrorResult res;
    double sum = 0.0;
    size_t counted = 0;
    for (size_t f = 0; f < rec.face_count(); ++f) {
        Vec3 n;
        if (!face_normal(rec, f, &n)) {
            res.skipped_faces++;
            continue;
        }
        size_t match = grid.nearest(face_centroid(rec, f)).index;
        if (!ref_valid[match]) {
            res.skipped_faces++;
            continue;
        }
        sum += 1.0 - std::abs(n.dot(ref_normals[match]));
        ++counted;
    }
    res.value = counted > 0 ? sum / static_cast<double>(counted) : 0.0;
    return res;
}

double curvature_preservation(const Mesh& ref, const Mesh& rec) {
    if (ref.vertex_count() != rec.vertex_count())
        throw std::runtime_error("curvature_preservation: vertex counts differ");
    std::vector<double> da = angle_deficits(ref);
    std::vector<double> db = angle_deficits(rec);
    double sum = 0.0;
    size_t counted = 0;
    for (size_t v = 0; v < da.size(); ++v) {
        if (std::isnan(da[v]) || std::isnan(db[v])) continue;
        sum += std::abs(da[v] - db[v]);
        ++counted;
    }
    return counted > 0 ? sum / static_cast<double>(counted) : 0.0;
}

void MetricReport::finalize() {
    mean_cd = mean_ne = mean_cp = 0.0;
    if (per_mesh.empty()) return;
    for (const MeshMetricsRow& r : per_mesh) {
        mean_cd += r.cd;
        mean_ne += r.ne;
        mean_cp += r.cp;
    }
    double n = static_cast<double>(per_mesh.size());
    mean_cd /= n;
    mean_ne /= n;
    mean_cp /= n;
}

std::string MetricReport::to_text() const {
    std::string out;
    char buf[512];
    for (const MeshMetricsRow& r : per_mesh) {
        std::snprintf(buf, sizeof(buf), "%-40s cd=%.6g ne=%.6g cp=%.6g\n", r.name.c_str(), r.cd,
                      r.ne, r.cp);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "mean over %zu meshes: cd=%.6g ne=%.6g cp=%.6g\n",
                  per_mesh.size(), mean_cd, mean_ne, mean_cp);
    out += buf;
    return out;
}

std::string MetricReport::to_json_string() const {
    nlohmann::json j;
    j["aggregate"] = {{"cd", mean_cd}, {"ne", mean_ne}, {"cp", mean_cp}, {"count", per_mesh.size()}};
    nlohmann::json rows = nlohmann::json::array();
    for (const MeshMetricsRow& r : per_mesh)
        rows.push_back({{"name", r.name}, {"cd", r.cd}, {"ne", r.ne}, {"cp", r.cp}});
    j["meshes"] = rows;
    return j.dump(2);
}

} // namespace meshae
