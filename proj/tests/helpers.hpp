// Shared test fixtures: mesh generators and the finite-difference oracle.
#pragma once

#include "meshae/mesh.hpp"
#include "meshae/rng.hpp"

#include <cmath>
#include <functional>
#include <numbers>

namespace meshae::testing {

inline Mesh tetrahedron() {
    return Mesh::create(
        {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}},
        {{0, 1, 2}, {0, 3, 1}, {1, 3, 2}, {0, 2, 3}});
}

inline Mesh icosahedron() {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0},   {-1, -p, 0}, {1, -p, 0},
                           {0, -1, p}, {0, 1, p},   {0, -1, -p}, {0, 1, -p},
                           {p, 0, -1}, {p, 0, 1},   {-p, 0, -1}, {-p, 0, 1}};
    std::vector<FaceTriple> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                 {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                 {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                 {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    return Mesh::create(std::move(v), std::move(f));
}

// closed genus-0 sphere: 2 + n_lat*n_lon vertices, 2*n_lat*n_lon faces
inline Mesh uv_sphere(int n_lon, int n_lat, double radius = 1.0) {
    std::vector<Vec3> verts;
    verts.emplace_back(0, 0, radius); // north pole = 0
    for (int i = 1; i <= n_lat; ++i) {
        double phi = std::numbers::pi * i / (n_lat + 1);
        for (int j = 0; j < n_lon; ++j) {
            double theta = 2.0 * std::numbers::pi * j / n_lon;
            verts.emplace_back(radius * std::sin(phi) * std::cos(theta),
                               radius * std::sin(phi) * std::sin(theta), radius * std::cos(phi));
        }
    }
    verts.emplace_back(0, 0, -radius); // south pole
    uint32_t south = static_cast<uint32_t>(verts.size() - 1);
    auto ring = [&](int i, int j) {
        return static_cast<uint32_t>(1 + (i - 1) * n_lon + (j % n_lon));
    };

    std::vector<FaceTriple> faces;
    for (int j = 0; j < n_lon; ++j) faces.push_back({0, ring(1, j), ring(1, j + 1)});
    for (int i = 1; i < n_lat; ++i) {
        for (int j = 0; j < n_lon; ++j) {
            faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
            faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
        }
    }
    for (int j = 0; j < n_lon; ++j) faces.push_back({south, ring(n_lat, j + 1), ring(n_lat, j)});
    return Mesh::create(std::move(verts), std::move(faces));
}

// closed genus-1 torus: n_major*n_minor vertices, 2*n_major*n_minor faces
inline Mesh torus(int n_major, int n_minor, double R = 1.0, double r = 0.35) {
    std::vector<Vec3> verts;
    for (int i = 0; i < n_major; ++i) {
        double u = 2.0 * std::numbers::pi * i / n_major;
        for (int j = 0; j < n_minor; ++j) {
            double v = 2.0 * std::numbers::pi * j / n_minor;
            double w = R + r * std::cos(v);
            verts.emplace_back(w * std::cos(u), w * std::sin(u), r * std::sin(v));
        }
    }
    auto idx = [&](int i, int j) {
        return static_cast<uint32_t>((i % n_major) * n_minor + (j % n_minor));
    };
    std::vector<FaceTriple> faces;
    for (int i = 0; i < n_major; ++i) {
        for (int j = 0; j < n_minor; ++j) {
            faces.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
            faces.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
        }
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

// bordered planar grid patch: (nx+1)*(ny+1) vertices, 2*nx*ny faces
inline Mesh grid_patch(int nx, int ny) {
    std::vector<Vec3> verts;
    for (int y = 0; y <= ny; ++y)
        for (int x = 0; x <= nx; ++x)
            verts.emplace_back(x, y, 0.1 * std::sin(x * 1.3 + y * 0.7));
    auto idx = [&](int x, int y) { return static_cast<uint32_t>(y * (nx + 1) + x); };
    std::vector<FaceTriple> faces;
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            faces.push_back({idx(x, y), idx(x + 1, y), idx(x + 1, y + 1)});
            faces.push_back({idx(x, y), idx(x + 1, y + 1), idx(x, y + 1)});
        }
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

// bordered strip of n triangles sharing consecutive edges
inline Mesh strip(int n) {
    std::vector<Vec3> verts;
    for (int i = 0; i < n + 2; ++i) verts.emplace_back(i * 0.5, i % 2 == 0 ? 0.0 : 1.0, 0.0);
    std::vector<FaceTriple> faces;
    for (int i = 0; i < n; ++i) {
        if (i % 2 == 0)
            faces.push_back({static_cast<uint32_t>(i), static_cast<uint32_t>(i + 1),
                             static_cast<uint32_t>(i + 2)});
        else
            faces.push_back({static_cast<uint32_t>(i + 1), static_cast<uint32_t>(i),
                             static_cast<uint32_t>(i + 2)});
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

// non-manifold: `wings` triangles share the edge (0,1)
inline Mesh nonmanifold_book(int wings) {
    std::vector<Vec3> verts = {{0, 0, 0}, {1, 0, 0}};
    std::vector<FaceTriple> faces;
    for (int w = 0; w < wings; ++w) {
        double a = 2.0 * std::numbers::pi * w / wings;
        verts.emplace_back(0.5, std::cos(a), std::sin(a));
        faces.push_back({0, 1, static_cast<uint32_t>(2 + w)});
    }
    return Mesh::create(std::move(verts), std::move(faces));
}

inline Mesh jitter(Mesh m, uint64_t seed, double amplitude = 0.05) {
    Rng rng(seed);
    for (Vec3& v : m.vertices)
        v += amplitude * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
    return m;
}

inline MatX random_features(Eigen::Index rows, Eigen::Index cols, uint64_t seed) {
    Rng rng(seed);
    MatX m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.gaussian();
    return m;
}

// ---- finite-difference oracle ----------------------------------------

// central differences of a scalar functional w.r.t. every entry of x
inline MatX fd_gradient(const std::function<double()>& eval, MatX& x, double h = 1e-5) {
    MatX g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double saved = x.data()[i];
        x.data()[i] = saved + h;
        double fp = eval();
        x.data()[i] = saved - h;
        double fm = eval();
        x.data()[i] = saved;
        g.data()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// inf-norm relative error between two gradients
inline double grad_rel_error(const MatX& a, const MatX& b) {
    double scale = std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

} // namespace meshae::testing
