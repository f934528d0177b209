#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "meshae/dataset.hpp"
#include "meshae/mesh_io.hpp"

#include <filesystem>
#include <fstream>

using namespace meshae;
using namespace meshae::testing;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("adjacency: tetrahedron faces all border each other") {
    Mesh m = tetrahedron();
    REQUIRE(m.face_count() == 4);
    // derived by enumerating shared edges of (0,1,2),(0,3,1),(1,3,2),(0,2,3)
    CHECK(m.face_adjacency[0] == std::vector<uint32_t>{1, 2, 3});
    for (const auto& adj : m.face_adjacency) CHECK(adj.size() == 3);
}

TEST_CASE("adjacency: two triangles sharing one edge") {
    Mesh m = Mesh::create({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}},
                          {{0, 1, 2}, {2, 1, 3}});
    CHECK(m.face_adjacency[0] == std::vector<uint32_t>{1});
    CHECK(m.face_adjacency[1] == std::vector<uint32_t>{0});
}

TEST_CASE("adjacency: isolated triangle has no neighbors") {
    Mesh m = Mesh::create({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
    CHECK(m.face_adjacency[0].empty());
}

TEST_CASE("adjacency: symmetric on every generated mesh") {
    for (const Mesh& m : {uv_sphere(8, 5), torus(6, 5), grid_patch(4, 3), strip(6),
                          nonmanifold_book(4), icosahedron()}) {
        for (uint32_t f = 0; f < m.face_count(); ++f) {
            for (uint32_t n : m.face_adjacency[f]) {
                const auto& back = m.face_adjacency[n];
                CHECK(std::find(back.begin(), back.end(), f) != back.end());
            }
        }
    }
}

TEST_CASE("adjacency: non-manifold edge yields all sharers") {
    Mesh m = nonmanifold_book(4);
    for (uint32_t f = 0; f < 4; ++f) CHECK(m.face_adjacency[f].size() == 3);
}

TEST_CASE("mesh validation") {
    CHECK_THROWS_WITH_AS(Mesh::create({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 3}}),
                         doctest::Contains("out-of-range"), std::runtime_error);
    CHECK_THROWS_WITH_AS(Mesh::create({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 1}}),
                         doctest::Contains("degenerate"), std::runtime_error);
}

TEST_CASE("normalize: symmetric pair lands on the unit sphere") {
    Mesh m = Mesh::create({{2, 0, 0}, {-2, 0, 0}, {0, 0, 0}}, {{0, 1, 2}});
    Mesh n = normalize_unit_sphere(m);
    CHECK(n.vertices[0].isApprox(Vec3(1, 0, 0), 1e-15));
    CHECK(n.vertices[1].isApprox(Vec3(-1, 0, 0), 1e-15));
}

TEST_CASE("normalize: centroid centering") {
    // centroid (0,0,2): points map to (0,0,-1) and (0,0,1)
    Mesh m = Mesh::create({{0, 0, 0}, {0, 0, 4}, {0, 0, 2}}, {{0, 1, 2}});
    Mesh n = normalize_unit_sphere(m);
    CHECK(n.vertices[0].isApprox(Vec3(0, 0, -1), 1e-15));
    CHECK(n.vertices[1].isApprox(Vec3(0, 0, 1), 1e-15));
}

TEST_CASE("normalize: idempotent and max norm is 1") {
    Mesh m = jitter(uv_sphere(10, 6), 7);
    Mesh n1 = normalize_unit_sphere(m);
    double max_norm = 0.0;
    for (const Vec3& v : n1.vertices) max_norm = std::max(max_norm, v.norm());
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));

    Mesh n2 = normalize_unit_sphere(n1);
    for (size_t i = 0; i < n1.vertices.size(); ++i)
        CHECK((n1.vertices[i] - n2.vertices[i]).norm() < 1e-12);
}

TEST_CASE("normalize: degenerate geometry is an error") {
    Mesh m;
    m.vertices = {{1, 1, 1}, {1, 1, 1}};
    CHECK_THROWS_WITH_AS(normalize_unit_sphere(m), doctest::Contains("degenerate"),
                         std::runtime_error);
}

TEST_CASE("augment: deterministic given the seed") {
    Mesh m = normalize_unit_sphere(uv_sphere(8, 5));
    Mesh a = augment(m, 42);
    Mesh b = augment(m, 42);
    for (size_t i = 0; i < a.vertices.size(); ++i) CHECK(a.vertices[i] == b.vertices[i]);
}

TEST_CASE("augment: identity configuration leaves the mesh unchanged") {
    Mesh m = normalize_unit_sphere(uv_sphere(8, 5));
    AugmentConfig cfg;
    cfg.scale_min = cfg.scale_max = 1.0;
    cfg.rotate = false;
    Mesh a = augment(m, 3, cfg);
    for (size_t i = 0; i < m.vertices.size(); ++i) CHECK(a.vertices[i] == m.vertices[i]);
}

TEST_CASE("augment: pairwise distances scale by one constant") {
    Mesh m = normalize_unit_sphere(jitter(uv_sphere(6, 4), 2));
    Mesh a = augment(m, 9);
    double ratio = (a.vertices[1] - a.vertices[0]).norm() / (m.vertices[1] - m.vertices[0]).norm();
    CHECK(ratio >= 0.9);
    CHECK(ratio <= 1.1);
    for (size_t i = 0; i < m.vertices.size(); ++i) {
        for (size_t j = i + 1; j < m.vertices.size(); j += 7) {
            double d0 = (m.vertices[j] - m.vertices[i]).norm();
            double d1 = (a.vertices[j] - a.vertices[i]).norm();
            CHECK(d1 == doctest::Approx(ratio * d0).epsilon(1e-9));
        }
    }
}

TEST_CASE("off loader: tetrahedron") {
    std::string path = write_temp("meshae_tet.off",
                                  "OFF\n4 4 0\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n"
                                  "3 0 1 2\n3 0 3 1\n3 1 3 2\n3 0 2 3\n");
    Mesh m = load_mesh(path);
    CHECK(m.vertex_count() == 4);
    CHECK(m.face_count() == 4);
    for (const auto& adj : m.face_adjacency) CHECK(adj.size() == 3);
}

TEST_CASE("off loader: out-of-range index reports the line") {
    std::string path = write_temp("meshae_bad.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n");
    CHECK_THROWS_WITH_AS(load_mesh(path), doctest::Contains("out-of-range"), std::runtime_error);
}

TEST_CASE("obj loader: quad fan-triangulates") {
    std::string path = write_temp("meshae_quad.obj",
                                  "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    Mesh m = load_mesh(path);
    REQUIRE(m.face_count() == 2);
    CHECK(m.faces[0] == FaceTriple{0, 1, 2});
    CHECK(m.faces[1] == FaceTriple{0, 2, 3});
}

TEST_CASE("obj loader: ignores other records and slash forms") {
    std::string path = write_temp("meshae_rich.obj",
                                  "# comment\nvn 0 0 1\nvt 0 0\nv 0 0 0\nv 1 0 0\nv 0 1 0\n"
                                  "s off\nf 1/1 2/2 3/3\n");
    Mesh m = load_mesh(path);
    CHECK(m.face_count() == 1);
}

TEST_CASE("io roundtrip: save then load preserves vertices and faces exactly") {
    Mesh m = normalize_unit_sphere(jitter(uv_sphere(9, 6), 11));
    for (MeshFormat fmt : {MeshFormat::OFF, MeshFormat::OBJ}) {
        std::string path = write_temp(fmt == MeshFormat::OFF ? "meshae_rt.off" : "meshae_rt.obj", "");
        save_mesh(m, path, fmt);
        Mesh r = load_mesh(path, fmt);
        REQUIRE(r.vertex_count() == m.vertex_count());
        REQUIRE(r.faces == m.faces);
        for (size_t i = 0; i < m.vertices.size(); ++i) CHECK(r.vertices[i] == m.vertices[i]);
    }
}

TEST_CASE("dataset: 16-split layout") {
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "meshae_shrec";
    fs::remove_all(root);
    Mesh tet = tetrahedron();
    for (int c = 0; c < 3; ++c) {
        fs::path cls = root / ("class" + std::to_string(c));
        fs::create_directories(cls);
        for (int i = 0; i < 20; ++i)
            save_mesh(tet, (cls / ("m" + std::to_string(i) + ".off")).string());
    }
    DatasetSplit split = load_split(root.string(), SplitScheme::Shrec11_16split, 5);
    CHECK(split.train.size() == 48);
    CHECK(split.test.size() == 12);
    // disjoint
    for (const std::string& t : split.test)
        CHECK(std::find(split.train.begin(), split.train.end(), t) == split.train.end());

    // short class folder is an error
    fs::path cls = root / "class_bad";
    fs::create_directories(cls);
    save_mesh(tet, (cls / "only.off").string());
    CHECK_THROWS_WITH_AS(load_split(root.string(), SplitScheme::Shrec11_16split, 5),
                         doctest::Contains("class_bad"), std::runtime_error);
    fs::remove_all(root);
}

TEST_CASE("dataset: manifold40 layout and missing folder error") {
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / "meshae_m40";
    fs::remove_all(root);
    Mesh tet = tetrahedron();
    for (const char* part : {"train", "test"}) {
        for (int c = 0; c < 2; ++c) {
            fs::path cls = root / part / ("cat" + std::to_string(c));
            fs::create_directories(cls);
            int count = std::string(part) == "train" ? 3 : 2;
            for (int i = 0; i < count; ++i)
                save_mesh(tet, (cls / ("m" + std::to_string(i) + ".off")).string());
        }
    }
    DatasetSplit split = load_split(root.string(), SplitScheme::Manifold40, 0);
    CHECK(split.train.size() == 6);
    CHECK(split.test.size() == 4);
    CHECK(split.test_labels == std::vector<int>{0, 0, 1, 1});

    CHECK_THROWS_WITH_AS(load_split((root / "nope").string(), SplitScheme::Manifold40, 0),
                         doctest::Contains("missing folder"), std::runtime_error);
    fs::remove_all(root);
}
