#include "meshae/mesh_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace meshae {

namespace {

[[noreturn]] void fail(const std::string& path, size_t line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

// Fan-triangulates a polygon's vertex loop from its first vertex.
void emit_fan(const std::vector<uint32_t>& poly, std::vector<FaceTriple>& out,
              const std::string& path, size_t line) {
    if (poly.size() < 3) fail(path, line, "face with fewer than 3 vertices");
    for (size_t k = 1; k + 1 < poly.size(); ++k)
        out.push_back({poly[0], poly[k], poly[k + 1]});
}

std::string next_content_line(std::istream& in, size_t& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        size_t b = line.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        if (line[b] == '#') continue;
        return line;
    }
    return {};
}

Mesh load_off(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    size_t line_no = 0;

    std::string header = next_content_line(in, line_no);
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") fail(path, line_no, "expected OFF header");

    size_t nv = 0, nf = 0, ne = 0;
    // Counts may follow the OFF tag on the same line.
    if (!(hs >> nv >> nf >> ne)) {
        std::string counts = next_content_line(in, line_no);
        std::istringstream cs(counts);
        if (!(cs >> nv >> nf >> ne)) fail(path, line_no, "expected vertex/face/edge counts");
    }

    std::vector<Vec3> verts;
    verts.reserve(nv);
    for (size_t i = 0; i < nv; ++i) {
        std::string line = next_content_line(in, line_no);
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) fail(path, line_no, "bad vertex line");
        verts.emplace_back(x, y, z);
    }

    std::vector<FaceTriple> faces;
    faces.reserve(nf);
    for (size_t i = 0; i < nf; ++i) {
        std::string line = next_content_line(in, line_no);
        std::istringstream ls(line);
        size_t n;
        if (!(ls >> n)) fail(path, line_no, "bad face line");
        std::vector<uint32_t> poly(n);
        for (size_t k = 0; k < n; ++k) {
            long long idx;
            if (!(ls >> idx)) fail(path, line_no, "bad face line");
            if (idx < 0 || static_cast<size_t>(idx) >= nv) fail(path, line_no, "out-of-range index");
            poly[k] = static_cast<uint32_t>(idx);
        }
        emit_fan(poly, faces, path, line_no);
    }

    try {
        return Mesh::create(std::move(verts), std::move(faces));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

Mesh load_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open file");
    size_t line_no = 0;

    std::vector<Vec3> verts;
    std::vector<FaceTriple> faces;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) fail(path, line_no, "bad vertex line");
            verts.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<uint32_t> poly;
            std::string tok;
            while (ls >> tok) {
                // "i", "i/t", "i/t/n", "i//n" all start with the vertex index
                size_t slash = tok.find('/');
                std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
                long long idx;
                try {
                    idx = std::stoll(head);
                } catch (...) {
                    fail(path, line_no, "bad face index '" + tok + "'");
                }
                if (idx < 0) fail(path, line_no, "negative OBJ indices are not supported");
                if (idx == 0 || static_cast<size_t>(idx) > verts.size())
                    fail(path, line_no, "out-of-range index");
                poly.push_back(static_cast<uint32_t>(idx - 1));
            }
            emit_fan(poly, faces, path, line_no);
        }
        // all other record types ignored
    }

    try {
        return Mesh::create(std::move(verts), std::move(faces));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

std::string fmt_coord(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

MeshFormat format_from_path(const std::string& path) {
    size_t dot = path.find_last_of('.');
    std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == "off") return MeshFormat::OFF;
    if (ext == "obj") return MeshFormat::OBJ;
    throw std::runtime_error(path + ": unknown mesh extension '" + ext + "'");
}

Mesh load_mesh(const std::string& path, MeshFormat format) {
    return format == MeshFormat::OFF ? load_off(path) : load_obj(path);
}

Mesh load_mesh(const std::string& path) { return load_mesh(path, format_from_path(path)); }

void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    if (format == MeshFormat::OFF) {
        out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
        for (const Vec3& v : mesh.vertices)
            out << fmt_coord(v.x()) << ' ' << fmt_coord(v.y()) << ' ' << fmt_coord(v.z()) << '\n';
        for (const FaceTriple& f : mesh.faces)
            out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    } else {
        for (const Vec3& v : mesh.vertices)
            out << "v " << fmt_coord(v.x()) << ' ' << fmt_coord(v.y()) << ' ' << fmt_coord(v.z())
                << '\n';
        for (const FaceTriple& f : mesh.faces)
            out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

void save_mesh(const Mesh& mesh, const std::string& path) {
    save_mesh(mesh, path, format_from_path(path));
}

} // namespace meshae
