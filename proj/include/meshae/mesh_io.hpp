#pragma once

#include "meshae/mesh.hpp"

#include <string>

namespace meshae {

enum class MeshFormat { OFF, OBJ };

/// Picks OFF/OBJ from the file extension; throws on anything else.
MeshFormat format_from_path(const std::string& path);

/// Loads a triangle mesh. Polygon faces are fan-triangulated from the
/// polygon's first vertex. Throws std::runtime_error with the offending line
/// number on parse errors, out-of-range indices, or degenerate faces.
Mesh load_mesh(const std::string& path, MeshFormat format);
Mesh load_mesh(const std::string& path); // format from extension

/// Writes coordinates with 17 significant digits so doubles round-trip
/// exactly through load.
void save_mesh(const Mesh& mesh, const std::string& path, MeshFormat format);
void save_mesh(const Mesh& mesh, const std::string& path);

} // namespace meshae
