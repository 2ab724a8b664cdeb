#pragma once

#include <string>

#include "dbp/geometry.hpp"

namespace dbp {

/// One point per line as three whitespace-separated decimals; blank lines
/// and `#` comments are skipped. Throws ParseError with the line number on
/// a malformed line, and ContractError when no point is found.
PointCloud read_xyz(const std::string& path);

/// 12 significant digits, `\n` line endings. Throws IoError naming the path.
void write_xyz(const PointCloud& cloud, const std::string& path);
std::string format_xyz(const PointCloud& cloud);

/// Vertex positions of an ASCII PLY file; other properties and elements
/// are skipped. Binary PLY and vertices without x/y/z throw
/// UnsupportedFormatError.
PointCloud read_ply_ascii(const std::string& path);

/// Either format, chosen by extension (.ply, anything else is XYZ).
PointCloud read_point_cloud(const std::string& path);

/// `sphere:r`, `torus:R,r`, `plane`, or `mesh:path.ply` (ASCII PLY with faces).
SurfaceDescriptor parse_surface_spec(const std::string& spec);

/// Triangle mesh from an ASCII PLY with a `face` element.
Mesh read_ply_mesh(const std::string& path);

}  // namespace dbp
