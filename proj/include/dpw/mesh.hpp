#ifndef DPW_MESH_HPP
#define DPW_MESH_HPP

#include <array>
#include <iosfwd>
#include <string>

#include "dpw/surface.hpp"

namespace dpw {

/// Triangulated annulus mesh with per-vertex normals. Built from an
/// n_r x n_theta rectangular grid of samples on the cover; when the theta
/// range spans exactly 2 pi the seam is welded (no duplicate column).
struct SurfaceMesh {
    int n_r = 0;
    int n_theta = 0;
    bool closed = false;  ///< theta seam welded
    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;
    std::vector<std::array<int, 3>> triangles;

    int vertexIndex(int i_r, int i_theta) const;
    double maxEdgeLength() const;
    /// largest displacement between grid-adjacent vertices
    double maxAdjacentDisplacement() const;
};

/// Samples must be row-major with r varying slowest: samples[i_r * n_theta + i_t].
/// `closed` welds the last theta column to the first.
SurfaceMesh buildMesh(const std::vector<SurfaceSample>& samples, int n_r, int n_theta,
                      bool closed);
SurfaceMesh buildMesh(const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                      int n_r, int n_theta, bool closed);

/// Wavefront OBJ with vertex normals, floats at 9 significant digits.
void writeObj(std::ostream& out, const SurfaceMesh& mesh);
void writeObjFile(const std::string& path, const SurfaceMesh& mesh);

/// Exact triangle-triangle intersection scan over a uniform spatial hash
/// (cell size = max edge length). Triangles sharing a vertex are skipped.
bool meshSelfIntersects(const SurfaceMesh& mesh);

/// Same scan over the union of two meshes (shared-vertex rule applies
/// within each mesh only).
bool meshesIntersect(const SurfaceMesh& a, const SurfaceMesh& b);

}  // namespace dpw

#endif
