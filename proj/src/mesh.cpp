#include "dpw/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <unordered_map>

namespace dpw {

int SurfaceMesh::vertexIndex(int i_r, int i_theta) const {
    const int cols = closed ? n_theta : n_theta;
    if (closed) i_theta %= n_theta;
    return i_r * cols + i_theta;
}

double SurfaceMesh::maxEdgeLength() const {
    double m = 0.0;
    for (const auto& t : triangles)
        for (int e = 0; e < 3; ++e)
            m = std::max(m, (vertices[static_cast<size_t>(t[static_cast<size_t>(e)])] -
                             vertices[static_cast<size_t>(t[static_cast<size_t>((e + 1) % 3)])])
                                .norm());
    return m;
}

double SurfaceMesh::maxAdjacentDisplacement() const {
    double m = 0.0;
    for (int i = 0; i < n_r; ++i)
        for (int j = 0; j < n_theta; ++j) {
            const Vec3& v = vertices[static_cast<size_t>(vertexIndex(i, j))];
            if (i + 1 < n_r)
                m = std::max(m, (v - vertices[static_cast<size_t>(vertexIndex(i + 1, j))]).norm());
            if (j + 1 < n_theta || closed)
                m = std::max(m, (v - vertices[static_cast<size_t>(vertexIndex(i, j + 1))]).norm());
        }
    return m;
}

SurfaceMesh buildMesh(const std::vector<Vec3>& points, const std::vector<Vec3>& normals,
                      int n_r, int n_theta, bool closed) {
    if (n_r < 2 || n_theta < 2) throw Error("buildMesh: grid must be at least 2x2");
    if (points.size() != static_cast<size_t>(n_r) * static_cast<size_t>(n_theta) ||
        normals.size() != points.size())
        throw Error("buildMesh: sample count does not match the grid");
    for (const auto& p : points)
        if (!p.allFinite()) throw Error("buildMesh: non-finite vertex");

    SurfaceMesh m;
    m.n_r = n_r;
    m.n_theta = n_theta;
    m.closed = closed;
    m.vertices = points;
    m.normals = normals;
    const int jmax = closed ? n_theta : n_theta - 1;
    for (int i = 0; i + 1 < n_r; ++i)
        for (int j = 0; j < jmax; ++j) {
            const int a = m.vertexIndex(i, j), b = m.vertexIndex(i, j + 1);
            const int c = m.vertexIndex(i + 1, j), d = m.vertexIndex(i + 1, j + 1);
            m.triangles.push_back({a, b, d});
            m.triangles.push_back({a, d, c});
        }
    return m;
}

SurfaceMesh buildMesh(const std::vector<SurfaceSample>& samples, int n_r, int n_theta,
                      bool closed) {
    std::vector<Vec3> pts, nrm;
    pts.reserve(samples.size());
    nrm.reserve(samples.size());
    for (const auto& s : samples) {
        pts.push_back(s.f);
        nrm.push_back(s.N);
    }
    return buildMesh(pts, nrm, n_r, n_theta, closed);
}

void writeObj(std::ostream& out, const SurfaceMesh& mesh) {
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
        out << buf;
    }
    for (const auto& n : mesh.normals) {
        std::snprintf(buf, sizeof buf, "vn %.9g %.9g %.9g\n", n[0], n[1], n[2]);
        out << buf;
    }
    for (const auto& t : mesh.triangles) {
        std::snprintf(buf, sizeof buf, "f %d//%d %d//%d %d//%d\n", t[0] + 1, t[0] + 1, t[1] + 1,
                      t[1] + 1, t[2] + 1, t[2] + 1);
        out << buf;
    }
}

void writeObjFile(const std::string& path, const SurfaceMesh& mesh) {
    std::ofstream f(path);
    if (!f) throw Error("writeObjFile: cannot open " + path);
    writeObj(f, mesh);
}

namespace {

struct Tri {
    Vec3 p[3];
    int idx[3];
    int group;
};

// Devillers-Guigue style orientation predicates for the 3D case, with a
// coplanar fallback via 2D edge tests.
double orient3d(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    return (b - a).cross(c - a).dot(d - a);
}

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
    return (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
}

bool segmentsIntersect2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                         const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
    const double d1 = orient2d(c, d, a), d2 = orient2d(c, d, b);
    const double d3 = orient2d(a, b, c), d4 = orient2d(a, b, d);
    return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

bool pointInTri2d(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                  const Eigen::Vector2d& c) {
    const double d1 = orient2d(a, b, p), d2 = orient2d(b, c, p), d3 = orient2d(c, a, p);
    const bool neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
    const bool pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
    return !(neg && pos);
}

bool coplanarTriTri(const Tri& t1, const Tri& t2, const Vec3& n) {
    // project onto the dominant axis plane
    int drop = 0;
    n.cwiseAbs().maxCoeff(&drop);
    auto proj = [drop](const Vec3& v) {
        return drop == 0 ? Eigen::Vector2d(v[1], v[2])
                         : (drop == 1 ? Eigen::Vector2d(v[0], v[2]) : Eigen::Vector2d(v[0], v[1]));
    };
    Eigen::Vector2d a[3], b[3];
    for (int i = 0; i < 3; ++i) {
        a[i] = proj(t1.p[i]);
        b[i] = proj(t2.p[i]);
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (segmentsIntersect2d(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3])) return true;
    return pointInTri2d(a[0], b[0], b[1], b[2]) || pointInTri2d(b[0], a[0], a[1], a[2]);
}

bool triTriIntersect(const Tri& t1, const Tri& t2) {
    double len = 0.0, scale = 1.0;
    for (int e = 0; e < 3; ++e) {
        len = std::max({len, (t1.p[e] - t1.p[(e + 1) % 3]).norm(),
                        (t2.p[e] - t2.p[(e + 1) % 3]).norm()});
        scale = std::max({scale, t1.p[e].cwiseAbs().maxCoeff(), t2.p[e].cwiseAbs().maxCoeff()});
    }
    const double eps = 1e-12 * len * len * scale;

    // signed volumes with |.| <= eps treated as "on the plane"; only a
    // strict straddle both ways counts as a transversal crossing
    double d1[3], d2[3];
    int pos2 = 0, neg2 = 0, zero2 = 0;
    for (int i = 0; i < 3; ++i) {
        d2[i] = orient3d(t1.p[0], t1.p[1], t1.p[2], t2.p[i]);
        if (d2[i] > eps)
            ++pos2;
        else if (d2[i] < -eps)
            ++neg2;
        else {
            d2[i] = 0.0;
            ++zero2;
        }
    }
    if (zero2 == 3) {
        const Vec3 n1 = (t1.p[1] - t1.p[0]).cross(t1.p[2] - t1.p[0]);
        return coplanarTriTri(t1, t2, n1);
    }
    if (pos2 == 0 || neg2 == 0) return false;
    int pos1 = 0, neg1 = 0;
    for (int i = 0; i < 3; ++i) {
        d1[i] = orient3d(t2.p[0], t2.p[1], t2.p[2], t1.p[i]);
        if (d1[i] > eps)
            ++pos1;
        else if (d1[i] < -eps)
            ++neg1;
        else
            d1[i] = 0.0;
    }
    if (pos1 == 0 || neg1 == 0) return false;

    // interval overlap on the intersection line (Moller)
    const Vec3 n1 = (t1.p[1] - t1.p[0]).cross(t1.p[2] - t1.p[0]);
    const Vec3 n2 = (t2.p[1] - t2.p[0]).cross(t2.p[2] - t2.p[0]);
    const Vec3 dline = n1.cross(n2);
    int axis = 0;
    dline.cwiseAbs().maxCoeff(&axis);

    auto interval = [axis](const Tri& t, const double d[3], double& lo, double& hi) {
        // vertex alone on the minority side (a zero vertex is never alone
        // here: both strict signs are present)
        int odd = 0;
        int pos = 0;
        for (int i = 0; i < 3; ++i)
            if (d[i] > 0) ++pos;
        for (int i = 0; i < 3; ++i) {
            if (pos == 1 && d[i] > 0) odd = i;
            if (pos != 1 && d[i] < 0) odd = i;
        }
        auto cross = [&](int u, int v) {
            const double du = d[u], dv = d[v];
            const double pu = t.p[u][axis], pv = t.p[v][axis];
            if (du == dv) return pu;
            return pu + (pv - pu) * du / (du - dv);
        };
        lo = cross(odd, (odd + 1) % 3);
        hi = cross(odd, (odd + 2) % 3);
        if (lo > hi) std::swap(lo, hi);
    };

    double a0, a1, b0, b1;
    interval(t1, d1, a0, a1);
    interval(t2, d2, b0, b1);
    const double slack = 1e-9 * len;
    return std::max(a0, b0) < std::min(a1, b1) - slack;
}

bool shareVertex(const Tri& a, const Tri& b) {
    if (a.group != b.group) return false;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (a.idx[i] == b.idx[j]) return true;
    return false;
}

bool scan(const std::vector<Tri>& tris) {
    if (tris.empty()) return false;
    double cell = 0.0;
    Vec3 lo = tris[0].p[0];
    for (const auto& t : tris)
        for (int e = 0; e < 3; ++e) {
            cell = std::max(cell, (t.p[e] - t.p[(e + 1) % 3]).norm());
            lo = lo.cwiseMin(t.p[e]);
        }
    if (cell <= 0.0) return false;

    auto key = [&](long x, long y, long z) {
        return (x * 73856093L) ^ (y * 19349663L) ^ (z * 83492791L);
    };
    std::unordered_map<long, std::vector<int>> hash;
    auto cellsOf = [&](const Tri& t, auto&& fn) {
        Vec3 mn = t.p[0].cwiseMin(t.p[1]).cwiseMin(t.p[2]);
        Vec3 mx = t.p[0].cwiseMax(t.p[1]).cwiseMax(t.p[2]);
        const long x0 = std::lround(std::floor((mn[0] - lo[0]) / cell));
        const long x1 = std::lround(std::floor((mx[0] - lo[0]) / cell));
        const long y0 = std::lround(std::floor((mn[1] - lo[1]) / cell));
        const long y1 = std::lround(std::floor((mx[1] - lo[1]) / cell));
        const long z0 = std::lround(std::floor((mn[2] - lo[2]) / cell));
        const long z1 = std::lround(std::floor((mx[2] - lo[2]) / cell));
        for (long x = x0; x <= x1; ++x)
            for (long y = y0; y <= y1; ++y)
                for (long z = z0; z <= z1; ++z) fn(key(x, y, z));
    };
    for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
        bool hit = false;
        cellsOf(tris[static_cast<size_t>(i)], [&](long k) {
            if (hit) return;
            for (int j : hash[k]) {
                const auto& a = tris[static_cast<size_t>(i)];
                const auto& b = tris[static_cast<size_t>(j)];
                if (shareVertex(a, b)) continue;
                if (triTriIntersect(a, b)) {
                    hit = true;
                    return;
                }
            }
        });
        if (hit) return true;
        cellsOf(tris[static_cast<size_t>(i)], [&](long k) {
            auto& v = hash[k];
            if (v.empty() || v.back() != i) v.push_back(i);
        });
    }
    return false;
}

void collect(const SurfaceMesh& m, int group, int index_offset, std::vector<Tri>& out) {
    for (const auto& t : m.triangles) {
        Tri tri;
        for (int e = 0; e < 3; ++e) {
            tri.p[e] = m.vertices[static_cast<size_t>(t[static_cast<size_t>(e)])];
            tri.idx[e] = t[static_cast<size_t>(e)] + index_offset;
        }
        tri.group = group;
        out.push_back(tri);
    }
}

}  // namespace

bool meshSelfIntersects(const SurfaceMesh& mesh) {
    std::vector<Tri> tris;
    collect(mesh, 0, 0, tris);
    return scan(tris);
}

bool meshesIntersect(const SurfaceMesh& a, const SurfaceMesh& b) {
    std::vector<Tri> tris;
    collect(a, 0, 0, tris);
    collect(b, 1, static_cast<int>(a.vertices.size()), tris);
    return scan(tris);
}

}  // namespace dpw
