#include "corseg/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "corseg/errors.hpp"

namespace corseg {

namespace {

// Cube corners in Bourke numbering, and the Kuhn split of the cell into
// six tetrahedra around the main diagonal (corner 0 to corner 6). Two cells
// sharing a face always induce the same diagonal on it, so the extracted
// surface is watertight by construction -- the classic single-cube case
// tables cannot guarantee that on ambiguous faces.
const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                           {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
const int kTet[6][4] = {{0, 1, 2, 6}, {0, 1, 5, 6}, {0, 3, 2, 6},
                        {0, 3, 7, 6}, {0, 4, 5, 6}, {0, 4, 7, 6}};

// Parity of a permutation of {0,1,2,3}: +1 even, -1 odd.
int parity4(const int p[4]) {
    int inv = 0;
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            if (p[a] > p[b]) ++inv;
    return inv % 2 == 0 ? 1 : -1;
}

// Orientation sign of a tetrahedron given as cube-corner ids, computed in
// index space; positive spacings keep the sign valid in world space.
int tet_orientation(const int t[4]) {
    int e[3][3];
    for (int v = 0; v < 3; ++v)
        for (int a = 0; a < 3; ++a) e[v][a] = kCorner[t[v + 1]][a] - kCorner[t[0]][a];
    int det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1]) -
              e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0]) +
              e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
    return det > 0 ? 1 : -1;
}

WorldPoint interp_vertex(const VoxelGrid& g, int i0, int j0, int k0, int i1, int j1, int k1,
                         double v0, double v1, double iso) {
    WorldPoint p0 = g.voxel_to_world(i0, j0, k0);
    WorldPoint p1 = g.voxel_to_world(i1, j1, k1);
    // A crossing that lands exactly on a grid corner would be emitted by
    // every segment meeting that corner as a distinct vertex, and the copies
    // cannot pair up; keep the vertex strictly inside its own segment. The
    // margin must survive rounding to float32 on STL export, so it is kept
    // well above float32 resolution at typical coordinate magnitudes.
    double t = std::clamp((iso - v0) / (v1 - v0), 1e-3, 1.0 - 1e-3);
    return {p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y), p0.z + t * (p1.z - p0.z)};
}

double tri_area(const WorldPoint& a, const WorldPoint& b, const WorldPoint& c) {
    WorldPoint u{b.x - a.x, b.y - a.y, b.z - a.z};
    WorldPoint v{c.x - a.x, c.y - a.y, c.z - a.z};
    double cx = u.y * v.z - u.z * v.y;
    double cy = u.z * v.x - u.x * v.z;
    double cz = u.x * v.y - u.y * v.x;
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

std::string lower_ext(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string e = path.substr(dot + 1);
    for (char& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return e;
}

} // namespace

TriangleMesh marching_cubes(const VoxelGrid& field, double iso) {
    const GridDims& d = field.dims();
    if (d.nx < 2 || d.ny < 2 || d.nz < 2)
        throw input_error("marching cubes needs at least 2 voxels per axis");

    TriangleMesh mesh;
    // One vertex per crossed segment, keyed by the segment's global corner
    // pair so every tetrahedron touching it reuses the same vertex.
    std::unordered_map<std::int64_t, std::int32_t> segment_vertex;
    segment_vertex.reserve(4096);
    const std::int64_t nvox = static_cast<std::int64_t>(d.nx) * d.ny * d.nz;

    int tet_sign[6];
    for (int t = 0; t < 6; ++t) tet_sign[t] = tet_orientation(kTet[t]);

    double val[8];
    int ci[8], cj[8], ck[8];
    std::int64_t cl[8];
    for (int k = 0; k + 1 < d.nz; ++k) {
        for (int j = 0; j + 1 < d.ny; ++j) {
            for (int i = 0; i + 1 < d.nx; ++i) {
                int below = 0;
                for (int c = 0; c < 8; ++c) {
                    ci[c] = i + kCorner[c][0];
                    cj[c] = j + kCorner[c][1];
                    ck[c] = k + kCorner[c][2];
                    cl[c] = (static_cast<std::int64_t>(ck[c]) * d.ny + cj[c]) * d.nx + ci[c];
                    val[c] = field(ci[c], cj[c], ck[c]);
                    if (val[c] < iso) below |= 1 << c;
                }
                if (below == 0 || below == 0xff) continue;

                // Vertex on the segment between cube corners a and b, with
                // the endpoints put in a fixed global order first so both
                // cells sharing the segment interpolate bit-identically.
                auto vertex_on = [&](int a, int b) {
                    if (cl[a] > cl[b]) std::swap(a, b);
                    std::int64_t key = cl[a] * nvox + cl[b];
                    auto it = segment_vertex.find(key);
                    if (it != segment_vertex.end()) return it->second;
                    WorldPoint p = interp_vertex(field, ci[a], cj[a], ck[a], ci[b], cj[b], ck[b],
                                                 val[a], val[b], iso);
                    auto id = static_cast<std::int32_t>(mesh.vertices.size());
                    mesh.vertices.push_back(p);
                    segment_vertex.emplace(key, id);
                    return id;
                };

                for (int t = 0; t < 6; ++t) {
                    const int* tv = kTet[t];
                    // Tet-local indices of corners below and above the level.
                    int lo[4], hi[4], nlo = 0, nhi = 0;
                    for (int c = 0; c < 4; ++c) {
                        if (below >> tv[c] & 1)
                            lo[nlo++] = c;
                        else
                            hi[nhi++] = c;
                    }
                    if (nlo == 0 || nlo == 4) continue;

                    if (nlo == 1 || nlo == 3) {
                        // One corner is alone on its side; the cut is the
                        // triangle joining the three segments at that apex.
                        int apex = (nlo == 1) ? lo[0] : hi[0];
                        const int* oth = (nlo == 1) ? hi : lo;
                        int perm[4] = {apex, oth[0], oth[1], oth[2]};
                        bool positive = tet_sign[t] * parity4(perm) > 0;
                        std::int32_t p0 = vertex_on(tv[apex], tv[oth[0]]);
                        std::int32_t p1 = vertex_on(tv[apex], tv[oth[1]]);
                        std::int32_t p2 = vertex_on(tv[apex], tv[oth[2]]);
                        // Wind so normals leave the above-iso region.
                        if (positive == (nlo == 1))
                            mesh.triangles.push_back({p0, p2, p1});
                        else
                            mesh.triangles.push_back({p0, p1, p2});
                    } else {
                        // Two against two: the cut is a quad over the four
                        // crossed segments, split along a fixed diagonal.
                        int perm[4] = {lo[0], lo[1], hi[0], hi[1]};
                        bool positive = tet_sign[t] * parity4(perm) > 0;
                        std::int32_t ac = vertex_on(tv[lo[0]], tv[hi[0]]);
                        std::int32_t ad = vertex_on(tv[lo[0]], tv[hi[1]]);
                        std::int32_t bd = vertex_on(tv[lo[1]], tv[hi[1]]);
                        std::int32_t bc = vertex_on(tv[lo[1]], tv[hi[0]]);
                        if (positive) {
                            mesh.triangles.push_back({ac, bc, bd});
                            mesh.triangles.push_back({ac, bd, ad});
                        } else {
                            mesh.triangles.push_back({ac, ad, bd});
                            mesh.triangles.push_back({ac, bd, bc});
                        }
                    }
                }
            }
        }
    }

    if (mesh.triangles.empty()) throw input_error("no isosurface at the requested level");
    return mesh;
}

double surface_area(const TriangleMesh& mesh) {
    double area = 0.0;
    for (const auto& t : mesh.triangles)
        area += tri_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    return area;
}

double signed_volume(const TriangleMesh& mesh) {
    double vol = 0.0;
    for (const auto& t : mesh.triangles) {
        const WorldPoint& a = mesh.vertices[t[0]];
        const WorldPoint& b = mesh.vertices[t[1]];
        const WorldPoint& c = mesh.vertices[t[2]];
        vol += a.x * (b.y * c.z - b.z * c.y) + a.y * (b.z * c.x - b.x * c.z) +
               a.z * (b.x * c.y - b.y * c.x);
    }
    return vol / 6.0;
}

bool is_watertight(const TriangleMesh& mesh) {
    if (mesh.triangles.empty()) return false;
    std::unordered_map<std::uint64_t, int> edge_use;
    edge_use.reserve(mesh.triangles.size() * 3);
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            std::uint32_t a = static_cast<std::uint32_t>(t[e]);
            std::uint32_t b = static_cast<std::uint32_t>(t[(e + 1) % 3]);
            if (a > b) std::swap(a, b);
            ++edge_use[(static_cast<std::uint64_t>(a) << 32) | b];
        }
    }
    for (const auto& [key, count] : edge_use) {
        (void)key;
        if (count != 2) return false;
    }
    return true;
}

TriangleMesh laplacian_smooth(const TriangleMesh& mesh, double lambda, int passes) {
    if (passes <= 0 || mesh.vertices.empty()) return mesh;
    std::vector<std::vector<std::int32_t>> nbr(mesh.vertices.size());
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            std::int32_t a = t[e], b = t[(e + 1) % 3];
            nbr[a].push_back(b);
            nbr[b].push_back(a);
        }
    }
    for (auto& n : nbr) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }

    TriangleMesh out = mesh;
    std::vector<WorldPoint> next(out.vertices.size());
    for (int p = 0; p < passes; ++p) {
        for (std::size_t v = 0; v < out.vertices.size(); ++v) {
            if (nbr[v].empty()) {
                next[v] = out.vertices[v];
                continue;
            }
            WorldPoint m{0, 0, 0};
            for (std::int32_t n : nbr[v]) {
                m.x += out.vertices[n].x;
                m.y += out.vertices[n].y;
                m.z += out.vertices[n].z;
            }
            double inv = 1.0 / static_cast<double>(nbr[v].size());
            const WorldPoint& c = out.vertices[v];
            next[v] = {c.x + lambda * (m.x * inv - c.x), c.y + lambda * (m.y * inv - c.y),
                       c.z + lambda * (m.z * inv - c.z)};
        }
        out.vertices.swap(next);
    }
    return out;
}

namespace {

void put_f32(std::ofstream& os, float f) {
    os.write(reinterpret_cast<const char*>(&f), 4);
}

} // namespace

void write_stl_binary(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw input_error("cannot open '" + path + "' for writing");

    char header[80] = {};
    std::string tag = "binary mesh: " + (mesh.label.empty() ? std::string("surface") : mesh.label);
    std::memcpy(header, tag.data(), std::min<std::size_t>(tag.size(), 79));
    os.write(header, 80);
    std::uint32_t n = static_cast<std::uint32_t>(mesh.triangles.size());
    os.write(reinterpret_cast<const char*>(&n), 4);

    for (const auto& t : mesh.triangles) {
        const WorldPoint& a = mesh.vertices[t[0]];
        const WorldPoint& b = mesh.vertices[t[1]];
        const WorldPoint& c = mesh.vertices[t[2]];
        double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
        double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
        double nx = uy * vz - uz * vy, ny = uz * vx - ux * vz, nz = ux * vy - uy * vx;
        double len = std::sqrt(nx * nx + ny * ny + nz * nz);
        if (len > 0) {
            nx /= len;
            ny /= len;
            nz /= len;
        }
        put_f32(os, static_cast<float>(nx));
        put_f32(os, static_cast<float>(ny));
        put_f32(os, static_cast<float>(nz));
        for (const WorldPoint* p : {&a, &b, &c}) {
            put_f32(os, static_cast<float>(p->x));
            put_f32(os, static_cast<float>(p->y));
            put_f32(os, static_cast<float>(p->z));
        }
        std::uint16_t attr = 0;
        os.write(reinterpret_cast<const char*>(&attr), 2);
    }
    if (!os) throw input_error("failed while writing '" + path + "'");
}

void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot open '" + path + "' for writing");
    os << "# " << (mesh.label.empty() ? std::string("surface") : mesh.label) << "\n";
    os.precision(9);
    for (const auto& v : mesh.vertices) os << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& t : mesh.triangles)
        os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!os) throw input_error("failed while writing '" + path + "'");
}

void write_ply_ascii(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot open '" + path + "' for writing");
    os << "ply\nformat ascii 1.0\n";
    os << "comment " << (mesh.label.empty() ? std::string("surface") : mesh.label) << "\n";
    os << "element vertex " << mesh.vertices.size() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    os << "element face " << mesh.triangles.size() << "\n";
    os << "property list uchar int vertex_indices\nend_header\n";
    os.precision(17);
    for (const auto& v : mesh.vertices) os << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& t : mesh.triangles) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
    if (!os) throw input_error("failed while writing '" + path + "'");
}

void write_mesh(const TriangleMesh& mesh, const std::string& path) {
    std::string ext = lower_ext(path);
    if (ext == "stl")
        write_stl_binary(mesh, path);
    else if (ext == "obj")
        write_obj(mesh, path);
    else if (ext == "ply")
        write_ply_ascii(mesh, path);
    else
        throw input_error("unsupported mesh format '." + ext + "' (use .stl, .obj, or .ply)");
}

TriangleMesh import_stl_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open '" + path + "'");
    char header[80];
    if (!is.read(header, 80)) throw input_error("'" + path + "' is not a binary STL (short header)");
    std::uint32_t n = 0;
    if (!is.read(reinterpret_cast<char*>(&n), 4))
        throw input_error("'" + path + "' is not a binary STL (missing count)");

    TriangleMesh mesh;
    struct Key {
        float x, y, z;
        bool operator==(const Key& o) const { return x == o.x && y == o.y && z == o.z; }
    };
    struct KeyHash {
        std::size_t operator()(const Key& k) const {
            std::uint32_t a, b, c;
            std::memcpy(&a, &k.x, 4);
            std::memcpy(&b, &k.y, 4);
            std::memcpy(&c, &k.z, 4);
            std::uint64_t h = a;
            h = h * 1000003u ^ b;
            h = h * 1000003u ^ c;
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_map<Key, std::int32_t, KeyHash> weld;
    weld.reserve(n * 2);

    for (std::uint32_t t = 0; t < n; ++t) {
        float rec[12];
        std::uint16_t attr;
        if (!is.read(reinterpret_cast<char*>(rec), 48) ||
            !is.read(reinterpret_cast<char*>(&attr), 2))
            throw input_error("'" + path + "' is truncated at facet " + std::to_string(t));
        std::array<std::int32_t, 3> tri{};
        for (int v = 0; v < 3; ++v) {
            Key k{rec[3 + 3 * v], rec[4 + 3 * v], rec[5 + 3 * v]};
            auto it = weld.find(k);
            if (it == weld.end()) {
                it = weld.emplace(k, static_cast<std::int32_t>(mesh.vertices.size())).first;
                mesh.vertices.push_back(
                    {static_cast<double>(k.x), static_cast<double>(k.y), static_cast<double>(k.z)});
            }
            tri[v] = it->second;
        }
        mesh.triangles.push_back(tri);
    }
    return mesh;
}

} // namespace corseg
