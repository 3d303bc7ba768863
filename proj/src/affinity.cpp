#include "awnet/affinity.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace awnet {

double AffinityGraph::degree(std::size_t u) const {
    if (u >= n)
        throw invalid_argument_error("degree: voxel index out of range");
    return degree_sums[u];
}

double AffinityGraph::total_weight() const {
    double s = 0.0;
    for (const auto& e : edges) s += e.w;
    return s;
}

AffinityGraph build_affinity(const Volume& v, const AffinityParams& p) {
    if (p.sigma_i <= 0 || p.sigma_x <= 0)
        throw invalid_argument_error("build_affinity: bandwidths must be > 0");
    if (p.radius < 1)
        throw invalid_argument_error("build_affinity: radius must be >= 1");
    const std::size_t n = v.dims.count();
    if (n < 2)
        throw invalid_argument_error("build_affinity: volume must have at least 2 voxels");

    // Half neighborhood: offsets lexicographically above (0,0,0), within the
    // Euclidean cutoff. Each undirected pair is visited exactly once and the
    // resulting edge list comes out sorted by (u, v).
    struct Offset { int dz, dy, dx; double dist2; };
    std::vector<Offset> offsets;
    const int r = p.radius;
    const double r2 = static_cast<double>(r) * r;
    for (int dz = 0; dz <= r; ++dz)
        for (int dy = (dz == 0 ? 0 : -r); dy <= r; ++dy)
            for (int dx = (dz == 0 && dy == 0 ? 1 : -r); dx <= r; ++dx) {
                const double d2 = double(dz) * dz + double(dy) * dy + double(dx) * dx;
                if (d2 <= r2)
                    offsets.push_back({dz, dy, dx, d2});
            }

    const int D = v.dims.d, H = v.dims.h, W = v.dims.w;
    const double inv_si2 = 1.0 / (p.sigma_i * p.sigma_i);
    const double inv_sx2 = 1.0 / (p.sigma_x * p.sigma_x);

    AffinityGraph g;
    g.n = n;
    g.degree_sums.assign(n, 0.0);

    for (int z = 0; z < D; ++z)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const std::size_t u = v.index(z, y, x);
                const double fu = v.data[u];
                for (const auto& o : offsets) {
                    const int zz = z + o.dz, yy = y + o.dy, xx = x + o.dx;
                    if (zz >= D || yy < 0 || yy >= H || xx < 0 || xx >= W)
                        continue;
                    const std::size_t vv = v.index(zz, yy, xx);
                    const double df = fu - v.data[vv];
                    const double w = std::exp(-(df * df) * inv_si2 - o.dist2 * inv_sx2);
                    if (w <= 0.0 || w < p.min_weight)
                        continue;
                    g.edges.push_back({static_cast<std::uint32_t>(u),
                                       static_cast<std::uint32_t>(vv), w});
                    g.degree_sums[u] += w;
                    g.degree_sums[vv] += w;
                }
            }
    return g;
}

void save_graph_text(const AffinityGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw io_error(io_error::kind::open_failed, path.string());
    out << g.n << " " << g.edges.size() << "\n";
    out.precision(17);
    for (const auto& e : g.edges)
        out << e.u << " " << e.v << " " << e.w << "\n";
    if (!out)
        throw io_error(io_error::kind::write_failed, path.string());
}

namespace {

template <typename T>
void put_raw(std::ofstream& out, const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
void get_raw(std::ifstream& in, T& x) {
    in.read(reinterpret_cast<char*>(&x), sizeof(T));
}

} // namespace

void save_graph(const AffinityGraph& g, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error(io_error::kind::open_failed, path.string());
    out.write("AG31", 4);
    put_raw(out, std::uint32_t{1});
    put_raw(out, static_cast<std::uint64_t>(g.n));
    put_raw(out, static_cast<std::uint64_t>(g.edges.size()));
    for (const auto& e : g.edges) {
        put_raw(out, e.u);
        put_raw(out, e.v);
        put_raw(out, e.w);
    }
    if (!out)
        throw io_error(io_error::kind::write_failed, path.string());
}

AffinityGraph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error(io_error::kind::open_failed, path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "AG31", 4) != 0)
        throw io_error(io_error::kind::bad_magic, path.string());
    std::uint32_t version = 0;
    get_raw(in, version);
    if (!in || version != 1)
        throw io_error(io_error::kind::bad_version, path.string());
    std::uint64_t n = 0, m = 0;
    get_raw(in, n);
    get_raw(in, m);
    if (!in)
        throw io_error(io_error::kind::bad_header, path.string());
    AffinityGraph g;
    g.n = static_cast<std::size_t>(n);
    g.edges.resize(static_cast<std::size_t>(m));
    g.degree_sums.assign(g.n, 0.0);
    for (auto& e : g.edges) {
        get_raw(in, e.u);
        get_raw(in, e.v);
        get_raw(in, e.w);
    }
    if (!in)
        throw io_error(io_error::kind::truncated, path.string());
    // Degrees accumulate in stored edge order, matching build order bit-exactly.
    for (const auto& e : g.edges) {
        if (e.u >= g.n || e.v >= g.n)
            throw io_error(io_error::kind::bad_header, path.string() + ": edge index out of range");
        g.degree_sums[e.u] += e.w;
        g.degree_sums[e.v] += e.w;
    }
    return g;
}

} // namespace awnet
