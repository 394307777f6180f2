#include "tubespec/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>

#include "tubespec/errors.hpp"

namespace tubespec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// Nodes closer than this fraction of h to the boundary are dropped from the
// unknowns; the neighbouring stencils then see the boundary at distance
// slightly above h.
constexpr double kMinFraction = 1e-2;

using InsideFn = std::function<bool(double, double)>;
using DistFn = std::function<double(double, double, int)>;

GridDomain build(int dim, ShapeKind kind, std::string descriptor, double h, int nx, int ny,
                 double x0, double y0, const InsideFn& inside, const DistFn& dist) {
    GridDomain d;
    d.dim = dim;
    d.h = h;
    d.kind = kind;
    d.descriptor = std::move(descriptor);
    d.nx = nx;
    d.ny = ny;
    d.x0 = x0;
    d.y0 = y0;
    d.mask.assign(static_cast<size_t>(nx) * ny, 0);
    d.index.assign(static_cast<size_t>(nx) * ny, -1);
    const int ndir = dim == 1 ? 2 : 4;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double x = x0 + i * h;
            const double y = y0 + j * h;
            if (!inside(x, y)) continue;
            bool keep = true;
            for (int dir = 0; dir < ndir; ++dir) {
                if (dist(x, y, dir) < kMinFraction * h) keep = false;
            }
            if (!keep) continue;
            d.mask[static_cast<size_t>(j) * nx + i] = 1;
        }
    }
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            if (!d.mask[static_cast<size_t>(j) * nx + i]) continue;
            d.index[static_cast<size_t>(j) * nx + i] = static_cast<int>(d.ix.size());
            d.ix.push_back(i);
            d.iy.push_back(j);
        }
    }
    d.dist.resize(d.ix.size());
    for (int k = 0; k < d.size(); ++k) {
        for (int dir = 0; dir < 4; ++dir) {
            if (dir >= ndir) {
                d.dist[k][dir] = h;
                continue;
            }
            if (d.neighbor(k, dir) >= 0) {
                d.dist[k][dir] = h;
            } else {
                const double g = dist(d.x(k), d.y(k), dir);
                d.dist[k][dir] = std::isfinite(g) ? std::max(g, kMinFraction * h) : h;
            }
        }
    }
    return d;
}

// Distance from (x, y) to the boundary of [ax,bx]x[ay,by] along a lattice
// direction.
double box_dist(double x, double y, int dir, double ax, double bx, double ay, double by) {
    switch (dir) {
        case 0: return bx - x;
        case 1: return x - ax;
        case 2: return by - y;
        default: return y - ay;
    }
}

int lattice_lo(double a, double h) { return static_cast<int>(std::floor(a / h)) - 1; }
int lattice_hi(double b, double h) { return static_cast<int>(std::ceil(b / h)) + 1; }

}  // namespace

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Interval: return "interval";
        case ShapeKind::Rectangle: return "rectangle";
        case ShapeKind::Disk: return "disk";
        case ShapeKind::PolygonMask: return "polygon-mask";
    }
    return "unknown";
}

int GridDomain::neighbor(int k, int dir) const {
    const int i = ix[k] + kDx[dir];
    const int j = iy[k] + kDy[dir];
    if (i < 0 || i >= nx || j < 0 || j >= ny) return -1;
    return index[static_cast<size_t>(j) * nx + i];
}

double GridDomain::norm(const Vec& u) const { return std::sqrt(dot(u, u)); }

bool GridDomain::grid_aligned() const {
    for (const auto& d4 : dist) {
        for (double v : d4) {
            if (std::abs(v - h) > 1e-12 * h) return false;
        }
    }
    return true;
}

GridDomain make_interval(double a, double b, double h) {
    if (!(b > a) || !(h > 0)) throw DomainEmpty("interval needs a < b and h > 0");
    const int lo = lattice_lo(a, h);
    const int hi = lattice_hi(b, h);
    const double tol = 1e-9 * h;
    std::ostringstream desc;
    desc << "interval:" << a << ":" << b;
    auto d = build(
        1, ShapeKind::Interval, desc.str(), h, hi - lo + 1, 1, lo * h, 0.0,
        [=](double x, double) { return x > a + tol && x < b - tol; },
        [=](double x, double, int dir) { return dir == 0 ? b - x : x - a; });
    check_domain(d);
    return d;
}

GridDomain make_rectangle(double ax, double bx, double ay, double by, double h) {
    if (!(bx > ax) || !(by > ay) || !(h > 0)) throw DomainEmpty("degenerate rectangle");
    const int lx = lattice_lo(ax, h), hx = lattice_hi(bx, h);
    const int ly = lattice_lo(ay, h), hy = lattice_hi(by, h);
    const double tol = 1e-9 * h;
    std::ostringstream desc;
    desc << "rectangle:" << ax << ":" << bx << ":" << ay << ":" << by;
    auto d = build(
        2, ShapeKind::Rectangle, desc.str(), h, hx - lx + 1, hy - ly + 1, lx * h, ly * h,
        [=](double x, double y) {
            return x > ax + tol && x < bx - tol && y > ay + tol && y < by - tol;
        },
        [=](double x, double y, int dir) { return box_dist(x, y, dir, ax, bx, ay, by); });
    check_domain(d);
    return d;
}

GridDomain make_disk(double radius, double h) {
    if (!(radius > 0) || !(h > 0)) throw DomainEmpty("disk needs radius > 0 and h > 0");
    const int lo = lattice_lo(-radius, h), hi = lattice_hi(radius, h);
    const double r2 = radius * radius;
    std::ostringstream desc;
    desc << "disk:" << radius;
    auto d = build(
        2, ShapeKind::Disk, desc.str(), h, hi - lo + 1, hi - lo + 1, lo * h, lo * h,
        [=](double x, double y) { return x * x + y * y < r2 * (1 - 1e-12); },
        [=](double x, double y, int dir) {
            const double c = dir < 2 ? y : x;
            const double p = dir < 2 ? x : y;
            const double e = r2 - c * c;
            if (e <= 0) return 0.0;
            const double w = std::sqrt(e);
            return (dir % 2 == 0) ? w - p : p + w;
        });
    check_domain(d);
    return d;
}

GridDomain make_polygon_mask(int nx, int ny, const std::vector<char>& rows, double h) {
    if (nx <= 0 || ny <= 0 || static_cast<int>(rows.size()) != nx * ny) {
        throw DomainEmpty("mask dimensions do not match its contents");
    }
    const double x0 = -0.5 * (nx - 1) * h;
    const double y0 = -0.5 * (ny - 1) * h;
    auto at = [&](int i, int j) -> bool {
        if (i < 0 || i >= nx || j < 0 || j >= ny) return false;
        return rows[static_cast<size_t>(ny - 1 - j) * nx + i] != 0;
    };
    auto idx = [=](double v, double o) { return static_cast<int>(std::lround((v - o) / h)); };
    std::ostringstream desc;
    desc << "mask:" << nx << "x" << ny << ":" << std::hash<std::string>{}(std::string(rows.begin(), rows.end()));
    auto d = build(
        2, ShapeKind::PolygonMask, desc.str(), h, nx, ny, x0, y0,
        [&](double x, double y) { return at(idx(x, x0), idx(y, y0)); },
        [&](double x, double y, int dir) {
            const int i = idx(x, x0) + kDx[dir];
            const int j = idx(y, y0) + kDy[dir];
            return at(i, j) ? kInf : h;
        });
    check_domain(d);
    return d;
}

GridDomain read_mask_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open mask file " + path);
    std::string header;
    std::getline(in, header);
    std::istringstream hs(header);
    int nx = 0, ny = 0;
    double h = 0.0;
    if (!(hs >> nx >> ny)) throw ConfigError("mask header must start with 'nx ny'");
    if (!(hs >> h)) h = 2.0 / (std::max(nx, ny) + 1);
    std::vector<char> rows;
    rows.reserve(static_cast<size_t>(nx) * ny);
    char c;
    while (in.get(c)) {
        if (c == '0' || c == '1') rows.push_back(c == '1');
    }
    if (static_cast<int>(rows.size()) != nx * ny) {
        throw ConfigError("mask file " + path + " has " + std::to_string(rows.size()) +
                          " cells, expected " + std::to_string(nx * ny));
    }
    return make_polygon_mask(nx, ny, rows, h);
}

void write_mask_file(const GridDomain& domain, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write mask file " + path);
    out << domain.nx << " " << domain.ny << " " << domain.h << "\n";
    for (int j = domain.ny - 1; j >= 0; --j) {
        for (int i = 0; i < domain.nx; ++i) {
            out << (domain.mask[static_cast<size_t>(j) * domain.nx + i] ? '1' : '0');
        }
        out << "\n";
    }
}

GridDomain make_domain(const std::string& descriptor, double h) {
    if (descriptor == "interval") return make_interval(-1.0, 1.0, h);
    if (descriptor == "square") return make_rectangle(-1.0, 1.0, -1.0, 1.0, h);
    if (descriptor == "disk") return make_disk(1.0, h);
    if (descriptor.rfind("mask:", 0) == 0) return read_mask_file(descriptor.substr(5));
    if (descriptor.rfind("rectangle:", 0) == 0) {
        std::istringstream is(descriptor.substr(10));
        double v[4];
        char sep;
        if (!(is >> v[0] >> sep >> v[1] >> sep >> v[2] >> sep >> v[3])) {
            throw ConfigError("rectangle descriptor must be rectangle:ax:bx:ay:by");
        }
        return make_rectangle(v[0], v[1], v[2], v[3], h);
    }
    if (descriptor.rfind("disk:", 0) == 0) return make_disk(std::stod(descriptor.substr(5)), h);
    throw ConfigError("unknown cross-section descriptor '" + descriptor + "'");
}

void check_domain(const GridDomain& domain) {
    const int n = domain.size();
    if (n == 0) throw DomainEmpty(domain.descriptor + " has no interior node at h=" + std::to_string(domain.h));
    const int ndir = domain.dim == 1 ? 2 : 4;
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
        const int k = q.front();
        q.pop();
        for (int dir = 0; dir < ndir; ++dir) {
            const int m = domain.neighbor(k, dir);
            if (m >= 0 && !seen[m]) {
                seen[m] = 1;
                ++count;
                q.push(m);
            }
        }
    }
    if (count != n) {
        throw DomainNotConnected(domain.descriptor + ": " + std::to_string(n - count) +
                                 " interior nodes unreachable from the first one");
    }
    if (domain.dim == 1) return;
    // Holes: the complement, padded by one ring, must be 8-connected.
    const int px = domain.nx + 2, py = domain.ny + 2;
    auto outside = [&](int i, int j) {
        if (i <= 0 || j <= 0 || i >= px - 1 || j >= py - 1) return true;
        return domain.mask[static_cast<size_t>(j - 1) * domain.nx + (i - 1)] == 0;
    };
    std::vector<char> vis(static_cast<size_t>(px) * py, 0);
    std::queue<std::pair<int, int>> qq;
    qq.push({0, 0});
    vis[0] = 1;
    long reached = 1, total = 0;
    for (int j = 0; j < py; ++j)
        for (int i = 0; i < px; ++i) total += outside(i, j);
    while (!qq.empty()) {
        auto [i, j] = qq.front();
        qq.pop();
        for (int dj = -1; dj <= 1; ++dj) {
            for (int di = -1; di <= 1; ++di) {
                const int a = i + di, b = j + dj;
                if (a < 0 || b < 0 || a >= px || b >= py) continue;
                if (vis[static_cast<size_t>(b) * px + a] || !outside(a, b)) continue;
                vis[static_cast<size_t>(b) * px + a] = 1;
                ++reached;
                qq.push({a, b});
            }
        }
    }
    if (reached != total) {
        throw DomainNotConnected(domain.descriptor + " is not simply connected (" +
                                 std::to_string(total - reached) + " enclosed exterior nodes)");
    }
}

}  // namespace tubespec
