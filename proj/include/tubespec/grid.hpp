#pragma once

#include <array>
#include <string>
#include <vector>

#include "tubespec/types.hpp"

namespace tubespec {

enum class ShapeKind { Interval, Rectangle, Disk, PolygonMask };

std::string to_string(ShapeKind kind);

// Masked uniform lattice covering a cross section. Lattice nodes sit at
// x0 + i*h, y0 + j*h. Unknowns are the nodes strictly inside the shape;
// everything else carries the Dirichlet value 0.
//
// Directions are ordered +x, -x, +y, -y. For every unknown, dist[k][dir] is
// h when the neighbour in that direction is an unknown, otherwise the
// distance to the boundary crossing along that lattice line.
struct GridDomain {
    int dim = 1;
    double h = 0.0;
    ShapeKind kind = ShapeKind::Interval;
    std::string descriptor;

    int nx = 0;
    int ny = 1;
    double x0 = 0.0;
    double y0 = 0.0;

    std::vector<char> mask;
    std::vector<int> index;
    std::vector<int> ix;
    std::vector<int> iy;
    std::vector<std::array<double, 4>> dist;

    int size() const { return static_cast<int>(ix.size()); }
    double cell() const { return dim == 1 ? h : h * h; }
    double x(int k) const { return x0 + ix[k] * h; }
    double y(int k) const { return y0 + iy[k] * h; }
    int neighbor(int k, int dir) const;

    double dot(const Vec& u, const Vec& v) const { return cell() * u.dot(v); }
    double norm(const Vec& u) const;
    bool grid_aligned() const;
};

GridDomain make_interval(double a, double b, double h);
GridDomain make_rectangle(double ax, double bx, double ay, double by, double h);
GridDomain make_disk(double radius, double h);

// Mask rows are listed top (largest y) first, 1 = inside. The lattice is
// centred on the origin.
GridDomain make_polygon_mask(int nx, int ny, const std::vector<char>& rows, double h);

// Text format: first line "nx ny [h]", then ny rows of nx digits 0/1
// (whitespace between digits optional). h defaults to 1/(max(nx,ny)+1)*2.
GridDomain read_mask_file(const std::string& path);
void write_mask_file(const GridDomain& domain, const std::string& path);

// Shape descriptors used by configs: "interval", "square", "disk",
// "rectangle:ax:bx:ay:by", "mask:<path>".
GridDomain make_domain(const std::string& descriptor, double h);

void check_domain(const GridDomain& domain);

}  // namespace tubespec
