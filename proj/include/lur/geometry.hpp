#pragma once

#include <cmath>
#include <span>
#include <variant>
#include <vector>

namespace lur::geo {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point &, const Point &) = default;
};

struct BBox {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    bool contains(const Point &p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    bool intersects(const BBox &o) const {
        return !(o.min_x > max_x || o.max_x < min_x || o.min_y > max_y || o.max_y < min_y);
    }
    void expand(const Point &p);
    void expand(const BBox &b);
    static BBox empty();
};

/// Open polyline, at least two vertices, every segment of nonzero length.
struct Polyline {
    std::vector<Point> vertices;
};

/// A closed ring repeats its first vertex at the end.
using Ring = std::vector<Point>;

/// rings[0] is the exterior ring; any further rings are holes.
struct Polygon {
    std::vector<Ring> rings;
};

using Geometry = std::variant<Point, Polyline, Polygon>;

inline double distance(const Point &a, const Point &b) { return std::hypot(a.x - b.x, a.y - b.y); }

double distance_to_segment(const Point &p, const Point &a, const Point &b);

/// Even-odd rule over all rings. Points exactly on an edge count as inside.
bool contains(const Polygon &poly, const Point &p);

/// Exact Euclidean distance; 0 for points inside a polygon.
double distance(const Point &p, const Geometry &g);

/// Length of segment [a, b] that lies inside the open disk (center, radius).
double clipped_length(const Point &a, const Point &b, const Point &center, double radius);

/// Total length of a polyline inside the open disk.
double clipped_length(const Polyline &line, const Point &center, double radius);

double length(const Polyline &line);

/// Signed shoelace area of a ring (positive for counter-clockwise).
double signed_area(const Ring &ring);

/// Area of exterior minus holes.
double area(const Polygon &poly);

bool segment_intersects_box(const Point &a, const Point &b, const BBox &box);

/// Exact geometry/box intersection test (closed box).
bool intersects(const Geometry &g, const BBox &box);

BBox bounds(const Geometry &g);

} // namespace lur::geo
