#include "lur/geometry.hpp"

#include <algorithm>
#include <limits>

namespace lur::geo {

void BBox::expand(const Point &p) {
    min_x = std::min(min_x, p.x);
    min_y = std::min(min_y, p.y);
    max_x = std::max(max_x, p.x);
    max_y = std::max(max_y, p.y);
}

void BBox::expand(const BBox &b) {
    min_x = std::min(min_x, b.min_x);
    min_y = std::min(min_y, b.min_y);
    max_x = std::max(max_x, b.max_x);
    max_y = std::max(max_y, b.max_y);
}

BBox BBox::empty() {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {inf, inf, -inf, -inf};
}

double distance_to_segment(const Point &p, const Point &a, const Point &b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 == 0.0) {
        return distance(p, a);
    }
    double t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

namespace {

bool on_segment(const Point &p, const Point &a, const Point &b) {
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross != 0.0) {
        return false;
    }
    return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
           p.y <= std::max(a.y, b.y);
}

double min_ring_distance(const Ring &ring, const Point &p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        best = std::min(best, distance_to_segment(p, ring[i], ring[i + 1]));
    }
    return best;
}

} // namespace

bool contains(const Polygon &poly, const Point &p) {
    bool inside = false;
    for (const auto &ring : poly.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            const Point &a = ring[i];
            const Point &b = ring[i + 1];
            if (on_segment(p, a, b)) {
                return true;
            }
            if ((a.y > p.y) != (b.y > p.y)) {
                const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if (p.x < x_cross) {
                    inside = !inside;
                }
            }
        }
    }
    return inside;
}

double distance(const Point &p, const Geometry &g) {
    if (const auto *pt = std::get_if<Point>(&g)) {
        return distance(p, *pt);
    }
    if (const auto *line = std::get_if<Polyline>(&g)) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < line->vertices.size(); ++i) {
            best = std::min(best, distance_to_segment(p, line->vertices[i], line->vertices[i + 1]));
        }
        return best;
    }
    const auto &poly = std::get<Polygon>(g);
    if (contains(poly, p)) {
        return 0.0;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto &ring : poly.rings) {
        best = std::min(best, min_ring_distance(ring, p));
    }
    return best;
}

double clipped_length(const Point &a, const Point &b, const Point &center, double radius) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double fx = a.x - center.x;
    const double fy = a.y - center.y;
    const double qa = dx * dx + dy * dy;
    if (qa == 0.0 || radius <= 0.0) {
        return 0.0;
    }
    const double qb = 2.0 * (fx * dx + fy * dy);
    const double qc = fx * fx + fy * fy - radius * radius;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) {
        return 0.0; // misses or touches the circle
    }
    const double sq = std::sqrt(disc);
    // Numerically stable root pair.
    const double q = -0.5 * (qb + std::copysign(sq, qb));
    double t1 = q / qa;
    double t2 = (q != 0.0) ? qc / q : -t1;
    if (t1 > t2) {
        std::swap(t1, t2);
    }
    const double lo = std::max(t1, 0.0);
    const double hi = std::min(t2, 1.0);
    if (hi <= lo) {
        return 0.0;
    }
    return (hi - lo) * std::sqrt(qa);
}

double clipped_length(const Polyline &line, const Point &center, double radius) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i) {
        total += clipped_length(line.vertices[i], line.vertices[i + 1], center, radius);
    }
    return total;
}

double length(const Polyline &line) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i) {
        total += distance(line.vertices[i], line.vertices[i + 1]);
    }
    return total;
}

double signed_area(const Ring &ring) {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        s += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
    }
    return 0.5 * s;
}

double area(const Polygon &poly) {
    if (poly.rings.empty()) {
        return 0.0;
    }
    double a = std::abs(signed_area(poly.rings.front()));
    for (std::size_t i = 1; i < poly.rings.size(); ++i) {
        a -= std::abs(signed_area(poly.rings[i]));
    }
    return a;
}

bool segment_intersects_box(const Point &a, const Point &b, const BBox &box) {
    // Liang-Barsky clipping against the closed box.
    double t0 = 0.0;
    double t1 = 1.0;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - box.min_x, box.max_x - a.x, a.y - box.min_y, box.max_y - a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) {
                return false;
            }
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
        if (t0 > t1) {
            return false;
        }
    }
    return true;
}

bool intersects(const Geometry &g, const BBox &box) {
    if (const auto *pt = std::get_if<Point>(&g)) {
        return box.contains(*pt);
    }
    if (const auto *line = std::get_if<Polyline>(&g)) {
        for (std::size_t i = 0; i + 1 < line->vertices.size(); ++i) {
            if (segment_intersects_box(line->vertices[i], line->vertices[i + 1], box)) {
                return true;
            }
        }
        return false;
    }
    const auto &poly = std::get<Polygon>(g);
    for (const auto &ring : poly.rings) {
        for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
            if (segment_intersects_box(ring[i], ring[i + 1], box)) {
                return true;
            }
        }
    }
    // Box entirely inside the polygon.
    return contains(poly, Point{box.min_x, box.min_y});
}

BBox bounds(const Geometry &g) {
    BBox b = BBox::empty();
    if (const auto *pt = std::get_if<Point>(&g)) {
        b.expand(*pt);
    } else if (const auto *line = std::get_if<Polyline>(&g)) {
        for (const auto &v : line->vertices) {
            b.expand(v);
        }
    } else {
        for (const auto &ring : std::get<Polygon>(g).rings) {
            for (const auto &v : ring) {
                b.expand(v);
            }
        }
    }
    return b;
}

} // namespace lur::geo
