#include "lur/geometry.hpp"
#include "lur/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace lur;
using namespace lur::geo;

namespace {

// Crossing-number point-in-polygon, written independently of the library.
bool inside_ref(const Ring &ring, const Point &p) {
    bool in = false;
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
        const Point &a = ring[i], &b = ring[j];
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) in = !in;
    }
    return in;
}

} // namespace

TEST_CASE("chord through a disk matches 2 sqrt(r^2 - d^2)") {
    Rng rng(11);
    for (int t = 0; t < 500; ++t) {
        const double r = rng.uniform(1.0, 500.0);
        const double d = rng.uniform(0.0, 0.999) * r;
        const double theta = rng.uniform(0.0, 2.0 * M_PI);
        const Point c{rng.uniform(-1e4, 1e4), rng.uniform(-1e4, 1e4)};
        // Line at perpendicular distance d from c, long enough to cross the whole disk.
        const Point n{std::cos(theta), std::sin(theta)};
        const Point dir{-n.y, n.x};
        const Point foot{c.x + d * n.x, c.y + d * n.y};
        const Point a{foot.x - 3 * r * dir.x, foot.y - 3 * r * dir.y};
        const Point b{foot.x + 3 * r * dir.x, foot.y + 3 * r * dir.y};
        CHECK(clipped_length(a, b, c, r) == doctest::Approx(2.0 * std::sqrt(r * r - d * d)).epsilon(1e-9));
    }
}

TEST_CASE("clipped length of segments ending inside the disk") {
    const Point c{0, 0};
    CHECK(clipped_length({0, 0}, {3, 0}, c, 10) == doctest::Approx(3.0));
    CHECK(clipped_length({0, 0}, {30, 0}, c, 10) == doctest::Approx(10.0));
    CHECK(clipped_length({20, 0}, {30, 0}, c, 10) == 0.0);
    CHECK(clipped_length({-5, 10}, {5, 10}, c, 10) == 0.0); // tangent
    const Polyline l{{{-20, 0}, {0, 0}, {0, 20}}};
    CHECK(clipped_length(l, c, 10) == doctest::Approx(20.0));
    CHECK(length(l) == doctest::Approx(40.0));
}

TEST_CASE("point to segment distance") {
    CHECK(distance_to_segment({0, 5}, {-1, 0}, {1, 0}) == doctest::Approx(5.0));
    CHECK(distance_to_segment({4, 4}, {-1, 0}, {1, 0}) == doctest::Approx(5.0));
    CHECK(distance_to_segment({0, 0}, {-1, 0}, {1, 0}) == 0.0);
}

TEST_CASE("containment agrees with a crossing-number reference on random polygons") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        Ring ring;
        const int k = 5 + static_cast<int>(rng.below(20));
        for (int i = 0; i < k; ++i) {
            const double a = 2 * M_PI * i / k;
            const double r = rng.uniform(20, 100);
            ring.push_back({r * std::cos(a), r * std::sin(a)});
        }
        ring.push_back(ring.front());
        const Polygon poly{{ring}};
        for (int q = 0; q < 200; ++q) {
            const Point p{rng.uniform(-110, 110), rng.uniform(-110, 110)};
            double edge = 1e300;
            for (std::size_t i = 0; i + 1 < ring.size(); ++i) edge = std::min(edge, distance_to_segment(p, ring[i], ring[i + 1]));
            if (edge < 1e-9) continue;
            CHECK(contains(poly, p) == inside_ref(ring, p));
            const Geometry g{poly};
            if (inside_ref(ring, p)) {
                CHECK(distance(p, g) == 0.0);
            } else {
                CHECK(distance(p, g) == doctest::Approx(edge).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("holes are excluded from containment and area") {
    const Ring outer{{0, 0}, {10, 0}, {10, 10}, {0, 10}, {0, 0}};
    const Ring hole{{4, 4}, {6, 4}, {6, 6}, {4, 6}, {4, 4}};
    const Polygon p{{outer, hole}};
    CHECK(area(p) == doctest::Approx(96.0));
    CHECK(signed_area(outer) == doctest::Approx(100.0));
    CHECK(contains(p, {1, 1}));
    CHECK_FALSE(contains(p, {5, 5}));
    CHECK(contains(p, {0, 5})); // on the edge
    CHECK(distance({5, 5}, Geometry{p}) == doctest::Approx(1.0));
}

TEST_CASE("box intersection") {
    const BBox box{0, 0, 10, 10};
    CHECK(segment_intersects_box({-5, 5}, {15, 5}, box));
    CHECK_FALSE(segment_intersects_box({-5, -5}, {-1, 20}, box));
    CHECK(segment_intersects_box({-5, 15}, {15, -5}, box));
    CHECK(intersects(Geometry{Point{10, 10}}, box));
    const Polygon around{{{{-100, -100}, {100, -100}, {100, 100}, {-100, 100}, {-100, -100}}}};
    CHECK(intersects(Geometry{around}, box)); // box wholly inside polygon
    const BBox b = bounds(Geometry{Polyline{{{1, 2}, {-3, 7}}}});
    CHECK(b.min_x == -3);
    CHECK(b.max_y == 7);
}
