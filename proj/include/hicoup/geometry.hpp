#ifndef HICOUP_GEOMETRY_HPP
#define HICOUP_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace hicoup {

using Vec3 = Eigen::Vector3d;

/// Axis-parallel box [lo, hi].
struct Box {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());

    static Box centered(const Vec3& center, double side) {
        Box b;
        b.lo = center - Vec3::Constant(0.5 * side);
        b.hi = center + Vec3::Constant(0.5 * side);
        return b;
    }

    bool empty() const { return (hi.array() < lo.array()).any(); }

    void extend(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }

    void extend(const Box& other) {
        if (other.empty()) return;
        lo = lo.cwiseMin(other.lo);
        hi = hi.cwiseMax(other.hi);
    }

    bool contains(const Vec3& p, double tol = 0.0) const {
        return (p.array() >= lo.array() - tol).all() && (p.array() <= hi.array() + tol).all();
    }

    bool contains(const Box& other, double tol = 0.0) const {
        return contains(other.lo, tol) && contains(other.hi, tol);
    }

    Vec3 center() const { return 0.5 * (lo + hi); }
    Vec3 extent() const { return hi - lo; }
    double diameter() const { return empty() ? 0.0 : extent().norm(); }

    int longest_axis() const {
        int axis = 0;
        extent().maxCoeff(&axis);
        return axis;
    }
};

/// Euclidean distance between two axis-parallel boxes (0 if they intersect).
inline double distance(const Box& a, const Box& b) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double gap = std::max({0.0, a.lo[k] - b.hi[k], b.lo[k] - a.hi[k]});
        s += gap * gap;
    }
    return std::sqrt(s);
}

inline bool intersects(const Box& a, const Box& b) {
    return (a.lo.array() <= b.hi.array()).all() && (b.lo.array() <= a.hi.array()).all();
}

/// A flat triangle with cached normal and area.
struct Triangle {
    std::array<Vec3, 3> v;
    Vec3 normal;  // unit, oriented by vertex order
    double area = 0.0;

    Triangle() = default;
    Triangle(const Vec3& a, const Vec3& b, const Vec3& c) : v{a, b, c} {
        const Vec3 n = (b - a).cross(c - a);
        area = 0.5 * n.norm();
        normal = n / n.norm();
    }

    Vec3 centroid() const { return (v[0] + v[1] + v[2]) / 3.0; }

    double diameter() const {
        return std::max({(v[1] - v[0]).norm(), (v[2] - v[1]).norm(), (v[0] - v[2]).norm()});
    }

    Box bbox() const {
        Box b;
        for (const auto& p : v) b.extend(p);
        return b;
    }

    /// Point for reference coordinates on {0 <= t <= s <= 1}: v0 + s(v1-v0) + t(v2-v1).
    Vec3 map(double s, double t) const { return v[0] + s * (v[1] - v[0]) + t * (v[2] - v[1]); }
};

/// Distance from a point to a triangle (closest point by region classification).
inline double point_triangle_distance(const Vec3& p, const Triangle& tri) {
    const Vec3& a = tri.v[0];
    const Vec3& b = tri.v[1];
    const Vec3& c = tri.v[2];
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return ap.norm();
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return bp.norm();
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return (p - (a + ab * (d1 / (d1 - d3)))).norm();
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return cp.norm();
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return (p - (a + ac * (d2 / (d2 - d6)))).norm();
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
        return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
    const double denom = 1.0 / (va + vb + vc);
    return (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm();
}

/// Signed solid angle subtended by a triangle at x (Van Oosterom-Strackee).
/// Positive when x lies on the side the normal points away from.
inline double solid_angle(const Vec3& x, const Triangle& tri) {
    const Vec3 r1 = tri.v[0] - x, r2 = tri.v[1] - x, r3 = tri.v[2] - x;
    const double l1 = r1.norm(), l2 = r2.norm(), l3 = r3.norm();
    const double num = r1.dot(r2.cross(r3));
    const double den = l1 * l2 * l3 + r1.dot(r2) * l3 + r1.dot(r3) * l2 + r2.dot(r3) * l1;
    return 2.0 * std::atan2(num, den);
}

}  // namespace hicoup

#endif
