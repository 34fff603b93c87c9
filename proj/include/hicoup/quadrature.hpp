#ifndef HICOUP_QUADRATURE_HPP
#define HICOUP_QUADRATURE_HPP

#include "hicoup/geometry.hpp"

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hicoup::quad {

/// Gauss-Legendre rule on [0, 1].
struct Rule1D {
    std::vector<double> x;
    std::vector<double> w;
};

inline Rule1D compute_gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    Rule1D r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged node
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        r.x[i] = 0.5 * (1.0 - z);
        r.x[n - 1 - i] = 0.5 * (1.0 + z);
        r.w[i] = r.w[n - 1 - i] = 0.5 * w;
    }
    return r;
}

inline constexpr int kMaxOrder = 32;

/// Cached rule for orders 1..kMaxOrder.
inline const Rule1D& gauss_legendre(int n) {
    static const std::vector<Rule1D> table = [] {
        std::vector<Rule1D> t(kMaxOrder + 1);
        for (int k = 1; k <= kMaxOrder; ++k) t[k] = compute_gauss_legendre(k);
        return t;
    }();
    if (n < 1 || n > kMaxOrder) throw std::invalid_argument("gauss_legendre: unsupported order");
    return table[n];
}

/// Points on the reference triangle {0 <= t <= s <= 1} (area 1/2).
struct TriangleRule {
    std::vector<std::array<double, 2>> st;
    std::vector<double> w;  // weights sum to 1/2
};

/// Collapsed (Duffy) Gauss rule with order^2 points, exact for degree 2*order-1.
inline TriangleRule compute_triangle_rule(int order) {
    const Rule1D& g = gauss_legendre(order);
    TriangleRule r;
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j) {
            r.st.push_back({g.x[i], g.x[i] * g.x[j]});
            r.w.push_back(g.w[i] * g.w[j] * g.x[i]);
        }
    return r;
}

inline const TriangleRule& triangle_rule(int order) {
    static const std::vector<TriangleRule> table = [] {
        std::vector<TriangleRule> t(kMaxOrder + 1);
        for (int k = 1; k <= kMaxOrder; ++k) t[k] = compute_triangle_rule(k);
        return t;
    }();
    if (order < 1 || order > kMaxOrder) throw std::invalid_argument("triangle_rule: unsupported order");
    return table[order];
}

/// Barycentric weights of the reference-triangle vertices at (s, t).
inline std::array<double, 3> triangle_shape(double s, double t) { return {1.0 - s, s - t, t}; }

/// Rule on the reference tetrahedron {0 <= z <= y <= x <= 1}-free form: returns barycentric
/// coordinates and weights summing to 1 (volume-normalised), via collapsed Gauss.
struct TetRule {
    std::vector<std::array<double, 4>> bary;
    std::vector<double> w;
};

inline TetRule compute_tet_rule(int order) {
    const Rule1D& g = gauss_legendre(order);
    TetRule r;
    for (int i = 0; i < order; ++i)
        for (int j = 0; j < order; ++j)
            for (int k = 0; k < order; ++k) {
                const double a = g.x[i], b = g.x[j], c = g.x[k];
                // Duffy: x = a, y = a b, z = a b c on {1 >= x >= y >= z >= 0}, jacobian a^2 b
                const double x = a, y = a * b, z = a * b * c;
                r.bary.push_back({1.0 - x, x - y, y - z, z});
                r.w.push_back(6.0 * g.w[i] * g.w[j] * g.w[k] * a * a * b);
            }
    return r;
}

inline const TetRule& tet_rule(int order) {
    static std::mutex mutex;
    static std::map<int, TetRule> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, compute_tet_rule(order)).first;
    return it->second;
}

// ---------------------------------------------------------------------------------------
// Regularising coordinate transforms for singular panel pairs.
//
// Both panels are parametrised over the reference triangle {0 <= t <= s <= 1}. For an
// edge-adjacent pair the common edge is (0,0)-(1,0) in both parametrisations, for a
// vertex-adjacent pair the common vertex is (0,0). The integrand is evaluated at the
// returned reference points; weights include the transform Jacobians, and the integral
// over T x T equals the weighted sum (times the two panel Jacobians 2|T1|, 2|T2|).
// ---------------------------------------------------------------------------------------

enum class PairRelation { identical, edge, vertex, separate };

struct PairPoint {
    double xs, xt, ys, yt;
    double w;
};

inline std::vector<PairPoint> compute_singular_rule(PairRelation rel, int order) {
    const Rule1D& g = gauss_legendre(order);
    std::vector<PairPoint> pts;
    const int n = order;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    const double xi = g.x[a], e1 = g.x[b], e2 = g.x[c], e3 = g.x[d];
                    const double w0 = g.w[a] * g.w[b] * g.w[c] * g.w[d];
                    switch (rel) {
                        case PairRelation::identical: {
                            const double w = w0 * xi * xi * xi * e1 * e1 * e2;
                            pts.push_back({xi, xi * (1 - e1 + e1 * e2), xi * (1 - e1 * e2 * e3),
                                           xi * (1 - e1), w});
                            pts.push_back({xi * (1 - e1 * e2 * e3), xi * (1 - e1), xi,
                                           xi * (1 - e1 + e1 * e2), w});
                            pts.push_back({xi, xi * e1 * (1 - e2 + e2 * e3), xi * (1 - e1 * e2),
                                           xi * e1 * (1 - e2), w});
                            pts.push_back({xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi,
                                           xi * e1 * (1 - e2 + e2 * e3), w});
                            pts.push_back({xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi,
                                           xi * e1 * (1 - e2), w});
                            pts.push_back({xi, xi * e1 * (1 - e2), xi * (1 - e1 * e2 * e3),
                                           xi * e1 * (1 - e2 * e3), w});
                            break;
                        }
                        case PairRelation::edge: {
                            const double w = w0 * xi * xi * xi * e1 * e1;
                            pts.push_back({xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2), w});
                            pts.push_back({xi, xi * e1, xi * (1 - e1 * e2 * e3),
                                           xi * e1 * e2 * (1 - e3), w * e2});
                            pts.push_back({xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi,
                                           xi * e1 * e2 * e3, w * e2});
                            pts.push_back({xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi,
                                           xi * e1, w * e2});
                            pts.push_back({xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi,
                                           xi * e1 * e2, w * e2});
                            break;
                        }
                        case PairRelation::vertex: {
                            const double w = w0 * xi * xi * xi * e2;
                            pts.push_back({xi, xi * e1, xi * e2, xi * e2 * e3, w});
                            pts.push_back({xi * e2, xi * e2 * e3, xi, xi * e1, w});
                            break;
                        }
                        case PairRelation::separate:
                            throw std::invalid_argument("singular rule requested for separate pair");
                    }
                }
    return pts;
}

inline const std::vector<PairPoint>& singular_rule(PairRelation rel, int order) {
    static std::mutex mutex;
    static std::map<std::pair<int, int>, std::vector<PairPoint>> cache;
    std::lock_guard lock(mutex);
    const auto key = std::make_pair(static_cast<int>(rel), order);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, compute_singular_rule(rel, order)).first;
    return it->second;
}

}  // namespace hicoup::quad

#endif
