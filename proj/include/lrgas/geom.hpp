#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "lrgas/errors.hpp"

namespace lrgas {

/// Euclidean vector in dimension D. The library is written against this
/// template; the shipped geometry kernels instantiate D = 2.
template <int D>
struct Vec {
    std::array<double, D> c{};

    double& operator[](int i) { return c[i]; }
    double operator[](int i) const { return c[i]; }

    Vec operator+(const Vec& o) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.c[i] = c[i] + o.c[i];
        return r;
    }
    Vec operator-(const Vec& o) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.c[i] = c[i] - o.c[i];
        return r;
    }
    Vec operator*(double s) const {
        Vec r;
        for (int i = 0; i < D; ++i) r.c[i] = c[i] * s;
        return r;
    }
    Vec operator-() const { return (*this) * -1.0; }
    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < D; ++i) c[i] += o.c[i];
        return *this;
    }
    bool operator==(const Vec& o) const { return c == o.c; }
};

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += a.c[i] * b.c[i];
    return s;
}

template <int D>
inline double norm2(const Vec<D>& a) { return dot(a, a); }

template <int D>
inline double norm(const Vec<D>& a) { return std::sqrt(norm2(a)); }

template <int D>
inline double dist(const Vec<D>& a, const Vec<D>& b) { return norm(a - b); }

using Vec2 = Vec<2>;

inline Vec2 v2(double x, double y) { return Vec2{{x, y}}; }

/// Rotation by 90 degrees counterclockwise.
inline Vec2 rot90(const Vec2& v) { return v2(-v[1], v[0]); }

inline Vec2 from_angle(double a) { return v2(std::cos(a), std::sin(a)); }

/// Volume of the d-ball of radius R.
inline double ball_volume(int d, double R) {
    return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) *
           std::pow(R, d);
}

// ---------------------------------------------------------------------------
// Exact rational arithmetic (int64 with 128-bit intermediates). Used where a
// result must be reported as an exact fraction rather than a rounded double.
// ---------------------------------------------------------------------------

struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n) : num(n), den(1) {}
    Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

    void normalize() {
        if (den == 0) throw std::domain_error("rational with zero denominator");
        if (den < 0) { num = -num; den = -den; }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) { num /= g; den /= g; }
    }

    static Rational from128(__int128 n, __int128 d) {
        if (d == 0) throw std::domain_error("rational with zero denominator");
        if (d < 0) { n = -n; d = -d; }
        __int128 a = n < 0 ? -n : n;
        __int128 b = d;
        while (b) { __int128 t = a % b; a = b; b = t; }
        if (a > 1) { n /= a; d /= a; }
        if (n > std::numeric_limits<std::int64_t>::max() ||
            n < std::numeric_limits<std::int64_t>::min() ||
            d > std::numeric_limits<std::int64_t>::max())
            throw std::overflow_error("rational overflow");
        Rational r;
        r.num = static_cast<std::int64_t>(n);
        r.den = static_cast<std::int64_t>(d);
        return r;
    }

    Rational operator+(const Rational& o) const {
        return from128(static_cast<__int128>(num) * o.den +
                           static_cast<__int128>(o.num) * den,
                       static_cast<__int128>(den) * o.den);
    }
    Rational operator-(const Rational& o) const {
        return from128(static_cast<__int128>(num) * o.den -
                           static_cast<__int128>(o.num) * den,
                       static_cast<__int128>(den) * o.den);
    }
    Rational operator*(const Rational& o) const {
        return from128(static_cast<__int128>(num) * o.num,
                       static_cast<__int128>(den) * o.den);
    }
    Rational operator/(const Rational& o) const {
        if (o.num == 0) throw std::domain_error("rational division by zero");
        return from128(static_cast<__int128>(num) * o.den,
                       static_cast<__int128>(den) * o.num);
    }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator<(const Rational& o) const {
        return static_cast<__int128>(num) * o.den <
               static_cast<__int128>(o.num) * den;
    }
    bool operator>(const Rational& o) const { return o < *this; }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// ---------------------------------------------------------------------------
// 2D polygon utilities. Polygons are simple, vertices in counterclockwise
// order. The substitution generators emit integer vertices, so area and
// containment are exact up to floating rounding on sums of products.
// ---------------------------------------------------------------------------

struct Polygon {
    std::vector<Vec2> v;

    double signed_area() const {
        double a = 0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Vec2& p = v[i];
            const Vec2& q = v[(i + 1) % v.size()];
            a += p[0] * q[1] - q[0] * p[1];
        }
        return 0.5 * a;
    }
    double area() const { return std::abs(signed_area()); }

    Polygon translated(const Vec2& t) const {
        Polygon r = *this;
        for (auto& p : r.v) p += t;
        return r;
    }
    Polygon scaled(double s) const {
        Polygon r = *this;
        for (auto& p : r.v) p = p * s;
        return r;
    }

    /// Strict interior test (points on the boundary report false).
    bool contains_interior(const Vec2& p, double eps = 1e-9) const {
        if (boundary_distance(p) < eps) return false;
        return winding_contains(p);
    }

    bool winding_contains(const Vec2& p) const {
        bool in = false;
        for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
            if ((v[i][1] > p[1]) != (v[j][1] > p[1])) {
                double xc = v[j][0] + (p[1] - v[j][1]) / (v[i][1] - v[j][1]) *
                                          (v[i][0] - v[j][0]);
                if (p[0] < xc) in = !in;
            }
        }
        return in;
    }

    /// Distance from p to the polygon boundary.
    double boundary_distance(const Vec2& p) const {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < v.size(); ++i)
            d = std::min(d, segment_distance(v[i], v[(i + 1) % v.size()], p));
        return d;
    }

    /// Radius of the largest ball about p inside the polygon (0 if outside).
    double inradius_about(const Vec2& p) const {
        if (!winding_contains(p)) return 0.0;
        return boundary_distance(p);
    }

    double circumradius_about(const Vec2& p) const {
        double r = 0;
        for (const auto& q : v) r = std::max(r, dist(p, q));
        return r;
    }

    static double segment_distance(const Vec2& a, const Vec2& b, const Vec2& p) {
        Vec2 ab = b - a;
        double t = dot(p - a, ab) / std::max(norm2(ab), 1e-300);
        t = std::clamp(t, 0.0, 1.0);
        return dist(p, a + ab * t);
    }
};

/// Half-plane clipping (Sutherland–Hodgman) of a convex polygon by
/// { x : dot(n, x) <= c }.
inline Polygon clip_halfplane(const Polygon& poly, const Vec2& n, double c) {
    Polygon out;
    std::size_t m = poly.v.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec2& a = poly.v[i];
        const Vec2& b = poly.v[(i + 1) % m];
        double da = dot(n, a) - c;
        double db = dot(n, b) - c;
        if (da <= 1e-12) out.v.push_back(a);
        if ((da < -1e-12 && db > 1e-12) || (da > 1e-12 && db < -1e-12)) {
            double t = da / (da - db);
            out.v.push_back(a + (b - a) * t);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniform grid over 2D points for neighborhood queries.
// ---------------------------------------------------------------------------

class GridIndex2 {
  public:
    GridIndex2() = default;

    GridIndex2(std::vector<Vec2> pts, double cell) : cell_(cell), pts_(std::move(pts)) {
        for (std::size_t i = 0; i < pts_.size(); ++i)
            buckets_[key(pts_[i])].push_back(static_cast<int>(i));
    }

    /// Indices of points within radius r of c (exact filter applied).
    void query_ball(const Vec2& c, double r, std::vector<int>& out) const {
        out.clear();
        int i0 = static_cast<int>(std::floor((c[0] - r) / cell_));
        int i1 = static_cast<int>(std::floor((c[0] + r) / cell_));
        int j0 = static_cast<int>(std::floor((c[1] - r) / cell_));
        int j1 = static_cast<int>(std::floor((c[1] + r) / cell_));
        double r2 = r * r;
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) {
                auto it = buckets_.find(pack(i, j));
                if (it == buckets_.end()) continue;
                for (int idx : it->second)
                    if (norm2(pts_[idx] - c) <= r2) out.push_back(idx);
            }
    }

    /// Index of a point within eps of c, or -1.
    int find_near(const Vec2& c, double eps) const {
        int i0 = static_cast<int>(std::floor((c[0] - eps) / cell_));
        int i1 = static_cast<int>(std::floor((c[0] + eps) / cell_));
        int j0 = static_cast<int>(std::floor((c[1] - eps) / cell_));
        int j1 = static_cast<int>(std::floor((c[1] + eps) / cell_));
        double e2 = eps * eps;
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j) {
                auto it = buckets_.find(pack(i, j));
                if (it == buckets_.end()) continue;
                for (int idx : it->second)
                    if (norm2(pts_[idx] - c) <= e2) return idx;
            }
        return -1;
    }

    /// Distance from c to the nearest indexed point (expanding ring search).
    double nearest_distance(const Vec2& c) const {
        for (double r = cell_;; r *= 2.0) {
            double best2 = std::numeric_limits<double>::infinity();
            int i0 = static_cast<int>(std::floor((c[0] - r) / cell_));
            int i1 = static_cast<int>(std::floor((c[0] + r) / cell_));
            int j0 = static_cast<int>(std::floor((c[1] - r) / cell_));
            int j1 = static_cast<int>(std::floor((c[1] + r) / cell_));
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) {
                    auto it = buckets_.find(pack(i, j));
                    if (it == buckets_.end()) continue;
                    for (int idx : it->second)
                        best2 = std::min(best2, norm2(pts_[idx] - c));
                }
            if (best2 <= r * r) return std::sqrt(best2);
            if (r > 1e12) return std::sqrt(best2);
        }
    }

    double cell_size() const { return cell_; }

    /// Raw bucket access for ray walks; nullptr when the cell is empty.
    const std::vector<int>* bucket(int i, int j) const {
        auto it = buckets_.find(pack(i, j));
        return it == buckets_.end() ? nullptr : &it->second;
    }

  private:
    std::int64_t key(const Vec2& p) const {
        return pack(static_cast<int>(std::floor(p[0] / cell_)),
                    static_cast<int>(std::floor(p[1] / cell_)));
    }
    static std::int64_t pack(int i, int j) {
        return (static_cast<std::int64_t>(i) << 32) ^
               (static_cast<std::int64_t>(j) & 0xffffffffLL);
    }

    double cell_ = 1.0;
    std::vector<Vec2> pts_;
    std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

} // namespace lrgas
