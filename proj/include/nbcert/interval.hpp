#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace nbcert {

using Vec = std::vector<double>;

/// Closed real interval [lo, hi]. The basic carrier for interval
/// arithmetic; all operations return enclosures of the exact image.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double l, double h) : lo(l), hi(h) {
        if (!(l <= h)) throw std::invalid_argument("Interval: lo > hi");
    }
    static Interval point(double v) { return Interval(v, v); }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    double rad() const { return 0.5 * (hi - lo); }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }

    Interval hull(const Interval& o) const {
        return Interval(std::min(lo, o.lo), std::max(hi, o.hi));
    }
};

inline Interval operator+(const Interval& a, const Interval& b) {
    return Interval(a.lo + b.lo, a.hi + b.hi);
}
inline Interval operator-(const Interval& a, const Interval& b) {
    return Interval(a.lo - b.hi, a.hi - b.lo);
}
inline Interval operator-(const Interval& a) { return Interval(-a.hi, -a.lo); }

inline Interval operator*(const Interval& a, const Interval& b) {
    const double p1 = a.lo * b.lo, p2 = a.lo * b.hi;
    const double p3 = a.hi * b.lo, p4 = a.hi * b.hi;
    return Interval(std::min(std::min(p1, p2), std::min(p3, p4)),
                    std::max(std::max(p1, p2), std::max(p3, p4)));
}
inline Interval operator*(double s, const Interval& a) {
    return s >= 0 ? Interval(s * a.lo, s * a.hi) : Interval(s * a.hi, s * a.lo);
}
inline Interval operator*(const Interval& a, double s) { return s * a; }
inline Interval operator+(const Interval& a, double s) { return Interval(a.lo + s, a.hi + s); }
inline Interval operator+(double s, const Interval& a) { return a + s; }
inline Interval operator-(const Interval& a, double s) { return Interval(a.lo - s, a.hi - s); }
inline Interval operator-(double s, const Interval& a) { return Interval(s - a.hi, s - a.lo); }

inline Interval operator/(const Interval& a, const Interval& b) {
    if (b.lo <= 0.0 && b.hi >= 0.0)
        throw std::domain_error("Interval division by interval containing zero");
    return a * Interval(1.0 / b.hi, 1.0 / b.lo);
}

inline Interval sqr(const Interval& a) {
    const double l = std::abs(a.lo), h = std::abs(a.hi);
    const double m = std::max(l, h);
    const double lower = a.contains(0.0) ? 0.0 : std::min(l, h);
    return Interval(lower * lower, m * m);
}

inline Interval abs(const Interval& a) {
    if (a.lo >= 0) return a;
    if (a.hi <= 0) return Interval(-a.hi, -a.lo);
    return Interval(0.0, std::max(-a.lo, a.hi));
}

inline Interval exp(const Interval& a) { return Interval(std::exp(a.lo), std::exp(a.hi)); }

inline Interval clamp(const Interval& a, double lo, double hi) {
    return Interval(std::clamp(a.lo, lo, hi), std::clamp(a.hi, lo, hi));
}

namespace detail {
// Smallest k with lo <= k*step.
inline double ceil_div(double lo, double step) { return std::ceil(lo / step); }
}  // namespace detail

/// Enclosure of sin over [a.lo, a.hi]. Exact up to floating point: the
/// endpoints plus any interior extrema (odd multiples of pi/2).
inline Interval sin(const Interval& a) {
    constexpr double pi = 3.14159265358979323846;
    if (a.width() >= 2 * pi) return Interval(-1.0, 1.0);
    double lo = std::min(std::sin(a.lo), std::sin(a.hi));
    double hi = std::max(std::sin(a.lo), std::sin(a.hi));
    // maxima at pi/2 + 2k*pi, minima at -pi/2 + 2k*pi
    double k = detail::ceil_div(a.lo - pi / 2, 2 * pi);
    if (pi / 2 + 2 * pi * k <= a.hi) hi = 1.0;
    k = detail::ceil_div(a.lo + pi / 2, 2 * pi);
    if (-pi / 2 + 2 * pi * k <= a.hi) lo = -1.0;
    return Interval(lo, hi);
}

inline Interval cos(const Interval& a) {
    constexpr double pi = 3.14159265358979323846;
    return sin(a + pi / 2);
}

/// Axis-aligned box in R^n: the region primitive for state spaces,
/// noise supports, and IBP inputs/outputs.
struct Box {
    Vec lower;
    Vec upper;

    Box() = default;
    Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
        if (lower.size() != upper.size())
            throw std::invalid_argument("Box: dimension mismatch between bounds");
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(lower[i] <= upper[i]))
                throw std::invalid_argument("Box: lower[" + std::to_string(i) + "] > upper[" +
                                            std::to_string(i) + "]");
    }
    static Box point(const Vec& v) { return Box(v, v); }

    std::size_t dim() const { return lower.size(); }

    Interval axis(std::size_t i) const { return Interval(lower[i], upper[i]); }

    bool contains(const Vec& s) const {
        if (s.size() != dim()) throw std::invalid_argument("Box::contains: dimension mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] < lower[i] || s[i] > upper[i]) return false;
        return true;
    }

    bool contains(const Box& o) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (o.lower[i] < lower[i] || o.upper[i] > upper[i]) return false;
        return true;
    }

    bool intersects(const Box& o) const {
        for (std::size_t i = 0; i < dim(); ++i)
            if (o.upper[i] < lower[i] || o.lower[i] > upper[i]) return false;
        return true;
    }

    /// Intersection of two boxes; empty optional-like flag via intersects() first.
    Box intersection(const Box& o) const {
        Vec lo(dim()), hi(dim());
        for (std::size_t i = 0; i < dim(); ++i) {
            lo[i] = std::max(lower[i], o.lower[i]);
            hi[i] = std::min(upper[i], o.upper[i]);
        }
        return Box(std::move(lo), std::move(hi));
    }

    Vec center() const {
        Vec c(dim());
        for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
        return c;
    }

    Vec radius() const {
        Vec r(dim());
        for (std::size_t i = 0; i < dim(); ++i) r[i] = 0.5 * (upper[i] - lower[i]);
        return r;
    }

    double volume() const {
        double v = 1.0;
        for (std::size_t i = 0; i < dim(); ++i) v *= upper[i] - lower[i];
        return v;
    }

    Box shifted(const Vec& s) const {
        Vec lo = lower, hi = upper;
        for (std::size_t i = 0; i < dim(); ++i) {
            lo[i] += s[i];
            hi[i] += s[i];
        }
        return Box(std::move(lo), std::move(hi));
    }

    Box inflated(double by) const {
        Vec lo = lower, hi = upper;
        for (std::size_t i = 0; i < dim(); ++i) {
            lo[i] -= by;
            hi[i] += by;
        }
        return Box(std::move(lo), std::move(hi));
    }

    /// 1-norm distance from a point to the box (0 if inside).
    double distance_1(const Vec& s) const {
        double d = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (s[i] < lower[i]) d += lower[i] - s[i];
            else if (s[i] > upper[i]) d += s[i] - upper[i];
        }
        return d;
    }

    /// Split into 2^n children by bisecting every axis with nonzero width.
    std::vector<Box> bisect_all() const {
        std::vector<Box> out{*this};
        for (std::size_t i = 0; i < dim(); ++i) {
            if (upper[i] <= lower[i]) continue;
            const double m = 0.5 * (lower[i] + upper[i]);
            std::vector<Box> next;
            next.reserve(out.size() * 2);
            for (const auto& b : out) {
                Box lo_half = b, hi_half = b;
                lo_half.upper[i] = m;
                hi_half.lower[i] = m;
                next.push_back(std::move(lo_half));
                next.push_back(std::move(hi_half));
            }
            out = std::move(next);
        }
        return out;
    }
};

/// Union of closed boxes. Membership is disjunctive; boxes may overlap.
struct Region {
    std::vector<Box> boxes;

    Region() = default;
    Region(std::initializer_list<Box> bs) : boxes(bs) {}
    explicit Region(std::vector<Box> bs) : boxes(std::move(bs)) {}
    explicit Region(Box b) { boxes.push_back(std::move(b)); }

    bool empty() const { return boxes.empty(); }

    bool contains(const Vec& s) const {
        for (const auto& b : boxes)
            if (b.contains(s)) return true;
        return false;
    }

    /// Conservative: true iff some single member box contains the whole box.
    bool contains_box(const Box& b) const {
        for (const auto& rb : boxes)
            if (rb.contains(b)) return true;
        return false;
    }

    bool intersects(const Box& b) const {
        for (const auto& rb : boxes)
            if (rb.intersects(b)) return true;
        return false;
    }

    bool intersects(const Region& other) const {
        for (const auto& b : boxes)
            if (other.intersects(b)) return true;
        return false;
    }
};

/// box \ cut as a disjoint list of up to 2n boxes (empty when cut covers box).
inline std::vector<Box> box_difference(const Box& box, const Box& cut) {
    if (!box.intersects(cut)) return {box};
    std::vector<Box> out;
    Box rest = box;
    for (std::size_t i = 0; i < box.dim(); ++i) {
        if (cut.lower[i] > rest.lower[i]) {
            Box piece = rest;
            piece.upper[i] = cut.lower[i];
            out.push_back(std::move(piece));
            rest.lower[i] = cut.lower[i];
        }
        if (cut.upper[i] < rest.upper[i]) {
            Box piece = rest;
            piece.lower[i] = cut.upper[i];
            out.push_back(std::move(piece));
            rest.upper[i] = cut.upper[i];
        }
    }
    return out;  // rest is fully inside cut
}

inline std::vector<Box> box_difference(const Box& box, const Region& region) {
    std::vector<Box> pieces{box};
    for (const auto& cut : region.boxes) {
        std::vector<Box> next;
        for (const auto& p : pieces)
            for (auto& q : box_difference(p, cut)) next.push_back(std::move(q));
        pieces = std::move(next);
    }
    return pieces;
}

inline double norm1(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

inline double norm1_diff(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace nbcert
