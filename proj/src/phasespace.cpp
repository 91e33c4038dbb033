#include "folia/phasespace.hpp"

#include <cmath>

namespace folia {

TorusPoint wrap(const Vec& v) {
    if (!v.allFinite())
        throw std::domain_error("wrap: non-finite coordinate");
    Vec w(v.size());
    for (int i = 0; i < v.size(); ++i) {
        double x = v[i] - std::floor(v[i]);
        if (x >= 1.0) x = 0.0; // floor rounding at the seam
        w[i] = x;
    }
    return TorusPoint(w);
}

double torus_dist(const TorusPoint& p, const TorusPoint& q) {
    if (p.dim() != q.dim())
        throw std::domain_error("torus_dist: dimension mismatch");
    double s2 = 0;
    for (int i = 0; i < p.dim(); ++i) {
        double d = std::fabs(p.coords[i] - q.coords[i]);
        d = std::min(d, 1.0 - d); // nearest of the three translates per axis
        s2 += d * d;
    }
    return std::sqrt(s2);
}

Vec lift_near(const TorusPoint& p, const Vec& ref) {
    Vec out(p.dim());
    for (int i = 0; i < p.dim(); ++i) {
        double d = p.coords[i] - ref[i];
        out[i] = ref[i] + d - std::round(d);
    }
    return out;
}

QuotientPoint make_quotient_point(const TorusPoint& base2, double height) {
    if (base2.dim() != 2)
        throw ConfigError("quotient point: base must be 2-dimensional");
    double h = height - std::floor(height / 2.0) * 2.0; // reduce mod 2 first
    TorusPoint b = base2;
    if (h >= 1.0) { // use the gluing (x,h) ~ (-x,h-1)
        h -= 1.0;
        b = wrap(-b.coords);
    }
    QuotientPoint qp;
    qp.base = b;
    qp.height = h;
    return qp;
}

bool quotient_same_point(const QuotientPoint& a, const QuotientPoint& b, double tol) {
    if (std::fabs(a.height - b.height) < tol && torus_dist(a.base, b.base) < tol)
        return true;
    // seam: height 0 also represents (-x, 1-)
    double hsum = a.height + b.height;
    if (std::fabs(hsum - 1.0) < tol || hsum < tol) {
        TorusPoint nb = wrap(-b.base.coords);
        if (torus_dist(a.base, nb) < tol) return true;
    }
    return false;
}

double quotient_leaf_dist(const TorusPoint& v, const TorusPoint& w) {
    TorusPoint nw = wrap(-w.coords);
    return std::min(torus_dist(v, w), torus_dist(v, nw));
}

Transversal make_transversal(const TorusPoint& base, const Vec& direction, double radius) {
    if (radius <= 0)
        throw ConfigError("transversal: radius must be positive");
    double n = direction.norm();
    if (std::fabs(n - 1.0) > 1e-12)
        throw ConfigError("transversal: direction must be a unit vector");
    Transversal t;
    t.base = base;
    t.direction = direction;
    t.radius = radius;
    return t;
}

TorusPoint transversal_point(const Transversal& t, double s) {
    if (std::fabs(s) > t.radius)
        throw std::out_of_range("transversal_point: |s| exceeds radius");
    return wrap(t.base.coords + s * t.direction);
}

} // namespace folia
