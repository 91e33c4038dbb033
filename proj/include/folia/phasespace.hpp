#pragma once

#include <Eigen/Dense>

#include "folia/errors.hpp"

namespace folia {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A point of the d-torus (d = 2 or 3), every coordinate reduced to [0,1).
struct TorusPoint {
    Vec coords;

    TorusPoint() = default;
    explicit TorusPoint(Vec c) : coords(std::move(c)) {}

    int dim() const { return static_cast<int>(coords.size()); }
    double operator[](int i) const { return coords[i]; }
};

// Reduce each coordinate mod 1 into [0,1).  Idempotent; rejects non-finite input.
TorusPoint wrap(const Vec& v);

// Flat (Euclidean-quotient) metric: minimum Euclidean length over the 3^d
// nearest lattice translates.
double torus_dist(const TorusPoint& p, const TorusPoint& q);

// The lattice translate of p closest to ref (componentwise within 1/2).
Vec lift_near(const TorusPoint& p, const Vec& ref);

// Point of T^2 x [0,1] with the gluing (x,0) ~ (-x,1) resolved to a
// canonical representative (height in [0,1), height 0 canonical).
struct QuotientPoint {
    TorusPoint base;   // 2-torus coordinates
    double height = 0; // in [0,1)
};

QuotientPoint make_quotient_point(const TorusPoint& base2, double height);

// True if the two representatives name the same point of the quotient.
bool quotient_same_point(const QuotientPoint& a, const QuotientPoint& b, double tol = 1e-12);

// Distance on the quotient manifold between vertical leaf labels {v,-v} and
// {w,-w} (the circles of the Remark-style foliation are labelled by +-base).
double quotient_leaf_dist(const TorusPoint& v, const TorusPoint& w);

// A geodesic disc transverse to a foliation: base + s * direction, |s| <= radius.
struct Transversal {
    TorusPoint base;
    Vec direction; // unit
    double radius = 0;
};

Transversal make_transversal(const TorusPoint& base, const Vec& direction, double radius);

// wrap(base + s * direction); s = 0 gives the base point.
TorusPoint transversal_point(const Transversal& t, double s);

} // namespace folia
