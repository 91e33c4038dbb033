#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "folia/systems.hpp"

namespace folia {

enum class LeafSide { U, S, CU, CS, C };

// Sampled local leaf: a polyline in lifted coordinates with a distinguished
// base sample at arclength 0.  Center circles (side C) are closed and
// parametrized by the fiber coordinate instead of arclength.
struct LeafPatch {
    LeafSide side = LeafSide::U;
    TorusPoint base;
    double radius = 0;
    std::vector<Vec> samples;      // lifted, continuous
    std::vector<double> arclength; // signed, 0 at base (fiber coordinate for C)
    std::vector<Vec> tangents;     // unit
    int base_index = 0;
    double residual = 0; // solver tail estimate
    bool closed = false;

    Vec point_at(double s) const;
    double distance_to(const Vec& x) const; // min distance to the polyline
    // unique root of <sample - anchor, dual> = level along the polyline;
    // throws SolverError when there is no crossing or more than one
    Vec intersect_level(const Vec& dual, const Vec& anchor, double level) const;
};

struct FoliationModel {
    SystemSpec sys;
    LeafSide side = LeafSide::U;
    double plaque_radius = 0.05;
    double tol = 1e-9;
    std::function<LeafPatch(const TorusPoint&)> generator;
    // when nonzero size: the foliation is the level sets of <., dual>
    // (exact invariant plane/line foliations of linear-base systems)
    Vec dual;
};

// Local strong stable/unstable manifold: exact eigenline segments for linear
// systems, otherwise a polyline solved by iterated pushforward of a seed
// segment in the linear eigenframe (the geometric graph transform).
LeafPatch strong_manifold(const SystemSpec& sys, const TorusPoint& p, LeafSide side,
                          double r, double tol);

FoliationModel make_strong_model(const SystemSpec& sys, LeafSide side,
                                 double plaque_radius, double tol);

// f(patch at p) compared against the independently solved patch at f(p);
// for side S the comparison runs backwards.
double strong_invariance_residual(const SystemSpec& sys, const TorusPoint& p, LeafSide side,
                                  double r, double tol);

// The g-invariant center circle near the vertical product leaf through
// leaf_base, computed by intersecting the cu and cs graph-transform surfaces
// over the product leaf.  f must be a skew product with z-independent base.
LeafPatch center_patch_g(const SystemSpec& f_sys, const SystemSpec& g_sys,
                         const TorusPoint& leaf_base, double r, double tol);

// base coordinates (lifted) of a center circle at fiber height z
Vec center_circle_base_at(const LeafPatch& circle, double z);

// max base displacement across the circle (distance from a vertical circle)
double leaf_tilt(const LeafPatch& circle);

// g-invariance of the center patch: g(patch at leaf_base) against the patch
// at the f-image leaf.
double center_invariance_residual(const SystemSpec& f_sys, const SystemSpec& g_sys,
                                  const TorusPoint& leaf_base, double r, double tol);

// Holonomy along the model's foliation: lifts the path through successive
// plaques, intersecting a transverse fiber at each step, and ends on tau_to.
// Throws HolonomyUndefined when the lift leaves the tube (message carries the
// exit location).
TorusPoint holonomy_map(const FoliationModel& model, const Transversal& tau_from,
                        const Transversal& tau_to, const std::vector<TorusPoint>& path,
                        const TorusPoint& x);

// same, in transversal offset coordinates (input/output offsets along the
// respective transversal directions)
double holonomy_offset(const FoliationModel& model, const Transversal& tau_from,
                       const Transversal& tau_to, const std::vector<TorusPoint>& path,
                       double s_in);

// straight segment along the tau_from leaf-transverse path between base
// points of two transversals, refined for lifting
std::vector<TorusPoint> straight_leaf_path(const SystemSpec& sys, const TorusPoint& from,
                                           const Vec& leaf_dir, double length, int n_nodes);

// A full-dimensional disc for the foliation triangle inequality.
struct TransversalDisc {
    TorusPoint center;
    double radius = 0;
};

// Empirical smallest D with (1/D) max{d_F, d_G} <= d_tau <= D (d_F + d_G)
// over sampled triples (p, y, q), y = F(p) /\ G(q).  The sampled maximum is
// the defining oracle.  Throws TransversalityError near tangency.
double triangle_constant(const FoliationModel& model_F, const FoliationModel& model_G,
                         const TransversalDisc& tau, int n_pairs, uint64_t seed);

void write_leaf_csv(const LeafPatch& patch, std::ostream& out);

} // namespace folia
