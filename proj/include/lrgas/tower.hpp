#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "lrgas/delone.hpp"
#include "lrgas/geom.hpp"
#include "lrgas/substitution.hpp"

namespace lrgas {

// ---------------------------------------------------------------------------
// Tower constants for a linearly repetitive pattern with constant L
// ---------------------------------------------------------------------------

struct TowerConstants {
    Rational lambda;  // 6 L (L+1)^2
    Rational K1;      // 1/(2(L+1)) - L/(lambda-1)
    Rational K2;      // lambda L / (lambda - 1)
};

inline TowerConstants tower_constants(const Rational& L) {
    if (!(Rational(1) < L))
        throw std::domain_error("tower_constants: requires L > 1");
    Rational one(1), lam = Rational(6) * L * (L + one) * (L + one);
    TowerConstants t;
    t.lambda = lam;
    t.K1 = one / (Rational(2) * (L + one)) - L / (lam - one);
    t.K2 = lam * L / (lam - one);
    if (!(Rational(0) < t.K1 && t.K1 < one && one < t.K2))
        throw std::domain_error("tower_constants: 0 < K1 < 1 < K2 violated");
    return t;
}

inline TowerConstants tower_constants(double L, std::int64_t den = 1000000) {
    return tower_constants(Rational(static_cast<std::int64_t>(llround(L * den)), den));
}

/// Floating-point evaluation for numerics with measured (non-rational) L.
struct TowerConstantsD {
    double lambda, K1, K2;
};

inline TowerConstantsD tower_constants_d(double L) {
    if (L <= 1) throw std::domain_error("tower_constants: requires L > 1");
    TowerConstantsD t;
    t.lambda = 6.0 * L * (L + 1.0) * (L + 1.0);
    t.K1 = 1.0 / (2.0 * (L + 1.0)) - L / (t.lambda - 1.0);
    t.K2 = t.lambda * L / (t.lambda - 1.0);
    return t;
}

// ---------------------------------------------------------------------------
// Local transversals
// ---------------------------------------------------------------------------

/// A set of pattern-space points recognized from a bounded window at the
/// origin. Two flavors are used:
///  - plain cylinders: the window of radius defining_radius must equal the
///    reference class exactly;
///  - constellation transversals (supertile anchors): a fixed labeled point
///    set must be present. The surrounding collar may vary between
///    occurrences, so this is a finite union of cylinders; membership is
///    still decided inside the ball of radius rec.
struct LocalTransversal {
    std::string name;
    Label anchor_label = 0;
    double defining_radius = 0;
    double rec = 0;
    ClusterClass reference;                   // exemplar window
    std::vector<LabeledPoint> constellation;  // relative to the anchor
    bool require_equality = false;            // plain cylinder mode

    bool matches(const DeloneMultiset& m, const Vec2& pos) const {
        if (require_equality) return window_matches_class(m, pos, reference);
        for (const auto& p : constellation)
            if (!m.has_point(pos + p.pos, p.label)) return false;
        return true;
    }
};

/// Cylinder transversal of the R-window at a given patch point.
inline LocalTransversal cylinder_transversal(const DeloneMultiset& m,
                                             int point_index, double R) {
    Cluster c = r_cluster(m, point_index, R);
    LocalTransversal t;
    t.name = "cyl";
    t.anchor_label = c.anchor.label;
    t.defining_radius = R;
    t.rec = R;
    t.reference = {c, m.eps_geo(), 0};
    t.constellation = c.members;
    t.require_equality = true;
    return t;
}

struct ReturnVectors {
    std::vector<Vec2> positions;
    double packing_radius = 0;  // half the minimum pairwise gap
    bool empty_warning = false;
};

/// All positions in the certifiable window whose pattern matches the
/// transversal. Every returned vector is re-verified against the matcher by
/// construction (the matcher is the enumeration predicate).
inline ReturnVectors return_vectors(const DeloneMultiset& m,
                                    const LocalTransversal& C) {
    ReturnVectors rv;
    for (const auto& p : m.points) {
        if (p.label != C.anchor_label) continue;
        if (norm(p.pos) + C.rec > m.window_radius + m.eps_geo()) continue;
        if (C.matches(m, p.pos)) rv.positions.push_back(p.pos);
    }
    if (rv.positions.empty()) {
        rv.empty_warning = true;
        return rv;
    }
    double gap = measure_min_gap(rv.positions);
    rv.packing_radius = std::isfinite(gap) ? gap / 2.0 : 0.0;
    return rv;
}

// ---------------------------------------------------------------------------
// Boxes and box decompositions
// ---------------------------------------------------------------------------

/// One box type: base transversal plus the spatial domain swept from each
/// base occurrence. The domain contains the origin (the anchor position).
/// Injectivity of (t, pattern) -> translate on D x C is not enforced through
/// the sufficient radius condition D within B_{r(C)} — supertile domains are
/// larger than half the minimum return gap — but through the tiling check:
/// translated domains at base occurrences have pairwise disjoint interiors.
struct BoxType {
    LocalTransversal base;
    Polygon domain;               // relative to the anchor
    int level = 0;
    std::vector<Vec2> occurrences;

    // point atoms (Voronoi refinements): per-occurrence patch point indices
    std::vector<std::vector<int>> member_points;

    double r_int() const { return domain.inradius_about(v2(0, 0)); }
    double R_ext() const { return domain.circumradius_about(v2(0, 0)); }
};

struct BoxDecomposition {
    int level = 0;
    std::vector<BoxType> boxes;
    double r_int = 0;
    double R_ext = 0;
    double rec = 0;

    int k() const { return static_cast<int>(boxes.size()); }

    void refresh_radii() {
        r_int = std::numeric_limits<double>::infinity();
        R_ext = 0;
        rec = 0;
        for (const auto& b : boxes) {
            r_int = std::min(r_int, b.r_int());
            R_ext = std::max(R_ext, b.R_ext());
            rec = std::max(rec, b.base.rec);
        }
    }
};

struct TransitionMatrix {
    // m[i][j] = number of level-(n-1) type-j boxes inside a level-n type-i box
    std::vector<std::vector<long>> m;
    std::vector<std::vector<std::vector<Vec2>>> offsets;  // [i][j] -> list

    long row_sum(int i) const {
        long s = 0;
        for (long v : m[i]) s += v;
        return s;
    }
};

struct TowerSystem {
    std::shared_ptr<const DeloneMultiset> patch;
    std::string rule_name;
    double lambda_eff = 2.0;
    std::vector<BoxDecomposition> levels;
    std::vector<TransitionMatrix> matrices;  // matrices[n-1] maps level n -> n-1
    // measured scaling constants, all taken at level 1
    double K1_hat = 0, K2_hat = 0, Crec_hat = 0;

    int depth() const { return static_cast<int>(levels.size()); }
};

// ---------------------------------------------------------------------------
// Substitution tower
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t quantize(double x) { return llround(x * 4096.0); }
inline std::pair<std::int64_t, std::int64_t> qpos(const Vec2& p) {
    return {quantize(p[0]), quantize(p[1])};
}

struct PosSet {
    std::set<std::pair<std::int64_t, std::int64_t>> s;
    void insert(const Vec2& p) { s.insert(qpos(p)); }
    bool contains(const Vec2& p) const { return s.count(qpos(p)) > 0; }
};

} // namespace detail

/// Builds the hierarchical tower of a substitution patch: level-n boxes are
/// the n-fold inflated prototypes, anchored at hereditary control points
/// (designated self-children alternate between the corner and central child,
/// which keeps the measured level-1 scaling constants extremal). Bases are
/// constellation transversals: the full supertile content must be present.
inline TowerSystem build_substitution_tower(const SubstitutionRule& rule,
                                            std::shared_ptr<const DeloneMultiset> patch,
                                            int levels) {
    if (levels < 0) throw validation_error("build_substitution_tower: negative levels");
    Derivation d = derivation_for(rule, *patch);
    if (d.levels < levels + 1)
        throw insufficient_patch_error(
            "build_substitution_tower: patch needs at least levels+1 inflation steps");

    TowerSystem tw;
    tw.patch = patch;
    tw.rule_name = rule.name;
    tw.lambda_eff = rule.expansion;

    int k = rule.label_count();
    double W = patch->window_radius;

    // recognition radii: the constellation spans the supertile, so membership
    // is decided inside R_ext(n) + packing margin
    std::vector<double> recs(levels + 1);

    for (int n = 0; n <= levels; ++n) {
        BoxDecomposition dec;
        dec.level = n;
        double s = d.scale(n);
        for (Label l = 0; l < k; ++l) {
            BoxType bt;
            bt.level = n;
            Vec2 aoff = d.anchor_offset(n, l);
            Polygon proto = rule.prototypes[l].shape.scaled(s);
            bt.domain = proto.translated(-aoff);

            // constellation: control points of the level-0 tiles of one
            // reference supertile, relative to the anchor
            Derivation sub = derive(rule, n, l);
            bt.base.name = rule.prototypes[l].name + "@" + std::to_string(n);
            for (const Tile& t0 : sub.tiles[0])
                for (const Vec2& c : rule.prototypes[t0.label].controls)
                    bt.base.constellation.push_back({t0.t + c - aoff, t0.label});
            std::sort(bt.base.constellation.begin(), bt.base.constellation.end(),
                      [](const LabeledPoint& a, const LabeledPoint& b) {
                          return norm2(a.pos) < norm2(b.pos);
                      });
            bt.base.anchor_label = bt.base.constellation.front().label;
            // the constellation sits strictly inside the domain, so membership
            // is decided within the domain circumradius
            bt.base.rec = bt.domain.circumradius_about(v2(0, 0));
            bt.base.defining_radius = bt.base.rec;

            // occurrences from the patch derivation, certifiable ones only
            for (const Tile& t : d.tiles[n]) {
                if (t.label != l) continue;
                Vec2 a = d.anchor(n, t);
                if (norm(a) + bt.base.rec <= W) bt.occurrences.push_back(a);
            }
            std::sort(bt.occurrences.begin(), bt.occurrences.end(),
                      [](const Vec2& a, const Vec2& b) {
                          return a[0] != b[0] ? a[0] < b[0] : a[1] < b[1];
                      });

            // exemplar window for serialization / inspection
            if (!bt.occurrences.empty()) {
                Cluster c;
                c.anchor = {v2(0, 0), bt.base.anchor_label};
                c.members = patch->window(bt.occurrences.front(), bt.base.defining_radius);
                c.radius = bt.base.defining_radius;
                bt.base.reference = {c, patch->eps_geo(), static_cast<int>(l)};
            } else {
                throw insufficient_patch_error(
                    "build_substitution_tower: window cannot certify level " +
                    std::to_string(n) + " recognition radii");
            }
            dec.boxes.push_back(std::move(bt));
        }
        dec.refresh_radii();
        recs[n] = dec.rec;
        tw.levels.push_back(std::move(dec));
    }
    (void)recs;

    // transition matrices from the rule
    for (int n = 1; n <= levels; ++n) {
        TransitionMatrix tm;
        tm.m.assign(k, std::vector<long>(k, 0));
        tm.offsets.assign(k, std::vector<std::vector<Vec2>>(k));
        double s = d.scale(n - 1);
        for (Label i = 0; i < k; ++i) {
            Vec2 ai = d.anchor_offset(n, i);
            for (const auto& ch : rule.children[i]) {
                Vec2 child_anchor = ch.offset * s + d.anchor_offset(n - 1, ch.label);
                tm.m[i][ch.label]++;
                tm.offsets[i][ch.label].push_back(child_anchor - ai);
            }
        }
        tw.matrices.push_back(std::move(tm));
    }

    if (levels >= 1) {
        double lam = tw.lambda_eff;
        tw.K1_hat = tw.levels[1].r_int / lam;
        tw.K2_hat = tw.levels[1].R_ext / lam;
        tw.Crec_hat = tw.levels[1].rec / lam;
    }
    return tw;
}

// ---------------------------------------------------------------------------
// Zoomed-out verification
// ---------------------------------------------------------------------------

struct PropertyReport {
    bool pass = true;
    std::string witness;  // first failing occurrence, empty if pass
};

struct ZoomReport {
    PropertyReport p1, p2, p3, p4, p5, eq7;
    bool all_pass() const {
        return p1.pass && p2.pass && p3.pass && p4.pass && p5.pass && eq7.pass;
    }
};

namespace detail {

inline std::string pos_str(const Vec2& p) {
    char buf[64];
    snprintf(buf, sizeof(buf), "(%.6g, %.6g)", p[0], p[1]);
    return buf;
}

/// Do the interiors of poly@p and poly2@q intersect? Sampled test: checks
/// vertices, centroid and a grid of interior probes of the smaller polygon.
inline bool interiors_intersect(const Polygon& A, const Vec2& p, const Polygon& B,
                                const Vec2& q, double tol) {
    const Polygon* small = &A;
    const Polygon* big = &B;
    Vec2 ps = p, pb = q;
    if (A.area() > B.area()) { small = &B; big = &A; std::swap(ps, pb); }
    double x0 = 1e18, x1 = -1e18, y0 = 1e18, y1 = -1e18;
    for (const auto& v : small->v) {
        x0 = std::min(x0, v[0]); x1 = std::max(x1, v[0]);
        y0 = std::min(y0, v[1]); y1 = std::max(y1, v[1]);
    }
    int steps = 12;
    double dx = (x1 - x0) / steps, dy = (y1 - y0) / steps;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            Vec2 c = v2(x0 + i * dx, y0 + j * dy);
            if (!small->contains_interior(c, tol)) continue;
            Vec2 abs = c + ps;
            if (big->contains_interior(abs - pb, tol)) return true;
        }
    return false;
}

inline std::vector<Vec2> boundary_samples(const Polygon& poly, int per_edge) {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < poly.v.size(); ++i) {
        Vec2 a = poly.v[i], b = poly.v[(i + 1) % poly.v.size()];
        for (int s = 0; s < per_edge; ++s)
            out.push_back(a + (b - a) * (static_cast<double>(s) / per_edge));
    }
    return out;
}

} // namespace detail

/// Checks the nesting properties of Definition-style zoomed-out box
/// decompositions on the patch, over all certifiable box occurrences.
///
/// (1) consistency of interior incidences: the fine boxes meeting the
///     interior of a coarse box sit at the same relative placements in every
///     occurrence of that coarse type. (The closure version of this property
///     needs the boundary modification of the Voronoi construction and is
///     out of scope; interiors are what an unmodified hierarchical tower
///     satisfies.)
/// (2) every boundary point of a coarse domain lies on the boundary of some
///     fine domain.
/// (3) proper refinement: each coarse occurrence contains an intersecting
///     fine box whose boundary enters the coarse interior. Identical
///     decompositions fail this; genuine zoom passes.
/// (4) exact partition: each coarse domain is the disjoint union of the fine
///     domain translates it contains (cell atoms when available, else area
///     plus sampling).
/// (5) base inclusion: every coarse anchor is also a fine anchor.
/// eq7: every fine anchor in the safe region lies in exactly one coarse box
///     at exactly one recorded offset.
inline ZoomReport check_zoomed_out(const BoxDecomposition& coarse,
                                   const BoxDecomposition& fine,
                                   const DeloneMultiset& patch) {
    ZoomReport rep;
    double eps = patch.eps_geo();
    double tol = std::max(1e-9, eps);
    double W = patch.window_radius;

    // hashed fine occurrences
    std::vector<detail::PosSet> fine_occ(fine.boxes.size());
    detail::PosSet fine_all;
    for (std::size_t j = 0; j < fine.boxes.size(); ++j)
        for (const auto& q : fine.boxes[j].occurrences) {
            fine_occ[j].insert(q);
            fine_all.insert(q);
        }

    // safe bound: every fine box meeting a coarse occurrence at |p| <= safe
    // is itself certifiable
    double safe = W - coarse.rec - fine.rec - coarse.R_ext - fine.R_ext;
    if (safe <= 0)
        throw window_overflow_error("check_zoomed_out: window too small for these levels");

    // observed placements per (i, j): fine-j boxes with interiors meeting the
    // interior of coarse-i, discovered on a reference occurrence
    std::vector<std::vector<std::vector<Vec2>>> placements(
        coarse.boxes.size(), std::vector<std::vector<Vec2>>(fine.boxes.size()));

    for (std::size_t i = 0; i < coarse.boxes.size() && rep.p1.pass; ++i) {
        const BoxType& cb = coarse.boxes[i];
        // reference occurrence: first within the safe region; a type whose
        // occurrences all hug the window edge cannot be checked on this patch
        const Vec2* ref = nullptr;
        for (const auto& p : cb.occurrences)
            if (norm(p) <= safe) { ref = &p; break; }
        if (!ref) continue;
        double reach = cb.R_ext() + fine.R_ext;
        for (std::size_t j = 0; j < fine.boxes.size(); ++j) {
            const BoxType& fb = fine.boxes[j];
            for (const auto& q : fb.occurrences) {
                if (dist(q, *ref) > reach) continue;
                if (detail::interiors_intersect(cb.domain, *ref, fb.domain, q, tol))
                    placements[i][j].push_back(q - *ref);
            }
        }
        // consistency across all occurrences
        for (const auto& p : cb.occurrences) {
            if (norm(p) > safe) continue;
            for (std::size_t j = 0; j < fine.boxes.size(); ++j)
                for (const auto& delta : placements[i][j])
                    if (!fine_occ[j].contains(p + delta)) {
                        rep.p1.pass = false;
                        rep.p1.witness = "coarse box " + std::to_string(i) + " at " +
                                         detail::pos_str(p) + " missing fine box " +
                                         std::to_string(j) + " at offset " +
                                         detail::pos_str(delta);
                        goto done1;
                    }
        }
    }
done1:;

    // (2): boundary cover, checked per coarse type on the reference occurrence
    for (std::size_t i = 0; i < coarse.boxes.size() && rep.p2.pass; ++i) {
        const BoxType& cb = coarse.boxes[i];
        const Vec2* ref = nullptr;
        for (const auto& p : cb.occurrences)
            if (norm(p) <= safe) { ref = &p; break; }
        if (!ref) continue;
        for (const auto& s : detail::boundary_samples(cb.domain, 16)) {
            Vec2 abs = s + *ref;
            bool on_fine = false;
            for (std::size_t j = 0; j < fine.boxes.size() && !on_fine; ++j)
                for (const auto& q : fine.boxes[j].occurrences) {
                    if (dist(q, abs) > fine.boxes[j].R_ext() + 1.0) continue;
                    if (fine.boxes[j].domain.translated(q).boundary_distance(abs) < tol) {
                        on_fine = true;
                        break;
                    }
                }
            if (!on_fine) {
                rep.p2.pass = false;
                rep.p2.witness = "boundary point " + detail::pos_str(abs) +
                                 " of coarse box " + std::to_string(i) +
                                 " lies on no fine boundary";
                break;
            }
        }
    }

    // (3): proper refinement
    for (std::size_t i = 0; i < coarse.boxes.size() && rep.p3.pass; ++i) {
        const BoxType& cb = coarse.boxes[i];
        const Vec2* ref = nullptr;
        for (const auto& p : cb.occurrences)
            if (norm(p) <= safe) { ref = &p; break; }
        if (!ref) continue;
        bool found = false;
        for (std::size_t j = 0; j < fine.boxes.size() && !found; ++j)
            for (const auto& q : fine.boxes[j].occurrences) {
                if (dist(q, *ref) > cb.R_ext() + fine.boxes[j].R_ext()) continue;
                if (!detail::interiors_intersect(cb.domain, *ref, fine.boxes[j].domain, q, tol))
                    continue;
                for (const auto& s : detail::boundary_samples(fine.boxes[j].domain, 8)) {
                    Vec2 abs = s + q;
                    if (cb.domain.contains_interior(abs - *ref, 10 * tol)) {
                        found = true;
                        break;
                    }
                }
                if (found) break;
            }
        if (!found) {
            rep.p3.pass = false;
            rep.p3.witness = "coarse box " + std::to_string(i) +
                             " at " + detail::pos_str(*ref) +
                             " has no intersecting fine box cutting its interior";
        }
    }

    // (4): exact partition of each coarse domain by fine translates
    for (std::size_t i = 0; i < coarse.boxes.size() && rep.p4.pass; ++i) {
        const BoxType& cb = coarse.boxes[i];
        const Vec2* ref = nullptr;
        for (const auto& p : cb.occurrences)
            if (norm(p) <= safe) { ref = &p; break; }
        if (!ref) continue;
        // collect fine boxes with interiors inside the coarse domain
        double covered = 0;
        std::vector<std::pair<std::size_t, Vec2>> inside;
        for (std::size_t j = 0; j < fine.boxes.size(); ++j)
            for (const auto& q : fine.boxes[j].occurrences) {
                if (dist(q, *ref) > cb.R_ext() + fine.boxes[j].R_ext()) continue;
                if (detail::interiors_intersect(cb.domain, *ref, fine.boxes[j].domain, q, tol)) {
                    inside.emplace_back(j, q - *ref);
                    covered += fine.boxes[j].domain.area();
                }
            }
        if (std::abs(covered - cb.domain.area()) > 1e-9 * cb.domain.area()) {
            rep.p4.pass = false;
            rep.p4.witness = "coarse box " + std::to_string(i) + " at " +
                             detail::pos_str(*ref) + ": fine areas sum to " +
                             std::to_string(covered) + " vs domain " +
                             std::to_string(cb.domain.area());
            break;
        }
        // pairwise interior disjointness of the collected fine translates
        for (std::size_t a = 0; a < inside.size() && rep.p4.pass; ++a)
            for (std::size_t b = a + 1; b < inside.size(); ++b) {
                const auto& [ja, da] = inside[a];
                const auto& [jb, db] = inside[b];
                if (detail::interiors_intersect(fine.boxes[ja].domain, da,
                                                fine.boxes[jb].domain, db, tol)) {
                    rep.p4.pass = false;
                    rep.p4.witness = "overlapping fine boxes inside coarse box " +
                                     std::to_string(i) + " at offsets " +
                                     detail::pos_str(da) + " and " + detail::pos_str(db);
                    break;
                }
            }
        // fine boxes crossing the coarse boundary would show up as an area
        // deficit of some neighbouring coarse box; also check no collected
        // fine translate leaks outside
        for (const auto& [j, dq] : inside) {
            for (const auto& s : detail::boundary_samples(fine.boxes[j].domain, 8)) {
                Vec2 rel = s + dq;
                if (cb.domain.winding_contains(rel)) continue;
                if (cb.domain.boundary_distance(rel) > 10 * tol) {
                    rep.p4.pass = false;
                    rep.p4.witness = "fine box " + std::to_string(j) + " at offset " +
                                     detail::pos_str(dq) + " leaks outside coarse box " +
                                     std::to_string(i);
                    break;
                }
            }
            if (!rep.p4.pass) break;
        }
    }

    // (5): coarse anchors are fine anchors
    for (std::size_t i = 0; i < coarse.boxes.size() && rep.p5.pass; ++i)
        for (const auto& p : coarse.boxes[i].occurrences) {
            if (norm(p) > safe) continue;
            if (!fine_all.contains(p)) {
                rep.p5.pass = false;
                rep.p5.witness = "coarse anchor " + detail::pos_str(p) +
                                 " of box " + std::to_string(i) + " is not a fine anchor";
                break;
            }
        }

    // eq7: unique cover of fine anchors by (coarse occurrence, offset) pairs
    {
        std::vector<detail::PosSet> coarse_occ(coarse.boxes.size());
        for (std::size_t i = 0; i < coarse.boxes.size(); ++i)
            for (const auto& p : coarse.boxes[i].occurrences) coarse_occ[i].insert(p);
        for (std::size_t j = 0; j < fine.boxes.size() && rep.eq7.pass; ++j)
            for (const auto& q : fine.boxes[j].occurrences) {
                if (norm(q) > safe) continue;
                int hits = 0;
                for (std::size_t i = 0; i < coarse.boxes.size(); ++i)
                    for (const auto& delta : placements[i][j]) {
                        // only anchor placements: fine anchor inside coarse domain
                        if (!coarse.boxes[i].domain.winding_contains(delta)) continue;
                        if (coarse_occ[i].contains(q - delta)) ++hits;
                    }
                if (hits != 1) {
                    rep.eq7.pass = false;
                    rep.eq7.witness = "fine anchor " + detail::pos_str(q) + " of box " +
                                      std::to_string(j) + " covered " +
                                      std::to_string(hits) + " times";
                    break;
                }
            }
    }

    return rep;
}

// ---------------------------------------------------------------------------
// Branching profile (are there several box types at depth?)
// ---------------------------------------------------------------------------

struct BranchingReport {
    std::vector<int> k_per_level;
    bool holds_at_depth = false;  // k_n > 1 at every computed level
    int first_violation = -1;
};

inline BranchingReport branching_report(const TowerSystem& tw) {
    if (tw.levels.empty()) throw error("branching_report: tower has no levels");
    BranchingReport br;
    br.holds_at_depth = true;
    for (const auto& lvl : tw.levels) {
        br.k_per_level.push_back(lvl.k());
        if (lvl.k() <= 1 && br.first_violation < 0) {
            br.first_violation = lvl.level;
            br.holds_at_depth = false;
        }
    }
    return br;
}

// ---------------------------------------------------------------------------
// Box measures
// ---------------------------------------------------------------------------

struct BoxMeasureRow {
    int level;
    int box;
    double nu;      // transversal frequency per unit volume
    double vol;     // exact domain volume
    double mu;      // nu * vol
};

struct BoxMeasureTable {
    std::vector<BoxMeasureRow> rows;
    std::vector<double> level_sums;

    double nu(int level, int box) const {
        for (const auto& r : rows)
            if (r.level == level && r.box == box) return r.nu;
        throw error("box_measures: no such row");
    }
};

namespace detail {

/// Area of the intersection of two disks with radii R and S whose centers
/// are d apart.
inline double lens_area(double d, double R, double S) {
    if (d >= R + S) return 0.0;
    if (d <= std::abs(R - S)) {
        double m = std::min(R, S);
        return std::numbers::pi * m * m;
    }
    double a = (d * d + R * R - S * S) / (2.0 * d * R);
    double b = (d * d + S * S - R * R) / (2.0 * d * S);
    a = std::clamp(a, -1.0, 1.0);
    b = std::clamp(b, -1.0, 1.0);
    double tri = 0.5 * std::sqrt(std::max(
                           (-d + R + S) * (d + R - S) * (d - R + S) * (d + R + S), 0.0));
    return R * R * std::acos(a) + S * S * std::acos(b) - tri;
}

} // namespace detail

/// Transversal frequencies of each base. Counting in a single ball of
/// desk-scale radius carries a large boundary term, so the count is averaged
/// continuously over all ball centers inside B_S: each occurrence enters with
/// weight area(B_R(a) cap B_S) / (pi R^2 pi S^2), which is the exact
/// continuum average of count(B_R(c))/Vol(B_R) over centers c in B_S.
inline BoxMeasureTable box_measures(const TowerSystem& tw, const DeloneMultiset& patch) {
    BoxMeasureTable tab;
    for (const auto& dec : tw.levels) {
        double sum = 0;
        for (std::size_t b = 0; b < dec.boxes.size(); ++b) {
            const BoxType& bt = dec.boxes[b];
            double usable = patch.window_radius - bt.base.rec;
            if (usable <= 0)
                throw window_overflow_error("box_measures: window cannot certify level " +
                                            std::to_string(dec.level));
            double R = usable * 0.6;
            double S = usable - R;
            double piR2 = std::numbers::pi * R * R;
            double piS2 = std::numbers::pi * S * S;
            double acc = 0;
            for (const auto& a : bt.occurrences)
                acc += detail::lens_area(norm(a), R, S);
            BoxMeasureRow row;
            row.level = dec.level;
            row.box = static_cast<int>(b);
            row.nu = acc / (piR2 * piS2);
            row.vol = bt.domain.area();
            row.mu = row.nu * row.vol;
            sum += row.mu;
            tab.rows.push_back(row);
        }
        tab.level_sums.push_back(sum);
    }
    return tab;
}

} // namespace lrgas
