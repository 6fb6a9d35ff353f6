#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lrgas/delone.hpp"
#include "lrgas/errors.hpp"
#include "lrgas/geom.hpp"

namespace lrgas {

struct TileChild {
    Label label;
    Vec2 offset;  // translation inside the expanded parent, prototype units
};

struct Prototile {
    std::string name;
    Polygon shape;               // simple rectilinear polygon, integer vertices
    std::vector<Vec2> controls;  // control points, strictly interior; the
                                 // first one anchors the supertile hierarchy
    const Vec2& control() const { return controls.front(); }
};

/// Inflate-and-subdivide rule on labeled tiles. One inflation step maps the
/// tile (l, t) occupying expansion^k * shape_l + t to the children
/// (m, t + expansion^(k-1) * offset). Control points inherit the tile
/// translation, so the induced rule on labeled points is
/// p -> expansion * p + (offset + control_m - expansion * control_l).
struct SubstitutionRule {
    std::string name;
    double expansion = 2.0;
    std::vector<Prototile> prototypes;
    std::vector<std::vector<TileChild>> children;
    // designated self-children driving the hereditary supertile anchors;
    // corner is used at odd levels, central at even levels
    std::vector<int> corner_child;
    std::vector<int> central_child;

    int label_count() const { return static_cast<int>(prototypes.size()); }

    std::vector<std::vector<long>> label_count_matrix() const {
        int k = label_count();
        std::vector<std::vector<long>> M(k, std::vector<long>(k, 0));
        for (int i = 0; i < k; ++i)
            for (const auto& ch : children[i]) M[i][ch.label]++;
        return M;
    }

    bool primitive(int max_power = 8) const {
        int k = label_count();
        auto M = label_count_matrix();
        auto P = M;
        for (int step = 1; step <= max_power; ++step) {
            bool all = true;
            for (int i = 0; i < k && all; ++i)
                for (int j = 0; j < k && all; ++j)
                    if (P[i][j] <= 0) all = false;
            if (all) return true;
            // P = P * M
            std::vector<std::vector<long>> Q(k, std::vector<long>(k, 0));
            for (int i = 0; i < k; ++i)
                for (int l = 0; l < k; ++l)
                    if (P[i][l])
                        for (int j = 0; j < k; ++j) Q[i][j] += P[i][l] * M[l][j];
            P = std::move(Q);
        }
        return false;
    }

    /// Rejects rules whose children do not tile the expanded prototype or
    /// whose label-count matrix is not primitive.
    void validate() const {
        if (expansion <= 1.0) throw validation_error("substitution: expansion must exceed 1");
        if (prototypes.size() != children.size())
            throw validation_error("substitution: prototype/children size mismatch");
        if (!primitive())
            throw validation_error("substitution: label-count matrix is not primitive");
        for (int l = 0; l < label_count(); ++l) {
            if (prototypes[l].controls.empty())
                throw validation_error("substitution: prototype without control points");
            for (const auto& c : prototypes[l].controls)
                if (!prototypes[l].shape.winding_contains(c))
                    throw validation_error("substitution: control point outside prototype " +
                                           prototypes[l].name);
            double target = prototypes[l].shape.area() * expansion * expansion;
            double sum = 0;
            for (const auto& ch : children[l]) sum += prototypes[ch.label].shape.area();
            if (std::abs(sum - target) > 1e-9 * target)
                throw validation_error("substitution: children area does not match inflation of " +
                                       prototypes[l].name);
            // sample coverage: every interior sample of the inflated tile lies
            // in exactly one child
            Polygon big = prototypes[l].shape.scaled(expansion);
            double step = std::sqrt(big.area()) / 24.0;
            double x0 = 1e9, x1 = -1e9, y0 = 1e9, y1 = -1e9;
            for (const auto& p : big.v) {
                x0 = std::min(x0, p[0]); x1 = std::max(x1, p[0]);
                y0 = std::min(y0, p[1]); y1 = std::max(y1, p[1]);
            }
            for (double x = x0 + step / 2; x < x1; x += step)
                for (double y = y0 + step / 2; y < y1; y += step) {
                    Vec2 q = v2(x, y);
                    if (!big.contains_interior(q, 1e-9)) continue;
                    int hits = 0;
                    for (const auto& ch : children[l])
                        if (prototypes[ch.label].shape.translated(ch.offset).contains_interior(q, 1e-9))
                            ++hits;
                    if (hits != 1)
                        throw validation_error("substitution: children of " + prototypes[l].name +
                                               " do not tile the inflated prototype");
                }
            if (corner_child.size() != prototypes.size() || central_child.size() != prototypes.size())
                throw validation_error("substitution: designated self-children missing");
            if (children[l][corner_child[l]].label != l || children[l][central_child[l]].label != l)
                throw validation_error("substitution: designated children must preserve the label");
        }
    }

    int designated_child(int level, Label l) const {
        return (level % 2 == 1) ? corner_child[l] : central_child[l];
    }
};

// ---------------------------------------------------------------------------
// Shipped rules
// ---------------------------------------------------------------------------

/// Chair substitution on a 6-unit cell grid: four orientation labels,
/// expansion 2, each tile splitting into two copies of itself and the two
/// adjacent rotations. Each tile carries four control points at rotated
/// copies of {(2,5), (5,2), (10,2), (2,10)}. The offsets keep every point
/// at least 2 units inside its tile and cover every residue class mod 6 in
/// the axis and diagonal directions at least twice across the four
/// orientations, which is what lets moderately sized disks close all
/// straight corridors. The first point anchors the supertile hierarchy.
inline SubstitutionRule chair_rule() {
    SubstitutionRule r;
    r.name = "chair";
    r.expansion = 2.0;
    auto poly = [](std::initializer_list<std::pair<double, double>> q) {
        Polygon p;
        for (auto [x, y] : q) p.v.push_back(v2(x, y));
        return p;
    };
    auto rot = [](const Vec2& p) { return v2(12.0 - p[1], p[0]); };  // about (6,6)
    std::vector<Vec2> c0{v2(2, 5), v2(5, 2), v2(10, 2), v2(2, 10)};
    std::vector<Vec2> c1, c2, c3;
    for (const auto& p : c0) c1.push_back(rot(p));
    for (const auto& p : c1) c2.push_back(rot(p));
    for (const auto& p : c2) c3.push_back(rot(p));
    r.prototypes = {
        {"L0", poly({{0, 0}, {12, 0}, {12, 6}, {6, 6}, {6, 12}, {0, 12}}), c0},
        {"L1", poly({{0, 0}, {12, 0}, {12, 12}, {6, 12}, {6, 6}, {0, 6}}), c1},
        {"L2", poly({{6, 0}, {12, 0}, {12, 12}, {0, 12}, {0, 6}, {6, 6}}), c2},
        {"L3", poly({{0, 0}, {6, 0}, {6, 6}, {12, 6}, {12, 12}, {0, 12}}), c3},
    };
    r.children = {
        {{0, v2(0, 0)}, {0, v2(6, 6)}, {1, v2(12, 0)}, {3, v2(0, 12)}},
        {{1, v2(12, 0)}, {1, v2(6, 6)}, {2, v2(12, 12)}, {0, v2(0, 0)}},
        {{2, v2(12, 12)}, {2, v2(6, 6)}, {3, v2(0, 12)}, {1, v2(12, 0)}},
        {{3, v2(0, 12)}, {3, v2(6, 6)}, {0, v2(0, 0)}, {2, v2(12, 12)}},
    };
    r.corner_child = {0, 0, 0, 0};
    r.central_child = {1, 1, 1, 1};
    return r;
}

/// Periodic control: the unit square lattice under inflation by 2. One label,
/// transition number 4, and no aperiodic structure at all.
inline SubstitutionRule square_rule() {
    SubstitutionRule r;
    r.name = "square";
    r.expansion = 2.0;
    Polygon sq;
    sq.v = {v2(0, 0), v2(1, 0), v2(1, 1), v2(0, 1)};
    r.prototypes = {{"sq", sq, {v2(0.5, 0.5)}}};
    r.children = {{{0, v2(0, 0)}, {0, v2(1, 0)}, {0, v2(0, 1)}, {0, v2(1, 1)}}};
    r.corner_child = {0};
    r.central_child = {3};
    return r;
}

// ---------------------------------------------------------------------------
// Supertile hierarchy
// ---------------------------------------------------------------------------

struct Tile {
    Label label;
    Vec2 t;  // level-k tile occupies expansion^k * shape + t
};

/// The full tile hierarchy of a generated patch, in patch coordinates
/// (recentering shift already applied). tiles[k] lists all level-k tiles;
/// tiles[levels] is the seed.
struct Derivation {
    SubstitutionRule rule;
    int levels = 0;
    Label seed = 0;
    Vec2 shift{};
    std::vector<std::vector<Tile>> tiles;

    double scale(int level) const { return std::pow(rule.expansion, level); }

    /// Control anchor of a level-k tile relative to its translation. Walks
    /// the designated self-children down to a level-0 control point, so the
    /// anchor of a supertile is also an anchor at every finer level.
    Vec2 anchor_offset(int level, Label l) const {
        Vec2 off = v2(0, 0);
        for (int k = level; k >= 1; --k)
            off += rule.children[l][rule.designated_child(k, l)].offset * scale(k - 1);
        return off + rule.prototypes[l].control();
    }

    Vec2 anchor(int level, const Tile& tile) const {
        return tile.t + anchor_offset(level, tile.label);
    }

    Polygon domain_at(int level, const Tile& tile) const {
        return rule.prototypes[tile.label].shape.scaled(scale(level)).translated(tile.t);
    }
};

inline Derivation derive(const SubstitutionRule& rule, int levels, Label seed) {
    Derivation d;
    d.rule = rule;
    d.levels = levels;
    d.seed = seed;
    d.tiles.resize(levels + 1);
    d.tiles[levels] = {{seed, v2(0, 0)}};
    for (int k = levels; k >= 1; --k) {
        double s = d.scale(k - 1);
        d.tiles[k - 1].reserve(d.tiles[k].size() * rule.children[seed].size());
        for (const Tile& tile : d.tiles[k])
            for (const auto& ch : rule.children[tile.label])
                d.tiles[k - 1].push_back({ch.label, tile.t + ch.offset * s});
    }
    return d;
}

/// Applies `levels` inflation steps to the single-point seed motif and
/// recenters so the control point deepest inside the generated region sits at
/// the origin. The window radius is that point's distance to the region
/// boundary: the patch is complete there by construction.
inline DeloneMultiset generate_patch(const SubstitutionRule& rule, int levels,
                                     Label seed) {
    rule.validate();
    if (levels < 0) throw validation_error("generate_patch: negative level");
    if (seed < 0 || seed >= rule.label_count())
        throw validation_error("generate_patch: unknown seed label");

    Derivation d = derive(rule, levels, seed);
    Polygon support = rule.prototypes[seed].shape.scaled(d.scale(levels));

    std::vector<LabeledPoint> pts;
    pts.reserve(d.tiles[0].size() * rule.prototypes[0].controls.size());
    for (const Tile& t : d.tiles[0])
        for (const Vec2& c : rule.prototypes[t.label].controls)
            pts.push_back({t.t + c, t.label});

    // recenter at the point with the largest boundary clearance
    int best = 0;
    double bd = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double dd = support.boundary_distance(pts[i].pos);
        if (dd > bd) { bd = dd; best = static_cast<int>(i); }
    }
    Vec2 shift = -pts[best].pos;
    for (auto& p : pts) p.pos += shift;

    DeloneMultiset m;
    m.dimension = 2;
    for (const auto& pt : rule.prototypes) m.label_names.push_back(pt.name);
    m.points = std::move(pts);
    m.window_radius = bd;

    std::vector<Vec2> pos;
    pos.reserve(m.points.size());
    for (const auto& p : m.points) pos.push_back(p.pos);
    double gap = measure_min_gap(pos);
    m.packing_radius = std::isfinite(gap) ? gap / 2.0 : m.window_radius / 2.0;
    if (m.points.size() >= 2) {
        double h = std::max(m.packing_radius / 2.0, m.window_radius / 700.0);
        m.covering_radius = std::min(measure_covering_radius(pos, m.window_radius, h),
                                     m.window_radius * 0.999);
    } else {
        m.covering_radius = m.window_radius / 2.0;
        m.packing_radius = m.window_radius / 2.0;
    }
    m.provenance = PatchProvenance{rule.name, levels, seed, shift};
    m.finalize();
    return m;
}

/// Rebuilds the hierarchy of a generated patch in patch coordinates.
inline Derivation derivation_for(const SubstitutionRule& rule,
                                 const DeloneMultiset& m) {
    if (!m.provenance || m.provenance->rule != rule.name)
        throw insufficient_patch_error("derivation_for: patch was not generated by this rule");
    Derivation d = derive(rule, m.provenance->levels, m.provenance->seed_label);
    d.shift = m.provenance->shift;
    for (auto& lvl : d.tiles)
        for (auto& t : lvl) t.t += d.shift;
    return d;
}

// ---------------------------------------------------------------------------
// Triangular lattice control patch (not a substitution; direct enumeration)
// ---------------------------------------------------------------------------

inline DeloneMultiset triangular_patch(double spacing, double radius) {
    DeloneMultiset m;
    m.dimension = 2;
    m.label_names = {"tri"};
    Vec2 b1 = v2(spacing, 0);
    Vec2 b2 = v2(spacing / 2.0, spacing * std::sqrt(3.0) / 2.0);
    double gen = radius + 2.0 * spacing;
    int n = static_cast<int>(std::ceil(gen / spacing)) + 2;
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            Vec2 p = b1 * static_cast<double>(i) + b2 * static_cast<double>(j);
            if (norm(p) <= gen) m.points.push_back({p, 0});
        }
    m.window_radius = radius;
    m.packing_radius = spacing / 2.0;
    m.covering_radius = spacing / std::sqrt(3.0) + 1e-9;
    m.finalize();
    return m;
}

inline const SubstitutionRule& rule_by_name(const std::string& name) {
    static const SubstitutionRule chair = chair_rule();
    static const SubstitutionRule square = square_rule();
    if (name == "chair") return chair;
    if (name == "square") return square;
    throw validation_error("unknown substitution rule: " + name);
}

} // namespace lrgas
