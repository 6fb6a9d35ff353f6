#pragma once

#include <map>
#include <string>
#include <vector>

#include "lrgas/delone.hpp"
#include "lrgas/geom.hpp"
#include "lrgas/tower.hpp"

namespace lrgas {

namespace detail {

/// Voronoi cell of `site` against the given neighbor positions, as a convex
/// clip of a generous bounding square. Neighbors further than twice the
/// covering radius cannot contribute a face.
inline Polygon voronoi_cell(const Vec2& site, const std::vector<Vec2>& neighbors,
                            double bound) {
    Polygon cell;
    cell.v = {site + v2(-bound, -bound), site + v2(bound, -bound),
              site + v2(bound, bound), site + v2(-bound, bound)};
    for (const auto& q : neighbors) {
        Vec2 d = q - site;
        double dd = norm2(d);
        if (dd < 1e-18) continue;
        // halfplane dot(d, x) <= dot(d, midpoint)
        double c = dot(d, (site + q) * 0.5);
        cell = clip_halfplane(cell, d, c);
        if (cell.v.size() < 3) break;
    }
    return cell;
}

inline std::uint64_t polygon_key(const Polygon& poly, const Vec2& anchor) {
    // canonical: sort quantized vertices (rotation of the vertex cycle does
    // not matter for congruence-by-translation grouping)
    std::vector<std::pair<std::int64_t, std::int64_t>> q;
    for (const auto& p : poly.v) q.push_back(qpos(p - anchor));
    std::sort(q.begin(), q.end());
    std::uint64_t h = 1469598103934665603ULL;
    for (auto [a, b] : q) {
        h = (h ^ static_cast<std::uint64_t>(a)) * 1099511628211ULL;
        h = (h ^ static_cast<std::uint64_t>(b)) * 1099511628211ULL;
    }
    return h;
}

/// Boundary of a union of edge-to-edge polygons: internal (shared) edges
/// cancel in pairs, the remaining directed edges chain into the outer loop.
inline Polygon union_boundary(const std::vector<Polygon>& parts) {
    using QP = std::pair<std::int64_t, std::int64_t>;
    std::map<std::pair<QP, QP>, Vec2> edges;  // (from,to) -> from position
    for (const auto& poly : parts)
        for (std::size_t i = 0; i < poly.v.size(); ++i) {
            Vec2 a = poly.v[i], b = poly.v[(i + 1) % poly.v.size()];
            QP qa = qpos(a), qb = qpos(b);
            auto rev = edges.find({qb, qa});
            if (rev != edges.end())
                edges.erase(rev);
            else
                edges[{qa, qb}] = a;
        }
    if (edges.empty()) return {};
    std::map<QP, std::pair<QP, Vec2>> nxt;
    for (const auto& [k, apos] : edges) nxt[k.first] = {k.second, apos};
    Polygon out;
    QP start = nxt.begin()->first, cur = start;
    for (std::size_t guard = 0; guard <= nxt.size(); ++guard) {
        auto it = nxt.find(cur);
        if (it == nxt.end()) break;
        out.v.push_back(it->second.second);
        cur = it->second.first;
        if (cur == start) break;
    }
    return out;
}

} // namespace detail

/// Level-0 box decomposition: the Voronoi cell of every point, box types
/// grouped by congruent (cell shape, label) pairs. The cell is determined by
/// the pattern within twice the covering radius, which bounds the
/// recognition radius of each base.
inline BoxDecomposition voronoi_decomposition(const DeloneMultiset& m) {
    BoxDecomposition dec;
    dec.level = 0;
    double reach = 2.0 * m.covering_radius + m.eps_geo();
    double rec = 2.0 * m.covering_radius + 2.0 * m.packing_radius;
    std::map<std::pair<std::uint64_t, Label>, int> type_of;
    std::vector<int> nb;
    for (std::size_t i = 0; i < m.size(); ++i) {
        const Vec2& p = m.points[i].pos;
        if (norm(p) + rec > m.window_radius) continue;
        m.index().query_ball(p, reach, nb);
        std::vector<Vec2> neighbors;
        for (int j : nb)
            if (j != static_cast<int>(i)) neighbors.push_back(m.points[j].pos);
        Polygon cell = detail::voronoi_cell(p, neighbors, 2.0 * m.covering_radius);
        auto key = std::make_pair(detail::polygon_key(cell, p), m.points[i].label);
        auto it = type_of.find(key);
        int t;
        if (it == type_of.end()) {
            t = static_cast<int>(dec.boxes.size());
            type_of[key] = t;
            BoxType bt;
            bt.level = 0;
            bt.domain = cell.translated(-p);
            bt.base.name = "vor" + std::to_string(t);
            bt.base.anchor_label = m.points[i].label;
            bt.base.rec = rec;
            bt.base.defining_radius = rec;
            Cluster c;
            c.anchor = {v2(0, 0), m.points[i].label};
            c.members = m.window(p, rec);
            c.radius = rec;
            bt.base.reference = {c, m.eps_geo(), t};
            bt.base.constellation = {{v2(0, 0), m.points[i].label}};
            dec.boxes.push_back(std::move(bt));
        } else {
            t = it->second;
        }
        dec.boxes[t].occurrences.push_back(p);
        dec.boxes[t].member_points.push_back({static_cast<int>(i)});
    }
    dec.refresh_radii();
    return dec;
}

struct VoronoiRefineResult {
    BoxDecomposition decomposition;
    long boundary_cells_excluded = 0;
};

/// One step of the return-vector refinement: Voronoi cells of the return
/// vectors of C, snapped to whole level-0 Voronoi cells (each point joins its
/// nearest return vector). The snap is the minimal boundary modification
/// that makes the partition into level-0 cells exact; cells touching the
/// window edge are excluded and counted.
inline VoronoiRefineResult voronoi_tower_refine(const DeloneMultiset& m,
                                                const LocalTransversal& C) {
    ReturnVectors rv = return_vectors(m, C);
    if (rv.positions.size() < 10)
        throw error("voronoi_tower_refine: fewer than 10 return vectors");

    GridIndex2 rindex(rv.positions, std::max(4.0 * m.covering_radius, 1.0));
    // covering radius of the return set, measured over the inner half window
    double ret_cov = 0;
    for (const auto& p : m.points) {
        if (norm(p.pos) > 0.5 * (m.window_radius - C.rec)) continue;
        ret_cov = std::max(ret_cov, rindex.nearest_distance(p.pos));
    }

    double usable = m.window_radius - C.rec - 2.0 * ret_cov;
    if (usable <= 0) throw window_overflow_error("voronoi_tower_refine: window too small");

    BoxDecomposition fine = voronoi_decomposition(m);
    // map point index -> (fine type, fine occurrence) for cell polygons
    std::unordered_map<int, std::pair<int, int>> fine_cell;
    for (std::size_t t = 0; t < fine.boxes.size(); ++t)
        for (std::size_t o = 0; o < fine.boxes[t].occurrences.size(); ++o)
            fine_cell[fine.boxes[t].member_points[o][0]] = {static_cast<int>(t),
                                                            static_cast<int>(o)};

    // nearest return for each certifiable point; lexicographic tie break
    auto nearest_return = [&](const Vec2& q) {
        std::vector<int> cand;
        for (double r = 2.0 * ret_cov;; r *= 1.5) {
            rindex.query_ball(q, r, cand);
            if (!cand.empty()) break;
        }
        int best = cand[0];
        for (int c : cand) {
            double dc = dist(rv.positions[c], q), db = dist(rv.positions[best], q);
            if (dc < db - 1e-12 ||
                (dc < db + 1e-12 && (rv.positions[c][0] < rv.positions[best][0] ||
                                     (rv.positions[c][0] == rv.positions[best][0] &&
                                      rv.positions[c][1] < rv.positions[best][1]))))
                best = c;
        }
        return best;
    };

    std::vector<std::vector<int>> members(rv.positions.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (norm(m.points[i].pos) > usable) continue;
        if (!fine_cell.count(static_cast<int>(i))) continue;
        members[nearest_return(m.points[i].pos)].push_back(static_cast<int>(i));
    }

    VoronoiRefineResult res;
    BoxDecomposition& dec = res.decomposition;
    dec.level = 1;
    std::map<std::uint64_t, int> type_of;
    for (std::size_t r = 0; r < rv.positions.size(); ++r) {
        const Vec2& anchor = rv.positions[r];
        if (members[r].empty()) { res.boundary_cells_excluded++; continue; }
        // interior check: the whole snapped cell must be certifiable
        bool interior = norm(anchor) + 3.0 * ret_cov + C.rec <= m.window_radius;
        double extent = 0;
        for (int pi : members[r]) extent = std::max(extent, dist(m.points[pi].pos, anchor));
        if (!interior || norm(anchor) + extent + 2.0 * m.covering_radius > usable) {
            res.boundary_cells_excluded++;
            continue;
        }
        // canonical key: member offsets with labels
        std::uint64_t h = 1469598103934665603ULL;
        std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, Label>> offs;
        for (int pi : members[r])
            offs.push_back({detail::qpos(m.points[pi].pos - anchor), m.points[pi].label});
        std::sort(offs.begin(), offs.end());
        for (auto& [qp, lb] : offs) {
            h = (h ^ static_cast<std::uint64_t>(qp.first)) * 1099511628211ULL;
            h = (h ^ static_cast<std::uint64_t>(qp.second)) * 1099511628211ULL;
            h = (h ^ static_cast<std::uint64_t>(lb)) * 1099511628211ULL;
        }
        auto it = type_of.find(h);
        int t;
        if (it == type_of.end()) {
            t = static_cast<int>(dec.boxes.size());
            type_of[h] = t;
            BoxType bt;
            bt.level = 1;
            std::vector<Polygon> parts;
            for (int pi : members[r]) {
                auto [ft, fo] = fine_cell[pi];
                parts.push_back(fine.boxes[ft].domain.translated(
                    fine.boxes[ft].occurrences[fo] - anchor));
            }
            bt.domain = detail::union_boundary(parts);
            bt.base.name = "ret" + std::to_string(t);
            bt.base.anchor_label = C.anchor_label;
            bt.base.rec = C.rec + 3.0 * ret_cov;
            bt.base.defining_radius = bt.base.rec;
            bt.base.constellation = C.constellation;
            Cluster cl;
            cl.anchor = {v2(0, 0), C.anchor_label};
            cl.members = m.window(anchor, std::min(bt.base.rec, m.window_radius - norm(anchor)));
            cl.radius = bt.base.rec;
            bt.base.reference = {cl, m.eps_geo(), t};
            dec.boxes.push_back(std::move(bt));
        } else {
            t = it->second;
        }
        dec.boxes[t].occurrences.push_back(anchor);
        dec.boxes[t].member_points.push_back(members[r]);
    }
    if (dec.boxes.empty())
        throw error("voronoi_tower_refine: no interior cells survived");
    dec.refresh_radii();
    return res;
}

} // namespace lrgas
