#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lrgas/errors.hpp"
#include "lrgas/geom.hpp"

namespace lrgas {

using Label = int;

struct LabeledPoint {
    Vec2 pos;
    Label label = 0;
};

inline bool lex_less(const LabeledPoint& a, const LabeledPoint& b) {
    if (a.pos[0] != b.pos[0]) return a.pos[0] < b.pos[0];
    if (a.pos[1] != b.pos[1]) return a.pos[1] < b.pos[1];
    return a.label < b.label;
}

/// How a patch was generated; enough to rebuild its supertile hierarchy.
struct PatchProvenance {
    std::string rule;
    int levels = 0;
    Label seed_label = 0;
    Vec2 shift{};  // recentering translation applied to generator output
};

/// A finite window of a Delone multiset: all points of the underlying
/// infinite pattern inside the closed ball of radius `window_radius` about
/// the origin are present. Every operation states the radius it can certify
/// and refuses to answer beyond it.
class DeloneMultiset {
  public:
    int dimension = 2;
    std::vector<std::string> label_names;
    std::vector<LabeledPoint> points;
    double window_radius = 0;
    double packing_radius = 0;
    double covering_radius = 0;
    std::optional<PatchProvenance> provenance;

    /// Sorts points, mirrors positions, builds the spatial index. Must be
    /// called once after the point list is filled; the patch is immutable
    /// afterwards.
    void finalize() {
        std::sort(points.begin(), points.end(), lex_less);
        positions_.resize(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) positions_[i] = points[i].pos;
        double cell = std::max(packing_radius > 0 ? 2.0 * packing_radius : 1.0, 1e-6);
        index_ = GridIndex2(positions_, cell);
    }

    std::size_t size() const { return points.size(); }
    const GridIndex2& index() const { return index_; }
    const std::vector<Vec2>& positions() const { return positions_; }

    /// Geometric tolerance for point matching: 1e-9 * packing radius.
    double eps_geo() const { return 1e-9 * std::max(packing_radius, 1e-9); }

    /// Index of the patch point within eps of pos, or -1.
    int point_at(const Vec2& pos, double eps) const { return index_.find_near(pos, eps); }

    bool has_point(const Vec2& pos, Label label) const {
        int i = point_at(pos, eps_geo());
        return i >= 0 && points[i].label == label;
    }

    std::vector<int> ball(const Vec2& c, double R) const {
        std::vector<int> out;
        index_.query_ball(c, R, out);
        return out;
    }

    /// Points within R of c, recentered at c and sorted lexicographically.
    std::vector<LabeledPoint> window(const Vec2& c, double R) const {
        std::vector<LabeledPoint> w;
        for (int i : ball(c, R + eps_geo()))
            w.push_back({points[i].pos - c, points[i].label});
        std::sort(w.begin(), w.end(), lex_less);
        return w;
    }

    /// Do the R-windows at c1 (in A) and c2 (in B) coincide as labeled point
    /// sets, up to the matching tolerance?
    static bool windows_equal(const DeloneMultiset& A, const Vec2& c1,
                              const DeloneMultiset& B, const Vec2& c2, double R) {
        double eps = std::min(A.eps_geo(), B.eps_geo());
        std::vector<int> ia = A.ball(c1, R + eps);
        std::vector<int> ib = B.ball(c2, R + eps);
        if (ia.size() != ib.size()) return false;
        for (int i : ia) {
            Vec2 q = A.points[i].pos - c1 + c2;
            int j = B.point_at(q, eps);
            if (j < 0 || B.points[j].label != A.points[i].label) return false;
        }
        return true;
    }

    bool windows_equal(const Vec2& c1, const Vec2& c2, double R) const {
        return windows_equal(*this, c1, *this, c2, R);
    }

    /// Largest radius r <= cap such that the windows at c1 and c2 agree
    /// exactly on B_r. Exact for finite patches: the first mismatching point
    /// determines the radius.
    static double agreement_radius(const DeloneMultiset& A, const Vec2& c1,
                                   const DeloneMultiset& B, const Vec2& c2,
                                   double cap) {
        double eps = std::min(A.eps_geo(), B.eps_geo());
        double r = cap;
        for (int i : A.ball(c1, cap + eps)) {
            Vec2 q = A.points[i].pos - c1 + c2;
            int j = B.point_at(q, eps);
            if (j < 0 || B.points[j].label != A.points[i].label)
                r = std::min(r, dist(A.points[i].pos, c1));
        }
        for (int j : B.ball(c2, cap + eps)) {
            Vec2 p = B.points[j].pos - c2 + c1;
            int i = A.point_at(p, eps);
            if (i < 0 || A.points[i].label != B.points[j].label)
                r = std::min(r, dist(B.points[j].pos, c2));
        }
        return r;
    }

  private:
    std::vector<Vec2> positions_;
    GridIndex2 index_;
};

// ---------------------------------------------------------------------------
// Clusters and cluster classes
// ---------------------------------------------------------------------------

/// All patch points within R of an anchor point, recentered at the anchor.
struct Cluster {
    LabeledPoint anchor;                // position is the zero vector
    std::vector<LabeledPoint> members;  // relative to anchor, sorted, includes it
    double radius = 0;
};

/// Translation-equivalence class of clusters. Two clusters are equivalent iff
/// the translation carrying anchor to anchor matches all members within the
/// geometric tolerance.
struct ClusterClass {
    Cluster canonical_form;
    double match_tolerance = 0;
    int id = -1;
};

inline Cluster r_cluster(const DeloneMultiset& m, int anchor_index, double R) {
    const LabeledPoint& p = m.points[anchor_index];
    if (norm(p.pos) + R > m.window_radius + m.eps_geo())
        throw window_overflow_error("r_cluster: ball of radius " + std::to_string(R) +
                                    " at the anchor leaves the certified window");
    Cluster c;
    c.anchor = {v2(0, 0), p.label};
    c.members = m.window(p.pos, R);
    c.radius = R;
    return c;
}

inline Cluster r_cluster(const DeloneMultiset& m, const LabeledPoint& p, double R) {
    int i = m.point_at(p.pos, m.eps_geo());
    if (i < 0 || m.points[i].label != p.label)
        throw error("r_cluster: anchor is not a patch point");
    return r_cluster(m, i, R);
}

inline bool clusters_equivalent(const Cluster& a, const Cluster& b, double eps) {
    if (a.members.size() != b.members.size()) return false;
    if (a.anchor.label != b.anchor.label) return false;
    for (std::size_t i = 0; i < a.members.size(); ++i) {
        if (a.members[i].label != b.members[i].label) return false;
        if (dist(a.members[i].pos, b.members[i].pos) > eps) return false;
    }
    return true;
}

/// Does the patch window of radius cls.radius at position pos reproduce the
/// class exactly? pos need not be a patch point.
inline bool window_matches_class(const DeloneMultiset& m, const Vec2& pos,
                                 const ClusterClass& cls) {
    double eps = m.eps_geo();
    std::vector<int> in = m.ball(pos, cls.canonical_form.radius + eps);
    if (in.size() != cls.canonical_form.members.size()) return false;
    for (const auto& mem : cls.canonical_form.members) {
        int j = m.point_at(pos + mem.pos, eps);
        if (j < 0 || m.points[j].label != mem.label) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Cluster catalog
// ---------------------------------------------------------------------------

struct ClusterCatalog {
    double radius = 0;
    std::vector<ClusterClass> classes;
    std::vector<long> multiplicity;              // per class, certifiable anchors
    std::vector<std::pair<int, int>> anchors;    // (point index, class id)
};

namespace detail {
inline std::uint64_t cluster_key(const Cluster& c) {
    // Exact for the dyadic generators; always confirmed by an eps compare.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::uint64_t x) {
        h ^= x;
        h *= 1099511628211ULL;
    };
    mix(static_cast<std::uint64_t>(c.members.size()));
    mix(static_cast<std::uint64_t>(c.anchor.label));
    for (const auto& p : c.members) {
        mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(llround(p.pos[0] * 1048576.0))));
        mix(static_cast<std::uint64_t>(static_cast<std::int64_t>(llround(p.pos[1] * 1048576.0))));
        mix(static_cast<std::uint64_t>(p.label));
    }
    return h;
}
} // namespace detail

/// Distinct translation classes of R-clusters over all anchors p with
/// |p| + R <= window. Finite local complexity shows up as this catalog
/// stabilizing across patch levels.
inline ClusterCatalog cluster_catalog(const DeloneMultiset& m, double R) {
    if (R < m.packing_radius)
        throw error("cluster_catalog: R below the packing radius");
    ClusterCatalog cat;
    cat.radius = R;
    std::unordered_map<std::uint64_t, std::vector<int>> by_key;
    double eps = m.eps_geo();
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (norm(m.points[i].pos) + R > m.window_radius + eps) continue;
        Cluster c = r_cluster(m, static_cast<int>(i), R);
        std::uint64_t key = detail::cluster_key(c);
        int found = -1;
        for (int cid : by_key[key])
            if (clusters_equivalent(c, cat.classes[cid].canonical_form, eps)) {
                found = cid;
                break;
            }
        if (found < 0) {
            // hash miss can still be an eps-match for noisy coordinates
            for (std::size_t cid = 0; cid < cat.classes.size(); ++cid)
                if (clusters_equivalent(c, cat.classes[cid].canonical_form, eps)) {
                    found = static_cast<int>(cid);
                    break;
                }
        }
        if (found < 0) {
            found = static_cast<int>(cat.classes.size());
            cat.classes.push_back({c, eps, found});
            cat.multiplicity.push_back(0);
            by_key[key].push_back(found);
        }
        cat.multiplicity[found]++;
        cat.anchors.emplace_back(static_cast<int>(i), found);
    }
    return cat;
}

// ---------------------------------------------------------------------------
// Cluster frequencies
// ---------------------------------------------------------------------------

struct FrequencyEstimate {
    std::vector<double> radii;
    std::vector<double> values;   // counts / Vol(B_R)
    double estimate = 0;          // value at the largest radius
    double max_rel_change = 0;    // max successive relative change
};

/// Counts of translates of the class whose window matches exactly and whose
/// members all lie in B_R(0), divided by Vol(B_R), for each R in `radii`.
inline FrequencyEstimate cluster_frequency(const DeloneMultiset& m,
                                           const ClusterClass& cls,
                                           const std::vector<double>& radii) {
    double Rmax = 0;
    for (double r : radii) Rmax = std::max(Rmax, r);
    if (Rmax + cls.canonical_form.radius > m.window_radius + m.eps_geo())
        throw window_overflow_error("cluster_frequency: radii exceed the certifiable region");

    double extent = 0;  // members may stick out beyond the anchor
    for (const auto& mem : cls.canonical_form.members)
        extent = std::max(extent, norm(mem.pos));

    std::vector<double> occ_r;  // max |member| per occurrence, anchored at patch points
    for (std::size_t i = 0; i < m.size(); ++i) {
        const auto& p = m.points[i];
        if (p.label != cls.canonical_form.anchor.label) continue;
        if (norm(p.pos) > Rmax + 1e-12) continue;
        if (!window_matches_class(m, p.pos, cls)) continue;
        double worst = 0;
        for (const auto& mem : cls.canonical_form.members)
            worst = std::max(worst, norm(p.pos + mem.pos));
        occ_r.push_back(worst);
    }
    std::sort(occ_r.begin(), occ_r.end());

    FrequencyEstimate fe;
    fe.radii = radii;
    for (double R : radii) {
        auto it = std::upper_bound(occ_r.begin(), occ_r.end(), R + 1e-12);
        double cnt = static_cast<double>(it - occ_r.begin());
        fe.values.push_back(cnt / ball_volume(m.dimension, R));
    }
    fe.estimate = fe.values.empty() ? 0.0 : fe.values.back();
    for (std::size_t i = 1; i < fe.values.size(); ++i) {
        double denom = std::abs(fe.values[i - 1]);
        if (denom > 0)
            fe.max_rel_change = std::max(
                fe.max_rel_change, std::abs(fe.values[i] - fe.values[i - 1]) / denom);
    }
    (void)extent;
    return fe;
}

/// Total point density of the patch, counted in B_R(0).
inline double point_density(const DeloneMultiset& m, double R) {
    long n = 0;
    for (const auto& p : m.points)
        if (norm(p.pos) <= R) ++n;
    return static_cast<double>(n) / ball_volume(m.dimension, R);
}

// ---------------------------------------------------------------------------
// Repetitivity
// ---------------------------------------------------------------------------

namespace detail {

/// Exact 1D squared-distance transform (lower envelope of parabolas).
inline void dt1d(const std::vector<double>& f, std::vector<double>& d) {
    int n = static_cast<int>(f.size());
    d.assign(n, 0.0);
    std::vector<int> v(n, 0);
    std::vector<double> z(n + 1, 0.0);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            int p = v[k];
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * q - 2.0 * p);
            if (s <= z[k]) { --k; } else break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        int p = v[k];
        d[q] = (q - p) * (q - p) + f[p];
    }
}

/// Exact Euclidean distance transform on a square grid: d[i][j] = distance
/// in cells to the nearest seed cell.
inline std::vector<double> edt2d(std::vector<double>& grid, int n) {
    std::vector<double> col(n), out(n);
    for (int i = 0; i < n; ++i) {  // columns
        for (int j = 0; j < n; ++j) col[j] = grid[static_cast<std::size_t>(j) * n + i];
        dt1d(col, out);
        for (int j = 0; j < n; ++j) grid[static_cast<std::size_t>(j) * n + i] = out[j];
    }
    std::vector<double> row(n);
    for (int j = 0; j < n; ++j) {  // rows
        for (int i = 0; i < n; ++i) row[i] = grid[static_cast<std::size_t>(j) * n + i];
        dt1d(row, out);
        for (int i = 0; i < n; ++i)
            grid[static_cast<std::size_t>(j) * n + i] = std::sqrt(out[i]);
    }
    return grid;
}

} // namespace detail

/// Least T on a grid of resolution packing_radius/4 such that every ball of
/// radius T whose content the patch can certify contains a translate of
/// every R-cluster class (the whole cluster inside the ball, so the anchor
/// must sit within T - R). Ball centers are restricted so the certifiable
/// anchor set is complete for every tested ball, and grid snapping enters as
/// an additive margin, so the estimate is conservative.
inline double repetitivity(const DeloneMultiset& m, double R) {
    ClusterCatalog cat = cluster_catalog(m, R);
    if (cat.classes.empty())
        throw not_certifiable_error("repetitivity: empty catalog");
    double W = m.window_radius;
    double step = m.packing_radius / 4.0;  // candidate T resolution
    double hx = m.packing_radius / 2.0;    // evaluation grid resolution
    double S = W - R;
    if (S <= 0)
        throw not_certifiable_error("repetitivity: window too small for this R");

    // h(x) = max over classes of the distance to the nearest class anchor,
    // evaluated by one exact distance transform per class over [-S, S]^2
    int n = static_cast<int>(std::ceil(2.0 * S / hx)) + 1;
    auto cell_of = [&](const Vec2& p) {
        int i = static_cast<int>(std::floor((p[0] + S) / hx + 0.5));
        int j = static_cast<int>(std::floor((p[1] + S) / hx + 0.5));
        return std::pair<int, int>(i, j);
    };
    std::vector<std::vector<Vec2>> anchors(cat.classes.size());
    for (auto [pi, cid] : cat.anchors) anchors[cid].push_back(m.points[pi].pos);

    std::vector<double> worst(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> grid;
    const double kInf = 1e18;
    for (const auto& cls_anchors : anchors) {
        grid.assign(static_cast<std::size_t>(n) * n, kInf);
        for (const auto& a : cls_anchors) {
            auto [i, j] = cell_of(a);
            if (i >= 0 && i < n && j >= 0 && j < n)
                grid[static_cast<std::size_t>(j) * n + i] = 0.0;
        }
        detail::edt2d(grid, n);
        for (std::size_t idx = 0; idx < worst.size(); ++idx)
            worst[idx] = std::max(worst[idx], grid[idx] * hx);
    }

    // prefix max of h over |x| <= s, with the double-snap margin folded in
    struct Node { double r; double h; };
    std::vector<Node> nodes;
    nodes.reserve(worst.size());
    double margin = hx * 2.2;  // seed snap + query snap + continuity
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            Vec2 x = v2(i * hx - S, j * hx - S);
            double rx = norm(x);
            if (rx > S) continue;
            nodes.push_back({rx, worst[static_cast<std::size_t>(j) * n + i] + margin});
        }
    std::sort(nodes.begin(), nodes.end(),
              [](const Node& a, const Node& b) { return a.r < b.r; });
    std::vector<double> prefix(nodes.size());
    double run = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        run = std::max(run, nodes[i].h);
        prefix[i] = run;
    }
    auto H = [&](double s) {
        std::size_t lo = 0, hi = nodes.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (nodes[mid].r <= s) lo = mid + 1; else hi = mid;
        }
        return lo == 0 ? 0.0 : prefix[lo - 1];
    };

    for (double T = R + step; T <= W - R + 1e-9; T += step) {
        double s = W - R - T;
        if (s < 0) break;
        if (H(s) <= T - R) return T;
    }
    throw not_certifiable_error("repetitivity: no certifiable T on this patch");
}

// ---------------------------------------------------------------------------
// Pattern-space metric
// ---------------------------------------------------------------------------

inline constexpr double kPatternDistanceCap = 0.70710678118654752440;  // 2^{-1/2}

/// Smallest grid epsilon admitting shifts x, y with |x|,|y| < eps that make
/// the two patterns agree exactly on B_{1/eps}(0), capped at 2^{-1/2}.
/// Candidate shifts are enumerated from point matchings near the origin,
/// which is exhaustive for patches of finite local complexity; the two
/// independent shifts reduce to one relative shift split evenly.
inline double pattern_distance(const DeloneMultiset& A, const DeloneMultiset& B,
                               std::vector<double> eps_grid) {
    std::sort(eps_grid.begin(), eps_grid.end());
    if (eps_grid.empty()) throw error("pattern_distance: empty grid");
    double need = 1.0 / eps_grid.front() + eps_grid.back() + 1.0;
    if (A.window_radius < need || B.window_radius < need)
        throw window_overflow_error("pattern_distance: window smaller than 1/min(eps) + max(eps)");

    auto nearest_origin = [](const DeloneMultiset& M) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < M.size(); ++i) {
            double d = norm(M.points[i].pos);
            if (d < bd) { bd = d; best = static_cast<int>(i); }
        }
        return best;
    };
    int pa = nearest_origin(A);
    int pb = nearest_origin(B);

    for (double eps : eps_grid) {
        if (eps >= kPatternDistanceCap) break;
        double R = 1.0 / eps;
        std::vector<Vec2> candidates{v2(0, 0)};
        // relative shifts delta with |delta| < 2 eps mapping a near-origin
        // point of one pattern onto a point of the other
        if (pa >= 0)
            for (int j : B.ball(A.points[pa].pos, 2.0 * eps)) {
                if (B.points[j].label != A.points[pa].label) continue;
                candidates.push_back(A.points[pa].pos - B.points[j].pos);
            }
        if (pb >= 0)
            for (int i : A.ball(B.points[pb].pos, 2.0 * eps)) {
                if (A.points[i].label != B.points[pb].label) continue;
                candidates.push_back(A.points[i].pos - B.points[pb].pos);
            }
        for (const Vec2& d : candidates) {
            if (norm(d) >= 2.0 * eps) continue;
            // x = d/2 shifts A, y = -d/2 shifts B; compare on the fixed ball
            if (DeloneMultiset::windows_equal(A, d * 0.5, B, d * -0.5, R))
                return eps;
        }
    }
    return kPatternDistanceCap;
}

// ---------------------------------------------------------------------------
// Measured Delone constants
// ---------------------------------------------------------------------------

inline double measure_min_gap(const std::vector<Vec2>& pts) {
    if (pts.size() < 2) return std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    // coarse cell, refine with actual neighbor query
    double guess = 64.0;
    GridIndex2 g(pts, guess);
    std::vector<int> nb;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (double r = guess;; r *= 2) {
            g.query_ball(pts[i], r, nb);
            if (nb.size() > 1) break;
        }
        for (int j : nb)
            if (j != static_cast<int>(i)) lo = std::min(lo, dist(pts[i], pts[j]));
    }
    return lo;
}

/// Farthest-point search over a grid on the patch: largest empty-ball radius
/// testable inside the window (|x| + d <= W), plus a grid-diagonal margin.
inline double measure_covering_radius(const std::vector<Vec2>& pts, double W,
                                      double h) {
    GridIndex2 g(pts, std::max(4.0 * h, 1.0));
    double best = 0;
    int n = static_cast<int>(std::floor(W / h));
    for (int i = -n; i <= n; ++i)
        for (int j = -n; j <= n; ++j) {
            Vec2 x = v2(i * h, j * h);
            double rx = norm(x);
            if (rx > W) continue;
            double d = g.nearest_distance(x);
            if (rx + d <= W && d > best) best = d;
        }
    return best + h * 1.5;
}

} // namespace lrgas
