#pragma once

#include <memory>
#include <vector>

#include "lrgas/billiard.hpp"
#include "lrgas/tower.hpp"

namespace lrgas {

// ---------------------------------------------------------------------------
// Witness observables: indicators of "on a scatterer of the right label whose
// surrounding pattern is a specific tower base"
// ---------------------------------------------------------------------------

struct WitnessObservable {
    int level = 0;
    int box_index = 0;
    Label label = 0;        // scatterer class the support lives on
    double rec = 0;         // pattern radius the value depends on
    int class_id = -1;      // reference class id in the tower
    std::vector<LabeledPoint> pattern;  // defining constellation, sorted by radius
    // occurrence bookkeeping on the patch the tower was built from:
    std::vector<Vec2> support_positions;
    std::vector<char> support_flag;  // per patch point index

    bool supported_on(int scatterer) const {
        return support_flag[static_cast<std::size_t>(scatterer)] != 0;
    }
};

/// Indicator of the level-n box-i base cylinder set crossed with the
/// outgoing bundle of its scatterer class. Requires several box types at the
/// level (a single type leaves no disjoint pair to compare downstream).
inline WitnessObservable witness(const TowerSystem& tw, int n, int i) {
    if (n < 0 || n >= tw.depth()) throw validation_error("witness: no such level");
    const BoxDecomposition& dec = tw.levels[n];
    if (dec.k() <= 1)
        throw validation_error("witness: level has a single box type; "
                               "need k_n > 1 to form disjoint witnesses");
    if (i < 0 || i >= dec.k()) throw validation_error("witness: no such box index");
    const BoxType& bt = dec.boxes[i];
    WitnessObservable w;
    w.level = n;
    w.box_index = i;
    w.label = bt.base.anchor_label;
    w.rec = bt.base.rec;
    w.class_id = bt.base.reference.id;
    w.pattern = bt.base.constellation;
    std::sort(w.pattern.begin(), w.pattern.end(), [](const LabeledPoint& a, const LabeledPoint& b) {
        return norm2(a.pos) < norm2(b.pos);
    });
    w.support_positions = bt.occurrences;
    w.support_flag.assign(tw.patch->size(), 0);
    double eps = tw.patch->eps_geo();
    for (const auto& p : bt.occurrences) {
        int idx = tw.patch->point_at(p, eps);
        if (idx < 0) throw error("witness: occurrence is not a patch point");
        w.support_flag[static_cast<std::size_t>(idx)] = 1;
    }
    return w;
}

/// Pointwise evaluation: 1 iff the state sits on a scatterer of the witness
/// label whose recentered pattern window matches the defining base. The
/// value is independent of the boundary point and direction.
inline int evaluate(const WitnessObservable& obs, const ScattererConfig& cfg,
                    const CollisionState& s) {
    const DeloneMultiset& m = *cfg.patch;
    if (m.points[s.scatterer].label != obs.label) return 0;
    if (norm(m.points[s.scatterer].pos) + obs.rec > m.window_radius + m.eps_geo())
        throw window_overflow_error("evaluate: witness window leaves the certified patch");
    return obs.supported_on(s.scatterer) ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Transversal Hölder seminorm of witness indicators
// ---------------------------------------------------------------------------

/// Upper bound (2L+1)^alpha lambda^(alpha n) with lambda = 6L(L+1)^2, the
/// scaling of the repetitivity tower with constant L.
inline double holder_bound(const WitnessObservable& obs, double alpha, double L) {
    if (alpha < 0 || L <= 1) throw std::domain_error("holder_bound: need alpha >= 0, L > 1");
    double lambda = 6.0 * L * (1.0 + L) * (1.0 + L);
    return std::pow(2.0 * L + 1.0, alpha) * std::pow(lambda, alpha * obs.level);
}

struct HolderReport {
    double alpha = 0;
    double theoretical_bound = 0;   // filled by the caller when available
    double empirical = 0;           // max quotient found
    Vec2 witness_in{}, witness_out{};  // pattern window pair achieving it
    double agreement_radius = 0;
};

/// Empirical seminorm of an indicator: the quotient |psi(c1)-psi(c2)|/d^alpha
/// is 1/d^alpha for pairs straddling the support boundary and 0 otherwise,
/// so the maximum reduces to the minimal transversal distance between an
/// in-support and an out-of-support window. The transversal metric between
/// two windows anchored at points is 1/(exact agreement radius), capped at
/// 2^{-1/2}; for patterns of finite local complexity no shift below half the
/// packing radius can improve the agreement, so the exact radius is the
/// metric. Pairs are enumerated exhaustively over certifiable occurrences.
inline HolderReport empirical_seminorm(const WitnessObservable& obs, double alpha,
                                       const DeloneMultiset& m) {
    HolderReport rep;
    rep.alpha = alpha;
    if (obs.support_positions.empty()) return rep;

    // Upper bound on the agreement radius of every out-of-support anchor:
    // the radius of the first defining-pattern point it fails to reproduce
    // (collars vary between occurrences, the constellation does not, so the
    // bound holds against every in-support window). Any pair agreeing to the
    // full pattern would contradict out-of-support membership.
    const std::vector<LabeledPoint>& pattern = obs.pattern;
    struct Cand { double bound; int index; };
    std::vector<Cand> cands;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m.points[i].label != obs.label) continue;
        if (obs.support_flag[i]) continue;
        if (norm(m.points[i].pos) + obs.rec > m.window_radius) continue;
        double bound = obs.rec;
        for (const auto& pp : pattern) {
            if (!m.has_point(m.points[i].pos + pp.pos, pp.label)) {
                bound = norm(pp.pos);
                break;
            }
        }
        cands.push_back({bound, static_cast<int>(i)});
    }
    std::sort(cands.begin(), cands.end(),
              [](const Cand& a, const Cand& b) { return a.bound > b.bound; });

    double best_agree = 0;
    Vec2 bin{}, bout{};
    for (const auto& cand : cands) {
        if (cand.bound <= best_agree) break;  // exact: bounds dominate the rest
        const Vec2& q = m.points[cand.index].pos;
        for (const auto& c1 : obs.support_positions) {
            double room = std::min(m.window_radius - norm(c1), m.window_radius - norm(q));
            double cap = std::min(room, obs.rec);
            double a = DeloneMultiset::agreement_radius(m, c1, m, q, cap);
            if (a > best_agree) {
                best_agree = a;
                bin = c1;
                bout = q;
            }
        }
    }
    double d = best_agree > 1e-12 ? std::min(1.0 / best_agree, kPatternDistanceCap)
                                  : kPatternDistanceCap;
    rep.empirical = std::pow(1.0 / d, alpha);  // quotient 1/d^alpha, numerator 1
    rep.witness_in = bin;
    rep.witness_out = bout;
    rep.agreement_radius = best_agree;
    return rep;
}

// ---------------------------------------------------------------------------
// Measures of witnesses under the normalized collision measure
// ---------------------------------------------------------------------------

/// Cosine-law mass of the outgoing bundle over one scatterer of label j:
/// boundary length times the unit cosine profile, i.e. pi * diameter in 2D.
inline double bundle_weight(const ScattererConfig& cfg, Label j) {
    return std::numbers::pi * 2.0 * cfg.radius_by_label[j];
}

/// Normalizer Z = sum_j w(j) * density(Lambda_j): fixes mu as a probability
/// per unit volume of configuration space.
inline double mu_normalizer(const ScattererConfig& cfg, double count_radius) {
    const DeloneMultiset& m = *cfg.patch;
    double Z = 0;
    std::vector<long> counts(m.label_names.size(), 0);
    long total = 0;
    for (const auto& p : m.points)
        if (norm(p.pos) <= count_radius) {
            counts[p.label]++;
            ++total;
        }
    double vol = ball_volume(m.dimension, count_radius);
    for (std::size_t j = 0; j < counts.size(); ++j)
        Z += bundle_weight(cfg, static_cast<Label>(j)) * counts[j] / vol;
    (void)total;
    return Z;
}

/// mu(psi) = w(label) * nu(C) / Z.
inline double mu_measure(const WitnessObservable& obs, const TowerSystem& tw,
                         const ScattererConfig& cfg, const BoxMeasureTable& table) {
    double nu = table.nu(obs.level, obs.box_index);
    double R = cfg.patch->window_radius * 0.7;
    return bundle_weight(cfg, obs.label) * nu / mu_normalizer(cfg, R);
}

/// min over labels of the single-scatterer bundle mass, normalized like mu.
inline double min_bundle_share(const ScattererConfig& cfg) {
    double R = cfg.patch->window_radius * 0.7;
    double Z = mu_normalizer(cfg, R);
    double w = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cfg.patch->label_names.size(); ++j)
        w = std::min(w, bundle_weight(cfg, static_cast<Label>(j)));
    return w / Z;
}

} // namespace lrgas
