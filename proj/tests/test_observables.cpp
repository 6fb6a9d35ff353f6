#include <catch2/catch_amalgamated.hpp>

#include "lrgas/correlation.hpp"
#include "lrgas/observables.hpp"
#include "lrgas/substitution.hpp"

using namespace lrgas;

namespace {
std::shared_ptr<const DeloneMultiset> chair7p() {
    static auto m = std::make_shared<const DeloneMultiset>(generate_patch(chair_rule(), 7, 0));
    return m;
}
const TowerSystem& tower() {
    static TowerSystem tw = build_substitution_tower(chair_rule(), chair7p(), 2);
    return tw;
}
const ScattererConfig& config() {
    static ScattererConfig cfg = ScattererConfig::make_uniform(chair7p(), 0.9);
    return cfg;
}
} // namespace

TEST_CASE("witness construction and field transfer") {
    WitnessObservable w = witness(tower(), 1, 1);
    REQUIRE(w.level == 1);
    REQUIRE(w.box_index == 1);
    REQUIRE(w.rec == tower().levels[1].boxes[1].base.rec);
    REQUIRE(w.support_positions.size() ==
            tower().levels[1].boxes[1].occurrences.size());
    REQUIRE_THROWS_AS(witness(tower(), 1, 7), validation_error);
    REQUIRE_THROWS_AS(witness(tower(), 5, 0), validation_error);
}

TEST_CASE("single-type towers admit no witness pair") {
    auto sq = std::make_shared<const DeloneMultiset>(generate_patch(square_rule(), 6, 0));
    TowerSystem tw = build_substitution_tower(square_rule(), sq, 1);
    REQUIRE_THROWS_AS(witness(tw, 1, 0), validation_error);
}

TEST_CASE("evaluation depends only on the scatterer pattern") {
    WitnessObservable w = witness(tower(), 1, 0);
    const ScattererConfig& cfg = config();

    // definitional occurrence evaluates to 1 for any boundary data
    int idx = cfg.patch->point_at(w.support_positions.front(), 1e-9);
    REQUIRE(idx >= 0);
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        CollisionState s;
        s.scatterer = idx;
        s.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double phi = rng.cosine_angle();
        Vec2 n = from_angle(s.theta);
        s.v = n * std::cos(phi) + rot90(n) * std::sin(phi);
        REQUIRE(evaluate(w, cfg, s) == 1);
    }

    // label mismatch evaluates to 0
    for (std::size_t i = 0; i < cfg.patch->size(); ++i) {
        if (cfg.patch->points[i].label == w.label) continue;
        if (norm(cfg.patch->points[i].pos) + w.rec > cfg.patch->window_radius) continue;
        CollisionState s{static_cast<int>(i), 0.3, from_angle(0.3)};
        REQUIRE(evaluate(w, cfg, s) == 0);
        break;
    }
}

TEST_CASE("witness supports at one level are disjoint") {
    WitnessObservable a = witness(tower(), 1, 0);
    WitnessObservable b = witness(tower(), 1, 2);
    for (std::size_t i = 0; i < a.support_flag.size(); ++i)
        REQUIRE(!(a.support_flag[i] && b.support_flag[i]));

    // pointwise product vanishes on sampled states
    const ScattererConfig& cfg = config();
    Rng rng(11);
    StateSampler sampler(cfg, cfg.window * 0.5);
    for (int i = 0; i < 5000; ++i) {
        CollisionState s = sampler.sample(rng);
        REQUIRE(evaluate(a, cfg, s) * evaluate(b, cfg, s) == 0);
    }
}

TEST_CASE("seminorm bound formula") {
    WitnessObservable w = witness(tower(), 1, 0);
    REQUIRE(holder_bound(w, 1.0, 2.0) == Catch::Approx(5.0 * 108.0));
    REQUIRE(holder_bound(w, 0.0, 2.0) == Catch::Approx(1.0));
    // monotone in n and alpha
    WitnessObservable w2 = witness(tower(), 2, 0);
    REQUIRE(holder_bound(w2, 1.0, 2.0) > holder_bound(w, 1.0, 2.0));
    REQUIRE(holder_bound(w, 2.0, 2.0) > holder_bound(w, 1.0, 2.0));
    REQUIRE_THROWS_AS(holder_bound(w, 1.0, 0.9), std::domain_error);
}

TEST_CASE("empirical seminorm stays under the bound") {
    const auto& m = *chair7p();
    double L_hat = 4.0;  // generous repetitivity constant for the bound
    for (int level : {1, 2})
        for (int i : {0, 1}) {
            WitnessObservable w = witness(tower(), level, i);
            for (double alpha : {0.5, 1.0, 2.0}) {
                HolderReport rep = empirical_seminorm(w, alpha, m);
                REQUIRE(rep.empirical > 0);
                REQUIRE(rep.empirical <= holder_bound(w, alpha, L_hat));
                // in/out pair witnesses a genuine agreement radius below rec
                REQUIRE(rep.agreement_radius < w.rec);
            }
        }
}

TEST_CASE("measures of witnesses") {
    const ScattererConfig& cfg = config();
    auto table = box_measures(tower(), *cfg.patch);

    // all labels share one disk radius, so the bundle weight cancels against
    // the normalizer and mu is the transversal share of the point density
    WitnessObservable w = witness(tower(), 1, 0);
    double mu = mu_measure(w, tower(), cfg, table);
    double nu = table.nu(1, 0);
    double density = point_density(*cfg.patch, cfg.patch->window_radius * 0.7);
    REQUIRE(mu == Catch::Approx(nu / density).epsilon(1e-9));

    // disjoint supports: measures add up to at most the full level mass
    double sum = 0;
    for (int i = 0; i < 4; ++i)
        sum += mu_measure(witness(tower(), 1, i), tower(), cfg, table);
    REQUIRE(sum > 0);
    REQUIRE(sum <= 1.0);

    // additivity is an arithmetic identity of the formula
    double two = mu_measure(witness(tower(), 1, 0), tower(), cfg, table) +
                 mu_measure(witness(tower(), 1, 1), tower(), cfg, table);
    REQUIRE(two == Catch::Approx(mu_measure(witness(tower(), 1, 0), tower(), cfg, table) +
                                 mu_measure(witness(tower(), 1, 1), tower(), cfg, table)));

    // level scaling band, measured against lambda_eff^{-2n}
    double lo = 1e18, hi = 0;
    for (int n : {1, 2})
        for (int i = 0; i < 4; ++i) {
            double v = mu_measure(witness(tower(), n, i), tower(), cfg, table) *
                       std::pow(4.0, n);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    REQUIRE(hi / lo <= 10.0);
}
