// Demonstrates the support-separation mechanism: two disjoint witness
// indicators at one tower level cannot both fire along a short orbit, so
// their cross correlation vanishes identically inside the window that the
// horizon bound and the level inradius dictate.
#include <cstdio>

#include "lrgas/correlation.hpp"
#include "lrgas/substitution.hpp"

using namespace lrgas;

int main() {
    auto patch = std::make_shared<const DeloneMultiset>(generate_patch(chair_rule(), 8, 0));
    auto tower = build_substitution_tower(chair_rule(), patch, 4);
    auto cfg = ScattererConfig::make_uniform(patch, 0.9);

    HorizonEstimate hz = estimate_horizon(cfg, 1500, 42);
    std::printf("max free path over %ld samples: %.2f (growth flag %d)\n", hz.sample_count,
                hz.max_free_path, hz.growth_flag);

    for (int n = 1; n < tower.depth(); ++n) {
        WindowBound wb = zero_window(tower, hz, cfg, n);
        std::printf("level %d: inradius %.1f -> zero-correlation window k < %ld\n", n,
                    wb.proxy, wb.k_star);
    }

    WitnessObservable wi = witness(tower, 1, 0);
    WitnessObservable wj = witness(tower, 1, 1);
    Estimate bi = spatial_average(cfg, as_observable(wi), cfg.window * 0.3, 100000, 7);
    Estimate bj = spatial_average(cfg, as_observable(wj), cfg.window * 0.3, 100000, 7);
    std::printf("witness averages: %.5f and %.5f, product %.3e\n", bi.value, bj.value,
                bi.value * bj.value);
    std::printf("inside the window the correlation equals that product exactly,\n"
                "which caps how fast correlations can decay with the collision count.\n");
    return 0;
}
