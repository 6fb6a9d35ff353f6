// Small tour of the pattern layer: generate a chair patch, inspect its
// Delone constants, catalog a few cluster radii and print the repetitivity
// profile.
#include <cstdio>

#include "lrgas/substitution.hpp"

using namespace lrgas;

int main() {
    auto rule = chair_rule();
    auto patch = generate_patch(rule, 6, 0);
    std::printf("chair patch, 6 inflation steps: %zu points\n", patch.size());
    std::printf("window %.1f, packing %.2f, covering %.2f\n", patch.window_radius,
                patch.packing_radius, patch.covering_radius);

    for (double R : {2.0, 4.0, 8.0, 16.0}) {
        auto cat = cluster_catalog(patch, R);
        std::printf("R = %5.1f: %4zu cluster classes", R, cat.classes.size());
        try {
            double T = repetitivity(patch, R);
            std::printf(", every %.1f-ball holds each class (ratio %.2f)\n", T, T / R);
        } catch (const not_certifiable_error&) {
            std::printf(", repetitivity not certifiable at this window\n");
        }
    }
    return 0;
}
