// Flight diagnostics: brute-force cross-check and longest-flight census.
#include <algorithm>
#include <cstdio>

#include "lrgas/billiard.hpp"
#include "lrgas/substitution.hpp"

using namespace lrgas;

static std::optional<FlightHit> brute_flight(const ScattererConfig& cfg, Vec2 x,
                                             Vec2 v, int exclude) {
    double best = std::numeric_limits<double>::infinity();
    FlightHit hit;
    for (std::size_t s = 0; s < cfg.patch->size(); ++s) {
        if (static_cast<int>(s) == exclude) continue;
        Vec2 d = x - cfg.center(static_cast<int>(s));
        double b = dot(d, v);
        if (b >= 0) continue;
        double rho = cfg.radius(static_cast<int>(s));
        double c2 = norm2(d) - rho * rho;
        double disc = b * b - c2;
        if (disc < 0) continue;
        double t = c2 / (-b + std::sqrt(disc));
        if (t <= kMinFlightTime || t >= best) continue;
        best = t;
        hit = {static_cast<int>(s), x + v * t, t};
    }
    double b_out = dot(x, v);
    double t_out = -b_out + std::sqrt(std::max(
                                b_out * b_out - (norm2(x) - cfg.window * cfg.window), 0.0));
    if (hit.scatterer >= 0 && best < t_out + 1e-9) return hit;
    return std::nullopt;
}

static void census(int level, double factor, long nsamp) {
    auto rule = chair_rule();
    auto patch = std::make_shared<DeloneMultiset>(generate_patch(rule, level, 0));
    auto cfg = ScattererConfig::make_uniform(patch, factor);
    std::printf("level %d rho=%.3f W=%.0f r_pack=%.3f R_cov=%.3f: ", level,
                factor * patch->packing_radius, cfg.window, patch->packing_radius,
                patch->covering_radius);
    StateSampler sampler(cfg, cfg.window * 0.4);
    std::vector<std::pair<double, double>> top;  // (len, angle)
    long escapes = 0;
    for (long i = 0; i < nsamp; ++i) {
        Rng r2 = Rng::for_stream(99, static_cast<std::uint64_t>(i));
        CollisionState s = sampler.sample(r2);
        for (int k = 0; k < 24; ++k) {
            Vec2 x = state_position(cfg, s);
            auto hit = free_flight(cfg, x, s.v, s.scatterer);
            if (!hit) { ++escapes; break; }
            top.emplace_back(hit->time, std::atan2(s.v[1], s.v[0]) * 180.0 / std::numbers::pi);
            Vec2 cj = cfg.center(hit->scatterer);
            Vec2 n = (hit->point - cj) * (1.0 / cfg.radius(hit->scatterer));
            CollisionState ns;
            ns.scatterer = hit->scatterer;
            ns.theta = std::atan2(n[1], n[0]);
            ns.v = reflect(s.v, n * (1.0 / norm(n)));
            s = ns;
            if (norm(state_position(cfg, s)) > cfg.window * 0.85) break;
        }
    }
    std::sort(top.begin(), top.end(), std::greater<>());
    std::printf("escapes=%ld top flights:", escapes);
    for (int i = 0; i < 6 && i < static_cast<int>(top.size()); ++i)
        std::printf(" %.1f@%.1f", top[i].first, top[i].second);
    std::printf("\n");
    std::fflush(stdout);
}

int main() {
    {  // correctness cross-check at level 6
        auto rule = chair_rule();
        auto patch = std::make_shared<DeloneMultiset>(generate_patch(rule, 6, 0));
        auto cfg = ScattererConfig::make_uniform(patch, 0.9);
        Rng rng(4242);
        StateSampler sampler(cfg, cfg.window * 0.4);
        int mismatches = 0;
        for (int i = 0; i < 1500; ++i) {
            CollisionState s = sampler.sample(rng);
            Vec2 x = state_position(cfg, s);
            auto a = free_flight(cfg, x, s.v, s.scatterer);
            auto b = brute_flight(cfg, x, s.v, s.scatterer);
            bool mism = a.has_value() != b.has_value();
            if (!mism && a)
                mism = a->scatterer != b->scatterer || std::abs(a->time - b->time) > 1e-9;
            if (mism) ++mismatches;
        }
        std::printf("grid vs brute mismatches: %d / 1500\n", mismatches);
    }
    census(6, 0.9, 20000);
    census(7, 0.9, 20000);
    census(8, 0.9, 20000);
    census(7, 0.75, 20000);
    return 0;
}
