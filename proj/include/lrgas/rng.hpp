#pragma once

#include <cstdint>

#include "lrgas/geom.hpp"

namespace lrgas {

/// Deterministic counter-style generator (splitmix64). All randomness in the
/// library flows through this type so runs are bit-reproducible across
/// platforms and thread schedules; per-trajectory streams are derived as
/// master_seed ^ trajectory_index.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static Rng for_stream(std::uint64_t master, std::uint64_t stream) {
        return Rng(master ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    /// Angle with the cosine law density cos(phi)/2 on (-pi/2, pi/2).
    double cosine_angle() { return std::asin(2.0 * uniform() - 1.0); }

  private:
    std::uint64_t state_;
};

} // namespace lrgas
