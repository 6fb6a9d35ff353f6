#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "lrgas/delone.hpp"
#include "lrgas/errors.hpp"
#include "lrgas/geom.hpp"
#include "lrgas/rng.hpp"

namespace lrgas {

// ---------------------------------------------------------------------------
// Scatterer configurations: one disk per patch point, radius by label
// ---------------------------------------------------------------------------

class ScattererConfig {
  public:
    std::shared_ptr<const DeloneMultiset> patch;
    std::vector<double> radius_by_label;
    double mass_bound = 0;  // max over labels of the disk radius
    double window = 0;      // certified simulation window

    static ScattererConfig make(std::shared_ptr<const DeloneMultiset> patch,
                                std::vector<double> radii, double window = 0) {
        ScattererConfig c;
        c.patch = std::move(patch);
        c.radius_by_label = std::move(radii);
        if (c.radius_by_label.size() < c.patch->label_names.size())
            throw validation_error("scatterer config: missing radius for some label");
        for (double r : c.radius_by_label)
            if (r <= 0) throw validation_error("scatterer config: nonpositive radius");
        c.mass_bound = 0;
        for (double r : c.radius_by_label) c.mass_bound = std::max(c.mass_bound, r);
        c.window = window > 0 ? window : c.patch->window_radius;
        if (c.window > c.patch->window_radius)
            throw validation_error("scatterer config: window exceeds the patch window");
        c.check_disjoint();
        c.cell_ = std::max(3.0 * c.mass_bound, 3.0 * c.patch->packing_radius);
        c.grid_ = GridIndex2(c.patch->positions(), c.cell_);
        return c;
    }

    static ScattererConfig make_uniform(std::shared_ptr<const DeloneMultiset> patch,
                                        double radius_factor, double window = 0) {
        double r = radius_factor * patch->packing_radius;
        std::vector<double> radii(patch->label_names.size(), r);
        return make(std::move(patch), std::move(radii), window);
    }

    double radius(int scatterer) const {
        return radius_by_label[patch->points[scatterer].label];
    }
    Vec2 center(int scatterer) const { return patch->points[scatterer].pos; }

    const GridIndex2& grid() const { return grid_; }
    double grid_cell() const { return cell_; }

  private:
    void check_disjoint() const {
        std::vector<int> nb;
        for (std::size_t i = 0; i < patch->size(); ++i) {
            double ri = radius_by_label[patch->points[i].label];
            patch->index().query_ball(patch->points[i].pos, ri + mass_bound, nb);
            for (int j : nb) {
                if (j == static_cast<int>(i)) continue;
                double rj = radius_by_label[patch->points[j].label];
                if (dist(patch->points[i].pos, patch->points[j].pos) <= ri + rj)
                    throw validation_error("scatterer config: scatterer closures overlap");
            }
        }
    }

    double cell_ = 1.0;
    GridIndex2 grid_;
};

// ---------------------------------------------------------------------------
// Collision states on the outgoing unit bundle of the scatterer boundaries
// ---------------------------------------------------------------------------

struct CollisionState {
    int scatterer = -1;
    double theta = 0;  // boundary angle: position = center + rho * (cos, sin)
    Vec2 v{};          // outgoing unit direction, dot(v, n) >= 0
};

inline Vec2 state_normal(const CollisionState& s) { return from_angle(s.theta); }

inline Vec2 state_position(const ScattererConfig& c, const CollisionState& s) {
    return c.center(s.scatterer) + state_normal(s) * c.radius(s.scatterer);
}

inline void validate_state(const ScattererConfig& c, const CollisionState& s) {
    if (s.scatterer < 0 || s.scatterer >= static_cast<int>(c.patch->size()))
        throw validation_error("collision state: bad scatterer index");
    if (std::abs(norm(s.v) - 1.0) > 1e-12)
        throw validation_error("collision state: direction is not unit length");
    if (dot(s.v, state_normal(s)) < -1e-12)
        throw validation_error("collision state: inward-pointing direction");
}

/// Elastic reflection law v' = v - 2 <v,n> n for an incoming v (<v,n> <= 0).
inline Vec2 reflect(const Vec2& v, const Vec2& n) {
    if (std::abs(norm(v) - 1.0) > 1e-12 || std::abs(norm(n) - 1.0) > 1e-12)
        throw validation_error("reflect: non-unit input");
    Vec2 r = v - n * (2.0 * dot(v, n));
    double nn = norm(r);
    return r * (1.0 / nn);
}

// ---------------------------------------------------------------------------
// Free flight
// ---------------------------------------------------------------------------

struct FlightHit {
    int scatterer = -1;
    Vec2 point{};
    double time = 0;  // unit speed: time equals distance
};

inline constexpr double kMinFlightTime = 1e-12;

/// First intersection with a scatterer boundary along x + t v, t > 1e-12, or
/// nullopt when the ray exits the certified window. `exclude` suppresses the
/// departure scatterer (a convex disk cannot be re-hit from its own
/// outgoing bundle).
inline std::optional<FlightHit> free_flight(const ScattererConfig& cfg, Vec2 x,
                                            Vec2 v, int exclude = -1) {
    // time at which the ray leaves the window disk
    double b_out = dot(x, v);
    double c_out = norm2(x) - cfg.window * cfg.window;
    if (c_out > 1e-9)
        throw window_overflow_error("free_flight: start outside the certified window");
    double t_out = -b_out + std::sqrt(std::max(b_out * b_out - c_out, 0.0));

    double h = cfg.grid_cell();
    {  // reject a start strictly inside a scatterer
        std::vector<int> near;
        cfg.grid().query_ball(x, cfg.mass_bound, near);
        for (int s : near)
            if (s != exclude && dist(x, cfg.center(s)) < cfg.radius(s) - 1e-9)
                throw validation_error("free_flight: start point inside a scatterer");
    }

    int ci = static_cast<int>(std::floor(x[0] / h));
    int cj = static_cast<int>(std::floor(x[1] / h));
    double best = std::numeric_limits<double>::infinity();
    FlightHit hit;

    // grid walk (Amanatides–Woo). Scatterers are bucketed by center and the
    // cell is at least 3x the largest radius, so scanning the 3x3 block
    // around each visited cell sees every disk the ray can meet there; once
    // the walk front passes the current best hit nothing earlier remains.
    auto scan_cell = [&](int i, int j) {
        const std::vector<int>* bucket = cfg.grid().bucket(i, j);
        if (!bucket) return;
        for (int s : *bucket) {
            if (s == exclude) continue;
            Vec2 d = x - cfg.center(s);
            double rho = cfg.radius(s);
            double b = dot(d, v);
            if (b >= 0) continue;  // moving away from this center
            double c2 = norm2(d) - rho * rho;
            double disc = b * b - c2;
            if (disc < 0) continue;
            double t = c2 / (-b + std::sqrt(disc));  // stable entering root
            if (t <= kMinFlightTime || t >= best) continue;
            best = t;
            hit.scatterer = s;
            hit.time = t;
            hit.point = x + v * t;
        }
    };

    double tx = (v[0] > 0 ? (ci + 1) * h - x[0] : x[0] - ci * h) / std::max(std::abs(v[0]), 1e-300);
    double ty = (v[1] > 0 ? (cj + 1) * h - x[1] : x[1] - cj * h) / std::max(std::abs(v[1]), 1e-300);
    double dtx = h / std::max(std::abs(v[0]), 1e-300);
    double dty = h / std::max(std::abs(v[1]), 1e-300);
    int si = v[0] > 0 ? 1 : -1;
    int sj = v[1] > 0 ? 1 : -1;

    double t_entry = 0;
    while (t_entry <= std::min(best, t_out)) {
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) scan_cell(ci + di, cj + dj);
        if (tx < ty) {
            t_entry = tx;
            tx += dtx;
            ci += si;
        } else {
            t_entry = ty;
            ty += dty;
            cj += sj;
        }
    }

    if (hit.scatterer >= 0 && best < t_out + 1e-9) return hit;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Billiard map
// ---------------------------------------------------------------------------

struct MapStep {
    CollisionState state;
    double flight = 0;
};

/// One application of the billiard map: fly from the boundary point along v
/// to the next scatterer, reflect, return the new outgoing state.
inline MapStep billiard_map_step(const ScattererConfig& cfg, const CollisionState& s,
                                 long trajectory_id = -1) {
    Vec2 x = state_position(cfg, s);
    auto hit = free_flight(cfg, x, s.v, s.scatterer);
    if (!hit)
        throw escape_error("billiard map: trajectory left the certified window",
                           trajectory_id);
    Vec2 cj = cfg.center(hit->scatterer);
    Vec2 n = (hit->point - cj) * (1.0 / cfg.radius(hit->scatterer));
    n = n * (1.0 / norm(n));
    Vec2 vout = reflect(s.v, n);
    MapStep out;
    out.state.scatterer = hit->scatterer;
    out.state.theta = std::atan2(hit->point[1] - cj[1], hit->point[0] - cj[0]);
    out.state.v = vout;
    out.flight = hit->time;
    return out;
}

inline CollisionState billiard_map(const ScattererConfig& cfg, const CollisionState& s) {
    return billiard_map_step(cfg, s).state;
}

/// Velocity involution at a fixed boundary point (time reversal).
inline CollisionState reverse_state(const CollisionState& s) {
    CollisionState r = s;
    Vec2 n = state_normal(s);
    r.v = -(s.v - n * (2.0 * dot(s.v, n)));
    double nn = norm(r.v);
    r.v = r.v * (1.0 / nn);
    return r;
}

// ---------------------------------------------------------------------------
// Invariant sampling: boundary measure x cosine law on the outgoing bundle
// ---------------------------------------------------------------------------

class StateSampler {
  public:
    StateSampler(const ScattererConfig& cfg, double R) : cfg_(&cfg) {
        if (R > cfg.window)
            throw window_overflow_error("invariant sample: R exceeds the certified window");
        double acc = 0;
        for (std::size_t i = 0; i < cfg.patch->size(); ++i) {
            if (norm(cfg.patch->points[i].pos) > R) continue;
            acc += cfg.radius_by_label[cfg.patch->points[i].label];
            eligible_.push_back(static_cast<int>(i));
            cum_.push_back(acc);
        }
        if (eligible_.empty())
            throw validation_error("invariant sample: no scatterer inside the window");
    }

    CollisionState sample(Rng& rng) const {
        double u = rng.uniform() * cum_.back();
        std::size_t lo = std::lower_bound(cum_.begin(), cum_.end(), u) - cum_.begin();
        CollisionState s;
        s.scatterer = eligible_[std::min(lo, eligible_.size() - 1)];
        s.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double phi = rng.cosine_angle();
        Vec2 n = from_angle(s.theta);
        s.v = n * std::cos(phi) + rot90(n) * std::sin(phi);
        return s;
    }

    std::size_t support_size() const { return eligible_.size(); }

  private:
    const ScattererConfig* cfg_;
    std::vector<int> eligible_;
    std::vector<double> cum_;
};

/// One state with scatterer chosen proportional to boundary measure inside
/// B_R(0), uniform boundary point, cosine-law outgoing direction.
inline CollisionState invariant_sample(const ScattererConfig& cfg, double R, Rng& rng) {
    StateSampler s(cfg, R);
    return s.sample(rng);
}

// ---------------------------------------------------------------------------
// Horizon estimation
// ---------------------------------------------------------------------------

struct HorizonEstimate {
    double max_free_path = 0;
    long sample_count = 0;
    bool growth_flag = false;  // still growing at the end of sampling, or escapes seen
    long escapes = 0;
};

/// Samples invariant states, iterates short orbit segments and records the
/// maximal free flight. growth_flag is raised when the running maximum still
/// increased in the final 10% of samples or when any flight left the window
/// (corridor evidence at this window scale).
inline HorizonEstimate estimate_horizon(const ScattererConfig& cfg, long n_samples,
                                        std::uint64_t seed, int per_sample_steps = 48) {
    if (n_samples < 1) throw validation_error("estimate_horizon: need n_samples >= 1");
    double R = cfg.window * 0.35;
    StateSampler sampler(cfg, R);
    HorizonEstimate h;
    h.sample_count = n_samples;
    long last_update = 0;
    for (long i = 0; i < n_samples; ++i) {
        Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(i));
        CollisionState s = sampler.sample(rng);
        double travelled = 0;
        double budget = cfg.window * 0.55;
        for (int step = 0; step < per_sample_steps && travelled < budget; ++step) {
            Vec2 x = state_position(cfg, s);
            auto hit = free_flight(cfg, x, s.v, s.scatterer);
            if (!hit) {
                h.escapes++;
                h.growth_flag = true;
                double esc = cfg.window - norm(x);
                if (esc > h.max_free_path) { h.max_free_path = esc; last_update = i; }
                break;
            }
            if (hit->time > h.max_free_path) {
                h.max_free_path = hit->time;
                last_update = i;
            }
            travelled += hit->time;
            Vec2 cj = cfg.center(hit->scatterer);
            Vec2 n = (hit->point - cj) * (1.0 / cfg.radius(hit->scatterer));
            n = n * (1.0 / norm(n));
            CollisionState ns;
            ns.scatterer = hit->scatterer;
            ns.theta = std::atan2(hit->point[1] - cj[1], hit->point[0] - cj[0]);
            ns.v = reflect(s.v, n);
            s = ns;
        }
    }
    if (n_samples >= 10 && last_update >= n_samples - n_samples / 10)
        h.growth_flag = true;
    return h;
}

/// Smallest radius factor from `factors` whose configuration shows a stable
/// finite horizon (no growth flag), or nullopt.
inline std::optional<double> find_finite_horizon_factor(
    std::shared_ptr<const DeloneMultiset> patch, const std::vector<double>& factors,
    long n_samples, std::uint64_t seed) {
    for (double f : factors) {
        ScattererConfig cfg = ScattererConfig::make_uniform(patch, f);
        HorizonEstimate h = estimate_horizon(cfg, n_samples, seed);
        if (!h.growth_flag) return f;
    }
    return std::nullopt;
}

} // namespace lrgas
