#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "lrgas/billiard.hpp"
#include "lrgas/observables.hpp"
#include "lrgas/parallel.hpp"
#include "lrgas/tower.hpp"

namespace lrgas {

using PhaseObservable =
    std::function<double(const ScattererConfig&, const CollisionState&)>;

inline PhaseObservable as_observable(const WitnessObservable& w) {
    return [&w](const ScattererConfig& cfg, const CollisionState& s) {
        return static_cast<double>(evaluate(w, cfg, s));
    };
}

struct Estimate {
    double value = 0;
    double stderr_ = 0;
};

inline constexpr int kBatches = 32;

namespace detail {

inline Estimate batch_reduce(const std::vector<double>& batch_means) {
    Estimate e;
    double n = static_cast<double>(batch_means.size());
    for (double b : batch_means) e.value += b;
    e.value /= n;
    double var = 0;
    for (double b : batch_means) var += (b - e.value) * (b - e.value);
    var /= (n - 1.0);
    e.stderr_ = std::sqrt(var / n);
    return e;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spatial averages over the collision bundle in a window
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of the window average of g with respect to the
/// invariant boundary-times-cosine measure, normalized so the average of the
/// constant 1 is 1. Batch-means standard errors over 32 seeded streams.
inline Estimate spatial_average(const ScattererConfig& cfg, const PhaseObservable& g,
                                double R, long n_samples, std::uint64_t seed) {
    if (R > cfg.window)
        throw window_overflow_error("spatial_average: R exceeds the certified window");
    StateSampler sampler(cfg, R);
    std::vector<double> batches(kBatches, 0.0);
    long per = std::max<long>(n_samples / kBatches, 1);
    parallel_batches(kBatches, [&](int b) {
        Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(b));
        double acc = 0;
        for (long i = 0; i < per; ++i) acc += g(cfg, sampler.sample(rng));
        batches[b] = acc / static_cast<double>(per);
    });
    return detail::batch_reduce(batches);
}

// ---------------------------------------------------------------------------
// Leafwise correlations under the billiard map
// ---------------------------------------------------------------------------

/// Estimate of the window average of g1(f^k(s)) * g2(s) over cosine-weighted
/// states s in B_R, with the same normalization as spatial_average. Escaping
/// orbits abort the estimate (the window was too small for this k).
inline Estimate leafwise_correlation(const ScattererConfig& cfg,
                                     const PhaseObservable& g1,
                                     const PhaseObservable& g2, long k, double R,
                                     long n_samples, std::uint64_t seed) {
    if (k < 0) throw validation_error("leafwise_correlation: negative k");
    StateSampler sampler(cfg, R);
    std::vector<double> batches(kBatches, 0.0);
    long per = std::max<long>(n_samples / kBatches, 1);
    std::exception_ptr failure;
    std::mutex fail_mx;
    parallel_batches(kBatches, [&](int b) {
        try {
            Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(b));
            double acc = 0;
            for (long i = 0; i < per; ++i) {
                long traj = b * per + i;
                CollisionState s = sampler.sample(rng);
                double gval = g2(cfg, s);
                CollisionState cur = s;
                for (long step = 0; step < k; ++step)
                    cur = billiard_map_step(cfg, cur, traj).state;
                acc += g1(cfg, cur) * gval;
            }
            batches[b] = acc / static_cast<double>(per);
        } catch (...) {
            std::lock_guard<std::mutex> lk(fail_mx);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return detail::batch_reduce(batches);
}

struct CorrelationSeries {
    std::vector<long> ks;
    std::vector<double> estimates;  // C(k) = <g1 o f^k * g2> - beta1*beta2
    std::vector<double> stderrs;
    double beta1 = 0, beta2 = 0;
    std::string name1, name2;
    double window_R = 0;
    long samples = 0;
    std::uint64_t seed = 0;
};

inline CorrelationSeries correlation_series(const ScattererConfig& cfg,
                                            const PhaseObservable& g1,
                                            const PhaseObservable& g2,
                                            const std::vector<long>& ks, double R,
                                            long n_samples, std::uint64_t seed) {
    CorrelationSeries cs;
    cs.ks = ks;
    cs.window_R = R;
    cs.samples = n_samples;
    cs.seed = seed;
    Estimate b1 = spatial_average(cfg, g1, R, n_samples, seed ^ 0x5151);
    Estimate b2 = spatial_average(cfg, g2, R, n_samples, seed ^ 0xa2a2);
    cs.beta1 = b1.value;
    cs.beta2 = b2.value;
    for (std::size_t i = 0; i < ks.size(); ++i) {
        Estimate cross = leafwise_correlation(cfg, g1, g2, ks[i], R, n_samples,
                                              seed + 1000 + static_cast<std::uint64_t>(i));
        cs.estimates.push_back(cross.value - cs.beta1 * cs.beta2);
        cs.stderrs.push_back(cross.stderr_);
    }
    return cs;
}

// ---------------------------------------------------------------------------
// Zero-correlation window
// ---------------------------------------------------------------------------

struct WindowBound {
    long k_star = 0;
    // inputs
    double M_hat = 0;
    double proxy = 0;        // measured level-n inradius standing in for K1 lambda^n
    double lambda_eff = 0;
    int level = 0;
    double R_cov = 0;
    double B_S = 0;
};

/// k_star = floor((2/M)(r_int(B_n) - 2 R_Lambda - B_S)), floored at zero.
/// The support separation makes the cross term vanish identically for all
/// |k| < k_star: no trajectory can bridge distinct box supports that fast.
inline WindowBound zero_window(const TowerSystem& tw, const HorizonEstimate& horizon,
                               const ScattererConfig& cfg, int n) {
    if (horizon.growth_flag)
        throw validation_error("zero_window: configuration shows no stable finite horizon");
    if (n < 0 || n >= tw.depth()) throw validation_error("zero_window: no such level");
    if (tw.levels[n].k() <= 1)
        throw validation_error("zero_window: level has a single box type");
    WindowBound w;
    w.level = n;
    w.M_hat = horizon.max_free_path;
    w.proxy = tw.levels[n].r_int;
    w.lambda_eff = tw.lambda_eff;
    w.R_cov = cfg.patch->covering_radius;
    w.B_S = cfg.mass_bound;
    double raw = (2.0 / w.M_hat) * (w.proxy - 2.0 * w.R_cov - w.B_S);
    w.k_star = raw > 0 ? static_cast<long>(std::floor(raw)) : 0;
    return w;
}

struct WindowVerification {
    bool pass = true;
    long starts = 0;
    long steps_checked = 0;
    std::vector<std::pair<long, long>> exceptions;  // (trajectory, k)
};

/// Launches cosine-weighted states from the support of psi_j (restricted to
/// launch_radius, default half the window, so the orbits stay evaluable) and
/// asserts psi_i vanishes along the first k_star-1 collisions of every
/// orbit. An orbit wandering beyond the evaluable region raises the escape
/// error with its trajectory id.
inline WindowVerification verify_window(const ScattererConfig& cfg,
                                        const WitnessObservable& psi_i,
                                        const WitnessObservable& psi_j, long k_star,
                                        long n_starts, std::uint64_t seed,
                                        double launch_radius = 0) {
    if (psi_i.level != psi_j.level || psi_i.box_index == psi_j.box_index)
        throw validation_error("verify_window: need two distinct witnesses of one level");
    WindowVerification rep;
    rep.starts = n_starts;
    if (k_star <= 1) return rep;  // vacuous window
    if (launch_radius <= 0) launch_radius = cfg.window * 0.5;

    std::vector<int> eligible;
    for (std::size_t i = 0; i < cfg.patch->size(); ++i)
        if (psi_j.support_flag[i] && norm(cfg.patch->points[i].pos) <= launch_radius)
            eligible.push_back(static_cast<int>(i));
    if (eligible.empty())
        throw validation_error("verify_window: no support of psi_j inside the launch radius");

    for (long t = 0; t < n_starts; ++t) {
        Rng rng = Rng::for_stream(seed, static_cast<std::uint64_t>(t));
        CollisionState s;
        s.scatterer = eligible[rng.below(eligible.size())];
        s.theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double phi = rng.cosine_angle();
        Vec2 n = from_angle(s.theta);
        s.v = n * std::cos(phi) + rot90(n) * std::sin(phi);
        for (long k = 1; k < k_star; ++k) {
            s = billiard_map_step(cfg, s, t).state;
            rep.steps_checked++;
            int value;
            try {
                value = evaluate(psi_i, cfg, s);
            } catch (const window_overflow_error&) {
                throw escape_error("verify_window: orbit left the evaluable region", t);
            }
            if (value != 0) {
                rep.pass = false;
                rep.exceptions.emplace_back(t, k);
                break;
            }
        }
    }
    return rep;
}

/// rho^2 K4^{-2} lambda^{-2 d n}: the product of the two witness measures can
/// not drop below this, which pins the correlation away from zero inside the
/// window.
inline double correlation_lower_bound(double rho, double K4, double lambda_eff,
                                      int d, int n) {
    if (rho <= 0 || K4 <= 0 || lambda_eff <= 0)
        throw std::domain_error("correlation_lower_bound: nonpositive input");
    return rho * rho / (K4 * K4) * std::pow(lambda_eff, -2.0 * d * n);
}

// ---------------------------------------------------------------------------
// Decay-model fitting
// ---------------------------------------------------------------------------

struct FitModel {
    std::string name;
    double amplitude = 0;   // fitted log-amplitude
    double rate = 0;        // decay rate (exp/stretched) or exponent (poly)
    double stretch = 0;     // stretched exponent
    double residual = 0;    // sum of squared residuals of log|C|
    double rate_stderr = 0;
};

struct FitComparison {
    FitModel exponential, polynomial, stretched;
    std::string preferred;
    long points_used = 0;
};

namespace detail {

/// OLS of y against x: returns (intercept, slope, rss, slope stderr).
inline std::array<double, 4> ols(const std::vector<double>& x,
                                 const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i]; sy += y[i]; sxx += x[i] * x[i]; sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    double slope = (n * sxy - sx * sy) / denom;
    double inter = (sy - slope * sx) / n;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - inter - slope * x[i];
        rss += r * r;
    }
    double se = x.size() > 2
                    ? std::sqrt(rss / (n - 2.0) / (sxx - sx * sx / n))
                    : 0.0;
    return {inter, slope, rss, se};
}

} // namespace detail

/// Least-squares comparison of exponential, stretched-exponential and
/// polynomial decay models on log|C(k)|, using the k >= 1 points with signal
/// above two standard errors.
inline FitComparison fit_decay(const CorrelationSeries& series) {
    std::vector<double> ks, logc;
    for (std::size_t i = 0; i < series.ks.size(); ++i) {
        if (series.ks[i] < 1) continue;
        double c = std::abs(series.estimates[i]);
        if (c <= 2.0 * series.stderrs[i] || c <= 0) continue;
        ks.push_back(static_cast<double>(series.ks[i]));
        logc.push_back(std::log(c));
    }
    if (ks.size() < 8)
        throw insufficient_signal_error("fit_decay: fewer than 8 usable points above "
                                        "the signal floor");
    FitComparison out;
    out.points_used = static_cast<long>(ks.size());

    {
        auto [a, b, rss, se] = detail::ols(ks, logc);
        out.exponential = {"exponential", a, -b, 0, rss, se};
    }
    {
        std::vector<double> lk(ks.size());
        for (std::size_t i = 0; i < ks.size(); ++i) lk[i] = std::log(ks[i]);
        auto [a, b, rss, se] = detail::ols(lk, logc);
        out.polynomial = {"polynomial", a, -b, 0, rss, se};
    }
    {
        FitModel best;
        best.residual = std::numeric_limits<double>::infinity();
        for (int g = 1; g <= 9; ++g) {
            double gs = 0.1 * g;
            std::vector<double> kg(ks.size());
            for (std::size_t i = 0; i < ks.size(); ++i) kg[i] = std::pow(ks[i], gs);
            auto [a, b, rss, se] = detail::ols(kg, logc);
            if (rss < best.residual) best = {"stretched", a, -b, gs, rss, se};
        }
        out.stretched = best;
    }
    const FitModel* models[3] = {&out.exponential, &out.polynomial, &out.stretched};
    const FitModel* win = models[0];
    for (const FitModel* m : models)
        if (m->residual < win->residual) win = m;
    out.preferred = win->name;
    return out;
}

// ---------------------------------------------------------------------------
// Rate verdict
// ---------------------------------------------------------------------------

/// Constants feeding the mixing-rate tables. Two parameter sets are carried
/// side by side and never conflated: the repetitivity-theorem constants
/// (lambda, K1 from the measured linear-repetitivity constant L) and the
/// hierarchical tower's own measured scaling (lambda_eff with per-level
/// inradii).
struct RateConstants {
    double L_hat = 0;        // measured linear repetitivity constant
    double rho_hat = 0;      // min normalized bundle share
    double K4_hat = 0;       // max lambda_eff^{-dn} / nu_hat over computed boxes
    double M_hat = 0;        // horizon bound
    double R_cov = 0;
    double B_S = 0;
    double mixing_C = 1.0;   // constant of the hypothetical mixing bound
};

struct ContradictionRow {
    double tau = 0;
    double gamma_s = 1.0;    // 1 = plain exponential
    int n_theorem = -1;      // first violating level, theorem constants
    int n_measured = -1;     // first violating level, measured tower scaling
};

struct RateVerdict {
    double gamma_max = 0;                       // 2 (d + alpha)
    std::vector<ContradictionRow> exponential;  // over the tau grid
    std::vector<ContradictionRow> stretched;    // over tau x gamma_s grids
    bool fitted = false;
    FitComparison fits;
    double fitted_gamma = 0;
};

namespace detail {

/// First n in [1, n_max] where the window inequality fails:
/// log C* - 2 n (d+alpha) log(lambda) > k*(n) log(tau^{ n^{gamma_s} ... }).
inline int first_violation(double logCstar, double dalpha, double loglambda,
                           const std::function<double(int)>& kstar, double tau,
                           double gamma_s, int n_max) {
    for (int n = 1; n <= n_max; ++n) {
        double lhs = logCstar - 2.0 * n * dalpha * loglambda;
        double ks = kstar(n);
        if (ks < 0) ks = 0;
        double rhs = std::pow(std::floor(ks), gamma_s) * std::log(tau);
        if (lhs > rhs + 1e-12) return n;
    }
    return -1;
}

} // namespace detail

/// Tabulates the incompatibility of exponential and stretched-exponential
/// mixing with the measured tower scaling: the candidate bound forces the
/// correlation inside the zero window below a level-n floor that shrinks
/// like lambda^{-2dn}, while the window length grows like lambda^n. The
/// reported level is the first where the inequality chain breaks.
inline RateVerdict rate_verdict(const TowerSystem& tw, const ScattererConfig& cfg,
                                double alpha, const RateConstants& rc, int n_max,
                                const CorrelationSeries* series = nullptr) {
    if (tw.depth() < 2) throw validation_error("rate_verdict: need at least 2 levels");
    RateVerdict rv;
    int d = cfg.patch->dimension;
    rv.gamma_max = 2.0 * (d + alpha);

    TowerConstantsD tc = tower_constants_d(rc.L_hat);
    double lam_th = tc.lambda;
    double K1_th = tc.K1;
    double lam_eff = tw.lambda_eff;

    // log C*: the measured floor over the hypothetical mixing bound with the
    // Hölder-norm growth of the witnesses divided out
    double logCstar = std::log(rc.rho_hat * rc.rho_hat / (rc.K4_hat * rc.K4_hat)) -
                      2.0 * alpha * std::log(2.0 * rc.L_hat + 1.0) -
                      std::log(rc.mixing_C);
    double dalpha = d + alpha;
    double off = 2.0 * rc.R_cov + rc.B_S;

    auto kstar_th = [&](int n) {
        return (2.0 / rc.M_hat) * (K1_th * std::pow(lam_th, n) - off);
    };
    int deepest = tw.depth() - 1;
    double base_rint = tw.levels[deepest].r_int;
    auto kstar_me = [&](int n) {
        double rint = n <= deepest
                          ? tw.levels[n].r_int
                          : base_rint * std::pow(lam_eff, n - deepest);
        return (2.0 / rc.M_hat) * (rint - off);
    };

    for (int j = 1; j <= 19; ++j) {
        double tau = 0.05 * j;
        ContradictionRow row;
        row.tau = tau;
        row.n_theorem = detail::first_violation(logCstar, dalpha, std::log(lam_th),
                                                kstar_th, tau, 1.0, n_max);
        row.n_measured = detail::first_violation(logCstar, dalpha, std::log(lam_eff),
                                                 kstar_me, tau, 1.0, n_max);
        rv.exponential.push_back(row);
        for (int g = 1; g <= 9; ++g) {
            ContradictionRow srow;
            srow.tau = tau;
            srow.gamma_s = 0.1 * g;
            srow.n_theorem = detail::first_violation(logCstar, dalpha, std::log(lam_th),
                                                     kstar_th, tau, srow.gamma_s, n_max);
            srow.n_measured = detail::first_violation(
                logCstar, dalpha, std::log(lam_eff), kstar_me, tau, srow.gamma_s, n_max);
            rv.stretched.push_back(srow);
        }
    }

    if (series) {
        try {
            rv.fits = fit_decay(*series);
            rv.fitted = true;
            rv.fitted_gamma = rv.fits.polynomial.rate;
        } catch (const insufficient_signal_error&) {
            rv.fitted = false;
        }
    }
    return rv;
}

/// K4_hat from the box-measure table: the smallest constant with
/// nu(C_{n,i}) >= K4^{-1} lambda^{-dn} across the computed boxes.
inline double measure_K4(const TowerSystem& tw, const BoxMeasureTable& table, int d) {
    double K4 = 0;
    for (const auto& row : table.rows) {
        if (row.level < 1) continue;
        K4 = std::max(K4, std::pow(tw.lambda_eff, -static_cast<double>(d) * row.level) /
                              row.nu);
    }
    return K4;
}

} // namespace lrgas
