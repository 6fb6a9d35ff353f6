#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "lrgas/billiard.hpp"
#include "lrgas/correlation.hpp"
#include "lrgas/delone.hpp"
#include "lrgas/substitution.hpp"
#include "lrgas/tower.hpp"

namespace lrgas {

using json = nlohmann::ordered_json;

namespace detail {

/// Shortest decimal string that parses back to exactly the same double.
/// Dyadic coordinates come out as their finite decimal expansions.
inline std::string exact_decimal(double x) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::stod(buf) == x) return buf;
    }
    snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Patches
// ---------------------------------------------------------------------------

inline json patch_to_json(const DeloneMultiset& m) {
    json j;
    j["dimension"] = m.dimension;
    j["labels"] = m.label_names;
    json pts = json::array();
    for (const auto& p : m.points) {
        json row = json::array();
        json coords = json::array();
        for (int i = 0; i < m.dimension; ++i)
            coords.push_back(detail::exact_decimal(p.pos[i]));
        row.push_back(coords);
        row.push_back(p.label);
        pts.push_back(row);
    }
    j["points"] = pts;
    j["window_radius"] = detail::exact_decimal(m.window_radius);
    j["packing_radius"] = detail::exact_decimal(m.packing_radius);
    j["covering_radius"] = detail::exact_decimal(m.covering_radius);
    if (m.provenance) {
        j["provenance"] = {{"rule", m.provenance->rule},
                           {"levels", m.provenance->levels},
                           {"seed_label", m.provenance->seed_label},
                           {"shift", {detail::exact_decimal(m.provenance->shift[0]),
                                      detail::exact_decimal(m.provenance->shift[1])}}};
    }
    return j;
}

inline DeloneMultiset patch_from_json(const json& j) {
    DeloneMultiset m;
    m.dimension = j.at("dimension").get<int>();
    if (m.dimension != 2) throw validation_error("patch: only dimension 2 is shipped");
    m.label_names = j.at("labels").get<std::vector<std::string>>();
    for (const auto& row : j.at("points")) {
        LabeledPoint p;
        p.pos = v2(std::stod(row.at(0).at(0).get<std::string>()),
                   std::stod(row.at(0).at(1).get<std::string>()));
        p.label = row.at(1).get<Label>();
        m.points.push_back(p);
    }
    m.window_radius = std::stod(j.at("window_radius").get<std::string>());
    m.packing_radius = std::stod(j.at("packing_radius").get<std::string>());
    m.covering_radius = std::stod(j.at("covering_radius").get<std::string>());
    if (j.contains("provenance")) {
        PatchProvenance pv;
        pv.rule = j["provenance"].at("rule").get<std::string>();
        pv.levels = j["provenance"].at("levels").get<int>();
        pv.seed_label = j["provenance"].at("seed_label").get<Label>();
        pv.shift = v2(std::stod(j["provenance"].at("shift").at(0).get<std::string>()),
                      std::stod(j["provenance"].at("shift").at(1).get<std::string>()));
        m.provenance = pv;
    }
    m.finalize();
    return m;
}

// ---------------------------------------------------------------------------
// Towers
// ---------------------------------------------------------------------------

inline json tower_to_json(const TowerSystem& tw) {
    json j;
    json levels = json::array();
    for (const auto& dec : tw.levels) {
        json boxes = json::array();
        for (const auto& b : dec.boxes) {
            json verts = json::array();
            for (const auto& v : b.domain.v)
                verts.push_back({detail::exact_decimal(v[0]), detail::exact_decimal(v[1])});
            boxes.push_back({{"class_id", b.base.reference.id},
                             {"rec", b.base.rec},
                             {"occurrences", b.occurrences.size()},
                             {"domain_vertices", verts}});
        }
        levels.push_back({{"k", dec.k()},
                          {"boxes", boxes},
                          {"r_int", dec.r_int},
                          {"R_ext", dec.R_ext},
                          {"rec", dec.rec}});
    }
    j["levels"] = levels;
    json mats = json::array();
    for (const auto& tm : tw.matrices) mats.push_back(tm.m);
    j["matrices"] = mats;
    j["lambda_eff"] = tw.lambda_eff;
    j["constants"] = {{"K1_hat", tw.K1_hat}, {"K2_hat", tw.K2_hat}, {"Crec_hat", tw.Crec_hat}};
    return j;
}

// ---------------------------------------------------------------------------
// Observables, scatterers, series, verdicts
// ---------------------------------------------------------------------------

inline json witness_manifest(const WitnessObservable& w) {
    return {{"level", w.level},
            {"box_index", w.box_index},
            {"label", w.label},
            {"rec", w.rec},
            {"class_id", w.class_id}};
}

inline json scatterer_to_json(const ScattererConfig& cfg, const std::string& patch_ref) {
    json radius_map;
    for (std::size_t l = 0; l < cfg.patch->label_names.size(); ++l)
        radius_map[cfg.patch->label_names[l]] = cfg.radius_by_label[l];
    return {{"patch", patch_ref}, {"radius_map", radius_map}, {"window", cfg.window}};
}

inline std::string series_to_csv(const CorrelationSeries& cs) {
    std::ostringstream os;
    os << "k,estimate,stderr\n";
    char buf[96];
    for (std::size_t i = 0; i < cs.ks.size(); ++i) {
        snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g\n", cs.ks[i], cs.estimates[i],
                 cs.stderrs[i]);
        os << buf;
    }
    return os.str();
}

inline json verdict_to_json(const RateVerdict& rv) {
    json j;
    j["gamma_max"] = rv.gamma_max;
    json exp_rows = json::array();
    for (const auto& r : rv.exponential)
        exp_rows.push_back({{"tau", r.tau},
                            {"n_violation_theorem", r.n_theorem},
                            {"n_violation_measured", r.n_measured}});
    json s_rows = json::array();
    for (const auto& r : rv.stretched)
        s_rows.push_back({{"tau", r.tau},
                          {"gamma_s", r.gamma_s},
                          {"n_violation_theorem", r.n_theorem},
                          {"n_violation_measured", r.n_measured}});
    j["contradiction_table"] = {{"exponential", exp_rows}, {"stretched", s_rows}};
    if (rv.fitted) {
        auto model = [](const FitModel& m) {
            return json{{"name", m.name},
                        {"amplitude", m.amplitude},
                        {"rate", m.rate},
                        {"stretch", m.stretch},
                        {"residual", m.residual},
                        {"rate_stderr", m.rate_stderr}};
        };
        j["fits"] = {{"exponential", model(rv.fits.exponential)},
                     {"polynomial", model(rv.fits.polynomial)},
                     {"stretched", model(rv.fits.stretched)},
                     {"preferred", rv.fits.preferred},
                     {"points_used", rv.fits.points_used},
                     {"fitted_gamma", rv.fitted_gamma}};
    } else {
        j["fits"] = nullptr;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Plumbing
// ---------------------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw error("cannot write " + path);
    f << text;
}

inline void write_json(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

inline json read_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw error("cannot read " + path);
    json j;
    f >> j;
    return j;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace lrgas
