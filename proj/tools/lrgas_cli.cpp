// Command-line driver: configuration-driven pipeline over aperiodic billiard
// experiments. Every verb runs the staged pipeline up to its stage; `run`
// executes everything and `export` renders plot-ready CSVs from a finished
// output directory.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "lrgas/parallel.hpp"
#include "lrgas/pipeline.hpp"

using namespace lrgas;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitStageFailure = 3;

int run_to(const std::string& stage, const std::string& config_path,
           std::uint64_t seed_override, bool seed_given, const std::string& out_override) {
    ExperimentConfig cfg;
    try {
        json j = read_json(config_path);
        if (seed_given) j["seed"] = seed_override;
        if (!out_override.empty()) j["out"] = out_override;
        cfg = ExperimentConfig::from_json(j);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitValidation;
    }
    Pipeline pipe(cfg);
    RunReport rep = pipe.run(stage);
    for (const auto& s : rep.stages)
        std::printf("%-10s %-8s %6.1fs  %s\n", s.name.c_str(), s.status.c_str(), s.seconds, s.detail.c_str());
    if (!rep.headline.is_null())
        std::printf("headline: %s\n", rep.headline.dump().c_str());
    if (rep.tainted) std::printf("report is tainted (infinite-horizon override)\n");
    return rep.all_green() ? kExitOk : kExitStageFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"aperiodic Lorentz gas laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    int threads = 1;
    app.add_option("--config", config_path, "experiment configuration (JSON)");
    app.add_option("--out", out_override, "output directory override");
    auto* seed_opt = app.add_option("--seed", seed_override, "master seed override");
    app.add_option("--threads", threads, "worker threads for the estimators");

    const char* verbs[] = {"generate", "analyze", "tower", "horizon",
                           "correlate", "verdict", "run"};
    const char* help[] = {"generate the point patch",
                          "patch statistics and repetitivity",
                          "build and verify the box-decomposition tower",
                          "scatterer radii and horizon estimation",
                          "correlation series and zero-window checks",
                          "mixing-rate verdict",
                          "full pipeline"};
    for (int i = 0; i < 7; ++i) app.add_subcommand(verbs[i], help[i])->fallthrough();
    auto* exp = app.add_subcommand("export", "plot-ready CSVs from a finished run");
    exp->fallthrough();
    std::string export_dir;
    exp->add_option("--dir", export_dir, "output directory of a finished run");

    CLI11_PARSE(app, argc, argv);
    set_thread_count(threads);
    seed_given = seed_opt->count() > 0;

    try {
        for (int i = 0; i < 7; ++i) {
            if (app.get_subcommand(verbs[i])->parsed()) {
                if (config_path.empty()) {
                    std::fprintf(stderr, "--config is required\n");
                    return kExitValidation;
                }
                std::string stage = std::string(verbs[i]) == "run" ? "verdict" : verbs[i];
                return run_to(stage, config_path, seed_override, seed_given, out_override);
            }
        }
        if (exp->parsed()) {
            std::string dir = !export_dir.empty()
                                  ? export_dir
                                  : (!out_override.empty() ? out_override : "out");
            ExportResult res = export_plots_data(dir);
            for (const auto& f : res.series_files) std::printf("wrote %s\n", f.c_str());
            std::printf("wrote %s\n", res.markers_file.c_str());
            return kExitOk;
        }
    } catch (const validation_error& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitStageFailure;
    }
    return kExitValidation;
}
