#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "qdi/config.hpp"
#include "qdi/errors.hpp"
#include "qdi/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_override;
    int threads = 1;
    uint64_t seed = 0;
};

void add_common(CLI::App* sub, CommonArgs& a) {
    sub->add_option("--config", a.config_path, "run configuration file")
        ->required()
        ->type_name("FILE");
    sub->add_option("--out", a.out_override, "output directory (default: output.dir)");
    sub->add_option("--threads", a.threads, "worker thread cap; never changes results");
    sub->add_option("--seed", a.seed, "override run.seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phase-sensitive diffraction imaging with entangled photon pairs"};
    app.set_version_flag("--version", std::string(qdi::kToolVersion));
    app.require_subcommand(1);

    CommonArgs args;
    std::string run_stage_name;
    CLI::App* run = app.add_subcommand("run", "execute the full pipeline");
    add_common(run, args);
    run->add_option("--stage", run_stage_name, "restrict the run to one stage");

    for (const char* stage : {"decompose", "couple", "image", "farfield", "specresolve"})
        add_common(app.add_subcommand(stage, std::string("run the ") + stage + " stage"), args);

    std::string metrics_img, metrics_ref;
    double metrics_extent = 10.0;
    CLI::App* metrics = app.add_subcommand("metrics", "compare two stored images");
    metrics->add_option("--image", metrics_img, "image container")->required();
    metrics->add_option("--reference", metrics_ref, "reference container")->required();
    metrics->add_option("--extent", metrics_extent, "grid half extent of both images");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad invocations count as configuration errors
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        if (sub == metrics) {
            std::cout << qdi::metrics_report(metrics_img, metrics_ref, metrics_extent);
            return 0;
        }
        qdi::set_thread_count(args.threads);
        qdi::RunConfig cfg = qdi::parse_config(args.config_path);
        if (sub->count("--seed") > 0) cfg.run_seed = args.seed;
        const std::string out = args.out_override.empty() ? cfg.output_dir : args.out_override;
        if (sub == run)
            if (run_stage_name.empty())
                qdi::run_pipeline(cfg, out);
            else
                qdi::run_stage(cfg, run_stage_name, out);
        else
            qdi::run_stage(cfg, sub->get_name(), out);
        return 0;
    } catch (const qdi::config_error& e) {
        std::cerr << "qdiff: error: " << e.what() << "\n";
        return 2;
    } catch (const qdi::io_error& e) {
        std::cerr << "qdiff: error: " << e.what() << "\n";
        return 4;
    } catch (const qdi::numeric_error& e) {
        std::cerr << "qdiff: error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "qdiff: error: " << e.what() << "\n";
        return 3;
    }
}
