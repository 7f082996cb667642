#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "qdi/biphoton.hpp"
#include "qdi/config.hpp"
#include "qdi/errors.hpp"
#include "qdi/imaging.hpp"
#include "qdi/io.hpp"
#include "qdi/matter.hpp"
#include "qdi/pipeline.hpp"

using namespace qdi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path p;
    TempDir() {
        static int c = 0;
        p = fs::temp_directory_path() /
            ("qdi_pipe_" + std::to_string(::getpid()) + "_" + std::to_string(c++));
        fs::create_directories(p);
    }
    ~TempDir() { fs::remove_all(p); }
    std::string str() const { return p.string(); }
    std::string file(const std::string& name) const { return (p / name).string(); }
};

// small, fast base; rank 24 >= 20 keeps the figure sweep possible
const char* kBase =
    "grid.n = 32\n"
    "grid.half_extent = 6\n"
    "pump.sigma_p_L = 0.25\n"
    "decompose.rank = 24\n"
    "basis.max_total_order = 2\n"
    "imaging.truncation = 5\n"
    "matter.render_n = 64\n";

using KeyList = std::vector<std::pair<std::string, std::string>>;

RunConfig base_config(const KeyList& overrides = {}) {
    std::map<std::string, std::string> kv = {
        {"grid.n", "32"},          {"grid.half_extent", "6"},
        {"pump.sigma_p_L", "0.25"}, {"decompose.rank", "24"},
        {"basis.max_total_order", "2"}, {"imaging.truncation", "5"},
        {"matter.render_n", "64"}};
    for (const auto& [k, v] : overrides) kv[k] = v;
    std::string text;
    for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
    return parse_config_text(text);
}

std::set<std::string> manifest_entries(const std::string& dir) {
    std::istringstream is(read_text((fs::path(dir) / "MANIFEST.txt").string()));
    std::set<std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        const auto tab = line.find('\t');
        if (tab != std::string::npos) out.insert(line.substr(0, tab));
    }
    return out;
}

std::set<std::string> disk_entries(const std::string& dir) {
    std::set<std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), dir).generic_string();
        if (rel != "MANIFEST.txt") out.insert(rel);
    }
    return out;
}

double summary_value(const std::string& text, const std::string& key) {
    const auto pos = text.find(key + " = ");
    REQUIRE(pos != std::string::npos);
    return std::strtod(text.c_str() + pos + key.size() + 3, nullptr);
}

int run_cli(const std::string& args, const std::string& log) {
    const std::string cmd = std::string(QDIFF_BIN) + " " + args + " > " + log + " 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("decompose stage writes its artifact set and a complete manifest") {
    TempDir d;
    const RunConfig cfg = base_config();
    run_stage(cfg, "decompose", d.str());

    for (const char* f : {"decomposition.bin", "spectrum.csv", "modes.csv", "summary.txt",
                          "MANIFEST.txt", ".cache/decompose.key"})
        CHECK_MESSAGE(fs::exists(d.p / f), f);
    for (int k = 0; k < 6; ++k) {
        CHECK(fs::exists(d.p / ("mode_signal_" + std::to_string(k) + ".pgm")));
        CHECK(fs::exists(d.p / ("mode_idler_" + std::to_string(k) + ".pgm")));
        CHECK(fs::exists(d.p / ("reference_mode_" + std::to_string(k) + ".pgm")));
    }

    // manifest covers exactly what is on disk
    CHECK(manifest_entries(d.str()) == disk_entries(d.str()));

    // spectrum holds one row per retained mode, weights descending
    std::istringstream is(read_text(d.file("spectrum.csv")));
    std::string line;
    std::getline(is, line);
    CHECK(line == "index,weight");
    int rows = 0;
    double prev = 2.0, w = 0.0;
    while (std::getline(is, line)) {
        REQUIRE(std::sscanf(line.c_str(), "%*d,%lf", &w) == 1);
        CHECK(w <= prev);
        prev = w;
        ++rows;
    }
    CHECK(rows == 24);

    // closed-form mode count for a balanced double-Gaussian kernel
    const std::string summary = read_text(d.file("summary.txt"));
    const double kappa = summary_value(summary, "kappa");
    const double s = 0.5 * 0.5;
    const double expect = std::pow((s + 1.0 / s) / 2.0, 2);
    CHECK(kappa == doctest::Approx(expect).epsilon(0.05));
    CHECK(summary_value(summary, "entropy_bits") > 0.0);
    CHECK(summary_value(summary, "fundamental_waist") ==
          doctest::Approx(std::sqrt(2.0)).epsilon(0.05));

    // cache key is the decompose-stage config echo
    CHECK(read_text(d.file(".cache/decompose.key")) == stage_echo(cfg, "decompose"));
}

TEST_CASE("full run and staged runs produce byte-identical trees") {
    TempDir a, b, c;
    const RunConfig cfg = base_config();
    run_pipeline(cfg, a.str());
    run_pipeline(cfg, b.str());
    for (const char* st : {"decompose", "couple", "image", "farfield", "specresolve"})
        run_stage(cfg, st, c.str());

    const std::string ma = read_text(a.file("MANIFEST.txt"));
    CHECK(ma == read_text(b.file("MANIFEST.txt")));
    CHECK(ma == read_text(c.file("MANIFEST.txt")));
    CHECK(read_text(a.file("image.bin")) == read_text(c.file("image.bin")));

    // every stage contributed
    for (const char* f :
         {"decomposition.bin", "sigma.bin", "beta1.csv", "beta2.csv", "rho_initial.pgm",
          "rho_corrected.pgm", "rho_corrected_traced.pgm", "image.bin", "image.pgm",
          "image.pgm.range.txt", "image_metrics.txt", "gamma.csv", "farfield.bin",
          "farfield.pgm", "specresolve.bin", "specresolve.pgm"})
        CHECK_MESSAGE(fs::exists(a.p / f), f);
    CHECK(manifest_entries(a.str()) == disk_entries(a.str()));
}

TEST_CASE("stage cache skips clean reruns and reacts to config changes") {
    TempDir d;
    const RunConfig cfg = base_config();
    run_stage(cfg, "decompose", d.str());
    const std::string first = read_text(d.file("spectrum.csv"));

    // a rerun with the same config must not rewrite outputs
    std::ofstream(d.file("spectrum.csv"), std::ios::app) << "tampered\n";
    run_stage(cfg, "decompose", d.str());
    CHECK(read_text(d.file("spectrum.csv")) == first + "tampered\n");

    // any decompose-relevant key change invalidates the cache
    const RunConfig cfg2 = base_config({{"decompose.rank", "20"}});
    run_stage(cfg2, "decompose", d.str());
    const std::string second = read_text(d.file("spectrum.csv"));
    CHECK(second.find("tampered") == std::string::npos);
    CHECK(second != first);
    CHECK(read_text(d.file(".cache/decompose.key")) == stage_echo(cfg2, "decompose"));

    // a deleted artifact also defeats the cache
    fs::remove(d.file("modes.csv"));
    run_stage(cfg2, "decompose", d.str());
    CHECK(fs::exists(d.p / "modes.csv"));
}

TEST_CASE("stages name the missing upstream stage in their errors") {
    const RunConfig cfg = base_config();
    {
        TempDir d;
        CHECK_THROWS_WITH_AS(run_stage(cfg, "couple", d.str()),
                             doctest::Contains("decompose"), io_error);
    }
    {
        TempDir d;
        run_stage(cfg, "decompose", d.str());
        CHECK_THROWS_WITH_AS(run_stage(cfg, "image", d.str()), doctest::Contains("couple"),
                             io_error);
        CHECK_THROWS_WITH_AS(run_stage(cfg, "farfield", d.str()), doctest::Contains("couple"),
                             io_error);
    }
    CHECK_THROWS_AS(run_stage(cfg, "polish", TempDir().str()), config_error);
}

TEST_CASE("frequency-resolved stage needs no decomposition and matches the library") {
    TempDir d;
    const RunConfig cfg = base_config({{"matter.kind", "annulus_phase"}, {"matter.phase_pitch", "2.5"}});
    run_stage(cfg, "specresolve", d.str());
    CHECK(fs::exists(d.p / "specresolve.bin"));
    CHECK(fs::exists(d.p / "specresolve.pgm.range.txt"));

    const auto grid = make_grid(32, 6.0);
    const auto sigma = phantom_annulus_phase(grid, 2.5, 64);
    const auto expect = frequency_resolved_image(sigma, cfg.specresolve_omega);
    const auto got = read_real_image(d.file("specresolve.bin"), 6.0);
    CHECK((got.values - expect.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("image sweep emits the truncation ladder and its metrics table") {
    TempDir d;
    const RunConfig cfg = base_config({{"imaging.sweep", "true"}, {"imaging.truncation", "20"}});
    run_stage(cfg, "decompose", d.str());
    run_stage(cfg, "couple", d.str());
    run_stage(cfg, "image", d.str());

    for (int n : {1, 5, 10, 20})
        for (const char* scheme : {"natural", "flattened"}) {
            const std::string stem = "image_n" + std::to_string(n) + "_" + scheme;
            CHECK_MESSAGE(fs::exists(d.p / (stem + ".bin")), stem);
            CHECK(fs::exists(d.p / (stem + ".pgm")));
            CHECK(fs::exists(d.p / (stem + ".pgm.range.txt")));
        }
    CHECK(!fs::exists(d.p / "image.bin"));

    std::istringstream is(read_text(d.file("metrics.csv")));
    std::string line;
    std::getline(is, line);
    CHECK(line == "scheme,count,nmse_best,pearson");
    int rows = 0;
    while (std::getline(is, line)) {
        char scheme[16];
        int count = 0;
        double nmse = -1.0, pearson = -2.0;
        REQUIRE(std::sscanf(line.c_str(), "%15[^,],%d,%lf,%lf", scheme, &count, &nmse,
                            &pearson) == 4);
        const std::string sch = scheme;
        CHECK((sch == "natural" || sch == "flattened"));
        CHECK((count == 1 || count == 5 || count == 10 || count == 20));
        CHECK(nmse >= 0.0);
        CHECK(std::abs(pearson) <= 1.0);
        ++rows;
    }
    CHECK(rows == 8);

    // a rank too small for the ladder is rejected up front
    TempDir d2;
    const RunConfig small = base_config({{"imaging.sweep", "true"}, {"decompose.rank", "12"}});
    run_stage(small, "decompose", d2.str());
    run_stage(small, "couple", d2.str());
    CHECK_THROWS_AS(run_stage(small, "image", d2.str()), config_error);
}

TEST_CASE("separable pump collapses the image onto the fundamental idler mode") {
    TempDir d;
    const RunConfig cfg = base_config({{"pump.sigma_p_L", "1"},
                                        {"decompose.rank", "8"},
                                        {"imaging.truncation", "1"},
                                        {"matter.kind", "point"}});
    run_pipeline(cfg, d.str());
    const auto img = read_real_image(d.file("image.bin"), 6.0);

    const auto grid = make_grid(32, 6.0);
    const auto amp = amplitude_gaussian({1.0, 1.0, PumpModel::double_gaussian}, grid);
    const auto dec = schmidt_decompose(amp, 8);
    CHECK(dec.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    const auto v0 = dec.idler_mode(0, Space::real_space);
    const int n = grid.n;
    Eigen::VectorXd ref(n * n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            ref[iy * n + ix] = std::norm(v0.at((n - ix) % n, (n - iy) % n));
    CHECK(nmse_best_scale(img.values, ref) < 1e-9);
}

TEST_CASE("metrics report compares two stored images") {
    TempDir d;
    const auto grid = make_grid(16, 2.0);
    RealImage ref{grid, Eigen::VectorXd(16 * 16), false};
    for (int i = 0; i < ref.values.size(); ++i) ref.values[i] = std::sin(0.3 * i);
    RealImage dbl{grid, 2.0 * ref.values, false};
    write_real_image(d.file("ref.bin"), ref);
    write_real_image(d.file("dbl.bin"), dbl);

    const std::string rep = metrics_report(d.file("dbl.bin"), d.file("ref.bin"), 2.0);
    CHECK(summary_value(rep, "nmse") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(summary_value(rep, "nmse_best") == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(summary_value(rep, "pearson") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("thread count never changes outputs") {
    TempDir t1, t4;
    const RunConfig cfg = base_config();
    set_thread_count(4);
    run_stage(cfg, "decompose", t4.str());
    set_thread_count(1);
    run_stage(cfg, "decompose", t1.str());
    CHECK(read_text(t1.file("MANIFEST.txt")) == read_text(t4.file("MANIFEST.txt")));
    CHECK_THROWS_AS(set_thread_count(0), config_error);
}

TEST_CASE("command line maps error classes to distinct exit codes") {
    TempDir d;
    CHECK(run_cli("--version", d.file("v.log")) == 0);
    CHECK(read_text(d.file("v.log")).find("qdiff 1.0.0") != std::string::npos);

    write_text(d.file("bad.conf"), "grid.n = 7\n");
    CHECK(run_cli("run --config " + d.file("bad.conf") + " --out " + d.file("o1"),
                  d.file("b.log")) == 2);

    CHECK(run_cli("run --config " + d.file("absent.conf") + " --out " + d.file("o2"),
                  d.file("m.log")) == 4);

    write_text(d.file("good.conf"), kBase);
    CHECK(run_cli("image --config " + d.file("good.conf") + " --out " + d.file("o3"),
                  d.file("u.log")) == 4);
    CHECK(read_text(d.file("u.log")).find("decompose") != std::string::npos);

    // a frequency window beyond the grid's momentum reach fails numerically
    const std::string far = std::string(kBase) +
                            "farfield.omega_min = 39\nfarfield.omega_max = 41\n";
    write_text(d.file("far.conf"), far);
    const RunConfig cfgFar = parse_config_text(far);
    run_stage(cfgFar, "decompose", d.file("o4"));
    run_stage(cfgFar, "couple", d.file("o4"));
    CHECK(run_cli("farfield --config " + d.file("far.conf") + " --out " + d.file("o4"),
                  d.file("f.log")) == 3);

    // the staged CLI path matches the library end to end
    CHECK(run_cli("run --config " + d.file("good.conf") + " --out " + d.file("o5"),
                  d.file("r.log")) == 0);
    TempDir lib;
    run_pipeline(parse_config_text(kBase), lib.str());
    CHECK(read_text(d.file("o5/MANIFEST.txt")) == read_text(lib.file("MANIFEST.txt")));
}

}  // TEST_SUITE
