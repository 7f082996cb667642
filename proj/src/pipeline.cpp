#include "qdi/pipeline.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "qdi/biphoton.hpp"
#include "qdi/errors.hpp"
#include "qdi/imaging.hpp"
#include "qdi/io.hpp"
#include "qdi/matter.hpp"
#include "qdi/modes.hpp"

namespace qdi {

namespace fs = std::filesystem;

namespace {

constexpr int kGalleryCount = 6;
constexpr int kSweepCounts[] = {1, 5, 10, 20};

// decomposition state container: "QDIFFDC1", u32 n / separable / rank, f64
// half extent / discarded tail, weights, then the momentum-side tables (axis
// tables for the separable path, full real-valued mode rows for the dense
// one). Real-space tables are rebuilt on load by the same inverse transform
// the decomposition itself uses, so a reloaded state is bit-identical.
constexpr char kDecMagic[8] = {'Q', 'D', 'I', 'F', 'F', 'D', 'C', '1'};

void put_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw io_error("truncated header: " + path);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void put_doubles(std::ofstream& out, const double* src, size_t count) {
    out.write(reinterpret_cast<const char*>(src), static_cast<std::streamsize>(count * 8));
}

void get_doubles(std::ifstream& in, double* dst, size_t count, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * 8)))
        throw io_error("truncated payload: " + path);
}

void save_decomposition(const std::string& path, const SchmidtDecomposition& dec,
                        double half_extent) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);
    const int n = dec.grid.n;
    out.write(kDecMagic, 8);
    put_u32(out, static_cast<uint32_t>(n));
    put_u32(out, dec.separable ? 1 : 0);
    put_u32(out, static_cast<uint32_t>(dec.rank()));
    put_doubles(out, &half_extent, 1);
    put_doubles(out, &dec.discarded_tail, 1);
    put_doubles(out, dec.weights.data(), static_cast<size_t>(dec.rank()));
    if (dec.separable) {
        for (const auto& [i, j] : dec.axis_orders) {
            put_u32(out, static_cast<uint32_t>(i));
            put_u32(out, static_cast<uint32_t>(j));
        }
        // row-major copies; Eigen defaults to column-major storage
        std::vector<double> row(static_cast<size_t>(n));
        for (const auto* table : {&dec.sig_axis_q, &dec.idl_axis_q})
            for (int k = 0; k < n; ++k) {
                for (int i = 0; i < n; ++i) row[static_cast<size_t>(i)] = (*table)(k, i);
                put_doubles(out, row.data(), row.size());
            }
    } else {
        // dense momentum rows are real by construction (SVD of a real kernel)
        const int m = n * n;
        std::vector<double> row(static_cast<size_t>(m));
        for (const auto* table : {&dec.sig_full_q, &dec.idl_full_q})
            for (int k = 0; k < dec.rank(); ++k) {
                for (int p = 0; p < m; ++p) row[static_cast<size_t>(p)] = (*table)(k, p).real();
                put_doubles(out, row.data(), row.size());
            }
    }
    if (!out) throw io_error("write failed: " + path);
}

SchmidtDecomposition load_decomposition(const std::string& path, double half_extent) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kDecMagic, 8) != 0)
        throw io_error("not a decomposition container: " + path);
    const int n = static_cast<int>(get_u32(in, path));
    const bool separable = get_u32(in, path) != 0;
    const int rank = static_cast<int>(get_u32(in, path));
    if (n < 8 || n > 1 << 15 || rank < 1) throw io_error("implausible header in " + path);
    SchmidtDecomposition dec;
    dec.grid = make_grid(n, half_extent);
    dec.separable = separable;
    double stored_extent = 0.0;
    get_doubles(in, &stored_extent, 1, path);
    if (stored_extent != half_extent)
        throw io_error(path + " was produced for half extent " + format_double(stored_extent) +
                       ", not " + format_double(half_extent) + "; rerun the decompose stage");
    get_doubles(in, &dec.discarded_tail, 1, path);
    dec.weights.resize(rank);
    get_doubles(in, dec.weights.data(), static_cast<size_t>(rank), path);
    if (separable) {
        dec.axis_orders.resize(static_cast<size_t>(rank));
        for (auto& [i, j] : dec.axis_orders) {
            i = static_cast<int>(get_u32(in, path));
            j = static_cast<int>(get_u32(in, path));
        }
        dec.sig_axis_q.resize(n, n);
        dec.idl_axis_q.resize(n, n);
        std::vector<double> row(static_cast<size_t>(n));
        for (auto* table : {&dec.sig_axis_q, &dec.idl_axis_q})
            for (int k = 0; k < n; ++k) {
                get_doubles(in, row.data(), row.size(), path);
                for (int i = 0; i < n; ++i) (*table)(k, i) = row[static_cast<size_t>(i)];
            }
        dec.sig_axis_r.resize(n, n);
        dec.idl_axis_r.resize(n, n);
        std::vector<cplx> buf(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = dec.sig_axis_q(k, i);
            auto r = from_momentum_1d(buf, dec.grid);
            for (int i = 0; i < n; ++i) dec.sig_axis_r(k, i) = r[static_cast<size_t>(i)];
            for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = dec.idl_axis_q(k, i);
            r = from_momentum_1d(buf, dec.grid);
            for (int i = 0; i < n; ++i) dec.idl_axis_r(k, i) = r[static_cast<size_t>(i)];
        }
    } else {
        const int m = n * n;
        dec.sig_full_q.resize(rank, m);
        dec.idl_full_q.resize(rank, m);
        std::vector<double> row(static_cast<size_t>(m));
        for (auto* table : {&dec.sig_full_q, &dec.idl_full_q})
            for (int k = 0; k < rank; ++k) {
                get_doubles(in, row.data(), row.size(), path);
                for (int p = 0; p < m; ++p) (*table)(k, p) = row[static_cast<size_t>(p)];
            }
        dec.sig_full_r.resize(rank, m);
        dec.idl_full_r.resize(rank, m);
        ComplexField f = make_field(dec.grid, Space::momentum);
        for (int k = 0; k < rank; ++k) {
            for (int p = 0; p < m; ++p) f.v[static_cast<size_t>(p)] = dec.sig_full_q(k, p);
            auto r = from_momentum(f);
            for (int p = 0; p < m; ++p) dec.sig_full_r(k, p) = r.v[static_cast<size_t>(p)];
            for (int p = 0; p < m; ++p) f.v[static_cast<size_t>(p)] = dec.idl_full_q(k, p);
            r = from_momentum(f);
            for (int p = 0; p < m; ++p) dec.idl_full_r(k, p) = r.v[static_cast<size_t>(p)];
        }
    }
    return dec;
}

std::string need(const fs::path& root, const char* name, const char* producer) {
    const auto p = root / name;
    if (!fs::exists(p))
        throw io_error(p.string() + " is missing; run the " + producer + " stage first");
    return p.string();
}

PumpCrystalSpec pump_spec(const RunConfig& cfg) {
    return {cfg.pump_sigma_p, cfg.pump_L,
            cfg.pump_model == "sinc" ? PumpModel::sinc : PumpModel::double_gaussian};
}

int expected_rank(const RunConfig& cfg) {
    return std::min(cfg.decompose_rank, cfg.grid_n * cfg.grid_n);
}

SchmidtDecomposition load_checked(const RunConfig& cfg, const fs::path& root) {
    const auto dec =
        load_decomposition(need(root, "decomposition.bin", "decompose"), cfg.grid_half_extent);
    if (dec.grid.n != cfg.grid_n || dec.rank() != expected_rank(cfg) ||
        dec.separable != (cfg.pump_model != "sinc"))
        throw io_error("decomposition.bin does not match the configuration; rerun the "
                       "decompose stage");
    return dec;
}

ChargeDensity build_matter(const RunConfig& cfg, const TransverseGrid& grid) {
    if (cfg.matter_kind == "pgm") {
        std::optional<std::string> phase;
        if (!cfg.matter_phase.empty()) phase = cfg.matter_phase;
        return load_charge_density(cfg.matter_magnitude, phase, grid);
    }
    if (cfg.matter_kind == "uniform") {
        ComplexField f = make_field(grid, Space::real_space);
        std::fill(f.v.begin(), f.v.end(), cplx(1.0, 0.0));
        return charge_density_from_field(std::move(f), "uniform");
    }
    if (cfg.matter_kind == "point")
        return phantom_point(grid, cfg.matter_point_x, cfg.matter_point_y);
    if (cfg.matter_kind == "annulus") return phantom_annulus(grid, cfg.matter_render_n);
    if (cfg.matter_kind == "annulus_phase")
        return phantom_annulus_phase(grid, cfg.matter_phase_pitch, cfg.matter_render_n);
    return phantom_random(grid, cfg.run_seed);
}

DetectorSign detector_sign(const RunConfig& cfg) {
    return cfg.imaging_detector_sign == "direct" ? DetectorSign::direct : DetectorSign::negated;
}

WeightScheme weight_scheme(const std::string& name) {
    return name == "flattened" ? WeightScheme::flattened : WeightScheme::natural;
}

// display orientation: top raster row is the largest y
Eigen::ArrayXXd display_raster(const Eigen::VectorXd& values, int n) {
    Eigen::ArrayXXd a(n, n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) a(n - 1 - iy, ix) = values[iy * n + ix];
    return a;
}

void write_field_pgm(const std::string& path, const ComplexField& f) {
    Eigen::VectorXd mag(f.grid.n * f.grid.n);
    for (int p = 0; p < mag.size(); ++p) mag[p] = std::abs(f.v[static_cast<size_t>(p)]);
    write_pgm8(path, display_raster(mag, f.grid.n));
}

void write_heatmap_pgm(const std::string& path, const Eigen::MatrixXcd& m) {
    write_pgm8(path, m.cwiseAbs().array());
}

std::string metric_csv_row(const RealImage& img, const RealImage& ref) {
    std::string pearson = "nan";
    try {
        pearson = format_double(image_metrics(img, ref).pearson);
    } catch (const numeric_error&) {
        // a flat reference has no correlation coefficient
    }
    return format_double(nmse_best_scale(img.values, ref.values)) + "," + pearson;
}

int reference_set_size(int max_total_order) {
    return (max_total_order + 1) * (max_total_order + 2) / 2;
}

// -------- stage bodies --------

void stage_decompose(const RunConfig& cfg, const fs::path& root) {
    const auto grid = make_grid(cfg.grid_n, cfg.grid_half_extent);
    const auto spec = pump_spec(cfg);
    const auto amp = spec.model == PumpModel::sinc ? amplitude_sinc(spec, grid)
                                                   : amplitude_gaussian(spec, grid);
    const auto dec = schmidt_decompose(amp, cfg.decompose_rank);

    save_decomposition((root / "decomposition.bin").string(), dec, cfg.grid_half_extent);
    write_spectrum_csv((root / "spectrum.csv").string(), dec.weights);

    std::string modes = "k,order_x,order_y,weight\n";
    for (int k = 0; k < dec.rank(); ++k) {
        const auto [ox, oy] = dec.separable ? dec.axis_orders[static_cast<size_t>(k)]
                                            : std::pair<int, int>{-1, -1};
        modes += std::to_string(k) + "," + std::to_string(ox) + "," + std::to_string(oy) + "," +
                 format_double(dec.weights[k]) + "\n";
    }
    write_text((root / "modes.csv").string(), modes);

    const auto ent = entanglement_metrics(dec.weights);
    const double waist = fundamental_waist(dec);
    write_text((root / "summary.txt").string(),
               "kappa = " + format_double(ent.schmidt_number_kappa) +
                   "\nentropy_bits = " + format_double(ent.entropy_bits) +
                   "\nfundamental_waist = " + format_double(waist) +
                   "\nrank = " + std::to_string(dec.rank()) +
                   "\ndiscarded_tail = " + format_double(dec.discarded_tail) + "\n");

    const int g = std::min(kGalleryCount, dec.rank());
    for (int k = 0; k < g; ++k) {
        write_field_pgm((root / ("mode_signal_" + std::to_string(k) + ".pgm")).string(),
                        dec.signal_mode(k, Space::real_space));
        write_field_pgm((root / ("mode_idler_" + std::to_string(k) + ".pgm")).string(),
                        dec.idler_mode(k, Space::real_space));
    }

    // analytic reference modes next to the numeric gallery
    const auto family = cfg.basis_family == "laguerre_gauss" ? ModeFamily::laguerre_gauss
                                                             : ModeFamily::hermite_gauss;
    const double ref_waist = cfg.basis_waist > 0.0 ? cfg.basis_waist : waist;
    const auto set = build_mode_set(family, cfg.basis_max_total_order, ref_waist, grid);
    const int gr = std::min<int>(kGalleryCount, static_cast<int>(set.fields.size()));
    for (int k = 0; k < gr; ++k)
        write_field_pgm((root / ("reference_mode_" + std::to_string(k) + ".pgm")).string(),
                        set.fields[static_cast<size_t>(k)]);
}

void stage_couple(const RunConfig& cfg, const fs::path& root) {
    const auto dec = load_checked(cfg, root);
    const auto sigma = build_matter(cfg, dec.grid);

    write_field((root / "sigma.bin").string(), sigma.field);
    write_field_pgm((root / "sigma_magnitude.pgm").string(), sigma.field);

    const auto stack = signal_stack(dec, dec.rank(), Space::real_space);
    const auto beta1 = beta_matrix(sigma, stack, 1);
    const auto beta2 = beta_matrix(sigma, stack, 2);
    write_matrix_csv((root / "beta1.csv").string(), beta1.entries, beta1.basis_note);
    write_matrix_csv((root / "beta2.csv").string(), beta2.entries, beta2.basis_note);

    const auto rho0 = idler_density_initial(dec);
    const auto rho1 = idler_density_first_order(dec, beta1);
    const int csv_cap = std::min(dec.rank(), 64);
    write_matrix_csv((root / "rho_initial.csv").string(),
                     rho0.entries.topLeftCorner(csv_cap, csv_cap), "schmidt idler modes");
    write_matrix_csv((root / "rho_corrected.csv").string(),
                     rho1.entries.topLeftCorner(csv_cap, csv_cap), "schmidt idler modes");
    const int heat_cap = std::min(dec.rank(), 32);
    write_heatmap_pgm((root / "rho_initial.pgm").string(),
                      rho0.entries.topLeftCorner(heat_cap, heat_cap));
    write_heatmap_pgm((root / "rho_corrected.pgm").string(),
                      rho1.entries.topLeftCorner(heat_cap, heat_cap));
    if (dec.separable)
        write_heatmap_pgm((root / "rho_corrected_traced.pgm").string(),
                          trace_second_index(rho1.entries, dec.axis_orders));
}

CouplingMatrix load_beta(const fs::path& root, int order_p, const SchmidtDecomposition& dec) {
    const std::string name = "beta" + std::to_string(order_p) + ".csv";
    CouplingMatrix cm;
    cm.entries = read_matrix_csv(need(root, name.c_str(), "couple"));
    cm.kind = order_p == 2 ? CouplingKind::beta2 : CouplingKind::beta1;
    cm.basis_note = "schmidt signal modes";
    if (cm.entries.rows() != dec.rank() || cm.entries.cols() != dec.rank())
        throw io_error(name + " does not match the decomposition; rerun the couple stage");
    return cm;
}

RealImage magnitude_reference(const fs::path& root, const RunConfig& cfg,
                              const TransverseGrid& grid) {
    const auto sigma = read_field(need(root, "sigma.bin", "couple"), cfg.grid_half_extent);
    RealImage ref{grid, Eigen::VectorXd(grid.n * grid.n), false};
    for (int p = 0; p < ref.values.size(); ++p)
        ref.values[p] = std::abs(sigma.v[static_cast<size_t>(p)]);
    return ref;
}

void stage_image(const RunConfig& cfg, const fs::path& root) {
    const auto dec = load_checked(cfg, root);
    const auto beta = load_beta(root, cfg.imaging_order_p, dec);
    const auto ref = magnitude_reference(root, cfg, dec.grid);
    const auto sign = detector_sign(cfg);

    if (!cfg.imaging_sweep) {
        const int count = cfg.imaging_truncation;
        const auto wv = reweight(dec, weight_scheme(cfg.imaging_scheme), count);
        const auto img = coincidence_image(dec, beta, wv, count, sign);
        write_real_image((root / "image.bin").string(), img);
        write_image_pgm_with_range((root / "image.pgm").string(), img);
        const auto m = metric_csv_row(img, ref);
        const auto comma = m.find(',');
        write_text((root / "image_metrics.txt").string(),
                   "nmse_best = " + m.substr(0, comma) + "\npearson = " + m.substr(comma + 1) +
                       "\n");
        return;
    }

    const int max_count = *std::max_element(std::begin(kSweepCounts), std::end(kSweepCounts));
    if (dec.rank() < max_count)
        throw config_error("the truncation ladder needs decompose.rank >= " +
                           std::to_string(max_count));
    std::string csv = "scheme,count,nmse_best,pearson\n";
    for (const char* scheme : {"natural", "flattened"})
        for (const int count : kSweepCounts) {
            const auto wv = reweight(dec, weight_scheme(scheme), count);
            const auto img = coincidence_image(dec, beta, wv, count, sign);
            const std::string stem = "image_n" + std::to_string(count) + "_" + scheme;
            write_real_image((root / (stem + ".bin")).string(), img);
            write_image_pgm_with_range((root / (stem + ".pgm")).string(), img);
            csv += std::string(scheme) + "," + std::to_string(count) + "," +
                   metric_csv_row(img, ref) + "\n";
        }
    write_text((root / "metrics.csv").string(), csv);
}

void stage_farfield(const RunConfig& cfg, const fs::path& root) {
    const auto dec = load_checked(cfg, root);
    const auto beta1 = load_beta(root, 1, dec);
    const int count = cfg.imaging_truncation;

    const GateSpec gates{cfg.gates_signal_center, cfg.gates_signal_fwhm, cfg.gates_idler_center,
                         cfg.gates_idler_fwhm,    cfg.gates_pump_sum_fwhm,
                         cfg.gates_pump_sum_center};
    const FarFieldQuadrature quad{cfg.farfield_n_radial,    cfg.farfield_n_angular,
                                  cfg.farfield_n_omega,     cfg.farfield_omega_min,
                                  cfg.farfield_omega_max,   cfg.farfield_disk_radius,
                                  cfg.farfield_c_light};
    const auto basis = farfield_basis(dec, count);
    const auto gamma = gamma_matrix(basis, beta1, gates, quad, dec.grid);
    write_matrix_csv((root / "gamma.csv").string(), gamma.entries, gamma.basis_note);

    const auto wv = reweight(dec, weight_scheme(cfg.imaging_scheme), count);
    const auto img = far_field_image(dec, gamma, wv, count, detector_sign(cfg));
    write_real_image((root / "farfield.bin").string(), img);
    write_image_pgm_with_range((root / "farfield.pgm").string(), img);
}

void stage_specresolve(const RunConfig& cfg, const fs::path& root) {
    const auto grid = make_grid(cfg.grid_n, cfg.grid_half_extent);
    const auto sigma = build_matter(cfg, grid);
    const auto conv = cfg.specresolve_convention == "x_projection"
                          ? RadialConvention::x_projection
                          : RadialConvention::radial;
    const auto img = frequency_resolved_image(sigma, cfg.specresolve_omega, conv);
    write_real_image((root / "specresolve.bin").string(), img);
    write_image_pgm_with_range((root / "specresolve.pgm").string(), img);
}

// -------- orchestration --------

std::vector<std::string> stage_files(const RunConfig& cfg, const std::string& stage) {
    std::vector<std::string> out;
    auto image_set = [&out](const std::string& stem) {
        out.push_back(stem + ".bin");
        out.push_back(stem + ".pgm");
        out.push_back(stem + ".pgm.range.txt");
    };
    if (stage == "decompose") {
        out = {"decomposition.bin", "spectrum.csv", "modes.csv", "summary.txt"};
        const int g = std::min(kGalleryCount, expected_rank(cfg));
        for (int k = 0; k < g; ++k) {
            out.push_back("mode_signal_" + std::to_string(k) + ".pgm");
            out.push_back("mode_idler_" + std::to_string(k) + ".pgm");
        }
        const int gr = std::min(kGalleryCount, reference_set_size(cfg.basis_max_total_order));
        for (int k = 0; k < gr; ++k) out.push_back("reference_mode_" + std::to_string(k) + ".pgm");
    } else if (stage == "couple") {
        out = {"sigma.bin",       "sigma_magnitude.pgm", "beta1.csv",
               "beta2.csv",       "rho_initial.csv",     "rho_corrected.csv",
               "rho_initial.pgm", "rho_corrected.pgm"};
        if (cfg.pump_model != "sinc") out.push_back("rho_corrected_traced.pgm");
    } else if (stage == "image") {
        if (cfg.imaging_sweep) {
            for (const char* scheme : {"natural", "flattened"})
                for (const int count : kSweepCounts)
                    image_set("image_n" + std::to_string(count) + "_" + scheme);
            out.push_back("metrics.csv");
        } else {
            image_set("image");
            out.push_back("image_metrics.txt");
        }
    } else if (stage == "farfield") {
        out.push_back("gamma.csv");
        image_set("farfield");
    } else if (stage == "specresolve") {
        image_set("specresolve");
    }
    return out;
}

std::string config_hash(const RunConfig& cfg) {
    const std::string echo = canonical_echo(cfg);
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(echo.data(), echo.size())));
    return std::string("fnv1a:") + hex;
}

}  // namespace

void run_stage(const RunConfig& cfg, const std::string& stage, const std::string& out_dir) {
    const std::string echo = stage_echo(cfg, stage);  // also rejects unknown stages
    const fs::path root = out_dir;
    fs::create_directories(root / ".cache");

    const auto files = stage_files(cfg, stage);
    const fs::path key = root / ".cache" / (stage + ".key");
    bool fresh = fs::exists(key) && read_text(key.string()) == echo;
    for (const auto& f : files)
        if (fresh && !fs::exists(root / f)) fresh = false;

    if (!fresh) {
        if (stage == "decompose") stage_decompose(cfg, root);
        else if (stage == "couple") stage_couple(cfg, root);
        else if (stage == "image") stage_image(cfg, root);
        else if (stage == "farfield") stage_farfield(cfg, root);
        else stage_specresolve(cfg, root);
        write_text(key.string(), echo);
    }
    write_manifest(out_dir, kToolVersion, config_hash(cfg));
}

void run_pipeline(const RunConfig& cfg, const std::string& out_dir) {
    for (const char* stage : {"decompose", "couple", "image", "farfield", "specresolve"})
        run_stage(cfg, stage, out_dir);
}

std::string metrics_report(const std::string& img_path, const std::string& ref_path,
                           double half_extent) {
    const auto img = read_real_image(img_path, half_extent);
    const auto ref = read_real_image(ref_path, half_extent);
    const auto m = image_metrics(img, ref);
    return "nmse = " + format_double(m.nmse) +
           "\nnmse_best = " + format_double(nmse_best_scale(img.values, ref.values)) +
           "\npearson = " + format_double(m.pearson) + "\n";
}

void set_thread_count(int threads) {
    if (threads < 1) throw config_error("thread count must be at least 1");
    Eigen::setNbThreads(threads);
}

}  // namespace qdi
