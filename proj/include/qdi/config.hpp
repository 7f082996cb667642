#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "qdi/errors.hpp"

namespace qdi {

// Flat key = value grammar, '#' comments, dotted section keys. Unknown keys
// are errors naming the nearest valid key. All values resolved (defaults
// applied) at parse time; canonical_echo() serializes the resolved state for
// reproducibility logs and stage cache keys.
struct RunConfig {
    // grid
    int grid_n = 64;
    double grid_half_extent = 10.0;
    // pump / crystal
    std::string pump_model = "gaussian";  // gaussian | sinc
    double pump_sigma_p = 1.0;
    double pump_L = 1.0;
    // basis (analytic reference modes written next to the Schmidt gallery)
    std::string basis_family = "hermite_gauss";  // hermite_gauss | laguerre_gauss
    int basis_max_total_order = 4;
    double basis_waist = 0.0;  // 0 = auto (fundamental Schmidt waist)
    // decomposition
    int decompose_rank = 64;
    // matter
    // pgm | uniform | point | annulus | annulus_phase | random
    std::string matter_kind = "annulus";
    std::string matter_magnitude;
    std::string matter_phase;
    double matter_point_x = 1.875;
    double matter_point_y = 0.0;
    double matter_phase_pitch = 0.9;
    int matter_render_n = 256;
    // imaging
    int imaging_order_p = 1;
    int imaging_truncation = 20;
    std::string imaging_scheme = "natural";       // natural | flattened
    std::string imaging_detector_sign = "auto";   // auto | negated | direct
    bool imaging_sweep = false;
    // frequency-resolved stage
    double specresolve_omega = 2.0 * 3.14159265358979323846 / 0.9;
    std::string specresolve_convention = "radial";  // radial | x_projection
    // gates; defaults keep omega/c inside the default grid's momentum reach
    double gates_signal_center = 4.0;
    double gates_signal_fwhm = 0.5;
    double gates_idler_center = 4.0;
    double gates_idler_fwhm = 0.5;
    double gates_pump_sum_fwhm = 0.25;
    double gates_pump_sum_center = -1.0;  // < 0 = signal + idler centers
    // far field quadrature
    int farfield_n_radial = 40;
    int farfield_n_angular = 64;
    int farfield_n_omega = 48;
    double farfield_omega_min = 3.0;  // 0/0 = derive from gates
    double farfield_omega_max = 5.0;
    double farfield_disk_radius = 0.0;  // 0 = grid half extent
    double farfield_c_light = 1.0;
    // run
    uint64_t run_seed = 0;
    std::string output_dir = "out";
    // centralized numeric tolerances
    double tol_gram_error = 1e-3;
    double tol_weight_sum = 1e-8;
    double tol_norm_check = 1e-10;
};

RunConfig parse_config_text(const std::string& text, const std::string& origin = "<memory>");
RunConfig parse_config(const std::string& path);

// Sorted "key = value" lines of the fully resolved config ("%.17g" floats).
std::string canonical_echo(const RunConfig& cfg);

// Echo restricted to the key prefixes a pipeline stage depends on; hashing
// this yields the stage cache key. Thread count is deliberately not part of
// any config state.
std::string stage_echo(const RunConfig& cfg, const std::string& stage);

std::vector<std::string> known_keys();

}  // namespace qdi
