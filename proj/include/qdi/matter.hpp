#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdi/biphoton.hpp"
#include "qdi/grid.hpp"
#include "qdi/modes.hpp"

namespace qdi {

// Complex scattering density sampled on a real-space grid, magnitude
// max-normalized on construction (image formulas are proportionalities).
struct ChargeDensity {
    ComplexField field;
    std::string source;
};

ChargeDensity charge_density_from_field(ComplexField f, std::string source = "memory");

// Magnitude from an 8/16-bit PGM (P2 or P5); optional phase file of identical
// dimensions, gray level g mapping linearly to -pi + 2*pi*g/(maxval+1).
// Both are bilinearly resampled onto the grid.
ChargeDensity load_charge_density(const std::string& magnitude_path,
                                  const std::optional<std::string>& phase_path,
                                  const TransverseGrid& grid);

// Bilinear resample of an n_src x n_src cell-centered raster covering the
// grid square [-E, E)^2 onto the grid's sample points (clamped at edges).
Eigen::ArrayXXd resample_to_grid(const Eigen::ArrayXXd& src, const TransverseGrid& grid);

// Built-in synthetic densities (all max-normalized like file input).
//
// The annulus is a soft ring between radii 2.4 and 3.0 with three reduced
// pockets at radius 2.7, rendered cell-centered at render_n then resampled;
// the phased variant adds the radial ramp exp(-i 2 pi r / pitch). The raster
// builders are exposed so references and masks can reuse the exact render.
Eigen::ArrayXXd annulus_magnitude_raster(int render_n, double half_extent);
Eigen::ArrayXXd annulus_phase_raster(int render_n, double half_extent, double pitch);
ChargeDensity phantom_annulus(const TransverseGrid& grid, int render_n);
ChargeDensity phantom_annulus_phase(const TransverseGrid& grid, double pitch, int render_n);

// Single unit-weight cell at the sample point nearest (x, y).
ChargeDensity phantom_point(const TransverseGrid& grid, double x, double y);

// Band-limited complex noise (momentum support within 0.35 of the grid
// edge), deterministic per seed.
ChargeDensity phantom_random(const TransverseGrid& grid, std::uint64_t seed);

enum class CouplingKind { beta1 = 1, beta2 = 2, gamma = 3 };

struct CouplingMatrix {
    Eigen::MatrixXcd entries;
    CouplingKind kind = CouplingKind::beta1;
    std::string basis_note;
};

// Row-per-mode value stacks; the common currency between decompositions,
// analytic mode sets and the coupling/image code.
struct ModeStack {
    TransverseGrid grid;
    Space space = Space::real_space;
    Eigen::MatrixXcd rows;  // M x n^2, pixel index iy*n+ix
    std::string note;
};

ModeStack mode_stack(const ModeSet& set);
ModeStack signal_stack(const SchmidtDecomposition& dec, int count, Space space);
ModeStack idler_stack(const SchmidtDecomposition& dec, int count, Space space);

// beta[n, m] = sum_r u_n(r) w(r) conj(u_m(r)) drho^2 with w = sigma for
// order 1 and |sigma|^2 for order 2.
CouplingMatrix beta_matrix(const ChargeDensity& sigma, const ModeStack& modes, int order_p);

// Independent momentum-space route: correlation of each momentum-space mode
// with the transformed density, beta[n, m] = sum_{ks, kd} u_n(ks)
// sigma_t(kd - ks) conj(u_m(kd)) dq^4 / (2 pi). Out-of-grid offsets of
// sigma_t count as zero, so sigma must be band-limited on the grid.
CouplingMatrix beta_matrix_momentum(const ChargeDensity& sigma, const ModeStack& modes_momentum);

enum class DensityOrder { zeroth, first_order_correction };

struct IdlerDensityMatrix {
    Eigen::MatrixXcd entries;
    DensityOrder order = DensityOrder::zeroth;
};

IdlerDensityMatrix idler_density_initial(const SchmidtDecomposition& dec);

// First-order correction P + P^dagger with P[n, m] = i beta1[n, m]
// sqrt(lambda_n lambda_m); traceless for real sigma.
IdlerDensityMatrix idler_density_first_order(const SchmidtDecomposition& dec,
                                             const CouplingMatrix& beta1);

// Heatmap helper: sum entries over pairs with equal second axis index,
// out[nx, mx] = sum_y in[(nx, y), (mx, y)] over pairs present in `orders`.
Eigen::MatrixXcd trace_second_index(const Eigen::MatrixXcd& in,
                                    const std::vector<std::pair<int, int>>& orders);

}  // namespace qdi
