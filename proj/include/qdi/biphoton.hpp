#pragma once
#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "qdi/grid.hpp"

namespace qdi {

enum class PumpModel { sinc, double_gaussian };

struct PumpCrystalSpec {
    double sigma_p = 1.0;  // pump transverse-momentum std dev
    double L = 1.0;        // crystal length parameter
    PumpModel model = PumpModel::double_gaussian;
};

// Two-photon momentum kernel. The double-Gaussian model factorizes exactly
// into identical x and y one-axis kernels; the sinc model does not and is
// stored dense with row index flat(q_signal) and column flat(q_idler).
// Either representation is normalized to unit Frobenius norm.
struct BiphotonAmplitude {
    TransverseGrid grid;
    PumpCrystalSpec spec;
    bool separable = false;
    Eigen::MatrixXd kernel_1d;    // n x n, separable path (x == y by isotropy)
    Eigen::MatrixXd kernel_full;  // n^2 x n^2, dense path
};

// Full dense kernels are limited to n <= 64 per axis (16 n^4 bytes; ~268 MB
// at n = 64).
BiphotonAmplitude amplitude_sinc(const PumpCrystalSpec& spec, const TransverseGrid& grid);
BiphotonAmplitude amplitude_gaussian(const PumpCrystalSpec& spec, const TransverseGrid& grid);

struct SchmidtDecomposition {
    TransverseGrid grid;
    bool separable = false;
    Eigen::VectorXd weights;      // descending, renormalized to sum 1
    double discarded_tail = 0.0;  // weight mass dropped by the rank cut

    // Separable path: per-axis mode tables, one row per axis order. Momentum
    // rows are the unit-quadrature SVD vectors / sqrt(dq); real rows their
    // inverse transforms. axis_orders[k] = (x order, y order) of mode k.
    Eigen::MatrixXd sig_axis_q, idl_axis_q;
    Eigen::MatrixXcd sig_axis_r, idl_axis_r;
    std::vector<std::pair<int, int>> axis_orders;

    // Dense path: one row per mode, flat n^2 columns.
    Eigen::MatrixXcd sig_full_q, idl_full_q, sig_full_r, idl_full_r;

    int rank() const { return static_cast<int>(weights.size()); }

    // Materialized 2-D fields for mode index k.
    ComplexField signal_mode(int k, Space space) const;
    ComplexField idler_mode(int k, Space space) const;
    // count x n^2 stacked mode values (row-major pixels, index iy*n+ix).
    Eigen::MatrixXcd signal_stack(int count, Space space) const;
    Eigen::MatrixXcd idler_stack(int count, Space space) const;
};

// SVD with a deterministic phase convention: the largest-magnitude sample of
// each signal mode is made real-positive, idler counter-rotated so the
// weighted products are unchanged. Separable products are sorted by weight
// descending, then total axis order, then x order.
SchmidtDecomposition schmidt_decompose(const BiphotonAmplitude& amp, int rank);

// Closed-form mode count for the double-Gaussian model:
// kappa = ((s + 1/s)/2)^2 with s = sigma_p * L. Minimum 1 at s = 1.
double schmidt_number_gaussian(double sigma_p, double L);

struct EntanglementMetrics {
    double schmidt_number_kappa = 0.0;  // 1 / sum lambda^2
    double entropy_bits = 0.0;          // -sum lambda log2 lambda
};
EntanglementMetrics entanglement_metrics(const Eigen::VectorXd& weights);

// SVD-free participation ratio of the kernel, ||K||_F^4 / ||K K^T||_F^2.
double participation_ratio_kernel(const BiphotonAmplitude& amp);

// 1/e^2-fit waist of the fundamental real-space idler mode, used as the
// default analysis-basis waist.
double fundamental_waist(const SchmidtDecomposition& dec);

}  // namespace qdi
