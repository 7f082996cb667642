#pragma once
#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "qdi/biphoton.hpp"
#include "qdi/grid.hpp"
#include "qdi/matter.hpp"
#include "qdi/modes.hpp"

namespace qdi {

enum class WeightScheme { natural, flattened, custom };

struct WeightVector {
    Eigen::VectorXd w;
    WeightScheme scheme = WeightScheme::natural;
};

// natural: w_n = sqrt(lambda_n). flattened: equal weights matched to the
// truncated energy, w_n = sqrt(sum_{k<N} lambda_k / N).
WeightVector reweight(const SchmidtDecomposition& dec, WeightScheme scheme, int count);
WeightVector custom_weights(Eigen::VectorXd w);

struct RealImage {
    TransverseGrid grid;
    Eigen::VectorXd values;  // pixel index iy*n+ix, signed
    bool background_subtracted = false;
};

// Sign convention for the idler detector coordinate. `negated` evaluates the
// idler modes at -rho_detector (the detected-mode contraction; the
// strong/weak correlation regimes then come out mirrored/direct by
// themselves). `direct` evaluates at +rho for A/B comparisons.
enum class DetectorSign { negated, direct };

// image(rho) = Re sum_{n,m} w_n w_m K[n, m] conj(v_n(rho')) v_m(rho') with
// rho' per the detector sign; K is a beta or gamma coupling matrix.
RealImage coincidence_image(const SchmidtDecomposition& dec, const CouplingMatrix& coupling,
                            const WeightVector& weights, int count,
                            DetectorSign sign = DetectorSign::negated);

// Same contraction without taking the real part; the phase-recovery pipeline
// demodulates this complex map.
Eigen::VectorXcd coincidence_contraction(const SchmidtDecomposition& dec,
                                         const CouplingMatrix& coupling,
                                         const WeightVector& weights, int count,
                                         DetectorSign sign = DetectorSign::negated);

// Detector spectral gating, all Gaussians parameterized by FWHM. The pump
// sum-frequency envelope is centered at signal_center + idler_center unless
// overridden.
struct GateSpec {
    double signal_center = 10.0;
    double signal_fwhm = 1.0;
    double idler_center = 10.0;
    double idler_fwhm = 1.0;
    double pump_sum_fwhm = 0.5;
    double pump_sum_center = -1.0;  // < 0 means signal_center + idler_center

    double sum_center() const {
        return pump_sum_center < 0 ? signal_center + idler_center : pump_sum_center;
    }
};

// E(w_s) = G_s(w_s) * integral dw_i G_i(w_i) |A(w_s + w_i)|^2, inner
// quadrature resolved to >= 8 samples per narrowest FWHM. The caller's
// omega grid must satisfy the same resolution bound.
std::vector<double> spectral_gate_functional(const GateSpec& gates,
                                             const std::vector<double>& omega_grid);

// Pointwise mode evaluation used by the far-field quadrature: closed-form
// for analytic bases, bilinear grid interpolation for numeric stacks.
struct FarFieldBasis {
    int size = 0;
    std::function<cplx(int mode, double x, double y)> eval_real;
    std::function<cplx(int mode, double qx, double qy)> eval_momentum;
    double momentum_bound = 0.0;  // 0 = unbounded (analytic)
};
FarFieldBasis farfield_basis(const ModeSet& set);
FarFieldBasis farfield_basis(const SchmidtDecomposition& dec, int count);

struct FarFieldQuadrature {
    int n_radial = 40;       // Gauss-Legendre nodes on (0, disk_radius]
    int n_angular = 64;      // uniform angular samples
    int n_omega = 12;        // uniform samples over [omega_min, omega_max]
    double omega_min = 0.0;  // <= 0 pair means derive from the gates
    double omega_max = 0.0;
    double disk_radius = 0.0;  // 0 means the grid half extent
    double c_light = 1.0;
};

// gamma = W beta1 with W[n, k] = integral dw E(w) integral d2 rho
// u_n(rho) conj(u_k((w/c) rho_hat)) over the detector disk.
CouplingMatrix gamma_matrix(const FarFieldBasis& basis, const CouplingMatrix& beta1,
                            const GateSpec& gates, const FarFieldQuadrature& quad,
                            const TransverseGrid& grid);

RealImage far_field_image(const SchmidtDecomposition& dec, const CouplingMatrix& gamma,
                          const WeightVector& weights, int count,
                          DetectorSign sign = DetectorSign::negated);

enum class RadialConvention { radial, x_projection };

// S(rho) = Re[sigma(rho) e^{-i omega_bar r(rho)}], r = |rho| (default) or x.
RealImage frequency_resolved_image(const ChargeDensity& sigma, double omega_bar,
                                   RadialConvention conv = RadialConvention::radial);

// S = -(raw - reference).
RealImage subtract_background(const RealImage& raw, const RealImage& reference);

struct ImageMetrics {
    double nmse = 0.0;
    double pearson = 0.0;
};
ImageMetrics image_metrics(const RealImage& img, const RealImage& reference);

// ||c*img - ref||^2 / ||ref||^2 minimized over scale c >= 0.
double nmse_best_scale(const Eigen::VectorXd& img, const Eigen::VectorXd& ref);

}  // namespace qdi
