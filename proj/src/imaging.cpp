#include "qdi/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace qdi {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLog2 = std::numbers::ln2;

void check_truncation(const SchmidtDecomposition& dec, const CouplingMatrix& coupling,
                      const WeightVector& weights, int count) {
    if (count < 1 || count > dec.rank())
        throw config_error("truncation " + std::to_string(count) + " outside rank " +
                           std::to_string(dec.rank()));
    if (coupling.kind == CouplingKind::beta2)
        throw config_error("phase-sensitive image needs a first-order or far-field coupling");
    if (coupling.entries.rows() < count || coupling.entries.cols() < count)
        throw config_error("coupling matrix smaller than the requested truncation");
    if (weights.w.size() < count)
        throw config_error("weight vector smaller than the requested truncation");
}

// columns permuted to the detected coordinate: pixel (ix, iy) reads the mode
// value at (-rho_x, -rho_y), index (n - i) % n per axis
Eigen::MatrixXcd detected_stack(const SchmidtDecomposition& dec, int count, DetectorSign sign) {
    Eigen::MatrixXcd v = dec.idler_stack(count, Space::real_space);
    if (sign == DetectorSign::direct) return v;
    const int n = dec.grid.n;
    Eigen::MatrixXcd out(v.rows(), v.cols());
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            out.col(static_cast<Eigen::Index>(iy) * n + ix) =
                v.col(static_cast<Eigen::Index>((n - iy) % n) * n + (n - ix) % n);
    return out;
}

Eigen::VectorXcd contract(const SchmidtDecomposition& dec, const CouplingMatrix& coupling,
                          const WeightVector& weights, int count, DetectorSign sign) {
    check_truncation(dec, coupling, weights, count);
    const Eigen::MatrixXcd vd = detected_stack(dec, count, sign);
    const Eigen::VectorXd w = weights.w.head(count);
    const Eigen::MatrixXcd a =
        w.asDiagonal() * coupling.entries.topLeftCorner(count, count) * w.asDiagonal();
    const Eigen::MatrixXcd t = a * vd;
    return vd.conjugate().cwiseProduct(t).colwise().sum().transpose();
}

// roots and weights of the Legendre polynomial, Newton from the Chebyshev guess
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

double gaussian_fwhm(double center, double fwhm, double v) {
    const double u = (v - center) / fwhm;
    return std::exp(-4.0 * kLog2 * u * u);
}

struct OmegaGrid {
    std::vector<double> omega;
    double step = 1.0;  // quadrature weight per sample (1 for a single sample)
};

OmegaGrid omega_samples(const GateSpec& gates, const FarFieldQuadrature& quad) {
    double lo = quad.omega_min, hi = quad.omega_max;
    if (lo <= 0.0 && hi <= 0.0) {
        const double c1 = gates.signal_center;
        const double c2 = gates.sum_center() - gates.idler_center;
        const double span =
            4.0 * (gates.signal_fwhm + gates.idler_fwhm + gates.pump_sum_fwhm);
        lo = std::max(1e-9, std::min(c1, c2) - span);
        hi = std::max(c1, c2) + span;
    }
    if (hi < lo) throw config_error("far-field frequency window is inverted");
    OmegaGrid out;
    if (quad.n_omega <= 1 || hi == lo) {
        out.omega = {0.5 * (lo + hi)};
        out.step = 1.0;
        return out;
    }
    out.omega.resize(quad.n_omega);
    out.step = (hi - lo) / (quad.n_omega - 1);
    for (int i = 0; i < quad.n_omega; ++i) out.omega[i] = lo + out.step * i;
    return out;
}

}  // namespace

WeightVector reweight(const SchmidtDecomposition& dec, WeightScheme scheme, int count) {
    if (count < 1 || count > dec.rank())
        throw config_error("weight truncation " + std::to_string(count) + " outside rank " +
                           std::to_string(dec.rank()));
    WeightVector out;
    out.scheme = scheme;
    switch (scheme) {
        case WeightScheme::natural:
            out.w = dec.weights.head(count).cwiseSqrt();
            break;
        case WeightScheme::flattened:
            out.w = Eigen::VectorXd::Constant(
                count, std::sqrt(dec.weights.head(count).sum() / count));
            break;
        case WeightScheme::custom:
            throw config_error("custom weights need explicit values, use custom_weights()");
    }
    return out;
}

WeightVector custom_weights(Eigen::VectorXd w) {
    if (w.size() == 0 || (w.array() <= 0.0).any())
        throw config_error("custom weights must be positive");
    return {std::move(w), WeightScheme::custom};
}

Eigen::VectorXcd coincidence_contraction(const SchmidtDecomposition& dec,
                                         const CouplingMatrix& coupling,
                                         const WeightVector& weights, int count,
                                         DetectorSign sign) {
    return contract(dec, coupling, weights, count, sign);
}

RealImage coincidence_image(const SchmidtDecomposition& dec, const CouplingMatrix& coupling,
                            const WeightVector& weights, int count, DetectorSign sign) {
    return {dec.grid, contract(dec, coupling, weights, count, sign).real(), false};
}

RealImage far_field_image(const SchmidtDecomposition& dec, const CouplingMatrix& gamma,
                          const WeightVector& weights, int count, DetectorSign sign) {
    return {dec.grid, contract(dec, gamma, weights, count, sign).real(), false};
}

std::vector<double> spectral_gate_functional(const GateSpec& gates,
                                             const std::vector<double>& omega_grid) {
    if (gates.signal_fwhm <= 0.0 || gates.idler_fwhm <= 0.0 || gates.pump_sum_fwhm <= 0.0)
        throw config_error("gate widths must be positive");
    if (omega_grid.empty()) throw config_error("gate evaluation needs at least one frequency");
    if (omega_grid.size() >= 2) {
        double spacing = 0.0;
        for (size_t i = 1; i < omega_grid.size(); ++i)
            spacing = std::max(spacing, std::abs(omega_grid[i] - omega_grid[i - 1]));
        const double bound = std::min(gates.signal_fwhm, gates.idler_fwhm) / 8.0;
        if (spacing > bound * (1.0 + 1e-12))
            throw numeric_error("frequency grid spacing " + std::to_string(spacing) +
                                " underresolves the narrower detector gate, need <= " +
                                std::to_string(bound));
    }
    // inner integral over omega_i of G_i(omega_i) |A(omega_s + omega_i)|^2.
    // Both factors are gaussians, so the product is one too; the quadrature
    // window and step follow its analytic center and width.
    const double alpha = 4.0 * kLog2 / (gates.idler_fwhm * gates.idler_fwhm);
    const double beta = 8.0 * kLog2 / (gates.pump_sum_fwhm * gates.pump_sum_fwhm);
    const double sigma = 1.0 / std::sqrt(2.0 * (alpha + beta));
    const double step = sigma / 8.0;
    const int half = static_cast<int>(std::ceil(12.0 * sigma / step));
    std::vector<double> out(omega_grid.size());
    for (size_t s = 0; s < omega_grid.size(); ++s) {
        const double om_s = omega_grid[s];
        const double pump_peak = gates.sum_center() - om_s;
        const double mu =
            (alpha * gates.idler_center + beta * pump_peak) / (alpha + beta);
        double acc = 0.0;
        for (int j = -half; j <= half; ++j) {
            const double om_i = mu + j * step;
            const double pump = gaussian_fwhm(pump_peak, gates.pump_sum_fwhm, om_i);
            acc += gaussian_fwhm(gates.idler_center, gates.idler_fwhm, om_i) * pump * pump;
        }
        out[s] = gaussian_fwhm(gates.signal_center, gates.signal_fwhm, om_s) * acc * step;
    }
    return out;
}

FarFieldBasis farfield_basis(const ModeSet& set) {
    if (set.specs.empty()) throw config_error("far-field basis needs at least one mode");
    FarFieldBasis out;
    out.size = static_cast<int>(set.specs.size());
    out.momentum_bound = 0.0;
    auto specs = set.specs;
    out.eval_real = [specs](int mode, double x, double y) {
        return eval_mode_real(specs[static_cast<size_t>(mode)], x, y);
    };
    out.eval_momentum = [specs](int mode, double qx, double qy) {
        return eval_mode_momentum(specs[static_cast<size_t>(mode)], qx, qy);
    };
    return out;
}

FarFieldBasis farfield_basis(const SchmidtDecomposition& dec, int count) {
    if (count < 1 || count > dec.rank())
        throw config_error("far-field basis truncation outside the decomposition rank");
    const TransverseGrid grid = dec.grid;
    auto real_rows = std::make_shared<Eigen::MatrixXcd>(dec.signal_stack(count, Space::real_space));
    auto mom_rows = std::make_shared<Eigen::MatrixXcd>(dec.signal_stack(count, Space::momentum));
    // clamped bilinear lookup of row `mode` at an off-node point
    auto interp = [grid](const Eigen::MatrixXcd& rows, int mode, double x, double y,
                         double origin, double step) {
        const int n = grid.n;
        const double gx = std::clamp((x - origin) / step, 0.0, n - 1.0);
        const double gy = std::clamp((y - origin) / step, 0.0, n - 1.0);
        const int x0 = std::min(static_cast<int>(gx), n - 1), x1 = std::min(x0 + 1, n - 1);
        const int y0 = std::min(static_cast<int>(gy), n - 1), y1 = std::min(y0 + 1, n - 1);
        const double fx = gx - x0, fy = gy - y0;
        auto at = [&](int yy, int xx) {
            return rows(mode, static_cast<Eigen::Index>(yy) * n + xx);
        };
        return (at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx) * (1.0 - fy) +
               (at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx) * fy;
    };
    FarFieldBasis out;
    out.size = count;
    out.momentum_bound = (grid.n / 2 - 1) * grid.dq();
    out.eval_real = [real_rows, interp, grid](int mode, double x, double y) {
        return interp(*real_rows, mode, x, y, grid.rho(0), grid.drho());
    };
    out.eval_momentum = [mom_rows, interp, grid](int mode, double qx, double qy) {
        return interp(*mom_rows, mode, qx, qy, grid.q(0), grid.dq());
    };
    return out;
}

CouplingMatrix gamma_matrix(const FarFieldBasis& basis, const CouplingMatrix& beta1,
                            const GateSpec& gates, const FarFieldQuadrature& quad,
                            const TransverseGrid& grid) {
    if (basis.size < 1) throw config_error("far-field basis is empty");
    if (beta1.kind != CouplingKind::beta1)
        throw config_error("far-field coupling builds on the first-order matrix");
    if (beta1.entries.rows() < basis.size || beta1.entries.cols() < basis.size)
        throw config_error("first-order coupling smaller than the far-field basis");
    if (quad.n_radial < 2 || quad.n_angular < 4)
        throw config_error("far-field quadrature needs at least 2 radial and 4 angular samples");
    if (quad.c_light <= 0.0) throw config_error("propagation speed must be positive");

    const OmegaGrid og = omega_samples(gates, quad);
    const double q_need = *std::max_element(og.omega.begin(), og.omega.end()) / quad.c_light;
    if (basis.momentum_bound > 0.0 && q_need > basis.momentum_bound)
        throw numeric_error(
            "far-field frequencies need momentum samples out to " + std::to_string(q_need) +
            " but the mode grid only reaches " + std::to_string(basis.momentum_bound) +
            "; enlarge the momentum span (more samples or a smaller half extent) or lower the "
            "frequency window");

    std::vector<double> ev = spectral_gate_functional(gates, og.omega);
    for (auto& e : ev) e *= og.step;

    const double disk = quad.disk_radius > 0.0 ? quad.disk_radius : grid.half_extent;
    std::vector<double> gx, gw;
    gauss_legendre(quad.n_radial, gx, gw);

    const int m = basis.size;
    // W[n, k] = dphi * sum_phi a(n, phi) b(k, phi) with the radial and
    // frequency quadratures folded into a and b; uniform angular samples keep
    // equal-angular-momentum selection exact.
    Eigen::MatrixXcd a(m, quad.n_angular), b(m, quad.n_angular);
    for (int ip = 0; ip < quad.n_angular; ++ip) {
        const double phi = 2.0 * kPi * ip / quad.n_angular;
        const double cx = std::cos(phi), cy = std::sin(phi);
        for (int mode = 0; mode < m; ++mode) {
            cplx rad(0, 0);
            for (int j = 0; j < quad.n_radial; ++j) {
                const double r = (gx[j] + 1.0) * disk / 2.0;
                rad += gw[j] * (disk / 2.0) * r * basis.eval_real(mode, r * cx, r * cy);
            }
            a(mode, ip) = rad;
            cplx frq(0, 0);
            for (size_t j = 0; j < og.omega.size(); ++j) {
                const double q = og.omega[j] / quad.c_light;
                frq += ev[j] * std::conj(basis.eval_momentum(mode, q * cx, q * cy));
            }
            b(mode, ip) = frq;
        }
    }
    Eigen::MatrixXcd w = (2.0 * kPi / quad.n_angular) * (a * b.transpose());
    return {w * beta1.entries.topLeftCorner(m, m), CouplingKind::gamma, beta1.basis_note};
}

RealImage frequency_resolved_image(const ChargeDensity& sigma, double omega_bar,
                                   RadialConvention conv) {
    if (omega_bar < 0.0) throw config_error("detuning frequency must be non-negative");
    const TransverseGrid& g = sigma.field.grid;
    Eigen::VectorXd vals(static_cast<Eigen::Index>(g.n) * g.n);
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix) {
            const double r = conv == RadialConvention::radial
                                 ? std::hypot(g.rho(ix), g.rho(iy))
                                 : g.rho(ix);
            vals[static_cast<Eigen::Index>(iy) * g.n + ix] =
                (sigma.field.at(ix, iy) * std::polar(1.0, -omega_bar * r)).real();
        }
    return {g, std::move(vals), false};
}

RealImage subtract_background(const RealImage& raw, const RealImage& reference) {
    if (raw.grid != reference.grid)
        throw config_error("background reference lives on a different grid");
    return {raw.grid, reference.values - raw.values, true};
}

ImageMetrics image_metrics(const RealImage& img, const RealImage& reference) {
    if (img.grid != reference.grid) throw config_error("metric images live on different grids");
    const Eigen::VectorXd& a = img.values;
    const Eigen::VectorXd& r = reference.values;
    const double rnorm2 = r.squaredNorm();
    if (rnorm2 == 0.0) throw numeric_error("reference image has no signal");
    ImageMetrics out;
    out.nmse = (a - r).squaredNorm() / rnorm2;
    const double ma = a.mean(), mr = r.mean();
    const Eigen::VectorXd da = a.array() - ma, dr = r.array() - mr;
    const double den = da.norm() * dr.norm();
    if (dr.norm() == 0.0) throw numeric_error("reference image has zero variance");
    out.pearson = den == 0.0 ? 0.0 : da.dot(dr) / den;
    return out;
}

double nmse_best_scale(const Eigen::VectorXd& img, const Eigen::VectorXd& ref) {
    const double ii = img.squaredNorm();
    const double c = ii > 0.0 ? std::max(img.dot(ref) / ii, 0.0) : 0.0;
    return (c * img - ref).squaredNorm() / ref.squaredNorm();
}

}  // namespace qdi
