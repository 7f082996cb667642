#include "qdi/matter.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qdi/io.hpp"

namespace qdi {

namespace {

constexpr double kPi = 3.14159265358979323846;

// annulus geometry, absolute units (designed for half extents >= 4)
constexpr double kRingInner = 2.4;
constexpr double kRingOuter = 3.0;
constexpr double kRingSoft = 0.12;
constexpr double kPocketRadius = 2.7;
constexpr double kPocketSize = 0.28;
constexpr double kPocketSoft = 0.08;
constexpr double kPocketDepth = 0.75;

double soft_step(double x, double w) { return 0.5 * (1.0 + std::tanh(x / w)); }

void check_real_grid(const ComplexField& f, const ModeStack& modes) {
    if (modes.space != Space::real_space)
        throw numeric_error("coupling quadrature needs real-space modes");
    if (!(modes.grid == f.grid)) throw numeric_error("mode stack grid mismatch");
}

}  // namespace

ChargeDensity charge_density_from_field(ComplexField f, std::string source) {
    if (f.space != Space::real_space)
        throw numeric_error("charge density must be sampled in real space");
    double peak = 0.0;
    for (const auto& z : f.v) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw numeric_error("charge density contains non-finite samples");
        peak = std::max(peak, std::abs(z));
    }
    if (peak <= 0.0) throw numeric_error("charge density is identically zero");
    for (auto& z : f.v) z /= peak;
    return {std::move(f), std::move(source)};
}

Eigen::ArrayXXd resample_to_grid(const Eigen::ArrayXXd& src, const TransverseGrid& grid) {
    if (src.rows() != src.cols() || src.rows() < 2)
        throw numeric_error("resample source must be square");
    const int ns = static_cast<int>(src.rows());
    const int n = grid.n;
    const double E = grid.half_extent;
    Eigen::ArrayXXd out(n, n);
    std::vector<int> i0(static_cast<size_t>(n)), i1(static_cast<size_t>(n));
    std::vector<double> fr(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double u = (grid.rho(i) + E) / (2.0 * E);
        const double xs = u * ns - 0.5;
        int a = static_cast<int>(std::floor(xs));
        double f = xs - a;
        a = std::clamp(a, 0, ns - 1);
        const int b = std::min(a + 1, ns - 1);
        f = std::clamp(f, 0.0, 1.0);
        i0[static_cast<size_t>(i)] = a;
        i1[static_cast<size_t>(i)] = b;
        fr[static_cast<size_t>(i)] = f;
    }
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            const auto sy = static_cast<size_t>(iy), sx = static_cast<size_t>(ix);
            const double r0 = src(i0[sy], i0[sx]) * (1 - fr[sx]) + src(i0[sy], i1[sx]) * fr[sx];
            const double r1 = src(i1[sy], i0[sx]) * (1 - fr[sx]) + src(i1[sy], i1[sx]) * fr[sx];
            out(iy, ix) = r0 * (1 - fr[sy]) + r1 * fr[sy];
        }
    return out;
}

ChargeDensity load_charge_density(const std::string& magnitude_path,
                                  const std::optional<std::string>& phase_path,
                                  const TransverseGrid& grid) {
    auto mag_pgm = read_pgm(magnitude_path);
    if (mag_pgm.width != mag_pgm.height)
        throw io_error("density raster must be square: " + magnitude_path);
    const int ns = mag_pgm.width;
    // file rows scan top-down; flip so array row = ascending y
    Eigen::ArrayXXd mag_src(ns, ns);
    for (int r = 0; r < ns; ++r)
        for (int c = 0; c < ns; ++c)
            mag_src(ns - 1 - r, c) =
                static_cast<double>(mag_pgm.px[static_cast<size_t>(r) * ns + c]) / mag_pgm.maxval;
    auto mag = resample_to_grid(mag_src, grid);

    ComplexField f = make_field(grid, Space::real_space);
    if (phase_path) {
        auto ph_pgm = read_pgm(*phase_path);
        if (ph_pgm.width != mag_pgm.width || ph_pgm.height != mag_pgm.height)
            throw io_error("magnitude and phase rasters disagree in size: " + *phase_path);
        // resample the phase through cos/sin so the wrap seam stays clean
        Eigen::ArrayXXd cs(ns, ns), sn(ns, ns);
        for (int r = 0; r < ns; ++r)
            for (int c = 0; c < ns; ++c) {
                const double g = ph_pgm.px[static_cast<size_t>(r) * ns + c];
                const double phi = -kPi + 2.0 * kPi * g / (ph_pgm.maxval + 1.0);
                cs(ns - 1 - r, c) = std::cos(phi);
                sn(ns - 1 - r, c) = std::sin(phi);
            }
        auto csg = resample_to_grid(cs, grid), sng = resample_to_grid(sn, grid);
        for (int iy = 0; iy < grid.n; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) {
                const double phi = std::atan2(sng(iy, ix), csg(iy, ix));
                f.at(ix, iy) = std::polar(mag(iy, ix), phi);
            }
    } else {
        for (int iy = 0; iy < grid.n; ++iy)
            for (int ix = 0; ix < grid.n; ++ix) f.at(ix, iy) = mag(iy, ix);
    }
    return charge_density_from_field(std::move(f), magnitude_path);
}

Eigen::ArrayXXd annulus_magnitude_raster(int render_n, double half_extent) {
    if (render_n < 16) throw config_error("annulus render resolution too small");
    Eigen::ArrayXXd mag(render_n, render_n);
    for (int iy = 0; iy < render_n; ++iy)
        for (int ix = 0; ix < render_n; ++ix) {
            const double x = (ix + 0.5) / render_n * 2.0 * half_extent - half_extent;
            const double y = (iy + 0.5) / render_n * 2.0 * half_extent - half_extent;
            const double R = std::hypot(x, y);
            double m = soft_step(R - kRingInner, kRingSoft) * soft_step(kRingOuter - R, kRingSoft);
            for (double ang : {90.0, 210.0, 330.0}) {
                const double a = ang * kPi / 180.0;
                const double rb =
                    std::hypot(x - kPocketRadius * std::cos(a), y - kPocketRadius * std::sin(a));
                m *= 1.0 - kPocketDepth * soft_step(kPocketSize - rb, kPocketSoft);
            }
            mag(iy, ix) = std::clamp(m, 0.0, 1.0);
        }
    return mag;
}

Eigen::ArrayXXd annulus_phase_raster(int render_n, double half_extent, double pitch) {
    if (!(pitch > 0.0)) throw config_error("phase pitch must be positive");
    Eigen::ArrayXXd ph(render_n, render_n);
    for (int iy = 0; iy < render_n; ++iy)
        for (int ix = 0; ix < render_n; ++ix) {
            const double x = (ix + 0.5) / render_n * 2.0 * half_extent - half_extent;
            const double y = (iy + 0.5) / render_n * 2.0 * half_extent - half_extent;
            ph(iy, ix) = -2.0 * kPi * std::hypot(x, y) / pitch;
        }
    return ph;
}

ChargeDensity phantom_annulus(const TransverseGrid& grid, int render_n) {
    auto mag = resample_to_grid(annulus_magnitude_raster(render_n, grid.half_extent), grid);
    ComplexField f = make_field(grid, Space::real_space);
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) f.at(ix, iy) = mag(iy, ix);
    return charge_density_from_field(std::move(f), "annulus");
}

ChargeDensity phantom_annulus_phase(const TransverseGrid& grid, double pitch, int render_n) {
    auto mag = resample_to_grid(annulus_magnitude_raster(render_n, grid.half_extent), grid);
    // the ramp is smooth, so it resamples unwrapped and wraps in the exponent
    auto ph = resample_to_grid(annulus_phase_raster(render_n, grid.half_extent, pitch), grid);
    ComplexField f = make_field(grid, Space::real_space);
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) f.at(ix, iy) = std::polar(mag(iy, ix), ph(iy, ix));
    return charge_density_from_field(std::move(f), "annulus+phase");
}

ChargeDensity phantom_point(const TransverseGrid& grid, double x, double y) {
    const int ix = static_cast<int>(std::lround(x / grid.drho())) + grid.n / 2;
    const int iy = static_cast<int>(std::lround(y / grid.drho())) + grid.n / 2;
    if (ix < 0 || ix >= grid.n || iy < 0 || iy >= grid.n)
        throw config_error("point phantom position outside the grid");
    ComplexField f = make_field(grid, Space::real_space);
    f.at(ix, iy) = 1.0;
    return charge_density_from_field(std::move(f), "point");
}

ChargeDensity phantom_random(const TransverseGrid& grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexField spec = make_field(grid, Space::momentum);
    const double cutoff = 0.35 * (grid.n / 2) * grid.dq();
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix) {
            const double qr = std::hypot(grid.q(ix), grid.q(iy));
            if (qr > cutoff) continue;
            const double env = std::exp(-2.0 * qr * qr / (cutoff * cutoff));
            spec.at(ix, iy) = cplx(gauss(rng), gauss(rng)) * env;
        }
    return charge_density_from_field(from_momentum(spec), "random:" + std::to_string(seed));
}

ModeStack mode_stack(const ModeSet& set) {
    if (set.fields.empty()) throw numeric_error("empty mode set");
    ModeStack st;
    st.grid = set.fields.front().grid;
    st.space = set.fields.front().space;
    const int M = static_cast<int>(set.fields.size());
    const int P = st.grid.n * st.grid.n;
    st.rows.resize(M, P);
    for (int k = 0; k < M; ++k)
        for (int p = 0; p < P; ++p)
            st.rows(k, p) = set.fields[static_cast<size_t>(k)].v[static_cast<size_t>(p)];
    st.note = family_name(set.specs.front().family) + ":" + std::to_string(M);
    return st;
}

ModeStack signal_stack(const SchmidtDecomposition& dec, int count, Space space) {
    return {dec.grid, space, dec.signal_stack(count, space),
            "schmidt-signal:" + std::to_string(count)};
}

ModeStack idler_stack(const SchmidtDecomposition& dec, int count, Space space) {
    return {dec.grid, space, dec.idler_stack(count, space),
            "schmidt-idler:" + std::to_string(count)};
}

CouplingMatrix beta_matrix(const ChargeDensity& sigma, const ModeStack& modes, int order_p) {
    if (order_p != 1 && order_p != 2) throw config_error("coupling order must be 1 or 2");
    check_real_grid(sigma.field, modes);
    const int P = modes.grid.n * modes.grid.n;
    Eigen::VectorXcd w(P);
    for (int p = 0; p < P; ++p) {
        const cplx s = sigma.field.v[static_cast<size_t>(p)];
        w[p] = order_p == 1 ? s : cplx(std::norm(s), 0.0);
    }
    CouplingMatrix out;
    out.kind = order_p == 1 ? CouplingKind::beta1 : CouplingKind::beta2;
    out.basis_note = modes.note;
    out.entries =
        (modes.rows * w.asDiagonal() * modes.rows.adjoint()) * modes.grid.cell_real();
    return out;
}

CouplingMatrix beta_matrix_momentum(const ChargeDensity& sigma,
                                    const ModeStack& modes_momentum) {
    if (modes_momentum.space != Space::momentum)
        throw numeric_error("momentum coupling needs momentum-space modes");
    if (!(modes_momentum.grid == sigma.field.grid))
        throw numeric_error("mode stack grid mismatch");
    const int n = modes_momentum.grid.n;
    const int P = n * n;
    const int M = static_cast<int>(modes_momentum.rows.rows());
    const ComplexField st = to_momentum(sigma.field);

    // G(m, ks) = sum_kd sigma_t(kd - ks) conj(u_m(kd)); offsets leaving the
    // grid contribute zero, so sigma must be band-limited
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(M, P);
    for (int m = 0; m < M; ++m)
        for (int sy = 0; sy < n; ++sy)
            for (int sx = 0; sx < n; ++sx) {
                cplx acc = 0.0;
                const int oy_lo = std::max(0, sy - n / 2), oy_hi = std::min(n, sy + n / 2);
                const int ox_lo = std::max(0, sx - n / 2), ox_hi = std::min(n, sx + n / 2);
                for (int dy = oy_lo; dy < oy_hi; ++dy)
                    for (int dx = ox_lo; dx < ox_hi; ++dx)
                        acc += st.at(dx - sx + n / 2, dy - sy + n / 2) *
                               std::conj(modes_momentum.rows(m, dy * n + dx));
                G(m, sy * n + sx) = acc;
            }
    const double dq = modes_momentum.grid.dq();
    CouplingMatrix out;
    out.kind = CouplingKind::beta1;
    out.basis_note = modes_momentum.note;
    out.entries = (modes_momentum.rows * G.transpose()) * (dq * dq * dq * dq / (2.0 * kPi));
    return out;
}

IdlerDensityMatrix idler_density_initial(const SchmidtDecomposition& dec) {
    IdlerDensityMatrix out;
    out.order = DensityOrder::zeroth;
    out.entries = dec.weights.cast<cplx>().asDiagonal();
    return out;
}

IdlerDensityMatrix idler_density_first_order(const SchmidtDecomposition& dec,
                                             const CouplingMatrix& beta1) {
    if (beta1.kind != CouplingKind::beta1)
        throw config_error("first-order correction takes an order-1 coupling");
    const int M = static_cast<int>(beta1.entries.rows());
    if (beta1.entries.cols() != M || M > dec.rank())
        throw numeric_error("coupling size does not fit the decomposition");
    Eigen::MatrixXcd P(M, M);
    for (int nn = 0; nn < M; ++nn)
        for (int mm = 0; mm < M; ++mm)
            P(nn, mm) = cplx(0.0, 1.0) * beta1.entries(nn, mm) *
                        std::sqrt(dec.weights[nn] * dec.weights[mm]);
    IdlerDensityMatrix out;
    out.order = DensityOrder::first_order_correction;
    out.entries = P + P.adjoint();
    return out;
}

Eigen::MatrixXcd trace_second_index(const Eigen::MatrixXcd& in,
                                    const std::vector<std::pair<int, int>>& orders) {
    if (in.rows() != in.cols() || static_cast<size_t>(in.rows()) != orders.size())
        throw numeric_error("order list does not match the matrix");
    int max_x = 0, max_y = 0;
    for (const auto& [ix, iy] : orders) {
        max_x = std::max(max_x, ix);
        max_y = std::max(max_y, iy);
    }
    // (x, y) -> flat mode index, -1 when missing
    Eigen::MatrixXi where = Eigen::MatrixXi::Constant(max_x + 1, max_y + 1, -1);
    for (size_t k = 0; k < orders.size(); ++k)
        where(orders[k].first, orders[k].second) = static_cast<int>(k);
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(max_x + 1, max_x + 1);
    for (int nx = 0; nx <= max_x; ++nx)
        for (int mx = 0; mx <= max_x; ++mx)
            for (int y = 0; y <= max_y; ++y) {
                const int a = where(nx, y), b = where(mx, y);
                if (a >= 0 && b >= 0) out(nx, mx) += in(a, b);
            }
    return out;
}

}  // namespace qdi
