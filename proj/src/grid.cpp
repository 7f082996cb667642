#include "qdi/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace qdi {

namespace {

constexpr double pi = std::numbers::pi;

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

// Global phase of the centered transform, (-i)^(n%4) for the forward
// direction, (+i)^(n%4) for the inverse (one factor per axis).
cplx axis_phase(int n, int sign) {
    static const cplx table_fwd[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    const cplx p = table_fwd[n % 4];
    return sign < 0 ? p : std::conj(p);
}

void run_fft_2d(const cplx* in, cplx* out, int n, int sign) {
    fftw_complex* buf = fftw_alloc_complex(static_cast<size_t>(n) * n);
    std::memcpy(buf, in, sizeof(cplx) * n * n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        plan = fftw_plan_dft_2d(n, n, buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(plan);
    }
    std::memcpy(out, buf, sizeof(cplx) * n * n);
    fftw_free(buf);
}

void run_fft_1d(const cplx* in, cplx* out, int n, int sign) {
    fftw_complex* buf = fftw_alloc_complex(n);
    std::memcpy(buf, in, sizeof(cplx) * n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        plan = fftw_plan_dft_1d(n, buf, buf, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(plan);
    }
    std::memcpy(out, buf, sizeof(cplx) * n);
    fftw_free(buf);
}

// Centered transform core: checkerboard the input, run the FFT, checkerboard
// the output, apply the global phase and the quadrature prefactor.
ComplexField centered_2d(const ComplexField& f, int sign, Space out_space, double prefactor) {
    const int n = f.grid.n;
    ComplexField out = make_field(f.grid, out_space);
    std::vector<cplx> tmp(f.v);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            if ((ix + iy) & 1) tmp[static_cast<size_t>(iy) * n + ix] *= -1.0;
    run_fft_2d(tmp.data(), out.v.data(), n, sign);
    const cplx ph = axis_phase(n, sign) * axis_phase(n, sign) * prefactor;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) {
            cplx& z = out.v[static_cast<size_t>(iy) * n + ix];
            z *= ph;
            if ((ix + iy) & 1) z *= -1.0;
        }
    return out;
}

std::vector<cplx> centered_1d(const std::vector<cplx>& f, const TransverseGrid& g, int sign,
                              double prefactor) {
    const int n = g.n;
    if (static_cast<int>(f.size()) != n) throw numeric_error("1d transform: length != grid.n");
    std::vector<cplx> tmp(f), out(n);
    for (int i = 1; i < n; i += 2) tmp[i] *= -1.0;
    run_fft_1d(tmp.data(), out.data(), n, sign);
    const cplx ph = axis_phase(n, sign) * prefactor;
    for (int i = 0; i < n; ++i) {
        out[i] *= ph;
        if (i & 1) out[i] *= -1.0;
    }
    return out;
}

}  // namespace

double TransverseGrid::dq() const { return pi / half_extent; }

TransverseGrid make_grid(int samples_per_axis, double half_extent) {
    if (samples_per_axis < 8 || samples_per_axis % 2 != 0)
        throw config_error("grid: samples_per_axis must be even and >= 8, got " +
                           std::to_string(samples_per_axis));
    if (!(half_extent > 0.0)) throw config_error("grid: half_extent must be positive");
    return TransverseGrid{samples_per_axis, half_extent};
}

ComplexField make_field(const TransverseGrid& grid, Space space) {
    ComplexField f;
    f.grid = grid;
    f.space = space;
    f.v.assign(static_cast<size_t>(grid.n) * grid.n, cplx(0, 0));
    return f;
}

ComplexField to_momentum(const ComplexField& f) {
    if (f.space != Space::real_space)
        throw numeric_error("to_momentum: field is not in real space");
    return centered_2d(f, FFTW_FORWARD, Space::momentum, f.grid.cell_real() / (2.0 * pi));
}

ComplexField from_momentum(const ComplexField& f) {
    if (f.space != Space::momentum)
        throw numeric_error("from_momentum: field is not in momentum space");
    return centered_2d(f, FFTW_BACKWARD, Space::real_space, f.grid.cell_momentum() / (2.0 * pi));
}

std::vector<cplx> to_momentum_1d(const std::vector<cplx>& f, const TransverseGrid& grid) {
    return centered_1d(f, grid, FFTW_FORWARD, grid.drho() / std::sqrt(2.0 * pi));
}

std::vector<cplx> from_momentum_1d(const std::vector<cplx>& f, const TransverseGrid& grid) {
    return centered_1d(f, grid, FFTW_BACKWARD, grid.dq() / std::sqrt(2.0 * pi));
}

cplx inner_product(const ComplexField& f, const ComplexField& g) {
    if (!(f.grid == g.grid)) throw numeric_error("inner_product: grid mismatch");
    if (f.space != g.space) throw numeric_error("inner_product: space mismatch");
    cplx acc(0, 0);
    for (size_t i = 0; i < f.v.size(); ++i) acc += std::conj(f.v[i]) * g.v[i];
    return acc * f.cell();
}

double norm(const ComplexField& f) {
    double acc = 0;
    for (const cplx& z : f.v) acc += std::norm(z);
    return std::sqrt(acc * f.cell());
}

}  // namespace qdi
