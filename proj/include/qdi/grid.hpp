#pragma once
#include <complex>
#include <vector>

#include "qdi/errors.hpp"

namespace qdi {

using cplx = std::complex<double>;

// Square transverse-plane sampling. Real axis: rho_i = (i - n/2) * drho,
// i in [0, n), spanning [-half_extent, +half_extent). Momentum axis uses the
// conjugate centered layout q_k = (k - n/2) * dq with n * drho * dq = 2*pi.
struct TransverseGrid {
    int n = 0;
    double half_extent = 0.0;

    double drho() const { return 2.0 * half_extent / n; }
    double dq() const;  // pi / half_extent
    double rho(int i) const { return (i - n / 2) * drho(); }
    double q(int k) const { return (k - n / 2) * dq(); }
    double cell_real() const { return drho() * drho(); }
    double cell_momentum() const { return dq() * dq(); }

    bool operator==(const TransverseGrid&) const = default;
};

TransverseGrid make_grid(int samples_per_axis, double half_extent);

enum class Space { real_space = 0, momentum = 1 };

// N x N complex samples, row-major with index iy * n + ix (row = y).
struct ComplexField {
    TransverseGrid grid;
    Space space = Space::real_space;
    std::vector<cplx> v;

    cplx& at(int ix, int iy) { return v[static_cast<size_t>(iy) * grid.n + ix]; }
    const cplx& at(int ix, int iy) const { return v[static_cast<size_t>(iy) * grid.n + ix]; }
    double cell() const {
        return space == Space::real_space ? grid.cell_real() : grid.cell_momentum();
    }
};

ComplexField make_field(const TransverseGrid& grid, Space space);

// Unitary centered transforms. Forward (real -> momentum) uses the e^{-i q.rho}
// kernel: F(q) = (drho^2 / 2 pi) * sum_rho f(rho) e^{-i q.rho}. Inverse uses
// e^{+i q.rho}. Norms are preserved under the respective cell measures.
ComplexField to_momentum(const ComplexField& f);
ComplexField from_momentum(const ComplexField& f);

// 1-D versions of the same transforms, used by the separable decomposition
// path. Input length must match grid.n.
std::vector<cplx> to_momentum_1d(const std::vector<cplx>& f, const TransverseGrid& grid);
std::vector<cplx> from_momentum_1d(const std::vector<cplx>& f, const TransverseGrid& grid);

// sum conj(f) * g * cell_area, accumulated in sample order (deterministic).
cplx inner_product(const ComplexField& f, const ComplexField& g);
double norm(const ComplexField& f);

}  // namespace qdi
