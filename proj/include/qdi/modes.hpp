#pragma once
#include <string>
#include <vector>

#include "qdi/grid.hpp"

namespace qdi {

enum class ModeFamily { hermite_gauss, laguerre_gauss };

// index_a/index_b are (n_x, n_y) for Hermite-Gauss and (p, l) for
// Laguerre-Gauss; l may be negative (topological charge sign).
struct ModeSpec {
    ModeFamily family = ModeFamily::hermite_gauss;
    int index_a = 0;
    int index_b = 0;
    double waist = 1.0;

    int total_order() const {
        return family == ModeFamily::hermite_gauss ? index_a + index_b
                                                   : 2 * index_a + std::abs(index_b);
    }
};

struct ModeSet {
    std::vector<ModeSpec> specs;
    std::vector<ComplexField> fields;  // shared grid and space, one per spec
    double worst_gram_deviation = 0.0;
};

// Single modes, unit-normalized by the grid inner product. Throws
// numeric_error when the continuum normalization deviates by more than 1e-3
// on the grid (waist/grid mismatch).
ComplexField hermite_gauss(const ModeSpec& spec, const TransverseGrid& grid);
ComplexField laguerre_gauss(const ModeSpec& spec, const TransverseGrid& grid);

// All modes with total order <= max_total_order. Fixed ordering: total order
// ascending, then first index descending (so order 1 lists (1,0) before
// (0,1)). Verifies the Gram matrix; worst deviation stored on the result,
// numeric_error beyond 1e-3.
ModeSet build_mode_set(ModeFamily family, int max_total_order, double waist,
                       const TransverseGrid& grid);

// Closed-form evaluation at an arbitrary point, continuum normalization.
// Real-space profile; the momentum profile of the same mode is the same
// shape with waist 2/w and a global phase (-i)^total_order.
cplx eval_mode_real(const ModeSpec& spec, double x, double y);
cplx eval_mode_momentum(const ModeSpec& spec, double qx, double qy);

// Max |Gram - I| over an arbitrary field list (grid quadrature).
double gram_deviation(const std::vector<ComplexField>& fields);

std::string family_name(ModeFamily family);

}  // namespace qdi
