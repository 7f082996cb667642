#include "qdi/modes.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

namespace qdi {

namespace {

constexpr double pi = std::numbers::pi;

// Normalized 1-D Hermite function h_n(xi) = H_n(xi) e^{-xi^2/2} /
// sqrt(2^n n! sqrt(pi)); three-term recurrence keeps high orders stable.
double hermite_fn(int n, double xi) {
    double h0 = std::pow(pi, -0.25) * std::exp(-0.5 * xi * xi);
    if (n == 0) return h0;
    double h1 = std::sqrt(2.0) * xi * h0;
    for (int k = 2; k <= n; ++k) {
        const double h2 = std::sqrt(2.0 / k) * xi * h1 - std::sqrt((k - 1.0) / k) * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// Generalized Laguerre L_p^a via the usual upward recurrence.
double laguerre_fn(int p, int a, double x) {
    double l0 = 1.0;
    if (p == 0) return l0;
    double l1 = 1.0 + a - x;
    for (int k = 2; k <= p; ++k) {
        const double l2 = ((2.0 * k - 1.0 + a - x) * l1 - (k - 1.0 + a) * l0) / k;
        l0 = l1;
        l1 = l2;
    }
    return l1;
}

cplx eval_real_impl(const ModeSpec& spec, double x, double y) {
    const double w = spec.waist;
    if (spec.family == ModeFamily::hermite_gauss) {
        const double s = std::sqrt(2.0) / w;
        return cplx(s * hermite_fn(spec.index_a, s * x) * hermite_fn(spec.index_b, s * y), 0.0);
    }
    const int p = spec.index_a, l = spec.index_b, a = std::abs(l);
    const double r2 = x * x + y * y;
    const double xi = 2.0 * r2 / (w * w);
    // sqrt(p! / (p+a)!) as a running product, no factorial overflow.
    double ratio = 1.0;
    for (int j = 1; j <= a; ++j) ratio /= (p + j);
    const double amp = std::sqrt(2.0 * ratio / pi) / w * std::pow(std::sqrt(xi), a) *
                       laguerre_fn(p, a, xi) * std::exp(-r2 / (w * w));
    if (l == 0) return cplx(amp, 0.0);
    return amp * std::polar(1.0, l * std::atan2(y, x));
}

ComplexField sample_normalized(const ModeSpec& spec, const TransverseGrid& grid) {
    ComplexField f = make_field(grid, Space::real_space);
    for (int iy = 0; iy < grid.n; ++iy)
        for (int ix = 0; ix < grid.n; ++ix)
            f.at(ix, iy) = eval_real_impl(spec, grid.rho(ix), grid.rho(iy));
    const double nm = norm(f);
    // The continuum form integrates to 1; a grid deviation means the waist is
    // clipped by the extent or under-resolved by the step.
    if (std::abs(nm * nm - 1.0) > 1e-3)
        throw numeric_error("mode " + family_name(spec.family) + "(" +
                            std::to_string(spec.index_a) + "," + std::to_string(spec.index_b) +
                            "): waist " + std::to_string(spec.waist) +
                            " not resolvable on this grid (norm^2 deviation " +
                            std::to_string(std::abs(nm * nm - 1.0)) + ")");
    for (auto& z : f.v) z /= nm;
    return f;
}

}  // namespace

ComplexField hermite_gauss(const ModeSpec& spec, const TransverseGrid& grid) {
    if (spec.family != ModeFamily::hermite_gauss)
        throw numeric_error("hermite_gauss: wrong family");
    if (spec.index_a < 0 || spec.index_b < 0)
        throw numeric_error("hermite_gauss: indices must be non-negative");
    return sample_normalized(spec, grid);
}

ComplexField laguerre_gauss(const ModeSpec& spec, const TransverseGrid& grid) {
    if (spec.family != ModeFamily::laguerre_gauss)
        throw numeric_error("laguerre_gauss: wrong family");
    if (spec.index_a < 0) throw numeric_error("laguerre_gauss: radial index must be >= 0");
    return sample_normalized(spec, grid);
}

cplx eval_mode_real(const ModeSpec& spec, double x, double y) {
    return eval_real_impl(spec, x, y);
}

cplx eval_mode_momentum(const ModeSpec& spec, double qx, double qy) {
    // Fourier eigenfunction property: same family, conjugate waist 2/w,
    // global phase (-i)^total under the e^{-i q.rho} forward kernel.
    ModeSpec conj_spec = spec;
    conj_spec.waist = 2.0 / spec.waist;
    static const cplx phase[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    return phase[spec.total_order() % 4] * eval_real_impl(conj_spec, qx, qy);
}

double gram_deviation(const std::vector<ComplexField>& fields) {
    const int m = static_cast<int>(fields.size());
    if (m == 0) return 0.0;
    const size_t px = fields[0].v.size();
    Eigen::MatrixXcd a(m, px);
    for (int i = 0; i < m; ++i)
        a.row(i) = Eigen::Map<const Eigen::VectorXcd>(fields[i].v.data(), px);
    Eigen::MatrixXcd gram = (a.conjugate() * a.transpose()) * fields[0].cell();
    double worst = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            worst = std::max(worst, std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)));
    return worst;
}

ModeSet build_mode_set(ModeFamily family, int max_total_order, double waist,
                       const TransverseGrid& grid) {
    if (max_total_order < 0) throw numeric_error("build_mode_set: negative order");
    ModeSet set;
    for (int s = 0; s <= max_total_order; ++s) {
        if (family == ModeFamily::hermite_gauss) {
            for (int nx = s; nx >= 0; --nx)
                set.specs.push_back({family, nx, s - nx, waist});
        } else {
            for (int p = s / 2; p >= 0; --p) {
                const int a = s - 2 * p;
                if (a == 0) {
                    set.specs.push_back({family, p, 0, waist});
                } else {
                    set.specs.push_back({family, p, a, waist});
                    set.specs.push_back({family, p, -a, waist});
                }
            }
        }
    }
    set.fields.reserve(set.specs.size());
    for (const auto& spec : set.specs)
        set.fields.push_back(family == ModeFamily::hermite_gauss ? hermite_gauss(spec, grid)
                                                                 : laguerre_gauss(spec, grid));
    set.worst_gram_deviation = gram_deviation(set.fields);
    if (set.worst_gram_deviation > 1e-3)
        throw numeric_error("build_mode_set: basis not orthonormal on this grid (deviation " +
                            std::to_string(set.worst_gram_deviation) + ")");
    return set;
}

std::string family_name(ModeFamily family) {
    return family == ModeFamily::hermite_gauss ? "hermite_gauss" : "laguerre_gauss";
}

}  // namespace qdi
