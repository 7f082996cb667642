#include "qdi/biphoton.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace qdi {

namespace {

void validate_spec(const PumpCrystalSpec& spec) {
    if (!(spec.sigma_p > 0.0)) throw config_error("pump sigma_p must be positive");
    if (!(spec.L > 0.0)) throw config_error("crystal length parameter must be positive");
}

// deterministic sign fix: largest-|entry| of each left column made positive,
// right column negated in step so the weighted products are unchanged
void fix_signs(Eigen::MatrixXd& U, Eigen::MatrixXd& V) {
    for (int k = 0; k < U.cols(); ++k) {
        int imax = 0;
        U.col(k).cwiseAbs().maxCoeff(&imax);
        if (U(imax, k) < 0.0) {
            U.col(k) *= -1.0;
            V.col(k) *= -1.0;
        }
    }
}

std::vector<cplx> row_to_vec(const Eigen::MatrixXcd& m, int row) {
    std::vector<cplx> out(static_cast<size_t>(m.cols()));
    for (int i = 0; i < m.cols(); ++i) out[static_cast<size_t>(i)] = m(row, i);
    return out;
}

}  // namespace

double schmidt_number_gaussian(double sigma_p, double L) {
    validate_spec({sigma_p, L});
    const double s = sigma_p * L;
    const double h = 0.5 * (s + 1.0 / s);
    return h * h;
}

BiphotonAmplitude amplitude_gaussian(const PumpCrystalSpec& spec, const TransverseGrid& grid) {
    validate_spec(spec);
    BiphotonAmplitude amp;
    amp.grid = grid;
    amp.spec = spec;
    amp.spec.model = PumpModel::double_gaussian;
    amp.separable = true;
    const int n = grid.n;
    amp.kernel_1d.resize(n, n);
    const double a = 1.0 / (4.0 * spec.sigma_p * spec.sigma_p);
    const double b = spec.L * spec.L / 4.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double u = grid.q(i) + grid.q(j), v = grid.q(i) - grid.q(j);
            amp.kernel_1d(i, j) = std::exp(-a * u * u - b * v * v);
        }
    amp.kernel_1d /= amp.kernel_1d.norm();
    return amp;
}

BiphotonAmplitude amplitude_sinc(const PumpCrystalSpec& spec, const TransverseGrid& grid) {
    validate_spec(spec);
    if (grid.n > 64)
        throw config_error("dense two-photon kernel needs 16 n^4 bytes; use n <= 64 per axis");
    BiphotonAmplitude amp;
    amp.grid = grid;
    amp.spec = spec;
    amp.spec.model = PumpModel::sinc;
    amp.separable = false;
    const int n = grid.n, M = n * n;
    amp.kernel_full.resize(M, M);
    const double ig = 1.0 / (4.0 * spec.sigma_p * spec.sigma_p);
    const double L2 = spec.L * spec.L;
    for (int sy = 0; sy < n; ++sy)
        for (int sx = 0; sx < n; ++sx) {
            const int row = sy * n + sx;
            const double qsx = grid.q(sx), qsy = grid.q(sy);
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix) {
                    const double ux = qsx + grid.q(ix), uy = qsy + grid.q(iy);
                    const double vx = qsx - grid.q(ix), vy = qsy - grid.q(iy);
                    const double arg = L2 * (vx * vx + vy * vy);
                    const double sc = arg == 0.0 ? 1.0 : std::sin(arg) / arg;
                    amp.kernel_full(row, iy * n + ix) =
                        std::exp(-ig * (ux * ux + uy * uy)) * sc;
                }
        }
    amp.kernel_full /= amp.kernel_full.norm();
    return amp;
}

double participation_ratio_kernel(const BiphotonAmplitude& amp) {
    const Eigen::MatrixXd& K = amp.separable ? amp.kernel_1d : amp.kernel_full;
    const double f2 = K.squaredNorm();
    const double g2 = (K * K.transpose()).squaredNorm();
    const double axis = f2 * f2 / g2;
    return amp.separable ? axis * axis : axis;
}

SchmidtDecomposition schmidt_decompose(const BiphotonAmplitude& amp, int rank) {
    if (rank <= 0) throw config_error("decomposition rank must be positive");
    SchmidtDecomposition dec;
    dec.grid = amp.grid;
    dec.separable = amp.separable;
    const int n = amp.grid.n;
    const double dq = amp.grid.dq();

    if (amp.separable) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(amp.kernel_1d,
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::MatrixXd U = svd.matrixU(), V = svd.matrixV();
        fix_signs(U, V);
        Eigen::VectorXd lam1 = svd.singularValues().array().square();
        lam1 /= lam1.sum();

        // all axis-order products, heaviest first; ties resolve by total
        // order then ascending x order, which fixes truncation boundaries
        std::vector<std::tuple<double, int, int>> prods;
        prods.reserve(static_cast<size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) prods.emplace_back(lam1[i] * lam1[j], i, j);
        std::sort(prods.begin(), prods.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            const int ta = std::get<1>(a) + std::get<2>(a), tb = std::get<1>(b) + std::get<2>(b);
            if (ta != tb) return ta < tb;
            return std::get<1>(a) < std::get<1>(b);
        });
        const int keep = std::min<int>(rank, n * n);
        double kept = 0.0;
        dec.weights.resize(keep);
        dec.axis_orders.reserve(static_cast<size_t>(keep));
        for (int k = 0; k < keep; ++k) {
            dec.weights[k] = std::get<0>(prods[static_cast<size_t>(k)]);
            dec.axis_orders.emplace_back(std::get<1>(prods[static_cast<size_t>(k)]),
                                         std::get<2>(prods[static_cast<size_t>(k)]));
            kept += dec.weights[k];
        }
        dec.discarded_tail = std::max(0.0, 1.0 - kept);
        dec.weights /= kept;

        dec.sig_axis_q = U.transpose() / std::sqrt(dq);
        dec.idl_axis_q = V.transpose() / std::sqrt(dq);
        dec.sig_axis_r.resize(n, n);
        dec.idl_axis_r.resize(n, n);
        std::vector<cplx> buf(static_cast<size_t>(n));
        for (int k = 0; k < n; ++k) {
            for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = dec.sig_axis_q(k, i);
            auto r = from_momentum_1d(buf, amp.grid);
            for (int i = 0; i < n; ++i) dec.sig_axis_r(k, i) = r[static_cast<size_t>(i)];
            for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = dec.idl_axis_q(k, i);
            r = from_momentum_1d(buf, amp.grid);
            for (int i = 0; i < n; ++i) dec.idl_axis_r(k, i) = r[static_cast<size_t>(i)];
        }
        return dec;
    }

    const int M = n * n;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(amp.kernel_full,
                                       Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd U = svd.matrixU(), V = svd.matrixV();
    fix_signs(U, V);
    Eigen::VectorXd lam = svd.singularValues().array().square();
    lam /= lam.sum();
    const int keep = std::min<int>(rank, M);
    const double kept = lam.head(keep).sum();
    dec.weights = lam.head(keep) / kept;
    dec.discarded_tail = std::max(0.0, 1.0 - kept);

    dec.sig_full_q = (U.leftCols(keep).transpose() / dq).cast<cplx>();
    dec.idl_full_q = (V.leftCols(keep).transpose() / dq).cast<cplx>();
    dec.sig_full_r.resize(keep, M);
    dec.idl_full_r.resize(keep, M);
    ComplexField f = make_field(amp.grid, Space::momentum);
    for (int k = 0; k < keep; ++k) {
        for (int p = 0; p < M; ++p) f.v[static_cast<size_t>(p)] = dec.sig_full_q(k, p);
        auto r = from_momentum(f);
        for (int p = 0; p < M; ++p) dec.sig_full_r(k, p) = r.v[static_cast<size_t>(p)];
        for (int p = 0; p < M; ++p) f.v[static_cast<size_t>(p)] = dec.idl_full_q(k, p);
        r = from_momentum(f);
        for (int p = 0; p < M; ++p) dec.idl_full_r(k, p) = r.v[static_cast<size_t>(p)];
    }
    return dec;
}

ComplexField SchmidtDecomposition::signal_mode(int k, Space space) const {
    ComplexField f = make_field(grid, space);
    const int n = grid.n;
    if (separable) {
        const auto [i, j] = axis_orders[static_cast<size_t>(k)];
        if (space == Space::momentum) {
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix)
                    f.at(ix, iy) = sig_axis_q(i, ix) * sig_axis_q(j, iy);
        } else {
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix)
                    f.at(ix, iy) = sig_axis_r(i, ix) * sig_axis_r(j, iy);
        }
        return f;
    }
    const Eigen::MatrixXcd& rows = space == Space::momentum ? sig_full_q : sig_full_r;
    for (int p = 0; p < n * n; ++p) f.v[static_cast<size_t>(p)] = rows(k, p);
    return f;
}

ComplexField SchmidtDecomposition::idler_mode(int k, Space space) const {
    ComplexField f = make_field(grid, space);
    const int n = grid.n;
    if (separable) {
        const auto [i, j] = axis_orders[static_cast<size_t>(k)];
        if (space == Space::momentum) {
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix)
                    f.at(ix, iy) = idl_axis_q(i, ix) * idl_axis_q(j, iy);
        } else {
            for (int iy = 0; iy < n; ++iy)
                for (int ix = 0; ix < n; ++ix)
                    f.at(ix, iy) = idl_axis_r(i, ix) * idl_axis_r(j, iy);
        }
        return f;
    }
    const Eigen::MatrixXcd& rows = space == Space::momentum ? idl_full_q : idl_full_r;
    for (int p = 0; p < n * n; ++p) f.v[static_cast<size_t>(p)] = rows(k, p);
    return f;
}

namespace {

Eigen::MatrixXcd stack_impl(const SchmidtDecomposition& dec, bool signal, int count,
                            Space space) {
    if (count <= 0 || count > dec.rank())
        throw config_error("mode count exceeds the decomposition rank");
    const int n = dec.grid.n;
    Eigen::MatrixXcd out(count, n * n);
    if (!dec.separable) {
        const Eigen::MatrixXcd& rows = space == Space::momentum
                                           ? (signal ? dec.sig_full_q : dec.idl_full_q)
                                           : (signal ? dec.sig_full_r : dec.idl_full_r);
        out = rows.topRows(count);
        return out;
    }
    for (int k = 0; k < count; ++k) {
        const auto [i, j] = dec.axis_orders[static_cast<size_t>(k)];
        if (space == Space::momentum) {
            const auto& t = signal ? dec.sig_axis_q : dec.idl_axis_q;
            for (int iy = 0; iy < n; ++iy)
                out.row(k).segment(iy * n, n) = (t(j, iy) * t.row(i)).cast<cplx>();
        } else {
            const auto& t = signal ? dec.sig_axis_r : dec.idl_axis_r;
            for (int iy = 0; iy < n; ++iy)
                out.row(k).segment(iy * n, n) = t(j, iy) * t.row(i);
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXcd SchmidtDecomposition::signal_stack(int count, Space space) const {
    return stack_impl(*this, true, count, space);
}

Eigen::MatrixXcd SchmidtDecomposition::idler_stack(int count, Space space) const {
    return stack_impl(*this, false, count, space);
}

EntanglementMetrics entanglement_metrics(const Eigen::VectorXd& weights) {
    if (weights.size() == 0) throw numeric_error("empty weight vector");
    if (weights.minCoeff() < -1e-12) throw numeric_error("negative mode weight");
    if (std::abs(weights.sum() - 1.0) > 1e-8)
        throw numeric_error("mode weights must sum to 1");
    EntanglementMetrics m;
    m.schmidt_number_kappa = 1.0 / weights.array().square().sum();
    double s = 0.0;
    for (int i = 0; i < weights.size(); ++i)
        if (weights[i] > 0.0) s -= weights[i] * std::log2(weights[i]);
    m.entropy_bits = s;
    return m;
}

double fundamental_waist(const SchmidtDecomposition& dec) {
    const int n = dec.grid.n;
    double num = 0.0, den = 0.0;
    if (dec.separable) {
        for (int i = 0; i < n; ++i) {
            const double w = std::norm(dec.idl_axis_r(0, i));
            const double x = dec.grid.rho(i);
            num += x * x * w;
            den += w;
        }
    } else {
        for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix) {
                const double w = std::norm(dec.idl_full_r(0, iy * n + ix));
                const double x = dec.grid.rho(ix);
                num += x * x * w;
                den += w;
            }
    }
    if (den <= 0.0) throw numeric_error("degenerate fundamental mode");
    return 2.0 * std::sqrt(num / den);
}

}  // namespace qdi
