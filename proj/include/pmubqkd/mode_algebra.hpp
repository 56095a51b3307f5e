// Same-order Laguerre-Gaussian and 45-degree rotated Hermite-Gaussian modes
// expressed in the common order-N Hermite-Gaussian basis {|h_{N-k,k}>}.
//
// The two families form a pair of partially mutually unbiased bases (PMUB).
// All quantities here are pure functions of their inputs.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pmubqkd {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Largest order for which b(n,m,k) is evaluated with exact 128-bit integers.
inline constexpr int kMaxExactOrder = 40;
/// Largest order accepted by build_pmub.
inline constexpr int kMaxPmubOrder = 25;

/// (n,m) label of an order-N Gaussian mode. The (p,l) view is derived:
/// l = n - m is the OAM quantum number and p = min(n,m) the radial index.
class ModeIndex {
public:
    constexpr ModeIndex() = default;

    static ModeIndex from_nm(int n, int m) {
        if (n < 0 || m < 0) {
            throw std::invalid_argument("mode indices n, m must be nonnegative");
        }
        return ModeIndex(n, m);
    }

    /// Inverse of (p,l): n = p + max(l,0), m = p + max(-l,0).
    static ModeIndex from_pl(int p, int l) {
        if (p < 0) {
            throw std::invalid_argument("radial index p must be nonnegative");
        }
        return ModeIndex(p + std::max(l, 0), p + std::max(-l, 0));
    }

    constexpr int n() const noexcept { return n_; }
    constexpr int m() const noexcept { return m_; }
    constexpr int order() const noexcept { return n_ + m_; }
    constexpr int azimuthal() const noexcept { return n_ - m_; }
    constexpr int radial() const noexcept { return std::min(n_, m_); }

    friend constexpr bool operator==(const ModeIndex&, const ModeIndex&) = default;

private:
    constexpr ModeIndex(int n, int m) : n_(n), m_(m) {}
    int n_ = 0;
    int m_ = 0;
};

/// Probability amplitudes of a state over {|h_{N-k,k}>}, k = 0..N.
struct HGExpansion {
    int order = 0;
    std::vector<cplx> amplitudes;

    double norm_squared() const {
        double s = 0.0;
        for (const auto& a : amplitudes) s += std::norm(a);
        return s;
    }

    /// <this|other>
    cplx inner(const HGExpansion& other) const {
        if (other.order != order) {
            throw std::invalid_argument("inner product between different mode orders");
        }
        cplx s{0.0, 0.0};
        for (std::size_t k = 0; k < amplitudes.size(); ++k) {
            s += std::conj(amplitudes[k]) * other.amplitudes[k];
        }
        return s;
    }

    CVector as_vector() const {
        CVector v(static_cast<Eigen::Index>(amplitudes.size()));
        for (std::size_t k = 0; k < amplitudes.size(); ++k) v(static_cast<Eigen::Index>(k)) = amplitudes[k];
        return v;
    }
};

namespace detail {

using u128 = unsigned __int128;

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        // exact: r * (n - k + i) is divisible by i at every step
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

/// Coefficient of t^k in (1 - t)^n (1 + t)^m.
inline std::int64_t poly_coefficient(int n, int m, int k) {
    std::int64_t s = 0;
    for (int j = std::max(0, k - m); j <= std::min(n, k); ++j) {
        const auto term = static_cast<std::int64_t>(binomial(n, j) * binomial(m, k - j));
        s += (j % 2 == 0) ? term : -term;
    }
    return s;
}

inline u128 gcd128(u128 a, u128 b) {
    while (b != 0) {
        const u128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

}  // namespace detail

/// b(n,m,k) = sqrt((N-k)! k! / (2^N n! m!)) * [t^k] (1-t)^n (1+t)^m.
///
/// The factorial ratio equals C(N,n) / C(N,k), so the squared coefficient is the
/// exact rational c_k^2 C(N,n) / (C(N,k) 2^N); it is reduced in 128-bit integers
/// and converted to floating point once.
inline double b_coeff(int n, int m, int k) {
    if (n < 0 || m < 0) throw std::invalid_argument("b_coeff: n, m must be nonnegative");
    const int order = n + m;
    if (k < 0 || k > order) throw std::invalid_argument("b_coeff: k must lie in [0, n+m]");
    if (order > kMaxExactOrder) {
        throw std::invalid_argument("b_coeff: order exceeds exact-arithmetic ceiling of " +
                                    std::to_string(kMaxExactOrder));
    }
    const std::int64_t ck = detail::poly_coefficient(n, m, k);
    if (ck == 0) return 0.0;

    const auto mag = static_cast<detail::u128>(ck < 0 ? -ck : ck);
    detail::u128 num = mag * mag * detail::binomial(order, n);
    detail::u128 den = static_cast<detail::u128>(detail::binomial(order, k)) << order;
    const detail::u128 g = detail::gcd128(num, den);
    num /= g;
    den /= g;
    const long double value =
        std::sqrt(static_cast<long double>(num) / static_cast<long double>(den));
    return static_cast<double>(ck < 0 ? -value : value);
}

/// |l_{nm}> = sum_k i^k b(n,m,k) |h_{N-k,k}>
inline HGExpansion lg_in_hg(const ModeIndex& mode) {
    static constexpr cplx kPhase[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    HGExpansion e{mode.order(), {}};
    e.amplitudes.reserve(static_cast<std::size_t>(mode.order() + 1));
    for (int k = 0; k <= mode.order(); ++k) {
        e.amplitudes.push_back(kPhase[k % 4] * b_coeff(mode.n(), mode.m(), k));
    }
    return e;
}

/// |h_{nm}> (principal axes rotated by 45 degrees) = sum_k b(n,m,k) |h_{N-k,k}>
inline HGExpansion hg45_in_hg(const ModeIndex& mode) {
    HGExpansion e{mode.order(), {}};
    e.amplitudes.reserve(static_cast<std::size_t>(mode.order() + 1));
    for (int k = 0; k <= mode.order(); ++k) {
        e.amplitudes.emplace_back(b_coeff(mode.n(), mode.m(), k), 0.0);
    }
    return e;
}

/// The LG basis {l_{0,N}, ..., l_{N,0}} and rotated-HG basis {h_{0,N}, ..., h_{N,0}}
/// with overlap[i][j] = <h_j|l_i>, i.e. L = U H.
struct PMUBPair {
    int order = 0;
    std::vector<HGExpansion> basisL;
    std::vector<HGExpansion> basisH;
    CMatrix overlap;
    double c = 1.0;      ///< max_ij |U_ij|^2
    double qMU = 0.0;    ///< log2(1/c), bits
    double theta = 0.0;  ///< max_i arccos |U_ii|, radians

    int dimension() const noexcept { return order + 1; }

    const std::vector<HGExpansion>& basis(int which) const { return which == 0 ? basisL : basisH; }

    /// |<basis_to_j | basis_from_i>|^2 for a state prepared in `from` and measured in the other basis.
    double transition_probability(int from, int i, int j) const {
        return from == 0 ? std::norm(overlap(i, j)) : std::norm(overlap(j, i));
    }
};

inline PMUBPair build_pmub(int order) {
    if (order < 1 || order % 2 == 0) {
        throw std::invalid_argument("order must be odd and positive");
    }
    if (order > kMaxPmubOrder) {
        throw std::invalid_argument("order exceeds supported ceiling of " + std::to_string(kMaxPmubOrder));
    }
    PMUBPair pair;
    pair.order = order;
    const int d = order + 1;
    for (int i = 0; i < d; ++i) {
        const auto mode = ModeIndex::from_nm(i, order - i);
        pair.basisL.push_back(lg_in_hg(mode));
        pair.basisH.push_back(hg45_in_hg(mode));
    }
    pair.overlap.resize(d, d);
    double cmax = 0.0;
    double theta = 0.0;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const cplx u = pair.basisH[static_cast<std::size_t>(j)].inner(pair.basisL[static_cast<std::size_t>(i)]);
            pair.overlap(i, j) = u;
            cmax = std::max(cmax, std::norm(u));
        }
        theta = std::max(theta, std::acos(std::min(1.0, std::abs(pair.overlap(i, i)))));
    }
    pair.c = cmax;
    pair.qMU = std::log2(1.0 / cmax);
    pair.theta = theta;
    return pair;
}

/// Shannon entropy (bits) of the outcome distribution of `state` measured in `basis`.
inline double measurement_entropy(const CVector& state, const std::vector<HGExpansion>& basis) {
    double h = 0.0;
    for (const auto& b : basis) {
        const double p = std::norm(b.as_vector().dot(state));
        if (p > 0.0) h -= p * std::log2(p);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Transverse intensity rendering

struct RenderGrid {
    int size = 65;        ///< pixels per side
    double extent = 0.0;  ///< half-width of the square window, meters
};

struct IntensityImage {
    int size = 0;
    double extent = 0.0;
    std::vector<double> pixels;  ///< row-major, row 0 at y = +extent

    double at(int row, int col) const { return pixels[static_cast<std::size_t>(row * size + col)]; }
    double x(int col) const { return coordinate(col); }
    double y(int row) const { return -coordinate(row); }

private:
    double coordinate(int i) const {
        return (static_cast<double>(i) - 0.5 * (size - 1)) * (2.0 * extent / (size - 1));
    }
};

namespace detail {

/// Normalized Hermite functions psi_0..psi_n at x (orthonormal on the real line).
inline std::vector<double> hermite_functions(int n, double x) {
    std::vector<double> psi(static_cast<std::size_t>(n + 1));
    psi[0] = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
    if (n >= 1) psi[1] = std::sqrt(2.0) * x * psi[0];
    for (int k = 1; k < n; ++k) {
        psi[static_cast<std::size_t>(k + 1)] =
            std::sqrt(2.0 / (k + 1)) * x * psi[static_cast<std::size_t>(k)] -
            std::sqrt(static_cast<double>(k) / (k + 1)) * psi[static_cast<std::size_t>(k - 1)];
    }
    return psi;
}

}  // namespace detail

/// Complex transverse field of `state` at the waist plane, HG_{a,b}(x,y) ~ psi_a(sqrt2 x/w) psi_b(sqrt2 y/w).
inline cplx transverse_field(const HGExpansion& state, double waist, double x, double y) {
    const int order = state.order;
    const auto px = detail::hermite_functions(order, std::sqrt(2.0) * x / waist);
    const auto py = detail::hermite_functions(order, std::sqrt(2.0) * y / waist);
    cplx f{0.0, 0.0};
    for (int k = 0; k <= order; ++k) {
        f += state.amplitudes[static_cast<std::size_t>(k)] * px[static_cast<std::size_t>(order - k)] *
             py[static_cast<std::size_t>(k)];
    }
    return f;
}

/// |field|^2 on a square grid, normalized to a maximum of 1.
inline IntensityImage render_intensity(const HGExpansion& state, double waist, const RenderGrid& grid) {
    if (!(waist > 0.0)) throw std::invalid_argument("waist must be positive");
    if (grid.size < 16) throw std::invalid_argument("grid size must be at least 16");
    const double extent = grid.extent > 0.0 ? grid.extent : 2.5 * waist * std::sqrt(state.order + 1.0);

    IntensityImage img;
    img.size = grid.size;
    img.extent = extent;
    img.pixels.resize(static_cast<std::size_t>(grid.size) * static_cast<std::size_t>(grid.size));
    double peak = 0.0;
    for (int r = 0; r < grid.size; ++r) {
        for (int c = 0; c < grid.size; ++c) {
            const double v = std::norm(transverse_field(state, waist, img.x(c), img.y(r)));
            img.pixels[static_cast<std::size_t>(r * grid.size + c)] = v;
            peak = std::max(peak, v);
        }
    }
    if (peak > 0.0) {
        for (auto& v : img.pixels) v /= peak;
    }
    return img;
}

}  // namespace pmubqkd
