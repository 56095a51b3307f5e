// OAM crosstalk of Laguerre-Gaussian modes under Kolmogorov turbulence, with the
// accumulated turbulence modeled as a pure phase screen at the receiver plane.
//
//   p(l0 + dl) = int_0^inf rho(r) r Theta(r, dl) dr
//   Theta(r, dl) = (1/pi) int_0^pi C(r, t) cos(dl t) dt
//   C(r, t) = exp[-6.88 * 2^(2/3) (r/r0)^(5/3) |sin(t/2)|^(5/3)]
//
// rho is the LG radial density with waist w = b*sqrt(2), which gives
// <r^2> = (2p + |l| + 1) b^2.
#pragma once

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <stdexcept>
#include <valarray>
#include <vector>

#include "pmubqkd/mode_algebra.hpp"
#include "pmubqkd/parallel.hpp"
#include "pmubqkd/quadrature.hpp"

namespace pmubqkd {

inline constexpr double kKolmogorovCoefficient = 6.88;

struct TurbulenceParams {
    double fried_r0 = std::numeric_limits<double>::infinity();  ///< meters; +inf means no turbulence
    double beam_b = 0.01;                                        ///< meters

    void validate() const {
        if (!(fried_r0 > 0.0)) throw std::invalid_argument("Fried parameter r0 must be positive");
        if (!(beam_b > 0.0) || !std::isfinite(beam_b)) throw std::invalid_argument("beam radius b must be positive");
    }

    /// Plane-wave Fried parameter r0 = (0.423 k^2 Cn2 L)^(-3/5), k = 2 pi / lambda.
    static TurbulenceParams from_atmosphere(double cn2, double wavelength, double path_length, double b) {
        if (!(cn2 >= 0.0) || !(wavelength > 0.0) || !(path_length >= 0.0)) {
            throw std::invalid_argument("Cn2, wavelength and path length must be nonnegative (wavelength positive)");
        }
        const double k = 2.0 * M_PI / wavelength;
        const double s = 0.423 * k * k * cn2 * path_length;
        TurbulenceParams p{s > 0.0 ? std::pow(s, -0.6) : std::numeric_limits<double>::infinity(), b};
        p.validate();
        return p;
    }

    /// r0 chosen so that r_{p,l} / r0 equals `ratio` for the given mode.
    static TurbulenceParams from_ratio(double ratio, const ModeIndex& mode, double b);
};

/// r_{p,l} = b sqrt(2p + |l| + 1)
inline double characteristic_radius(const ModeIndex& mode, double b) {
    return b * std::sqrt(2.0 * mode.radial() + std::abs(mode.azimuthal()) + 1.0);
}

inline TurbulenceParams TurbulenceParams::from_ratio(double ratio, const ModeIndex& mode, double b) {
    if (!(ratio >= 0.0)) throw std::invalid_argument("ratio r_pl/r0 must be nonnegative");
    TurbulenceParams p{ratio > 0.0 ? characteristic_radius(mode, b) / ratio : std::numeric_limits<double>::infinity(),
                       b};
    p.validate();
    return p;
}

inline double rotational_coherence(double r, double dtheta, double r0) {
    if (r == 0.0 || std::isinf(r0)) return 1.0;
    const double s = std::abs(std::sin(0.5 * dtheta));
    return std::exp(-kKolmogorovCoefficient * std::cbrt(4.0) * std::pow(r / r0, 5.0 / 3.0) * std::pow(s, 5.0 / 3.0));
}

inline SimpsonOptions angular_quadrature_options() { return SimpsonOptions{1e-9, 50, 4}; }

/// Theta(r, dl) for one shift.
inline double circular_harmonic(double r, int dl, double r0) {
    if (r == 0.0 || std::isinf(r0)) return dl == 0 ? 1.0 : 0.0;
    auto f = [&](double t) { return rotational_coherence(r, t, r0) * std::cos(dl * t) / M_PI; };
    // one panel per half-period of cos(dl t), so refinement never mistakes an oscillation for a flat stretch
    const int panels = std::max(1, 2 * std::abs(dl));
    auto opt = angular_quadrature_options();
    opt.abs_tol /= panels;
    double sum = 0.0;
    for (int k = 0; k < panels; ++k) sum += integrate_or_throw(f, M_PI * k / panels, M_PI * (k + 1) / panels, opt);
    return sum;
}

inline KronrodOptions angular_kronrod_options() { return KronrodOptions{1e-9, 30}; }

/// Theta(r, dl) for dl = 0..max_dl in one vector-valued Gauss-Kronrod pass; an
/// independent route to the per-shift Simpson evaluation above.
inline std::valarray<double> circular_harmonics(double r, int max_dl, double r0) {
    const auto n = static_cast<std::size_t>(max_dl + 1);
    std::valarray<double> out(0.0, n);
    if (r == 0.0 || std::isinf(r0)) {
        out[0] = 1.0;
        return out;
    }
    auto f = [&](double t) {
        const double c = rotational_coherence(r, t, r0) / M_PI;
        const double c1 = std::cos(t);
        std::valarray<double> v(n);
        // cos(k t) by the Chebyshev recurrence
        double prev = 1.0;
        double cur = c1;
        v[0] = c;
        if (n > 1) v[1] = c * c1;
        for (std::size_t k = 2; k < n; ++k) {
            const double next = 2.0 * c1 * cur - prev;
            prev = cur;
            cur = next;
            v[k] = c * cur;
        }
        return v;
    };
    return kronrod_or_throw(f, 0.0, M_PI, angular_kronrod_options());
}

namespace detail {

inline double log_factorial(int n) { return std::lgamma(n + 1.0); }

/// u^|l| [L_p^|l|(u)]^2 e^{-u} * p!/(p+|l|)!, the radial weight in u = r^2/b^2 (integrates to 1).
inline double radial_weight(const ModeIndex& mode, double u) {
    const int p = mode.radial();
    const int al = std::abs(mode.azimuthal());
    const double lag = std::assoc_laguerre(static_cast<unsigned>(p), static_cast<unsigned>(al), u);
    const double log_pref = log_factorial(p) - log_factorial(p + al);
    if (u == 0.0) return al == 0 ? std::exp(log_pref) * lag * lag : 0.0;
    return std::exp(log_pref + al * std::log(u) - u) * lag * lag;
}

/// Upper limit in u where the radial weight has fallen below `rel` of its peak.
inline double radial_cutoff(const ModeIndex& mode, double rel = 1e-14) {
    double peak = 0.0;
    double u_peak = 0.0;
    const double scan_end = 4.0 * (2.0 * mode.radial() + std::abs(mode.azimuthal()) + 1.0) + 10.0;
    for (double u = 0.0; u <= scan_end; u += 0.01) {
        const double w = radial_weight(mode, u);
        if (w > peak) {
            peak = w;
            u_peak = u;
        }
    }
    double u = std::max(u_peak, scan_end);
    while (radial_weight(mode, u) >= rel * peak || radial_weight(mode, u + 1.0) >= rel * peak) u += 1.0;
    return u;
}

}  // namespace detail

/// LG radial probability density rho(r) with int rho r dr = 1, per m^2.
inline double radial_density(const ModeIndex& mode, double b, double r) {
    if (!(b > 0.0)) throw std::invalid_argument("beam radius b must be positive");
    return 2.0 / (b * b) * detail::radial_weight(mode, r * r / (b * b));
}

inline SimpsonOptions radial_quadrature_options() { return SimpsonOptions{1e-8, 40, 5}; }
inline KronrodOptions radial_kronrod_options() { return KronrodOptions{1e-8, 30}; }

/// p(l0 + dl | l0) by nested adaptive quadrature.
inline double detection_probability(const ModeIndex& mode, int dl, const TurbulenceParams& params) {
    params.validate();
    if (std::isinf(params.fried_r0)) return dl == 0 ? 1.0 : 0.0;  // still air
    const double umax = detail::radial_cutoff(mode);
    auto f = [&](double u) {
        const double w = detail::radial_weight(mode, u);
        if (w == 0.0) return 0.0;
        return w * circular_harmonic(params.beam_b * std::sqrt(u), std::abs(dl), params.fried_r0);
    };
    return std::clamp(integrate_or_throw(f, 0.0, umax, radial_quadrature_options()), 0.0, 1.0);
}

struct CrosstalkProfile {
    ModeIndex mode;
    TurbulenceParams params;
    int truncation = 0;
    std::map<int, double> probs;  ///< dl -> p(l0 + dl)
    double tail = 0.0;            ///< 1 - sum(probs), reported, never folded back in

    double at(int dl) const {
        const auto it = probs.find(dl);
        return it == probs.end() ? 0.0 : it->second;
    }
    double retained() const { return at(0); }
    double total() const {
        double s = 0.0;
        for (const auto& [dl, p] : probs) s += p;
        return s;
    }
};

/// Probabilities for |dl| <= max_dl. Theta is even in dl, so one vector pass covers both signs.
inline CrosstalkProfile crosstalk_profile(const ModeIndex& mode, const TurbulenceParams& params, int max_dl) {
    params.validate();
    if (max_dl < 0) throw std::invalid_argument("max_dl must be nonnegative");
    if (std::isinf(params.fried_r0)) {
        CrosstalkProfile still{mode, params, max_dl, {}, 0.0};
        for (int k = -max_dl; k <= max_dl; ++k) still.probs[k] = k == 0 ? 1.0 : 0.0;
        return still;
    }
    const double umax = detail::radial_cutoff(mode);
    auto f = [&](double u) {
        const double w = detail::radial_weight(mode, u);
        if (w == 0.0) return std::valarray<double>(0.0, static_cast<std::size_t>(max_dl + 1));
        std::valarray<double> th = circular_harmonics(params.beam_b * std::sqrt(u), max_dl, params.fried_r0);
        return std::valarray<double>(w * th);
    };
    const std::valarray<double> p = kronrod_or_throw(f, 0.0, umax, radial_kronrod_options());

    CrosstalkProfile prof{mode, params, max_dl, {}, 0.0};
    for (int k = -max_dl; k <= max_dl; ++k) {
        prof.probs[k] = std::clamp(p[static_cast<std::size_t>(std::abs(k))], 0.0, 1.0);
    }
    prof.tail = 1.0 - prof.total();
    return prof;
}

/// The four modes injected into the channel: LG^0_3, LG^0_-3, LG^1_1, LG^1_-1.
inline std::vector<ModeIndex> protocol_channel_modes() {
    return {ModeIndex::from_pl(0, 3), ModeIndex::from_pl(0, -3), ModeIndex::from_pl(1, 1), ModeIndex::from_pl(1, -1)};
}

struct QberEstimate {
    double Q = 0.0;
    double spread = 0.0;              ///< max |Q_i - Q| across modes
    std::vector<double> per_mode;     ///< 1 - p_i(dl = 0)
};

/// Mean error 1 - p(dl=0) over the modes; the HG basis is assigned the same error.
inline QberEstimate channel_qber(const std::vector<ModeIndex>& modes, const TurbulenceParams& params,
                                 unsigned threads = 1) {
    if (modes.empty()) throw std::invalid_argument("channel_qber needs at least one mode");
    QberEstimate est;
    est.per_mode = parallel_map<double>(modes.size(), threads, [&](std::size_t i) {
        return 1.0 - detection_probability(modes[i], 0, params);
    });
    for (double q : est.per_mode) est.Q += q;
    est.Q /= static_cast<double>(modes.size());
    for (double q : est.per_mode) est.spread = std::max(est.spread, std::abs(q - est.Q));
    return est;
}

/// Same estimate from already computed profiles (one per mode).
inline QberEstimate qber_from_profiles(const std::vector<CrosstalkProfile>& profiles) {
    if (profiles.empty()) throw std::invalid_argument("qber_from_profiles needs at least one profile");
    QberEstimate est;
    for (const auto& p : profiles) est.per_mode.push_back(1.0 - p.retained());
    for (double q : est.per_mode) est.Q += q;
    est.Q /= static_cast<double>(profiles.size());
    for (double q : est.per_mode) est.spread = std::max(est.spread, std::abs(q - est.Q));
    return est;
}

/// p(dl = 0) at each abscissa r_{p,l}/r0.
inline std::vector<double> retention_curve(const ModeIndex& mode, double b, const std::vector<double>& ratios,
                                           unsigned threads = 1) {
    return parallel_map<double>(ratios.size(), threads, [&](std::size_t i) {
        return detection_probability(mode, 0, TurbulenceParams::from_ratio(ratios[i], mode, b));
    });
}

/// Ratio r_{p,l}/r0 at which the mean retention over `modes` equals `target`, by bisection.
/// All protocol modes share 2p+|l|+1, so one ratio fixes a common r0.
inline double operating_ratio(const std::vector<ModeIndex>& modes, double b, double target, double lo = 0.0,
                              double hi = 2.0, double tol = 1e-6) {
    auto mean_retention = [&](double ratio) {
        double s = 0.0;
        for (const auto& m : modes) s += detection_probability(m, 0, TurbulenceParams::from_ratio(ratio, m, b));
        return s / static_cast<double>(modes.size());
    };
    if (mean_retention(hi) > target) throw std::invalid_argument("target retention not bracketed");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (mean_retention(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace pmubqkd
