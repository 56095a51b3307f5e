// Data behind the key-rate, crosstalk and practical-rate plots.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pmubqkd/dual_bound.hpp"
#include "pmubqkd/entropy.hpp"
#include "pmubqkd/parallel.hpp"
#include "pmubqkd/presets.hpp"
#include "pmubqkd/turbulence.hpp"

namespace pmubqkd {

/// lo, lo + step, ..., up to hi inclusive (computed as lo + i*step, no accumulation drift).
inline std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw std::invalid_argument("grid needs step > 0 and hi >= lo");
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> g;
    for (long i = 0; i <= n; ++i) g.push_back(lo + static_cast<double>(i) * step);
    return g;
}

struct KeyRateRow {
    double qber = 0.0;
    DualSolution highDim;  ///< d = N + 1 under the chosen preset
    DualSolution bb84;
    double analytic = 0.0;   ///< unclamped closed form at d = N + 1
    double bb84Exact = 0.0;  ///< 1 - 2h(Q)
};

inline std::vector<KeyRateRow> key_rate_curve(ConstraintPreset preset, const PMUBPair& pmub,
                                              const std::vector<double>& qbers, const DualOptions& opt = {},
                                              std::optional<double> theta_override = std::nullopt) {
    std::vector<KeyRateRow> rows;
    for (double q : qbers) {
        KeyRateRow r;
        r.qber = q;
        r.highDim = numerical_key_rate(preset, q, pmub, opt, theta_override);
        r.bb84 = numerical_key_rate(ConstraintPreset::BB84, q, pmub, opt);
        r.analytic = analytic_key_rate(pmub.dimension(), q, pmub.qMU).unclamped;
        r.bb84Exact = bb84_key_rate(q);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct RetentionRow {
    double ratio = 0.0;
    ModeIndex mode;
    double retained = 0.0;  ///< p(dl = 0)
    double total = 0.0;     ///< sum over |dl| <= truncation
    double tail = 0.0;
};

/// One crosstalk profile per (ratio, mode); r0 is set so that r_{p,l}/r0 = ratio for that mode.
inline std::vector<RetentionRow> retention_table(const std::vector<ModeIndex>& modes, double b,
                                                 const std::vector<double>& ratios, int max_dl,
                                                 unsigned threads = 1) {
    const std::size_t nm = modes.size();
    return parallel_map<RetentionRow>(ratios.size() * nm, threads, [&](std::size_t k) {
        const double ratio = ratios[k / nm];
        const auto& mode = modes[k % nm];
        const auto prof = crosstalk_profile(mode, TurbulenceParams::from_ratio(ratio, mode, b), max_dl);
        return RetentionRow{ratio, mode, prof.retained(), prof.total(), prof.tail};
    });
}

}  // namespace pmubqkd
