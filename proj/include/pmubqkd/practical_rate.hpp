// Time series of the analytic key rate when the channel error fluctuates between
// the per-mode turbulence values.
#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pmubqkd/entropy.hpp"
#include "pmubqkd/mode_algebra.hpp"
#include "pmubqkd/rng.hpp"
#include "pmubqkd/turbulence.hpp"

namespace pmubqkd {

struct RateSample {
    long t = 0;
    double qber = 0.0;
    double keyRate = 0.0;  ///< unclamped, bits per sifted signal
    double lower = 0.0;    ///< rate at Q + spread
    double upper = 0.0;    ///< rate at Q - spread

    double spread() const { return 0.5 * (upper - lower); }
};

/// Sample t draws Q uniformly from the per-mode error rates; the band is the rate
/// over [Q - spread, Q + spread] of the channel estimate.
inline std::vector<RateSample> practical_rate_series(const QberEstimate& est, long samples, const PMUBPair& pmub,
                                                     std::uint64_t seed = 0) {
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    if (est.per_mode.empty()) throw std::invalid_argument("channel estimate carries no per-mode error rates");
    const int d = pmub.dimension();
    auto rate = [&](double q) { return analytic_key_rate(d, std::clamp(q, 0.0, 1.0), pmub.qMU).unclamped; };
    const double lower = rate(est.Q + est.spread);
    const double upper = rate(std::max(0.0, est.Q - est.spread));
    std::vector<RateSample> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (long t = 0; t < samples; ++t) {
        auto rng = SplitMix64::for_stream(seed, static_cast<std::uint64_t>(t));
        const double q = est.per_mode[static_cast<std::size_t>(rng.below(est.per_mode.size()))];
        out.push_back({t, q, rate(q), lower, upper});
    }
    return out;
}

inline std::vector<RateSample> practical_rate_series(const TurbulenceParams& params, long samples, const PMUBPair& pmub,
                                                     std::uint64_t seed = 0, unsigned threads = 1) {
    if (samples < 1) throw std::invalid_argument("samples must be at least 1");
    return practical_rate_series(channel_qber(protocol_channel_modes(), params, threads), samples, pmub, seed);
}

}  // namespace pmubqkd
