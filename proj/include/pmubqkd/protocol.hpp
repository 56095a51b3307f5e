// Symbol-level Monte-Carlo simulation of the prepare-and-measure protocol:
// Alice picks a symbol and a basis, the channel perturbs the symbol, Bob measures
// in a random basis with Born probabilities from the overlap matrix, and the two
// parties sift on matching bases.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pmubqkd/entropy.hpp"
#include "pmubqkd/mode_algebra.hpp"
#include "pmubqkd/parallel.hpp"
#include "pmubqkd/rng.hpp"
#include "pmubqkd/turbulence.hpp"

namespace pmubqkd {

enum class Basis : std::uint8_t { L = 0, H = 1 };

inline constexpr int kInconclusive = -1;

/// Correct symbol with probability 1-Q, each wrong symbol with Q/(d-1).
struct SymmetricChannel {
    double qber = 0.0;
};

enum class LeakagePolicy {
    Inconclusive,  ///< OAM outside the alphabet lands on an unmonitored port
    RandomSymbol,  ///< ... or is assigned a uniformly random symbol
};

/// OAM shift statistics per symbol; symbol i carries l = 2i - N in either basis.
struct TurbulenceChannel {
    std::vector<std::map<int, double>> shifts;  ///< per symbol: dl -> probability
    LeakagePolicy leakage = LeakagePolicy::Inconclusive;

    /// Matches each symbol's mode (or its mirror image -l, which has the same
    /// statistics) among the profiles; a single profile is applied to all symbols.
    static TurbulenceChannel from_profiles(int order, const std::vector<CrosstalkProfile>& profiles,
                                           LeakagePolicy leakage = LeakagePolicy::Inconclusive) {
        if (profiles.empty()) throw std::invalid_argument("turbulence channel needs at least one profile");
        TurbulenceChannel ch;
        ch.leakage = leakage;
        for (int i = 0; i <= order; ++i) {
            const auto mode = ModeIndex::from_nm(i, order - i);
            const CrosstalkProfile* match = nullptr;
            for (const auto& p : profiles) {
                if (p.mode == mode) {
                    match = &p;
                    break;
                }
            }
            for (const auto& p : profiles) {
                if (match) break;
                if (p.mode.radial() == mode.radial() && std::abs(p.mode.azimuthal()) == std::abs(mode.azimuthal())) {
                    match = &p;
                }
            }
            if (!match && profiles.size() == 1) match = &profiles.front();
            if (!match) {
                throw std::invalid_argument("no crosstalk profile for symbol " + std::to_string(i) + " (p=" +
                                            std::to_string(mode.radial()) + ", l=" + std::to_string(mode.azimuthal()) +
                                            ")");
            }
            ch.shifts.push_back(match->probs);
        }
        return ch;
    }
};

using ChannelModel = std::variant<SymmetricChannel, TurbulenceChannel>;

struct ProtocolConfig {
    int order = 3;
    long rounds = 1;
    ChannelModel channel = SymmetricChannel{};
    std::uint64_t seed = 0;

    int dimension() const noexcept { return order + 1; }

    void validate() const {
        if (order < 1 || order % 2 == 0) throw std::invalid_argument("order must be odd and positive");
        if (rounds < 1) throw std::invalid_argument("rounds must be at least 1");
        if (const auto* s = std::get_if<SymmetricChannel>(&channel)) {
            if (!(s->qber >= 0.0 && s->qber <= 1.0)) throw std::invalid_argument("QBER must lie in [0, 1]");
        }
        if (const auto* t = std::get_if<TurbulenceChannel>(&channel)) {
            if (t->shifts.size() != static_cast<std::size_t>(dimension())) {
                throw std::invalid_argument("turbulence channel must carry one shift table per symbol");
            }
        }
    }
};

struct EncodedRound {
    int a = 0;
    Basis pA = Basis::L;
    HGExpansion state;
};

/// Alice's uniform symbol and basis bit. Draw order: symbol, then basis.
inline EncodedRound encode_round(SplitMix64& rng, const PMUBPair& pmub) {
    EncodedRound r;
    r.a = static_cast<int>(rng.below(static_cast<std::uint64_t>(pmub.dimension())));
    r.pA = rng.bit() ? Basis::H : Basis::L;
    r.state = pmub.basis(static_cast<int>(r.pA))[static_cast<std::size_t>(r.a)];
    return r;
}

/// Distribution of the symbol arriving at Bob, in the sender's basis. Entry d is
/// the inconclusive (lost) outcome.
inline std::vector<double> apply_channel(Basis /*basis*/, int index, const ChannelModel& channel, int d) {
    std::vector<double> out(static_cast<std::size_t>(d + 1), 0.0);
    if (const auto* s = std::get_if<SymmetricChannel>(&channel)) {
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] = j == index ? 1.0 - s->qber : s->qber / (d - 1);
        return out;
    }
    // The pi/2 converter maps h_i onto l_i before sorting, so both bases share the LG shift table.
    const auto& t = std::get<TurbulenceChannel>(channel);
    const int order = d - 1;
    const int l0 = 2 * index - order;
    double leaked = 1.0;
    for (const auto& [dl, p] : t.shifts[static_cast<std::size_t>(index)]) {
        const int l = l0 + dl;
        const bool in_alphabet = std::abs(l) <= order && (l + order) % 2 == 0;
        if (in_alphabet) {
            out[static_cast<std::size_t>((l + order) / 2)] += p;
            leaked -= p;
        }
    }
    leaked = std::max(0.0, leaked);
    if (t.leakage == LeakagePolicy::RandomSymbol) {
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += leaked / d;
    } else {
        out[static_cast<std::size_t>(d)] = leaked;
    }
    return out;
}

/// Bob's outcome for a state basis_sent[index]: the index itself when the bases match,
/// otherwise drawn from |<basis_B_j | basis_sent_i>|^2.
inline int measure_round(Basis sent, int index, Basis pB, const PMUBPair& pmub, SplitMix64& rng) {
    if (sent == pB) return index;
    const int d = pmub.dimension();
    std::vector<double> w(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) w[static_cast<std::size_t>(j)] = pmub.transition_probability(static_cast<int>(sent), index, j);
    return static_cast<int>(rng.categorical(w));
}

struct RoundRecord {
    int a = 0;
    Basis pA = Basis::L;
    int d_out = kInconclusive;
    Basis pB = Basis::L;
    bool kept = false;

    friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

/// One full round on its own random stream. Draw order: a, pA, channel, pB, measurement.
inline RoundRecord simulate_round(SplitMix64 rng, const PMUBPair& pmub, const ChannelModel& channel) {
    const int d = pmub.dimension();
    const auto enc = encode_round(rng, pmub);
    const auto arrive = apply_channel(enc.pA, enc.a, channel, d);
    const auto idx = static_cast<int>(rng.categorical(arrive));
    RoundRecord r;
    r.a = enc.a;
    r.pA = enc.pA;
    r.pB = rng.bit() ? Basis::H : Basis::L;
    r.d_out = idx == d ? kInconclusive : measure_round(enc.pA, idx, r.pB, pmub, rng);
    r.kept = r.pA == r.pB && r.d_out != kInconclusive;
    return r;
}

struct SessionStats {
    long rounds = 0;
    long rawKeyLength = 0;
    long keptL = 0;
    long keptH = 0;
    long inconclusive = 0;
    double siftedFraction = 0.0;
    double qberL = 0.0;
    double qberH = 0.0;
    std::optional<JointOutcomeDistribution> jointL;
    std::optional<JointOutcomeDistribution> jointH;
    bool insufficient = false;  ///< no matched-basis conclusive rounds in some basis
};

struct SiftResult {
    std::vector<int> rawA;
    std::vector<int> rawB;
    SessionStats stats;
};

inline SiftResult sift(const std::vector<RoundRecord>& records, int d) {
    SiftResult out;
    std::array<std::vector<double>, 2> counts{std::vector<double>(static_cast<std::size_t>(d * d), 0.0),
                                              std::vector<double>(static_cast<std::size_t>(d * d), 0.0)};
    std::array<long, 2> kept{0, 0};
    std::array<long, 2> errors{0, 0};
    for (const auto& r : records) {
        if (r.d_out == kInconclusive) ++out.stats.inconclusive;
        if (!r.kept) continue;
        const auto b = static_cast<std::size_t>(r.pA);
        out.rawA.push_back(r.a);
        out.rawB.push_back(r.d_out);
        counts[b][static_cast<std::size_t>(r.a * d + r.d_out)] += 1.0;
        ++kept[b];
        if (r.a != r.d_out) ++errors[b];
    }
    auto& s = out.stats;
    s.rounds = static_cast<long>(records.size());
    s.rawKeyLength = static_cast<long>(out.rawA.size());
    s.keptL = kept[0];
    s.keptH = kept[1];
    s.siftedFraction = records.empty() ? 0.0 : static_cast<double>(s.rawKeyLength) / static_cast<double>(records.size());
    s.qberL = kept[0] ? static_cast<double>(errors[0]) / static_cast<double>(kept[0]) : 0.0;
    s.qberH = kept[1] ? static_cast<double>(errors[1]) / static_cast<double>(kept[1]) : 0.0;
    if (kept[0]) s.jointL = JointOutcomeDistribution::from_counts(d, counts[0]);
    if (kept[1]) s.jointH = JointOutcomeDistribution::from_counts(d, counts[1]);
    s.insufficient = kept[0] == 0 || kept[1] == 0;
    return out;
}

struct Session {
    std::vector<RoundRecord> records;
    SiftResult sifted;
};

/// Round k draws from SplitMix64::for_stream(seed, k), so any batching reproduces
/// the same records.
inline Session run_session(const ProtocolConfig& config, const PMUBPair& pmub, unsigned threads = 1) {
    config.validate();
    if (pmub.order != config.order) throw std::invalid_argument("PMUB order differs from protocol order");
    constexpr long kBatch = 1 << 16;
    const auto batches = static_cast<std::size_t>((config.rounds + kBatch - 1) / kBatch);
    auto parts = parallel_map<std::vector<RoundRecord>>(batches, threads, [&](std::size_t b) {
        const long lo = static_cast<long>(b) * kBatch;
        const long hi = std::min(config.rounds, lo + kBatch);
        std::vector<RoundRecord> out;
        out.reserve(static_cast<std::size_t>(hi - lo));
        for (long k = lo; k < hi; ++k) {
            out.push_back(simulate_round(SplitMix64::for_stream(config.seed, static_cast<std::uint64_t>(k)), pmub,
                                         config.channel));
        }
        return out;
    });
    Session s;
    s.records.reserve(static_cast<std::size_t>(config.rounds));
    for (auto& p : parts) s.records.insert(s.records.end(), p.begin(), p.end());
    s.sifted = sift(s.records, config.dimension());
    return s;
}

/// One line per round: "a pA d_out pB kept" (d_out = -1 when inconclusive).
inline std::string session_transcript(const std::vector<RoundRecord>& records) {
    std::ostringstream os;
    for (const auto& r : records) {
        os << r.a << ' ' << static_cast<int>(r.pA) << ' ' << r.d_out << ' ' << static_cast<int>(r.pB) << ' '
           << (r.kept ? 1 : 0) << '\n';
    }
    return os.str();
}

/// Base-d symbols as fixed-width bit strings; only defined for d a power of two.
inline std::string symbols_to_bits(const std::vector<int>& symbols, int d) {
    if (d < 2 || (d & (d - 1)) != 0) throw std::invalid_argument("bit export needs a power-of-two alphabet");
    int width = 0;
    while ((1 << width) < d) ++width;
    std::string out;
    out.reserve(symbols.size() * static_cast<std::size_t>(width));
    for (int s : symbols) {
        for (int b = width - 1; b >= 0; --b) out.push_back(((s >> b) & 1) ? '1' : '0');
    }
    return out;
}

}  // namespace pmubqkd
