// Routing model of the Dove-prism Mach-Zehnder stages that combine Alice's four
// LG sources into one channel port and sort them again at Bob.
//
// A stage with prism angle alpha/2 imposes the arm phase l * alpha. A beam leaves
// through the port it entered when l * alpha = 0 (mod 2 pi) and through the other
// port when l * alpha = pi (mod 2 pi); anything else splits between both ports.
// Combine stages apply the spiral-plate shift on the exit port after routing; sort
// stages apply it on the arriving branch before routing (a combiner run backwards).
#pragma once

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmubqkd {

/// alpha = (num / den) * pi, kept exact so that port decisions need no tolerance.
struct PiFraction {
    long num = 0;
    long den = 1;

    static PiFraction make(long num, long den) {
        if (den == 0) throw std::invalid_argument("zero denominator in pi fraction");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const long g = std::gcd(std::abs(num), den);
        return g == 0 ? PiFraction{0, 1} : PiFraction{num / g, den / g};
    }

    /// Nearest fraction with denominator <= 64, accepted only when it matches within 1e-12 rad.
    static PiFraction from_radians(double alpha) {
        for (long den = 1; den <= 64; ++den) {
            const double num = std::round(alpha / M_PI * static_cast<double>(den));
            if (std::abs(num * M_PI / static_cast<double>(den) - alpha) < 1e-12) {
                return make(static_cast<long>(num), den);
            }
        }
        throw std::invalid_argument("stage angle is not a rational multiple of pi with denominator <= 64");
    }

    double radians() const { return M_PI * static_cast<double>(num) / static_cast<double>(den); }

    friend bool operator==(const PiFraction&, const PiFraction&) = default;
};

enum class Port { A, B, Superposed };

inline const char* to_string(Port p) {
    switch (p) {
        case Port::A: return "A";
        case Port::B: return "B";
        case Port::Superposed: return "superposed";
    }
    return "?";
}

inline Port other(Port p) { return p == Port::A ? Port::B : Port::A; }

/// Port for a beam entering the primary input, from the phase l * alpha.
inline Port sorter_route(int l, PiFraction alpha) {
    // l * alpha / pi = l * num / den; A if even integer, B if odd integer
    const long n = static_cast<long>(l) * alpha.num;
    if (n % alpha.den != 0) return Port::Superposed;
    return ((n / alpha.den) % 2 == 0) ? Port::A : Port::B;
}

inline Port sorter_route(int l, double alpha) { return sorter_route(l, PiFraction::from_radians(alpha)); }

enum class StageKind { Combine, Sort };

struct SorterStage {
    PiFraction alpha;
    int shiftPortA = 0;
    int shiftPortB = 0;
    StageKind kind = StageKind::Combine;

    int shift(Port p) const { return p == Port::A ? shiftPortA : shiftPortB; }
};

struct SourceMode {
    int p = 0;
    int l = 0;
    Port entry = Port::A;
};

struct TracedMode {
    SourceMode source;
    int channel_l = 0;              ///< OAM after the last combine stage
    Port channel_port = Port::A;
    std::vector<Port> path;         ///< exit port of every stage
    std::vector<int> shifts;        ///< spiral-plate shift applied at every stage
    int final_l = 0;                ///< OAM at the detector after the last stage

    int net_shift() const { return std::accumulate(shifts.begin(), shifts.end(), 0); }
};

class ConfigurationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Stages 1-2 combine, stages 3-4 sort. Plates: -2 at stage 1 (port A), -1 at stage 2
/// (port B), +1 at stage 3 (branch B), +2 at stage 4 (branch A).
inline std::vector<SorterStage> fig2_stages() {
    return {
        {PiFraction::make(1, 4), -2, 0, StageKind::Combine},
        {PiFraction::make(1, 2), 0, -1, StageKind::Combine},
        {PiFraction::make(1, 2), 0, +1, StageKind::Sort},
        {PiFraction::make(1, 4), +2, 0, StageKind::Sort},
    };
}

/// LG^0_4, LG^0_0 on input A and LG^1_4, LG^1_0 on input B of stage 1.
inline std::vector<SourceMode> fig2_sources() {
    return {{0, 4, Port::A}, {0, 0, Port::A}, {1, 4, Port::B}, {1, 0, Port::B}};
}

inline TracedMode trace_mode(const SourceMode& src, const std::vector<SorterStage>& stages) {
    TracedMode t;
    t.source = src;
    int l = src.l;
    Port port = src.entry;
    bool before_sort = true;
    t.channel_l = l;
    t.channel_port = port;
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const auto& st = stages[s];
        int applied = 0;
        if (st.kind == StageKind::Sort) {
            before_sort = false;
            applied = st.shift(port);
            l += applied;
        }
        const Port route = sorter_route(l, st.alpha);
        if (route == Port::Superposed) {
            throw ConfigurationError("stage " + std::to_string(s + 1) + ": mode (p=" + std::to_string(src.p) +
                                     ", l=" + std::to_string(src.l) + ") reaches the interferometer with l=" +
                                     std::to_string(l) + " and splits between both ports");
        }
        port = route == Port::A ? port : other(port);
        if (st.kind == StageKind::Combine) {
            applied = st.shift(port);
            l += applied;
        }
        t.path.push_back(port);
        t.shifts.push_back(applied);
        if (before_sort) {
            t.channel_l = l;
            t.channel_port = port;
        }
    }
    t.final_l = l;
    return t;
}

inline std::vector<TracedMode> apparatus_pipeline(const std::vector<SourceMode>& sources,
                                                  const std::vector<SorterStage>& stages) {
    std::vector<TracedMode> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(trace_mode(s, stages));
    return out;
}

/// (p, l) pairs entering the transmission channel.
inline std::vector<std::pair<int, int>> channel_modes(const std::vector<TracedMode>& traced) {
    std::vector<std::pair<int, int>> out;
    for (const auto& t : traced) out.emplace_back(t.source.p, t.channel_l);
    return out;
}

/// The combine stages run backwards: reversed order, negated shifts, sort semantics.
inline std::vector<SorterStage> reverse_stages(const std::vector<SorterStage>& stages) {
    std::vector<SorterStage> out;
    for (auto it = stages.rbegin(); it != stages.rend(); ++it) {
        if (it->kind != StageKind::Combine) continue;
        out.push_back({it->alpha, -it->shiftPortA, -it->shiftPortB, StageKind::Sort});
    }
    return out;
}

}  // namespace pmubqkd
