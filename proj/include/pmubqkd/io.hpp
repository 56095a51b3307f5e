// JSON encodings of the library types and the output envelope shared by every
// command. Non-finite doubles (r0 = inf for a still atmosphere) are written as null.
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmubqkd/apparatus.hpp"
#include "pmubqkd/dual_bound.hpp"
#include "pmubqkd/mode_algebra.hpp"
#include "pmubqkd/practical_rate.hpp"
#include "pmubqkd/protocol.hpp"
#include "pmubqkd/turbulence.hpp"

namespace pmubqkd::io {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

inline json real(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

/// null decodes to `when_null` (the encoder only writes null for non-finite values).
inline double real_from(const json& j, double when_null = std::numeric_limits<double>::infinity()) {
    return j.is_null() ? when_null : j.get<double>();
}

inline json complex_to_json(cplx z) { return json::array({z.real(), z.imag()}); }
inline cplx complex_from_json(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline json matrix_to_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(complex_to_json(m(i, k)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline CMatrix matrix_from_json(const json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) throw std::invalid_argument("empty matrix");
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    CMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != cols) throw std::invalid_argument("ragged matrix");
        for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = complex_from_json(row.at(static_cast<std::size_t>(k)));
    }
    return m;
}

inline json to_json(const ModeIndex& m) {
    return {{"n", m.n()}, {"m", m.m()}, {"p", m.radial()}, {"l", m.azimuthal()}};
}

inline ModeIndex mode_from_json(const json& j) {
    if (j.contains("n")) return ModeIndex::from_nm(j.at("n").get<int>(), j.at("m").get<int>());
    return ModeIndex::from_pl(j.at("p").get<int>(), j.at("l").get<int>());
}

inline json to_json(const HGExpansion& e) {
    json a = json::array();
    for (const auto& z : e.amplitudes) a.push_back(complex_to_json(z));
    return a;
}

inline HGExpansion expansion_from_json(const json& j) {
    HGExpansion e{static_cast<int>(j.size()) - 1, {}};
    for (const auto& z : j) e.amplitudes.push_back(complex_from_json(z));
    return e;
}

inline json to_json(const PMUBPair& p) {
    json l = json::array(), h = json::array();
    for (const auto& e : p.basisL) l.push_back(to_json(e));
    for (const auto& e : p.basisH) h.push_back(to_json(e));
    return {{"order", p.order}, {"basisL", l}, {"basisH", h}, {"overlap", matrix_to_json(p.overlap)},
            {"c", p.c},         {"qMU", p.qMU}, {"theta", p.theta}};
}

inline PMUBPair pmub_from_json(const json& j) {
    PMUBPair p;
    p.order = j.at("order").get<int>();
    for (const auto& e : j.at("basisL")) p.basisL.push_back(expansion_from_json(e));
    for (const auto& e : j.at("basisH")) p.basisH.push_back(expansion_from_json(e));
    p.overlap = matrix_from_json(j.at("overlap"));
    p.c = j.at("c").get<double>();
    p.qMU = j.at("qMU").get<double>();
    p.theta = j.at("theta").get<double>();
    return p;
}

inline json to_json(const TurbulenceParams& t) { return {{"fried_r0", real(t.fried_r0)}, {"beam_b", t.beam_b}}; }

inline TurbulenceParams turbulence_from_json(const json& j) {
    TurbulenceParams t{real_from(j.at("fried_r0")), j.at("beam_b").get<double>()};
    t.validate();
    return t;
}

inline json to_json(const CrosstalkProfile& p) {
    json probs = json::array();
    for (const auto& [dl, v] : p.probs) probs.push_back({{"dl", dl}, {"p", v}});
    return {{"mode", to_json(p.mode)}, {"params", to_json(p.params)}, {"truncation", p.truncation},
            {"probs", probs},          {"tail", p.tail}};
}

inline CrosstalkProfile profile_from_json(const json& j) {
    CrosstalkProfile p{mode_from_json(j.at("mode")), turbulence_from_json(j.at("params")),
                       j.at("truncation").get<int>(), {}, j.at("tail").get<double>()};
    for (const auto& e : j.at("probs")) {
        const double v = e.at("p").get<double>();
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("profile probability outside [0, 1]");
        p.probs[e.at("dl").get<int>()] = v;
    }
    return p;
}

inline json to_json(const QberEstimate& q) { return {{"Q", q.Q}, {"spread", q.spread}, {"perMode", q.per_mode}}; }

inline QberEstimate qber_from_json(const json& j) {
    return {j.at("Q").get<double>(), j.at("spread").get<double>(), j.at("perMode").get<std::vector<double>>()};
}

inline json to_json(const DualSolution& s) {
    return {{"kappa", real(s.kappa)},     {"keyRate", real(s.keyRate)},   {"ecCost", s.ecCost},
            {"lambdas", s.lambdas},       {"evaluations", s.evaluations}, {"converged", s.converged},
            {"feasible", s.feasible},     {"norm", to_string(s.norm)}};
}

inline DualSolution dual_from_json(const json& j) {
    DualSolution s;
    s.kappa = real_from(j.at("kappa"), -std::numeric_limits<double>::infinity());
    s.keyRate = real_from(j.at("keyRate"), -std::numeric_limits<double>::infinity());
    s.ecCost = j.at("ecCost").get<double>();
    s.lambdas = j.at("lambdas").get<std::vector<double>>();
    s.evaluations = j.at("evaluations").get<long>();
    s.converged = j.at("converged").get<bool>();
    s.feasible = j.at("feasible").get<bool>();
    s.norm = j.at("norm").get<std::string>() == "trace" ? PinchedNorm::Trace : PinchedNorm::Operator;
    return s;
}

inline json to_json(const JointOutcomeDistribution& d) { return {{"d", d.dimension()}, {"pmf", d.pmf()}}; }

inline JointOutcomeDistribution joint_from_json(const json& j) {
    return JointOutcomeDistribution(j.at("d").get<int>(), j.at("pmf").get<std::vector<double>>());
}

inline json to_json(const SessionStats& s) {
    return {{"rounds", s.rounds},
            {"rawKeyLength", s.rawKeyLength},
            {"keptL", s.keptL},
            {"keptH", s.keptH},
            {"inconclusive", s.inconclusive},
            {"siftedFraction", s.siftedFraction},
            {"qberL", s.qberL},
            {"qberH", s.qberH},
            {"jointL", s.jointL ? to_json(*s.jointL) : json(nullptr)},
            {"jointH", s.jointH ? to_json(*s.jointH) : json(nullptr)},
            {"insufficient", s.insufficient}};
}

inline SessionStats stats_from_json(const json& j) {
    SessionStats s;
    s.rounds = j.at("rounds").get<long>();
    s.rawKeyLength = j.at("rawKeyLength").get<long>();
    s.keptL = j.at("keptL").get<long>();
    s.keptH = j.at("keptH").get<long>();
    s.inconclusive = j.at("inconclusive").get<long>();
    s.siftedFraction = j.at("siftedFraction").get<double>();
    s.qberL = j.at("qberL").get<double>();
    s.qberH = j.at("qberH").get<double>();
    if (!j.at("jointL").is_null()) s.jointL = joint_from_json(j.at("jointL"));
    if (!j.at("jointH").is_null()) s.jointH = joint_from_json(j.at("jointH"));
    s.insufficient = j.at("insufficient").get<bool>();
    return s;
}

inline json to_json(const RateSample& r) {
    return {{"t", r.t}, {"qber", r.qber}, {"keyRate", r.keyRate}, {"lower", r.lower}, {"upper", r.upper}};
}

// ---- constraint sets ----------------------------------------------------

/// {"aliceDim": d, "bobDim": d, "constraints": [{"label", "gamma", "operator": [[[re, im], ...], ...]}]}
inline json to_json(const ConstraintSet& cs) {
    json items = json::array();
    for (std::size_t i = 0; i < cs.size(); ++i) {
        items.push_back({{"label", cs.labels[i]}, {"gamma", cs.gammas[i]},
                         {"operator", matrix_to_json(cs.operators[i].matrix())}});
    }
    return {{"aliceDim", cs.alice_dim}, {"bobDim", cs.bob_dim}, {"constraints", items}};
}

inline ConstraintSet constraints_from_json(const json& j) {
    ConstraintSet cs;
    cs.alice_dim = j.at("aliceDim").get<int>();
    cs.bob_dim = j.at("bobDim").get<int>();
    for (const auto& c : j.at("constraints")) {
        cs.add(c.value("label", "constraint " + std::to_string(cs.size())),
               HermitianOperator(matrix_from_json(c.at("operator"))), c.at("gamma").get<double>());
    }
    cs.validate();
    return cs;
}

// ---- apparatus ----------------------------------------------------------

inline Port port_from_string(const std::string& s) {
    if (s == "A") return Port::A;
    if (s == "B") return Port::B;
    throw std::invalid_argument("port must be \"A\" or \"B\", got \"" + s + "\"");
}

/// alpha as radians or as {"piNum", "piDen"}.
inline SorterStage stage_from_json(const json& j) {
    SorterStage s;
    const auto& a = j.at("alpha");
    s.alpha = a.is_object() ? PiFraction::make(a.at("piNum").get<long>(), a.at("piDen").get<long>())
                            : PiFraction::from_radians(a.get<double>());
    s.shiftPortA = j.value("shiftPortA", 0);
    s.shiftPortB = j.value("shiftPortB", 0);
    const auto kind = j.value("kind", std::string("combine"));
    if (kind != "combine" && kind != "sort") throw std::invalid_argument("stage kind must be combine or sort");
    s.kind = kind == "sort" ? StageKind::Sort : StageKind::Combine;
    return s;
}

inline json to_json(const SorterStage& s) {
    return {{"alpha", {{"piNum", s.alpha.num}, {"piDen", s.alpha.den}}},
            {"alphaRadians", s.alpha.radians()},
            {"shiftPortA", s.shiftPortA},
            {"shiftPortB", s.shiftPortB},
            {"kind", s.kind == StageKind::Sort ? "sort" : "combine"}};
}

inline SourceMode source_from_json(const json& j) {
    return {j.at("p").get<int>(), j.at("l").get<int>(), port_from_string(j.value("entry", std::string("A")))};
}

inline json to_json(const SourceMode& s) { return {{"p", s.p}, {"l", s.l}, {"entry", to_string(s.entry)}}; }

inline json to_json(const TracedMode& t) {
    json path = json::array();
    for (auto p : t.path) path.push_back(to_string(p));
    return {{"source", to_json(t.source)}, {"channel", {{"p", t.source.p}, {"l", t.channel_l}}},
            {"channelPort", to_string(t.channel_port)}, {"path", path}, {"shifts", t.shifts},
            {"finalL", t.final_l}, {"netShift", t.net_shift()}};
}

// ---- envelope -----------------------------------------------------------

struct OutputEnvelope {
    std::string command;
    json params = json::object();
    json results = json::object();
    std::optional<std::uint64_t> seed;
    json tolerances = json::object();
    json units = json::object();
    std::vector<std::string> caveats;

    json to_json() const {
        return {{"command", command},
                {"params", params},
                {"results", results},
                {"toolVersion", kToolVersion},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"tolerances", tolerances},
                {"units", units},
                {"caveats", caveats}};
    }

    static OutputEnvelope from_json(const json& j) {
        OutputEnvelope e;
        e.command = j.at("command").get<std::string>();
        e.params = j.at("params");
        e.results = j.at("results");
        if (!j.at("seed").is_null()) e.seed = j.at("seed").get<std::uint64_t>();
        e.tolerances = j.at("tolerances");
        e.units = j.at("units");
        e.caveats = j.at("caveats").get<std::vector<std::string>>();
        return e;
    }
};

inline const std::vector<std::string>& determinism_caveats() {
    static const std::vector<std::string> c{
        "floating-point results are reproducible for a fixed binary, compiler and thread count; "
        "other platforms may differ in the last digits of quadrature and eigen-solver output",
        "Monte-Carlo rounds use SplitMix64 streams keyed by (seed, round index) and do not depend on --threads"};
    return c;
}

}  // namespace pmubqkd::io
