// Entanglement-based source state and the constraint presets fed to the dual bound.
#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pmubqkd/dual_bound.hpp"
#include "pmubqkd/entropy.hpp"
#include "pmubqkd/mode_algebra.hpp"

namespace pmubqkd {

/// rho_0 = |Phi><Phi| with |Phi> = d^{-1/2} sum_i |l'_i>|l_i> = d^{-1/2} sum_i |h'_i>|h_i>.
/// Bob's factor is written in the HG coordinate basis; columns of primedL/primedH are
/// Alice's ancilla basis vectors.
struct IdealProtocolState {
    int d = 0;
    CVector psi;
    CMatrix density;
    CMatrix primedL;
    CMatrix primedH;
};

inline IdealProtocolState ideal_state(const PMUBPair& pmub) {
    const int d = pmub.dimension();
    IdealProtocolState st;
    st.d = d;
    st.primedL = CMatrix::Identity(d, d);
    // sum_i |i>|l_i> = sum_j (sum_i U_ij |i>) |h_j>, so h'_j has components U_ij
    st.primedH = pmub.overlap;

    const double norm = 1.0 / std::sqrt(static_cast<double>(d));
    st.psi = CVector::Zero(d * d);
    CVector alt = CVector::Zero(d * d);
    for (int i = 0; i < d; ++i) {
        const auto li = pmub.basisL[static_cast<std::size_t>(i)].as_vector();
        const auto hi = pmub.basisH[static_cast<std::size_t>(i)].as_vector();
        st.psi += norm * kron(st.primedL.col(i), li);
        alt += norm * kron(st.primedH.col(i), hi);
    }
    if ((st.psi - alt).cwiseAbs().maxCoeff() > 1e-12) {
        throw std::logic_error("ideal_state: the two Schmidt decompositions disagree");
    }
    st.density = st.psi * st.psi.adjoint();
    return st;
}

enum class ConstraintPreset { PaperEq10, Calibrated, BB84 };

inline ConstraintPreset parse_preset(std::string_view s) {
    if (s == "paper-eq10") return ConstraintPreset::PaperEq10;
    if (s == "calibrated") return ConstraintPreset::Calibrated;
    if (s == "bb84") return ConstraintPreset::BB84;
    throw std::invalid_argument("unknown preset '" + std::string(s) + "'");
}

inline const char* to_string(ConstraintPreset p) {
    switch (p) {
        case ConstraintPreset::PaperEq10: return "paper-eq10";
        case ConstraintPreset::Calibrated: return "calibrated";
        case ConstraintPreset::BB84: return "bb84";
    }
    return "?";
}

/// 2 sum_j |a_j><a_j| (x) |b_j><b_j| - I: +1 when the outcomes agree, -1 otherwise.
inline HermitianOperator agreement_observable(const CMatrix& alice_basis, const std::vector<HGExpansion>& bob_basis) {
    const auto d = alice_basis.cols();
    CMatrix m = -CMatrix::Identity(d * d, d * d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const CVector a = alice_basis.col(j);
        const CVector b = bob_basis[static_cast<std::size_t>(j)].as_vector();
        m += 2.0 * kron(outer(a, a), outer(b, b));
    }
    return HermitianOperator(m, 1e-10);
}

namespace detail {

inline std::vector<HGExpansion> columns_as_basis(const CMatrix& m) {
    std::vector<HGExpansion> out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        HGExpansion e{static_cast<int>(m.rows()) - 1, {}};
        for (Eigen::Index k = 0; k < m.rows(); ++k) e.amplitudes.push_back(m(k, j));
        out.push_back(std::move(e));
    }
    return out;
}

inline void check_qber(double q) {
    if (!(q >= 0.0 && q <= 0.5)) throw std::invalid_argument("QBER must lie in [0, 1/2]");
}

}  // namespace detail

/// Z (x) Z, X (x) X and normalization on two qubits.
inline ConstraintSet bb84_constraints(double qber) {
    detail::check_qber(qber);
    CMatrix z(2, 2), x(2, 2);
    z << 1, 0, 0, -1;
    x << 0, 1, 1, 0;
    ConstraintSet cs;
    cs.alice_dim = 2;
    cs.bob_dim = 2;
    cs.add("I", HermitianOperator::identity(4), 1.0);
    cs.add("Z(x)Z", HermitianOperator(kron(z, z)), 1.0 - 2.0 * qber);
    cs.add("X(x)X", HermitianOperator(kron(x, x)), 1.0 - 2.0 * qber);
    return cs;
}

/// Normalization plus the four basis-pair agreement observables LL, HH, LH, HL.
///
/// PaperEq10 assigns <LL> = <HH> = 1 - 2Q and <LH> = <HL> = sin(theta)(1 - 2Q).
/// Calibrated takes every value from the isotropic state (1-p) rho_0 + p I/d^2 with
/// p = Q d/(d-1), which has error rate Q in both bases.
inline ConstraintSet build_constraints(ConstraintPreset preset, double qber, const PMUBPair& pmub,
                                       std::optional<double> theta_override = std::nullopt) {
    if (preset == ConstraintPreset::BB84) return bb84_constraints(qber);
    detail::check_qber(qber);
    const int d = pmub.dimension();
    const auto st = ideal_state(pmub);
    const auto alice_l = st.primedL;
    const auto alice_h = st.primedH;

    ConstraintSet cs;
    cs.alice_dim = d;
    cs.bob_dim = d;
    const auto ll = agreement_observable(alice_l, pmub.basisL);
    const auto hh = agreement_observable(alice_h, pmub.basisH);
    const auto lh = agreement_observable(alice_l, pmub.basisH);
    const auto hl = agreement_observable(alice_h, pmub.basisL);

    if (preset == ConstraintPreset::PaperEq10) {
        const double theta = theta_override.value_or(pmub.theta);
        const double corr = 1.0 - 2.0 * qber;
        cs.add("I", HermitianOperator::identity(d * d), 1.0);
        cs.add("M_L(x)M_L", ll, corr);
        cs.add("M_H(x)M_H", hh, corr);
        cs.add("M_L(x)M_H", lh, std::sin(theta) * corr);
        cs.add("M_H(x)M_L", hl, std::sin(theta) * corr);
        return cs;
    }

    const double p = qber * d / (d - 1.0);
    const CMatrix rho = (1.0 - p) * st.density + (p / (d * d)) * CMatrix::Identity(d * d, d * d);
    cs.add("I", HermitianOperator::identity(d * d), 1.0);
    cs.add("M_L(x)M_L", ll, ll.expectation(rho));
    cs.add("M_H(x)M_H", hh, hh.expectation(rho));
    cs.add("M_L(x)M_H", lh, lh.expectation(rho));
    cs.add("M_H(x)M_L", hl, hl.expectation(rho));
    return cs;
}

/// Builds the preset, pins the key map to Alice's primed-L basis and optimizes.
/// Error correction is charged at h(Q) + Q log2(d-1).
inline DualSolution numerical_key_rate(ConstraintPreset preset, double qber, const PMUBPair& pmub,
                                       const DualOptions& opt = {},
                                       std::optional<double> theta_override = std::nullopt) {
    const auto cs = build_constraints(preset, qber, pmub, theta_override);
    const auto pinch = Pinching::key_basis(cs.alice_dim, cs.bob_dim);
    return optimize_dual(cs, pinch, symmetric_error_cost(cs.alice_dim, qber), opt);
}

}  // namespace pmubqkd
