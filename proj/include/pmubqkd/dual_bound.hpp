// Numerical lower bound on H(Z_A|E) from the Lagrange dual of
//   min D(rho || Z(rho))  s.t.  Tr(rho Gamma_i) = gamma_i,
// where Z is the pinching in Alice's key basis:
//
//   kappa >= -|| sum_j P_j T(lambda) P_j || - lambda . gamma,
//   T(lambda) = exp(-I - lambda . Gamma).
//
// Every lambda gives a valid certificate; the optimizer only tightens it.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmubqkd/hermitian.hpp"
#include "pmubqkd/nelder_mead.hpp"
#include "pmubqkd/parallel.hpp"
#include "pmubqkd/rng.hpp"

namespace pmubqkd {

/// Constraint operators on H_A (x) H_B with their observed expectations.
/// The first entry is the normalization <I> = 1.
struct ConstraintSet {
    int alice_dim = 0;
    int bob_dim = 0;
    std::vector<HermitianOperator> operators;
    std::vector<double> gammas;
    std::vector<std::string> labels;

    std::size_t size() const noexcept { return operators.size(); }
    int dim() const noexcept { return alice_dim * bob_dim; }

    void add(std::string label, HermitianOperator op, double gamma) {
        labels.push_back(std::move(label));
        operators.push_back(std::move(op));
        gammas.push_back(gamma);
    }

    void validate() const {
        if (operators.empty() || operators.size() != gammas.size() || labels.size() != gammas.size()) {
            throw std::invalid_argument("constraint set needs equal-length, nonempty operator and value lists");
        }
        for (std::size_t i = 0; i < operators.size(); ++i) {
            if (operators[i].dim() != dim()) throw std::invalid_argument("constraint operator has the wrong dimension");
            if (std::abs(gammas[i]) > operators[i].operator_norm() + 1e-12) {
                throw std::invalid_argument("constraint value exceeds the operator norm of " + labels[i]);
            }
        }
    }
};

/// Orthogonal projectors resolving the identity on the joint space.
class Pinching {
public:
    explicit Pinching(std::vector<CMatrix> projectors) : projectors_(std::move(projectors)) {
        if (projectors_.empty()) throw std::invalid_argument("empty pincher set");
        const auto n = projectors_.front().rows();
        CMatrix sum = CMatrix::Zero(n, n);
        for (std::size_t i = 0; i < projectors_.size(); ++i) {
            const auto& p = projectors_[i];
            if (p.rows() != n || p.cols() != n) throw std::invalid_argument("pinchers have mismatched dimensions");
            if ((p * p - p).cwiseAbs().maxCoeff() > 1e-10 || (p - p.adjoint()).cwiseAbs().maxCoeff() > 1e-10) {
                throw std::invalid_argument("pincher " + std::to_string(i) + " is not an orthogonal projector");
            }
            for (std::size_t j = 0; j < i; ++j) {
                if ((p * projectors_[j]).cwiseAbs().maxCoeff() > 1e-10) {
                    throw std::invalid_argument("pinchers are not mutually orthogonal");
                }
            }
            sum += p;
        }
        if ((sum - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10) {
            throw std::invalid_argument("pinchers do not resolve the identity");
        }
        detect_diagonal();
    }

    /// P_j = |j><j| (x) I_B in the computational basis of A.
    static Pinching key_basis(int alice_dim, int bob_dim) {
        std::vector<CMatrix> ps;
        const int n = alice_dim * bob_dim;
        for (int j = 0; j < alice_dim; ++j) {
            CMatrix p = CMatrix::Zero(n, n);
            for (int b = 0; b < bob_dim; ++b) p(j * bob_dim + b, j * bob_dim + b) = 1.0;
            ps.push_back(std::move(p));
        }
        return Pinching(std::move(ps));
    }

    std::size_t size() const noexcept { return projectors_.size(); }
    Eigen::Index dim() const noexcept { return projectors_.front().rows(); }
    const std::vector<CMatrix>& projectors() const noexcept { return projectors_; }

    CMatrix apply(const CMatrix& x) const {
        if (!diagonal_class_.empty()) {
            CMatrix out = x;
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                for (Eigen::Index j = 0; j < x.cols(); ++j) {
                    if (diagonal_class_[static_cast<std::size_t>(i)] != diagonal_class_[static_cast<std::size_t>(j)]) {
                        out(i, j) = 0.0;
                    }
                }
            }
            return out;
        }
        CMatrix out = CMatrix::Zero(x.rows(), x.cols());
        for (const auto& p : projectors_) out += p * x * p;
        return out;
    }

private:
    void detect_diagonal() {
        const auto n = static_cast<std::size_t>(dim());
        std::vector<int> cls(n, -1);
        for (std::size_t k = 0; k < projectors_.size(); ++k) {
            const auto& p = projectors_[k];
            const CMatrix off = p - CMatrix(p.diagonal().asDiagonal());
            if (off.cwiseAbs().maxCoeff() > 0.0) return;
            for (std::size_t i = 0; i < n; ++i) {
                if (std::abs(p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i))) > 0.5) cls[i] = static_cast<int>(k);
            }
        }
        diagonal_class_ = std::move(cls);
    }

    std::vector<CMatrix> projectors_;
    std::vector<int> diagonal_class_;
};

/// Norm applied to the pinched operator. The operator norm is the one under which
/// the objective bounds D(rho||Z(rho)); the trace norm gives -max H(rho), which is
/// also a lower bound but never exceeds zero.
enum class PinchedNorm { Operator, Trace };

inline const char* to_string(PinchedNorm n) { return n == PinchedNorm::Operator ? "operator" : "trace"; }

namespace detail {

inline CMatrix dual_exponent(const std::vector<double>& lambdas, const ConstraintSet& cs) {
    if (lambdas.size() != cs.size()) throw std::invalid_argument("lambda vector length differs from constraint count");
    const int n = cs.dim();
    CMatrix a = -CMatrix::Identity(n, n);
    for (std::size_t i = 0; i < lambdas.size(); ++i) a -= lambdas[i] * cs.operators[i].matrix();
    return a;
}

}  // namespace detail

/// T(lambda) = exp(-I - lambda . Gamma)
inline HermitianOperator dual_T(const std::vector<double>& lambdas, const ConstraintSet& cs) {
    return HermitianOperator(hermitian_exp(detail::dual_exponent(lambdas, cs)), 1e-9);
}

/// -||Z(T(lambda))|| - lambda . gamma in nats. Evaluated with the spectrum shifted
/// by its maximum so that large multipliers do not overflow before the subtraction.
inline double dual_objective(const std::vector<double>& lambdas, const ConstraintSet& cs, const Pinching& pinch,
                             PinchedNorm norm = PinchedNorm::Operator) {
    if (pinch.dim() != cs.dim()) throw std::invalid_argument("pincher dimension differs from constraint dimension");
    const Eigen::SelfAdjointEigenSolver<CMatrix> es(detail::dual_exponent(lambdas, cs));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double shift = ev.maxCoeff();
    const CMatrix& v = es.eigenvectors();
    const CMatrix t = v * (ev.array() - shift).exp().matrix().cast<cplx>().asDiagonal() * v.adjoint();
    const CMatrix zt = pinch.apply(t);
    double n = 0.0;
    if (norm == PinchedNorm::Trace) {
        n = zt.trace().real();
    } else {
        n = Eigen::SelfAdjointEigenSolver<CMatrix>(zt, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    }
    double lg = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) lg += lambdas[i] * cs.gammas[i];
    const double log_norm = shift + std::log(n);
    if (log_norm > 700.0) return -std::numeric_limits<double>::infinity();
    return -std::exp(log_norm) - lg;
}

struct DualOptions {
    int starts = 8;
    double perturbation = 2.0;  ///< half-width of the uniform start perturbations
    std::uint64_t seed = 0x5eedULL;
    NelderMeadOptions simplex{};
    PinchedNorm norm = PinchedNorm::Operator;
    unsigned threads = 1;
};

struct DualSolution {
    std::vector<double> lambdas;
    double kappa = -std::numeric_limits<double>::infinity();  ///< nats
    double keyRate = 0.0;                                       ///< bits per sifted signal
    double ecCost = 0.0;                                        ///< bits
    long evaluations = 0;
    bool converged = false;
    /// false when kappa exceeds ln(#pinchers): no state meets the constraints.
    bool feasible = true;
    PinchedNorm norm = PinchedNorm::Operator;
};

/// Maximizes the dual objective from the origin and (starts - 1) seeded perturbations.
inline DualSolution optimize_dual(const ConstraintSet& cs, const Pinching& pinch, double ec_cost,
                                  const DualOptions& opt = {}) {
    cs.validate();
    const std::size_t n = cs.size();
    const int starts = std::max(1, opt.starts);
    std::vector<std::vector<double>> origins(static_cast<std::size_t>(starts), std::vector<double>(n, 0.0));
    SplitMix64 rng(opt.seed);
    for (std::size_t s = 1; s < origins.size(); ++s) {
        for (auto& x : origins[s]) x = opt.perturbation * (2.0 * rng.uniform() - 1.0);
    }
    // H(Z_A|E) <= log(#outcomes); a dual value above it proves the constraints infeasible
    const double ceiling = std::log(static_cast<double>(pinch.size()));
    NelderMeadOptions nm = opt.simplex;
    nm.target = -(ceiling + 1e-6);

    const auto runs = parallel_map<NelderMeadResult>(origins.size(), opt.threads, [&](std::size_t s) {
        return nelder_mead([&](const std::vector<double>& x) { return -dual_objective(x, cs, pinch, opt.norm); },
                           origins[s], nm);
    });

    DualSolution best;
    best.norm = opt.norm;
    best.ecCost = ec_cost;
    best.converged = true;
    bool have = false;
    for (const auto& r : runs) {
        best.evaluations += r.evaluations;
        best.converged = best.converged && r.converged;
        if (!have || -r.fx > best.kappa) {
            best.kappa = -r.fx;
            best.lambdas = r.x;
            have = true;
        }
        if (r.reached_target) best.feasible = false;
    }
    if (!best.feasible) best.converged = false;
    best.keyRate = best.kappa / std::numbers::ln2 - ec_cost;
    return best;
}

}  // namespace pmubqkd
