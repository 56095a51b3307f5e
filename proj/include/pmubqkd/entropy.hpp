// Classical entropies of joint outcome distributions and the analytic key rate
// K >= qMU - H(M_H(A)|M_H(B)) - H(M_L(A)|M_L(B)).
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pmubqkd {

/// Alice outcome x Bob outcome pmf for one basis, row-major d x d.
class JointOutcomeDistribution {
public:
    JointOutcomeDistribution(int d, std::vector<double> pmf) : d_(d), pmf_(std::move(pmf)) {
        if (d < 1 || pmf_.size() != static_cast<std::size_t>(d) * static_cast<std::size_t>(d)) {
            throw std::invalid_argument("joint distribution must be d x d");
        }
        double total = 0.0;
        for (double p : pmf_) {
            if (!(p >= 0.0)) throw std::invalid_argument("joint distribution has a negative entry");
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("joint distribution does not sum to 1");
    }

    /// Normalizes a table of counts.
    static JointOutcomeDistribution from_counts(int d, const std::vector<double>& counts) {
        double total = 0.0;
        for (double c : counts) total += c;
        if (!(total > 0.0)) throw std::invalid_argument("no counts to normalize");
        std::vector<double> pmf(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) pmf[i] = counts[i] / total;
        // absorb the last-ulp residue into the largest cell
        double s = 0.0;
        for (double p : pmf) s += p;
        *std::max_element(pmf.begin(), pmf.end()) += 1.0 - s;
        return JointOutcomeDistribution(d, std::move(pmf));
    }

    /// Uniform Alice symbol, Bob correct with 1-Q, each wrong symbol with Q/(d-1).
    static JointOutcomeDistribution symmetric(int d, double qber) {
        if (d < 2) throw std::invalid_argument("dimension must be at least 2");
        if (!(qber >= 0.0 && qber <= 1.0)) throw std::invalid_argument("QBER must lie in [0, 1]");
        std::vector<double> pmf(static_cast<std::size_t>(d * d));
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) {
                pmf[static_cast<std::size_t>(a * d + b)] = (a == b ? 1.0 - qber : qber / (d - 1)) / d;
            }
        }
        return JointOutcomeDistribution(d, std::move(pmf));
    }

    int dimension() const noexcept { return d_; }
    double operator()(int a, int b) const { return pmf_[static_cast<std::size_t>(a * d_ + b)]; }
    const std::vector<double>& pmf() const noexcept { return pmf_; }

    double error_rate() const {
        double agree = 0.0;
        for (int a = 0; a < d_; ++a) agree += (*this)(a, a);
        return 1.0 - agree;
    }

private:
    int d_;
    std::vector<double> pmf_;
};

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

inline double binary_entropy(double p) { return -plogp(p) - plogp(1.0 - p); }

/// H(A|B) = H(AB) - H(B), bits.
inline double conditional_entropy(const JointOutcomeDistribution& dist) {
    const int d = dist.dimension();
    double h_joint = 0.0;
    double h_bob = 0.0;
    for (int b = 0; b < d; ++b) {
        double pb = 0.0;
        for (int a = 0; a < d; ++a) {
            h_joint -= plogp(dist(a, b));
            pb += dist(a, b);
        }
        h_bob -= plogp(pb);
    }
    return std::clamp(h_joint - h_bob, 0.0, std::log2(static_cast<double>(d)));
}

/// h(Q) + Q log2(d-1): error-correction cost of the symmetric channel.
inline double symmetric_error_cost(int d, double qber) { return binary_entropy(qber) + qber * std::log2(d - 1.0); }

struct AnalyticKeyRate {
    double unclamped = 0.0;
    double clamped() const { return std::max(0.0, unclamped); }
};

inline AnalyticKeyRate analytic_key_rate(const JointOutcomeDistribution& distL, const JointOutcomeDistribution& distH,
                                         double qMU) {
    if (distL.dimension() != distH.dimension()) {
        throw std::invalid_argument("analytic_key_rate: basis distributions have different dimensions");
    }
    return {qMU - conditional_entropy(distH) - conditional_entropy(distL)};
}

/// Symmetric QBER in both bases.
inline AnalyticKeyRate analytic_key_rate(int d, double qber, double qMU) {
    const auto dist = JointOutcomeDistribution::symmetric(d, qber);
    return analytic_key_rate(dist, dist, qMU);
}

/// 1 - 2h(Q)
inline double bb84_key_rate(double qber) { return 1.0 - 2.0 * binary_entropy(qber); }

/// QBER at which the symmetric analytic rate crosses zero, by bisection on [0, 1/2].
inline double analytic_threshold(int d, double qMU, double tol = 1e-12) {
    double lo = 0.0;
    double hi = 0.5;
    if (analytic_key_rate(d, hi, qMU).unclamped > 0.0) return hi;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (analytic_key_rate(d, mid, qMU).unclamped > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace pmubqkd
