// Adaptive Simpson quadrature with an explicit convergence report.
//
// Works for scalar integrands and for vector-valued integrands held in a
// std::valarray<double>; the vector form refines until every component meets
// the tolerance, so a family of integrals sharing one expensive kernel costs a
// single pass.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <valarray>

namespace pmubqkd {

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
          achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

template <class T = double>
struct QuadratureResult {
    T value{};
    double error = 0.0;  ///< accumulated Richardson error estimate (max-norm for vectors)
    long evaluations = 0;
    bool converged = true;
};

struct SimpsonOptions {
    double abs_tol = 1e-9;
    int max_depth = 50;
    int min_depth = 4;  ///< forced bisections, guards against aliasing on the first panel
};

namespace detail {

inline double max_abs(double v) { return std::abs(v); }
inline double max_abs(const std::valarray<double>& v) { return v.size() == 0 ? 0.0 : std::abs(v).max(); }

template <class T, class F>
struct SimpsonState {
    F& f;
    const SimpsonOptions& opt;
    QuadratureResult<T> out;

    T recurse(double a, const T& fa, double b, const T& fb, double m, const T& fm, const T& whole, double tol,
              int depth) {
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const T flm = f(lm);
        const T frm = f(rm);
        out.evaluations += 2;
        T left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        T right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const T both = left + right;
        const T delta = both - whole;
        const double err = max_abs(delta);
        const double floor = 64.0 * std::numeric_limits<double>::epsilon() * max_abs(both);
        if ((depth >= opt.min_depth && err <= 15.0 * std::max(tol, floor)) || depth >= opt.max_depth) {
            if (depth >= opt.max_depth && err > 15.0 * std::max(tol, floor)) out.converged = false;
            out.error += err / 15.0;
            return both + delta / 15.0;
        }
        return recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1) +
               recurse(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1);
    }
};

}  // namespace detail

/// Integrates f over [a, b]; never throws, reports convergence in the result.
template <class F>
auto adaptive_simpson(F&& f, double a, double b, const SimpsonOptions& opt = {}) {
    using T = std::decay_t<decltype(f(a))>;
    detail::SimpsonState<T, F> st{f, opt, {}};
    const double m = 0.5 * (a + b);
    const T fa = f(a);
    const T fb = f(b);
    const T fm = f(m);
    st.out.evaluations = 3;
    if (a == b) {
        st.out.value = 0.0 * fa;
        return st.out;
    }
    const T whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    st.out.value = st.recurse(a, fa, b, fb, m, fm, whole, opt.abs_tol, 0);
    return st.out;
}

/// As adaptive_simpson, but throws QuadratureError on non-convergence.
template <class F>
auto integrate_or_throw(F&& f, double a, double b, const SimpsonOptions& opt = {}) {
    auto r = adaptive_simpson(std::forward<F>(f), a, b, opt);
    if (!r.converged) {
        throw QuadratureError("adaptive Simpson did not converge at max depth", r.error);
    }
    return r.value;
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod (7-point Gauss embedded in 15-point Kronrod), local
// bisection with the tolerance shared in proportion to interval length.

struct KronrodOptions {
    double abs_tol = 1e-9;
    int max_depth = 30;
};

namespace detail {

// QUADPACK qk15 abscissae and weights on [-1, 1].
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T, class F>
struct KronrodState {
    F& f;
    const KronrodOptions& opt;
    double total_length;
    QuadratureResult<T> out;

    T panel(double a, double b, double& err) {
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        const T fc = f(c);
        T kron = kWgk[7] * fc;
        T gauss = kWg[3] * fc;
        for (int j = 0; j < 7; ++j) {
            const T f1 = f(c - h * kXgk[j]);
            const T f2 = f(c + h * kXgk[j]);
            const T pair = f1 + f2;
            kron = kron + kWgk[j] * pair;
            if (j % 2 == 1) gauss = gauss + kWg[j / 2] * pair;
        }
        out.evaluations += 15;
        err = max_abs(T(h * (kron - gauss)));
        return T(h * kron);
    }

    T recurse(double a, double b, int depth) {
        double err = 0.0;
        T value = panel(a, b, err);
        const double tol = opt.abs_tol * (b - a) / total_length;
        const double floor = 64.0 * std::numeric_limits<double>::epsilon() * max_abs(value);
        if (err <= std::max(tol, floor) || depth >= opt.max_depth) {
            if (err > std::max(tol, floor)) out.converged = false;
            out.error += err;
            return value;
        }
        const double m = 0.5 * (a + b);
        return T(recurse(a, m, depth + 1) + recurse(m, b, depth + 1));
    }
};

}  // namespace detail

template <class F>
auto adaptive_kronrod(F&& f, double a, double b, const KronrodOptions& opt = {}) {
    using T = std::decay_t<decltype(f(a))>;
    detail::KronrodState<T, F> st{f, opt, std::abs(b - a), {}};
    if (a == b) {
        st.out.value = 0.0 * f(a);
        return st.out;
    }
    st.out.value = st.recurse(a, b, 0);
    return st.out;
}

template <class F>
auto kronrod_or_throw(F&& f, double a, double b, const KronrodOptions& opt = {}) {
    auto r = adaptive_kronrod(std::forward<F>(f), a, b, opt);
    if (!r.converged) {
        throw QuadratureError("adaptive Gauss-Kronrod did not converge at max depth", r.error);
    }
    return r.value;
}

}  // namespace pmubqkd
