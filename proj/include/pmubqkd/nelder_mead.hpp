#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace pmubqkd {

struct NelderMeadOptions {
    double initial_step = 0.5;
    double diameter_tol = 1e-7;  ///< stop when every vertex lies within this distance of the best
    long max_evaluations = 20000;
    /// Stop as soon as any evaluation reaches f <= target.
    double target = -std::numeric_limits<double>::infinity();
};

struct NelderMeadResult {
    std::vector<double> x;
    double fx = 0.0;
    long evaluations = 0;
    bool converged = false;
    bool reached_target = false;
};

/// Minimizes f from x0 with the standard reflect/expand/contract/shrink moves.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                    const std::vector<double>& x0, const NelderMeadOptions& opt = {}) {
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> fv(n + 1);
    long evals = 0;
    bool hit = false;
    std::vector<double> hit_x;
    double hit_f = 0.0;
    auto eval = [&](const std::vector<double>& x) {
        ++evals;
        const double v = f(x);
        if (!hit && v <= opt.target) {
            hit = true;
            hit_x = x;
            hit_f = v;
        }
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += opt.initial_step;
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);
    if (hit) return {hit_x, hit_f, evals, false, true};

    std::vector<std::size_t> order(n + 1);
    auto diameter = [&](std::size_t best) {
        double dmax = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += std::pow(simplex[i][k] - simplex[best][k], 2);
            dmax = std::max(dmax, std::sqrt(s));
        }
        return dmax;
    };

    bool converged = false;
    std::vector<double> centroid(n), trial(n), trial2(n);
    while (true) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[n];
        const std::size_t second = order[n - (n > 0 ? 1 : 0)];
        if (n == 0 || diameter(best) < opt.diameter_tol) {
            converged = true;
            break;
        }
        if (evals >= opt.max_evaluations || hit) break;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < n; ++k) centroid[k] += simplex[i][k] / static_cast<double>(n);
        }
        auto along = [&](double t, std::vector<double>& out) {
            for (std::size_t k = 0; k < n; ++k) out[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
        };

        along(-1.0, trial);
        const double fr = eval(trial);
        if (fr < fv[best]) {
            along(-2.0, trial2);
            const double fe = eval(trial2);
            if (fe < fr) {
                simplex[worst] = trial2;
                fv[worst] = fe;
            } else {
                simplex[worst] = trial;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = trial;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        along(outside ? -0.5 : 0.5, trial2);
        const double fc = eval(trial2);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = trial2;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < n; ++k) simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            fv[i] = eval(simplex[i]);
        }
    }
    if (hit) return {hit_x, hit_f, evals, false, true};
    const auto it = std::min_element(fv.begin(), fv.end());
    const auto idx = static_cast<std::size_t>(it - fv.begin());
    return {simplex[idx], fv[idx], evals, converged, false};
}

}  // namespace pmubqkd
