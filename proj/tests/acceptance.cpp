// Prints one PASS/FAIL line per acceptance criterion and exits nonzero if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "pmubqkd/apparatus.hpp"
#include "pmubqkd/figures.hpp"
#include "pmubqkd/presets.hpp"
#include "pmubqkd/protocol.hpp"

using namespace pmubqkd;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream time;
    time.precision(3);
    time << s << " s";
    if (s > budget_s) {
        v.pass = false;
        v.detail += "; exceeded the " + std::to_string(budget_s) + " s budget";
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  [" << id << "] " << title << " (" << time.str() << ")  " << v.detail
              << std::endl;
}

void info(const std::string& text) { std::cout << "      info: " << text << std::endl; }

std::string fmt(double x, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << x;
    return os.str();
}

double h2(double p) { return p <= 0.0 || p >= 1.0 ? 0.0 : -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

std::string run_cli(const std::string& args) {
    const fs::path out = fs::temp_directory_path() / ("pmubqkd_accept_" + std::to_string(::getpid()) + ".txt");
    const std::string cmd = "\"" PMUBQKD_CLI "\" " + args + " >\"" + out.string() + "\" 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream f(out, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    fs::remove(out);
    return "exit=" + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + "\n" + os.str();
}

}  // namespace

int main() {
    criterion(1, "U_LH reproduction, c = 3/8, qMU = 3 - log2 3", 1.0, [] {
        const auto p = build_pmub(3);
        const double s3 = std::sqrt(3.0);
        const cplx u[4][4] = {
            {{-1, 1}, {s3, s3}, {s3, -s3}, {-1, -1}},
            {{s3, s3}, {1, -1}, {1, 1}, {s3, -s3}},
            {{s3, -s3}, {1, 1}, {1, -1}, {s3, s3}},
            {{-1, -1}, {s3, -s3}, {s3, s3}, {-1, 1}},
        };
        double worst = 0.0;
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) worst = std::max(worst, std::abs(p.overlap(i, j) - u[i][j] / 4.0));
        }
        const double dc = std::abs(p.c - 0.375), dq = std::abs(p.qMU - (3.0 - std::log2(3.0)));
        const double eps = 4 * std::numeric_limits<double>::epsilon();
        return Verdict{worst <= 1e-12 && dc <= eps && dq <= eps,
                       "max |dU| = " + fmt(worst, 3) + ", c = " + fmt(p.c, 17) + ", qMU = " + fmt(p.qMU, 17)};
    });

    criterion(2, "mode-algebra properties for odd N <= 15 and 1000-state uncertainty check", 30.0, [] {
        double worst = 0.0;
        for (int N = 1; N <= 15; N += 2) {
            const auto p = build_pmub(N);
            const int d = N + 1;
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) {
                    const double want = i == j ? 1.0 : 0.0;
                    worst = std::max(worst, std::abs(p.basisL[i].inner(p.basisL[j]) - want));
                    worst = std::max(worst, std::abs(p.basisH[i].inner(p.basisH[j]) - want));
                }
            }
            for (int n = 0; n <= N; ++n) {
                double s = 0.0;
                for (int k = 0; k <= N; ++k) s += b_coeff(n, N - n, k) * b_coeff(n, N - n, k);
                worst = std::max(worst, std::abs(s - 1.0));
            }
            worst = std::max(worst, (p.overlap.adjoint() * p.overlap - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff());
        }
        const auto p = build_pmub(3);
        std::mt19937_64 gen(20241015);
        std::normal_distribution<double> g;
        int violations = 0;
        double slack = 1e9;
        for (int t = 0; t < 1000; ++t) {
            CVector psi(4);
            for (int k = 0; k < 4; ++k) psi(k) = cplx(g(gen), g(gen));
            psi.normalize();
            const double s = measurement_entropy(psi, p.basisL) + measurement_entropy(psi, p.basisH) - p.qMU;
            slack = std::min(slack, s);
            if (s < -1e-9) ++violations;
        }
        return Verdict{worst <= 1e-10 && violations == 0, "max deviation " + fmt(worst, 3) + ", violations " +
                                                              std::to_string(violations) + ", min slack " + fmt(slack, 4)};
    });

    criterion(3, "BB84 dual bound reproduces 1 - 2h(Q)", 120.0, [] {
        const auto p = build_pmub(3);
        bool ok = true;
        std::string detail;
        for (double q : {0.0, 0.02, 0.05, 0.08, 0.11}) {
            const auto s = numerical_key_rate(ConstraintPreset::BB84, q, p);
            const double exact = 1.0 - 2.0 * h2(q);
            ok = ok && std::abs(s.keyRate - exact) <= 0.02 && s.keyRate <= exact + 1e-3;
            detail += "Q=" + fmt(q, 2) + ": " + fmt(s.keyRate, 5) + " vs " + fmt(exact, 5) + "; ";
        }
        return Verdict{ok, detail};
    });

    criterion(4, "4-dimensional paper-eq10 curve dominates BB84 on [0.05, 0.15], theta +-0.1 rad shifts < 0.02", 300.0,
              [] {
                  const auto p = build_pmub(3);
                  const auto grid = uniform_grid(0.05, 0.15, 0.01);
                  const auto rows = key_rate_curve(ConstraintPreset::PaperEq10, p, grid);
                  const auto lo = key_rate_curve(ConstraintPreset::PaperEq10, p, grid, {}, p.theta - 0.1);
                  const auto hi = key_rate_curve(ConstraintPreset::PaperEq10, p, grid, {}, p.theta + 0.1);
                  bool dominates = true, stable = true;
                  int infeasible = 0;
                  double max_kappa = 0.0;
                  for (std::size_t i = 0; i < rows.size(); ++i) {
                      const auto& r = rows[i];
                      if (!r.highDim.feasible) ++infeasible;
                      max_kappa = std::max(max_kappa, r.highDim.kappa);
                      dominates = dominates && r.highDim.feasible && r.highDim.keyRate > r.bb84.keyRate;
                      for (const auto* alt : {&lo[i], &hi[i]}) {
                          stable = stable && alt->highDim.feasible && r.highDim.feasible &&
                                   std::abs(alt->highDim.keyRate - r.highDim.keyRate) < 0.02;
                      }
                  }
                  Verdict v{dominates && stable, ""};
                  if (infeasible > 0) {
                      v.detail = std::to_string(infeasible) + "/" + std::to_string(rows.size()) +
                                 " points infeasible: dual value up to " + fmt(max_kappa, 4) + " nats exceeds ln 4 = " +
                                 fmt(std::log(4.0), 4) + ", so no state has these correlations";
                  } else {
                      v.detail = std::string("dominates ") + (dominates ? "yes" : "no") + ", theta-stable " +
                                 (stable ? "yes" : "no");
                  }
                  const auto cal = key_rate_curve(ConstraintPreset::Calibrated, p, {0.05, 0.10, 0.15});
                  std::string c;
                  for (const auto& r : cal) {
                      c += "Q=" + fmt(r.qber, 2) + ": 4D " + fmt(r.highDim.keyRate, 4) + " vs BB84 " +
                           fmt(r.bb84.keyRate, 4) + "; ";
                  }
                  info("calibrated preset (gammas from the ideal state plus white noise): " + c);
                  return v;
              });

    criterion(5, "analytic anchors: K(0) = 1.41504, threshold 0.117", 1.0, [] {
        const auto p = build_pmub(3);
        const double k0 = analytic_key_rate(4, 0.0, p.qMU).unclamped;
        double lo = 0.0, hi = 0.5;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            (p.qMU - 2.0 * (h2(mid) + mid * std::log2(3.0)) > 0 ? lo : hi) = mid;
        }
        const double q = analytic_threshold(4, p.qMU);
        return Verdict{std::abs(k0 - 1.41504) <= 1e-5 && std::abs(q - 0.117) <= 0.002 && std::abs(q - lo) <= 1e-9,
                       "K(0) = " + fmt(k0, 8) + ", Q* = " + fmt(q, 6) + " (oracle " + fmt(lo, 6) + ")"};
    });

    double operating = 0.0;
    criterion(6, "retention curves: monotone, -> 1, reach 0.88 +- 0.06, conserved within 1e-4", 300.0, [&] {
        const auto modes = protocol_channel_modes();
        const auto ratios = uniform_grid(0.0, 0.15, 0.005);
        const auto table = retention_table(modes, 0.01, ratios, 40, default_threads());
        bool monotone = true, starts_at_one = true, conserved = true;
        std::vector<bool> reaches(modes.size(), false);
        double worst_cons = 0.0;
        for (std::size_t k = 0; k < modes.size(); ++k) {
            double prev = 2.0;
            for (std::size_t i = 0; i < ratios.size(); ++i) {
                const auto& r = table[i * modes.size() + k];
                if (!(r.mode == modes[k]) || r.ratio != ratios[i]) throw std::logic_error("table order");
                monotone = monotone && r.retained <= prev;
                prev = r.retained;
                if (i == 0) starts_at_one = starts_at_one && std::abs(r.retained - 1.0) <= 1e-3;
                if (std::abs(r.retained - 0.88) <= 0.06) reaches[k] = true;
                worst_cons = std::max(worst_cons, std::abs(r.total - 1.0));
            }
        }
        conserved = worst_cons <= 1e-4;
        const bool all_reach = std::all_of(reaches.begin(), reaches.end(), [](bool b) { return b; });
        operating = operating_ratio(modes, 0.01, 0.88);
        return Verdict{monotone && starts_at_one && all_reach && conserved,
                       "monotone " + std::string(monotone ? "yes" : "no") + ", max |sum - 1| = " + fmt(worst_cons, 3) +
                           ", mean retention 0.88 at ratio " + fmt(operating, 6)};
    });

    criterion(7, "turbulence QBER at the operating point: 0.12 +- 0.06 with nonzero spread", 120.0, [&] {
        const auto modes = protocol_channel_modes();
        if (operating == 0.0) operating = operating_ratio(modes, 0.01, 0.88);
        const auto est = channel_qber(modes, TurbulenceParams::from_ratio(operating, modes.front(), 0.01), default_threads());
        std::string per;
        for (double q : est.per_mode) per += fmt(q, 5) + " ";
        return Verdict{std::abs(est.Q - 0.12) <= 0.06 && est.spread > 0.0,
                       "Q = " + fmt(est.Q, 6) + ", spread = " + fmt(est.spread, 4) + ", per mode " + per};
    });

    criterion(8, "10^6-round session at Q = 0.12: sifting, per-basis QBER, Born-rule chi-square", 60.0, [] {
        const auto p = build_pmub(3);
        ProtocolConfig cfg;
        cfg.rounds = 1000000;
        cfg.seed = 2024;
        cfg.channel = SymmetricChannel{0.12};
        const auto s = run_session(cfg, p, default_threads());
        const auto& st = s.sifted.stats;
        const double n = 1e6;
        const bool sift_ok = std::abs(st.siftedFraction - 0.5) <= 5 * std::sqrt(0.25 / n);
        const bool ql = std::abs(st.qberL - 0.12) <= 5 * std::sqrt(0.12 * 0.88 / static_cast<double>(st.keptL));
        const bool qh = std::abs(st.qberH - 0.12) <= 5 * std::sqrt(0.12 * 0.88 / static_cast<double>(st.keptH));
        // mismatched rounds: Bob's outcome law is the channel followed by |U|^2
        std::vector<std::vector<long>> counts(8, std::vector<long>(4, 0));
        for (const auto& r : s.records) {
            if (r.pA == r.pB || r.d_out < 0) continue;
            ++counts[static_cast<std::size_t>(r.a + 4 * static_cast<int>(r.pA))][static_cast<std::size_t>(r.d_out)];
        }
        double chi2 = 0.0;
        int dof = 0;
        for (int g = 0; g < 8; ++g) {
            const int a = g % 4, basis = g / 4;
            long total = 0;
            for (long c : counts[static_cast<std::size_t>(g)]) total += c;
            for (int j = 0; j < 4; ++j) {
                double e = 0.0;
                for (int k = 0; k < 4; ++k) e += (k == a ? 0.88 : 0.04) * p.transition_probability(basis, k, j);
                e *= static_cast<double>(total);
                const double o = static_cast<double>(counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)]);
                chi2 += (o - e) * (o - e) / e;
            }
            dof += 3;
        }
        const double pval = boost::math::gamma_q(dof / 2.0, chi2 / 2.0);
        return Verdict{sift_ok && ql && qh && pval > 0.001,
                       "sifted " + fmt(st.siftedFraction, 6) + ", QBER L " + fmt(st.qberL, 5) + " H " + fmt(st.qberH, 5) +
                           ", chi2 = " + fmt(chi2, 4) + " on " + std::to_string(dof) + " dof, p = " + fmt(pval, 3)};
    });

    criterion(9, "apparatus mapping and sorter port rules", 1.0, [] {
        const auto traced = apparatus_pipeline(fig2_sources(), fig2_stages());
        const std::vector<std::pair<int, int>> want{{0, 3}, {0, -3}, {1, 1}, {1, -1}};
        const bool mapping = channel_modes(traced) == want;
        bool rules = true;
        for (int w = -4; w <= 4; ++w) {
            rules = rules && sorter_route(8 * w, PiFraction::make(1, 4)) == Port::A &&
                    sorter_route(8 * w + 4, PiFraction::make(1, 4)) == Port::B &&
                    sorter_route(4 * w, PiFraction::make(1, 2)) == Port::A &&
                    sorter_route(4 * w + 2, PiFraction::make(1, 2)) == Port::B;
        }
        std::string got;
        for (const auto& [pp, l] : channel_modes(traced)) got += "(" + std::to_string(pp) + "," + std::to_string(l) + ") ";
        return Verdict{mapping && rules, "channel modes " + got + "; port rules " + (rules ? "hold" : "broken")};
    });

    criterion(10, "seeded commands produce byte-identical envelopes", 120.0, [] {
        bool same = true;
        std::string detail;
        for (const std::string args : {"simulate --rounds 100000 --qber 0.12 --seed 31",
                                       "figure fig5 --samples 50 --seed 8",
                                       "keyrate numerical --preset calibrated --qber 0.08 --seed 5"}) {
            const auto a = run_cli(args + " --threads 1");
            const auto b = run_cli(args + " --threads 2");
            const bool eq = a == b && a.rfind("exit=0\n", 0) == 0 && a.size() > 20;
            same = same && eq;
            detail += args.substr(0, args.find(" --")) + (eq ? " identical; " : " DIFFERS; ");
        }
        return Verdict{same, detail};
    });

    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criterion/criteria failed")
              << std::endl;
    return failures == 0 ? 0 : 1;
}
