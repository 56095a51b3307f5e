#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pmubqkd/mode_algebra.hpp"

using namespace pmubqkd;

namespace {

using cld = std::complex<long double>;

long double factorial(int n) {
    long double f = 1.0L;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

// Coefficients of (1 - t)^n (1 + t)^m by repeated polynomial multiplication.
std::vector<long double> poly_expand(int n, int m) {
    std::vector<long double> p{1.0L};
    auto times = [&p](long double s) {
        std::vector<long double> q(p.size() + 1, 0.0L);
        for (std::size_t i = 0; i < p.size(); ++i) {
            q[i] += p[i];
            q[i + 1] += s * p[i];
        }
        p = q;
    };
    for (int i = 0; i < n; ++i) times(-1.0L);
    for (int i = 0; i < m; ++i) times(1.0L);
    return p;
}

long double b_oracle(int n, int m, int k) {
    const int N = n + m;
    const auto c = poly_expand(n, m);
    return std::sqrt(factorial(N - k) * factorial(k) / (std::pow(2.0L, N) * factorial(n) * factorial(m))) *
           c[static_cast<std::size_t>(k)];
}

}  // namespace

TEST(ModeIndex, PlRoundTrip) {
    for (int n = 0; n <= 12; ++n) {
        for (int m = 0; m <= 12; ++m) {
            const auto a = ModeIndex::from_nm(n, m);
            EXPECT_EQ(a.order() - std::abs(a.azimuthal()), 2 * a.radial());
            EXPECT_EQ(ModeIndex::from_pl(a.radial(), a.azimuthal()), a);
        }
    }
    EXPECT_THROW(ModeIndex::from_nm(-1, 2), std::invalid_argument);
    EXPECT_THROW(ModeIndex::from_pl(-1, 0), std::invalid_argument);
}

TEST(BCoeff, ListedValues) {
    EXPECT_DOUBLE_EQ(b_coeff(0, 0, 0), 1.0);
    EXPECT_NEAR(b_coeff(0, 1, 0), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_EQ(b_coeff(1, 1, 1), 0.0);
    EXPECT_NEAR(b_coeff(0, 3, 0), std::sqrt(1.0 / 8.0), 1e-15);
    EXPECT_THROW(b_coeff(1, 1, 3), std::invalid_argument);
    EXPECT_THROW(b_coeff(1, 1, -1), std::invalid_argument);
}

TEST(BCoeff, MatchesFactorialOracle) {
    for (int N = 0; N <= 20; ++N) {
        for (int n = 0; n <= N; ++n) {
            for (int k = 0; k <= N; ++k) {
                EXPECT_NEAR(b_coeff(n, N - n, k), static_cast<double>(b_oracle(n, N - n, k)), 1e-12)
                    << "n=" << n << " m=" << N - n << " k=" << k;
            }
        }
    }
}

TEST(BCoeff, ExchangeSymmetryInMagnitude) {
    for (int N = 0; N <= 10; ++N) {
        for (int n = 0; n <= N; ++n) {
            for (int k = 0; k <= N; ++k) {
                EXPECT_NEAR(std::abs(b_coeff(n, N - n, k)), std::abs(b_coeff(N - n, n, N - k)), 1e-14);
            }
        }
    }
}

TEST(BCoeff, SquaresSumToOne) {
    for (int N = 0; N <= 15; ++N) {
        for (int n = 0; n <= N; ++n) {
            double s = 0.0;
            for (int k = 0; k <= N; ++k) s += b_coeff(n, N - n, k) * b_coeff(n, N - n, k);
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(BCoeff, StaysExactNearCeiling) {
    // the oracle in long double is good to ~1e-15 here; naive double factorials are not
    for (int n = 0; n <= 25; n += 5) {
        double s = 0.0;
        for (int k = 0; k <= 25; ++k) {
            const double b = b_coeff(n, 25 - n, k);
            EXPECT_NEAR(b, static_cast<double>(b_oracle(n, 25 - n, k)), 1e-12);
            s += b * b;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Expansions, ListedStates) {
    const double r = 1.0 / std::sqrt(2.0);
    const auto g = lg_in_hg(ModeIndex::from_nm(0, 0));
    ASSERT_EQ(g.amplitudes.size(), 1u);
    EXPECT_NEAR(std::abs(g.amplitudes[0] - cplx(1, 0)), 0.0, 1e-15);

    const auto l01 = lg_in_hg(ModeIndex::from_nm(0, 1));
    EXPECT_NEAR(std::abs(l01.amplitudes[0] - cplx(r, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(l01.amplitudes[1] - cplx(0, r)), 0.0, 1e-15);

    const auto l03 = lg_in_hg(ModeIndex::from_nm(0, 3));
    const double mags[] = {1.0 / 8, 3.0 / 8, 3.0 / 8, 1.0 / 8};
    const cplx phases[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(std::norm(l03.amplitudes[k]), mags[k], 1e-15);
        EXPECT_NEAR(std::abs(l03.amplitudes[k] / std::abs(l03.amplitudes[k]) - phases[k]), 0.0, 1e-14);
    }

    const auto h01 = hg45_in_hg(ModeIndex::from_nm(0, 1));
    EXPECT_NEAR(std::abs(h01.amplitudes[0] - cplx(r, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(h01.amplitudes[1] - cplx(r, 0)), 0.0, 1e-15);

    const auto h11 = hg45_in_hg(ModeIndex::from_nm(1, 1));
    EXPECT_NEAR(h11.amplitudes[0].real(), r, 1e-15);
    EXPECT_EQ(h11.amplitudes[1], cplx(0, 0));
    EXPECT_NEAR(h11.amplitudes[2].real(), -r, 1e-15);
}

TEST(Pmub, ReproducesPrintedOverlapForOrderThree) {
    const auto p = build_pmub(3);
    const double s3 = std::sqrt(3.0);
    // printed matrix, times 1/4
    const cplx U[4][4] = {
        {{-1, 1}, {s3, s3}, {s3, -s3}, {-1, -1}},
        {{s3, s3}, {1, -1}, {1, 1}, {s3, -s3}},
        {{s3, -s3}, {1, 1}, {1, -1}, {s3, s3}},
        {{-1, -1}, {s3, -s3}, {s3, s3}, {-1, 1}},
    };
    ASSERT_EQ(p.overlap.rows(), 4);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            EXPECT_NEAR(std::abs(p.overlap(i, j) - U[i][j] / 4.0), 0.0, 1e-12) << i << "," << j;
        }
    }
    EXPECT_NEAR(p.c, 3.0 / 8.0, 4 * std::numeric_limits<double>::epsilon());
    EXPECT_NEAR(p.qMU, 3.0 - std::log2(3.0), 4 * std::numeric_limits<double>::epsilon());
    EXPECT_NEAR(p.theta, std::acos(std::sqrt(2.0) / 4.0), 1e-14);
    EXPECT_NEAR(std::sin(p.theta), std::sqrt(7.0 / 8.0), 1e-14);
}

TEST(Pmub, OrderOneIsFullyUnbiased) {
    const auto p = build_pmub(1);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::norm(p.overlap(i, j)), 0.5, 1e-12);
    }
    EXPECT_NEAR(p.c, 0.5, 1e-15);
    EXPECT_NEAR(p.qMU, 1.0, 1e-14);
}

TEST(Pmub, RejectsEvenOrNonpositiveOrder) {
    for (int n : {0, -1, 2, 4, 26, 27}) EXPECT_THROW(build_pmub(n), std::invalid_argument) << n;
}

TEST(Pmub, BasesOrthonormalAndOverlapUnitaryUpToFifteen) {
    for (int N = 1; N <= 15; N += 2) {
        const auto p = build_pmub(N);
        const int d = N + 1;
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                const cplx gl = p.basisL[i].inner(p.basisL[j]);
                const cplx gh = p.basisH[i].inner(p.basisH[j]);
                const double want = i == j ? 1.0 : 0.0;
                EXPECT_NEAR(std::abs(gl - want), 0.0, 1e-10);
                EXPECT_NEAR(std::abs(gh - want), 0.0, 1e-10);
            }
        }
        const CMatrix uu = p.overlap * p.overlap.adjoint();
        EXPECT_LT((uu - CMatrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10) << "N=" << N;
        EXPECT_GE(p.c, 1.0 / d - 1e-12);
        EXPECT_LE(p.c, 1.0);
        EXPECT_DOUBLE_EQ(p.qMU, std::log2(1.0 / p.c));
    }
}

TEST(Pmub, OverlapRowsExpandBasisL) {
    // L = U H: each LG state equals sum_j U_ij h_j
    const auto p = build_pmub(5);
    for (int i = 0; i < 6; ++i) {
        CVector v = CVector::Zero(6);
        for (int j = 0; j < 6; ++j) v += p.overlap(i, j) * p.basisH[j].as_vector();
        EXPECT_LT((v - p.basisL[i].as_vector()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Uncertainty, RandomStatesRespectOverlapBound) {
    const auto p = build_pmub(3);
    std::mt19937_64 gen(20241015);
    std::normal_distribution<double> g;
    int violations = 0;
    double worst = 1e9;
    for (int trial = 0; trial < 1000; ++trial) {
        CVector psi(4);
        for (int k = 0; k < 4; ++k) psi(k) = cplx(g(gen), g(gen));
        psi.normalize();
        const double s = measurement_entropy(psi, p.basisL) + measurement_entropy(psi, p.basisH);
        worst = std::min(worst, s - p.qMU);
        if (s < p.qMU - 1e-9) ++violations;
    }
    EXPECT_EQ(violations, 0) << "worst slack " << worst;
}

TEST(Uncertainty, BasisStatesNearlySaturate) {
    // an L eigenstate has zero L entropy and H entropy >= qMU
    const auto p = build_pmub(3);
    for (const auto& l : p.basisL) {
        EXPECT_NEAR(measurement_entropy(l.as_vector(), p.basisL), 0.0, 1e-12);
        EXPECT_GE(measurement_entropy(l.as_vector(), p.basisH), p.qMU - 1e-12);
    }
}

namespace {

// HG_{a,b} rotated by 45 degrees, evaluated directly in rotated coordinates.
// The first index runs along x - y, the orientation that yields the listed U_LH phases.
double rotated_hg_intensity(int a, int b, double w, double x, double y) {
    const double u = (x - y) / std::sqrt(2.0);
    const double v = (x + y) / std::sqrt(2.0);
    auto psi = [](int n, double s) {
        const double h = std::hermite(static_cast<unsigned>(n), s);
        return h * std::exp(-0.5 * s * s) / std::sqrt(std::pow(2.0, n) * std::tgamma(n + 1.0) * std::sqrt(M_PI));
    };
    const double f = psi(a, std::sqrt(2.0) * u / w) * psi(b, std::sqrt(2.0) * v / w);
    return f * f;
}

}  // namespace

TEST(Render, GaussianPeaksAtCentre) {
    const auto img = render_intensity(lg_in_hg(ModeIndex::from_nm(0, 0)), 1e-3, {65, 0.0});
    EXPECT_DOUBLE_EQ(img.at(32, 32), 1.0);
    EXPECT_NEAR(img.x(32), 0.0, 1e-18);
    EXPECT_NEAR(img.y(32), 0.0, 1e-18);
}

TEST(Render, VortexHasCentralNullAndRingSymmetry) {
    const auto img = render_intensity(lg_in_hg(ModeIndex::from_nm(0, 3)), 1e-3, {65, 0.0});
    EXPECT_LT(img.at(32, 32), 1e-6);
    // four-fold grid symmetry of a rotationally symmetric pattern
    for (int r = 0; r < 65; r += 7) {
        for (int c = 0; c < 65; c += 5) {
            EXPECT_NEAR(img.at(r, c), img.at(c, 64 - r), 1e-12);
            EXPECT_NEAR(img.at(r, c), img.at(64 - r, 64 - c), 1e-12);
        }
    }
}

TEST(Render, RotatedHermiteMatchesDirectField) {
    const double w = 1e-3;
    const auto mode = ModeIndex::from_nm(0, 3);
    const auto img = render_intensity(hg45_in_hg(mode), w, {65, 0.0});
    double peak = 0.0;
    std::vector<double> direct(65 * 65);
    for (int r = 0; r < 65; ++r) {
        for (int c = 0; c < 65; ++c) {
            direct[r * 65 + c] = rotated_hg_intensity(mode.n(), mode.m(), w, img.x(c), img.y(r));
            peak = std::max(peak, direct[r * 65 + c]);
        }
    }
    for (int r = 0; r < 65; ++r) {
        for (int c = 0; c < 65; ++c) EXPECT_NEAR(img.at(r, c), direct[r * 65 + c] / peak, 1e-9);
    }
    // the line y = -x (pixels (i, i)) is a node of psi_3; the line y = x is not
    for (int i = 0; i < 65; i += 3) EXPECT_LT(img.at(i, i), 1e-12);
    EXPECT_GT(img.at(26, 38), 0.5);
}

TEST(Render, RejectsBadArguments) {
    const auto s = lg_in_hg(ModeIndex::from_nm(0, 1));
    EXPECT_THROW(render_intensity(s, 0.0, {65, 0.0}), std::invalid_argument);
    EXPECT_THROW(render_intensity(s, 1e-3, {15, 0.0}), std::invalid_argument);
}
