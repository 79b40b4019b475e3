#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "tcert/kernel.hpp"

using namespace tcert;

namespace {

/// Brute-force normalization oracle: tensor trapezoid of the density in log
/// coordinates over +-10 marginal standard deviations, independent of the
/// Gauss-Hermite machinery used elsewhere.
double trapezoid_mass(const RegimeModel& m, const Vec& s, int i, double v, int nodes) {
    const int d = m.d;
    std::vector<std::vector<double>> u(d);
    std::vector<double> du(d);
    for (int l = 0; l < d; ++l) {
        const double mean = std::log(s[l]) + (m.r[i] - 0.5 * m.a[i](l, l)) * v;
        const double sd = std::sqrt(v * m.a[i](l, l));
        u[l].resize(nodes);
        for (int n = 0; n < nodes; ++n)
            u[l][n] = mean - 10.0 * sd + 20.0 * sd * n / (nodes - 1);
        du[l] = u[l][1] - u[l][0];
    }
    std::vector<int> idx(d, 0);
    double mass = 0.0;
    for (;;) {
        Vec x(d);
        double w = 1.0;
        for (int l = 0; l < d; ++l) {
            x[l] = std::exp(u[l][idx[l]]);
            w *= du[l] * ((idx[l] == 0 || idx[l] == nodes - 1) ? 0.5 : 1.0) * x[l];
        }
        mass += w * transition_density(m, x, s, i, v);
        int l = d - 1;
        for (; l >= 0; --l) {
            if (++idx[l] < nodes) break;
            idx[l] = 0;
        }
        if (l < 0) break;
    }
    return mass;
}

}  // namespace

TEST_CASE("density value at the log-mean point of a unit lognormal") {
    const RegimeModel m = testing::single_regime(0.0, 1.0);
    Vec x(1), s(1);
    s << 1.0;
    x << std::exp(-0.5);
    // exp(1/2)/sqrt(2*pi)
    CHECK(transition_density(m, x, s, 0, 1.0) == doctest::Approx(0.65774).epsilon(1e-4));
    CHECK_THROWS_AS(transition_density(m, x, s, 0, 0.0), DegenerateTime);
    x << -1.0;
    CHECK_THROWS_AS(transition_density(m, x, s, 0, 1.0), NonPositiveCoordinate);
}

TEST_CASE("density normalizes to one for random parameter sets") {
    rng::Xoshiro256pp gen(11);
    for (int n = 0; n < 20; ++n) {
        const int d = 1 + n % 2;  // trapezoid oracle up to d=2 stays fast
        const RegimeModel m = testing::random_model(d, 1 + n % 3, gen);
        Vec s(d);
        for (int l = 0; l < d; ++l) s[l] = 0.5 + 2.0 * gen.next_double();
        const int i = n % m.k;
        const double v = 0.1 + gen.next_double();
        const double mass = trapezoid_mass(m, s, i, v, d == 1 ? 4001 : 521);
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("diagonal covariance factorizes the density") {
    RegimeModel m;
    m.d = 2;
    m.k = 1;
    m.r = {0.03};
    Mat sig = Mat::Zero(2, 2);
    sig(0, 0) = 0.2;
    sig(1, 1) = 0.35;
    m.sigma = {sig};
    m.lambda = Mat::Zero(1, 1);
    m = validate_model(std::move(m));

    RegimeModel m1 = testing::single_regime(0.03, 0.2);
    RegimeModel m2 = testing::single_regime(0.03, 0.35);

    Vec s(2), x(2);
    s << 1.0, 2.0;
    x << 1.3, 1.7;
    const double joint = transition_density(m, x, s, 0, 0.7);
    Vec s1(1), x1(1), s2(1), x2(1);
    s1 << s[0];
    x1 << x[0];
    s2 << s[1];
    x2 << x[1];
    const double product = transition_density(m1, x1, s1, 0, 0.7) *
                           transition_density(m2, x2, s2, 0, 0.7);
    CHECK(joint == doctest::Approx(product).epsilon(1e-12));
}

TEST_CASE("moment identity residual matches the closed-form targets") {
    SUBCASE("d=1, r=0.05, v=1 targets 1 + e^0.05") {
        const RegimeModel m = testing::single_regime(0.05, 0.3);
        Vec s(1);
        s << 1.0;
        CHECK(moment_identity_residual(m, s, 0, 1.0, 48) < 1e-8);
    }
    SUBCASE("zero rate leaves the mean at 1 + sum(s)") {
        const RegimeModel m = testing::single_regime(0.0, 0.4);
        Vec s(1);
        s << 2.5;
        CHECK(moment_identity_residual(m, s, 0, 0.8, 48) < 1e-8);
    }
    SUBCASE("d=2 with correlation") {
        const RegimeModel m = testing::multi_asset(2, 0.1, 0.3, 0.1);
        Vec s(2);
        s << 1.0, 2.0;
        CHECK(moment_identity_residual(m, s, 0, 0.5, 48) < 1e-8);
    }
}

TEST_CASE("moment identity residual stays under 1e-8 over random sets, d up to 3") {
    rng::Xoshiro256pp gen(23);
    for (int n = 0; n < 20; ++n) {
        const int d = 1 + n % 3;
        const RegimeModel m = testing::random_model(d, 1 + n % 2, gen);
        Vec s(d);
        for (int l = 0; l < d; ++l) s[l] = 0.5 + 3.0 * gen.next_double();
        CHECK(moment_identity_residual(m, s, n % m.k, 0.05 + gen.next_double(), 48) < 1e-8);
    }
}

TEST_CASE("sample_step collapses to the deterministic forward as vol -> 0") {
    const RegimeModel m = testing::single_regime(0.05, 1e-8);
    rng::Xoshiro256pp gen(3);
    Vec s(1);
    s << 100.0;
    const Vec x = sample_step(m, s, 0, 1.0, gen);
    CHECK(x[0] == doctest::Approx(100.0 * std::exp(0.05)).epsilon(1e-6));
}

TEST_CASE("sample_step mean matches the lognormal expectation within 4 SE") {
    const RegimeModel m = testing::single_regime(0.05, 0.2);
    rng::Xoshiro256pp gen(17);
    Vec s(1);
    s << 100.0;
    const long n = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (long p = 0; p < n; ++p) {
        const double x = sample_step(m, s, 0, 1.0, gen)[0];
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / (n - 1));
    const double target = 100.0 * std::exp(0.05);
    CHECK(std::abs(mean - target) <= 4.0 * se);
}

TEST_CASE("sample covariance of log-steps reproduces v a(i)") {
    const RegimeModel m = testing::multi_asset(2, 0.02, 0.25, 0.15);
    rng::Xoshiro256pp gen(29);
    Vec s(2);
    s << 1.0, 1.0;
    const double v = 0.5;
    const long n = 200000;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
    for (long p = 0; p < n; ++p) {
        const Vec x = sample_step(m, s, 0, v, gen);
        const Eigen::Vector2d z(std::log(x[0]), std::log(x[1]));
        mean += z;
        second += z * z.transpose();
    }
    mean /= n;
    const Eigen::Matrix2d cov = second / n - mean * mean.transpose();
    const Mat target = v * m.a[0];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            CHECK(cov(a, b) == doctest::Approx(target(a, b)).epsilon(0.02));
}

TEST_CASE("generator identity residual vanishes, d = 1") {
    const RegimeModel m = testing::single_regime(0.05, 0.4);
    Vec x(1), s(1);
    x << 1.7;
    s << 0.9;
    CHECK(generator_identity_residual(m, x, s, 0, 0.6) <= 1e-9);
}

TEST_CASE("generator identity residual vanishes at random points, d in {1,2,3}") {
    rng::Xoshiro256pp gen(31);
    for (int d = 1; d <= 3; ++d) {
        const RegimeModel m = testing::multi_asset(d, 0.04, 0.3, 0.12);
        double worst = 0.0;
        for (int n = 0; n < 100; ++n) {
            Vec x(d), s(d);
            for (int l = 0; l < d; ++l) {
                x[l] = 0.3 + 3.0 * gen.next_double();
                s[l] = 0.3 + 3.0 * gen.next_double();
            }
            worst = std::max(worst,
                             generator_identity_residual(m, x, s, 0, 0.05 + gen.next_double()));
        }
        CHECK(worst <= 1e-8);
    }
}

TEST_CASE("closed-form g1 and g2 agree with central differences of log alpha") {
    const RegimeModel m = testing::multi_asset(2, 0.07, 0.3, 0.2);
    rng::Xoshiro256pp gen(37);
    for (int n = 0; n < 25; ++n) {
        Vec x(2), s(2);
        for (int l = 0; l < 2; ++l) {
            x[l] = 0.5 + 2.0 * gen.next_double();
            s[l] = 0.5 + 2.0 * gen.next_double();
        }
        const double v = 0.2 + gen.next_double();
        const KernelDerivatives kd = kernel_derivatives(m, x, s, 0, v);

        const double hv = 1e-6 * v;
        const double g1_fd = (log_transition_density(m, x, s, 0, v + hv) -
                              log_transition_density(m, x, s, 0, v - hv)) /
                             (2.0 * hv);
        CHECK(kd.g1 == doctest::Approx(g1_fd).epsilon(1e-5));

        for (int l = 0; l < 2; ++l) {
            Vec sp = s, sm = s;
            const double hs = 1e-6 * s[l];
            sp[l] += hs;
            sm[l] -= hs;
            const double g2_fd = (log_transition_density(m, x, sp, 0, v) -
                                  log_transition_density(m, x, sm, 0, v)) /
                                 (2.0 * hs);
            CHECK(kd.g2[l] == doctest::Approx(g2_fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("tail domination: larger elapsed time dominates along a far ray") {
    const RegimeModel m = testing::single_regime(0.05, 0.3);
    Vec s(1), s2(1);
    s << 1.0;
    s2 << 1.3;
    const double v = 0.4, v2 = 0.7;
    bool beyond = false;
    for (int n = 0; n <= 400; ++n) {
        Vec x(1);
        x << std::exp(0.1 * n);
        const double gap = log_transition_density(m, x, s2, 0, v2) -
                           log_transition_density(m, x, s, 0, v);
        if (!beyond && gap > 0.0) beyond = true;
        if (beyond) CHECK(gap > 0.0);  // once dominated, stays dominated
    }
    CHECK(beyond);
}
