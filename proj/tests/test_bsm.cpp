#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "tcert/bsm.hpp"

using namespace tcert;

TEST_CASE("at-the-money call reproduces the reference value 10.4506") {
    const RegimeModel m = testing::single_regime(0.05, 0.2);
    const Payoff call = Payoff::vanilla_call(100.0);
    Vec s(1);
    s << 100.0;
    CHECK(eta(m, call, 1.0, 0.0, s, 0) == doctest::Approx(10.4506).epsilon(1e-5));
}

TEST_CASE("eta at t = T returns the payoff exactly") {
    const RegimeModel m = testing::two_regime();
    const Payoff call = Payoff::vanilla_call(100.0);
    Vec s(1);
    s << 123.456;
    const double k_at_s = evaluate_payoff(call, s);
    CHECK(eta(m, call, 1.0, 1.0, s, 0) == k_at_s);
    CHECK(eta(m, call, 1.0, 1.0, s, 1) == k_at_s);
}

TEST_CASE("zero-volatility limit is the discounted forward intrinsic") {
    const RegimeModel m = testing::single_regime(0.05, 1e-8);
    const Payoff call = Payoff::vanilla_call(100.0);
    Vec s(1);
    s << 100.0;
    const double expected = 100.0 - 100.0 * std::exp(-0.05);
    CHECK(eta(m, call, 1.0, 0.0, s, 0) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(eta_quadrature(m, call, 1.0, 0.0, s, 0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("put-call parity: closed form to 1e-10, quadrature to 1e-6") {
    const RegimeModel m = testing::single_regime(0.03, 0.25);
    const Payoff call = Payoff::vanilla_call(90.0);
    const Payoff put = Payoff::vanilla_put(90.0);
    for (double spot : {60.0, 90.0, 140.0}) {
        Vec s(1);
        s << spot;
        const double parity = spot - 90.0 * std::exp(-0.03 * 0.75);
        const double cf = eta(m, call, 1.0, 0.25, s, 0) - eta(m, put, 1.0, 0.25, s, 0);
        CHECK(cf == doctest::Approx(parity).epsilon(1e-10));
        const double qd =
            eta_quadrature(m, call, 1.0, 0.25, s, 0) - eta_quadrature(m, put, 1.0, 0.25, s, 0);
        CHECK(qd == doctest::Approx(parity).epsilon(1e-6));
    }
}

TEST_CASE("closed form and quadrature agree to 1e-6 relative") {
    const RegimeModel m = testing::two_regime();
    const Payoff call = Payoff::vanilla_call(100.0);
    const Payoff put = Payoff::vanilla_put(100.0);
    for (double spot : {70.0, 100.0, 150.0}) {
        Vec s(1);
        s << spot;
        for (int i = 0; i < 2; ++i) {
            const double cf = eta(m, call, 1.0, 0.0, s, i);
            CHECK(eta_quadrature(m, call, 1.0, 0.0, s, i) ==
                  doctest::Approx(cf).epsilon(1e-6));
            const double pf = eta(m, put, 1.0, 0.0, s, i);
            CHECK(eta_quadrature(m, put, 1.0, 0.0, s, i) == doctest::Approx(pf).epsilon(1e-6));
        }
    }
}

TEST_CASE("eta is nonnegative and inside the grown linear envelope") {
    const RegimeModel m = testing::two_regime();
    const Payoff call = Payoff::vanilla_call(100.0);
    for (int i = 0; i < 2; ++i)
        for (double t : {0.0, 0.4, 0.9})
            for (double spot = 10.0; spot <= 400.0; spot *= 1.5) {
                Vec s(1);
                s << spot;
                const double value = eta(m, call, 1.0, t, s, i);
                CHECK(value >= 0.0);
                // k1 + k2.s e^{r tau} envelope from the lognormal mean
                CHECK(value <= 0.0 + spot * std::exp(m.r[i] * (1.0 - t)) + 1e-9);
            }
}

TEST_CASE("two-asset basket eta via quadrature is finite and bracketed") {
    const RegimeModel m = testing::multi_asset(2, 0.05, 0.25, 0.1);
    Vec w(2);
    w << 0.5, 0.5;
    const Payoff basket = Payoff::basket_call(w, 100.0);
    Vec s(2);
    s << 100.0, 100.0;
    const double v = eta(m, basket, 1.0, 0.0, s, 0);
    CHECK(v > 0.0);
    CHECK(v < 100.0);

    const RegimeModel m4 = testing::multi_asset(4, 0.05, 0.25, 0.0);
    Vec w4 = Vec::Constant(4, 0.25);
    Vec s4 = Vec::Constant(4, 100.0);
    CHECK_THROWS_AS(eta(m4, Payoff::basket_call(w4, 100.0), 1.0, 0.0, s4, 0),
                    QuadratureDimension);
}
