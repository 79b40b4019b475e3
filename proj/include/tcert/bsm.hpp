#pragma once

#include "tcert/model.hpp"

namespace tcert {

/// Standard normal CDF via erfc, stable in both tails.
double normal_cdf(double x);

/// Black-Scholes-Merton call/put with flat rate and volatility.
double black_scholes(bool call, double s, double strike, double rate, double vol, double tau);

/// Frozen-regime price eta_i(t, s): the expectation of the discounted payoff
/// under regime i's constant coefficients over [t, T]. Vanilla payoffs with
/// d = 1 use the closed form with rate r(i) and vol sqrt(a_11(i)); everything
/// else goes through Gauss-Hermite quadrature against the lognormal
/// transition density. At t = T returns K(s) exactly. Throws
/// QuadratureDimension when d > 3 on the quadrature path.
double eta(const RegimeModel& model, const Payoff& payoff, double horizon, double t, const Vec& s,
           int i, int quad_order = 48);

/// Quadrature path regardless of payoff kind; the closed form and this
/// routine agree to quadrature accuracy for d = 1 vanillas.
double eta_quadrature(const RegimeModel& model, const Payoff& payoff, double horizon, double t,
                      const Vec& s, int i, int quad_order = 48);

}  // namespace tcert
