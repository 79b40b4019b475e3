#pragma once

#include "tcert/model.hpp"
#include "tcert/rng.hpp"

namespace tcert {

/// Frozen-regime transition ingredients for elapsed time v in regime i:
/// the log-space covariance S = v·a(i), its Cholesky factor, and the drift
/// shift applied to ln(s).
struct KernelParams {
    int regime;
    double v;
    Mat cov;        // v a(i)
    Mat chol;       // lower factor of cov
    Vec log_shift;  // component l: (r(i) - a_ll(i)/2) v

    KernelParams(const RegimeModel& model, int regime, double v);
};

/// Natural log of the lognormal transition density α(x, s, i, v). Working in
/// log space keeps small-v evaluations away from determinant underflow.
double log_transition_density(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                              double v);

/// α(x, s, i, v) itself. Throws DegenerateTime for v <= 0 and
/// NonPositiveCoordinate for nonpositive x or s entries.
double transition_density(const RegimeModel& model, const Vec& x, const Vec& s, int i, double v);

/// |GH quadrature of ∫ (1 + Σ x_l) α(x,s,i,v) dx  -  (1 + Σ s_l e^{r(i)v})|.
/// Converges to zero with the quadrature order; QuadratureDivergence if the
/// nodes produce non-finite values.
double moment_identity_residual(const RegimeModel& model, const Vec& s, int i, double v,
                                int quad_order);

/// One frozen-regime lognormal step: x = exp(Z), Z ~ N(ln s + shift, v a(i)).
Vec sample_step(const RegimeModel& model, const Vec& s, int i, double v, rng::Xoshiro256pp& gen);

/// Closed forms of the density's logarithmic derivatives: g1 = (∂α/∂v)/α and
/// g2_l = (∂α/∂s_l)/α, plus ∂g2_l/∂s_m. Exposed for the residual check and
/// the finite-difference cross-tests.
struct KernelDerivatives {
    double g1;
    Vec g2;
    Mat dg2_ds;  // (l, m) entry: ∂g2_l/∂s_m
};
KernelDerivatives kernel_derivatives(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                                     double v);

/// Absolute value of the generator bracket
///   -g1 + r(i) Σ_l s_l g2_l + 1/2 Σ_l Σ_m s_l s_m a_lm (∂g2_l/∂s_m + g2_l g2_m),
/// which vanishes identically; the return is the numerical residual.
double generator_identity_residual(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                                   double v);

}  // namespace tcert
