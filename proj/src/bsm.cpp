#include "tcert/bsm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tcert/gauss_hermite.hpp"

namespace tcert {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double black_scholes(bool call, double s, double strike, double rate, double vol, double tau) {
    if (tau <= 0.0) {
        const double intrinsic = call ? s - strike : strike - s;
        return std::max(intrinsic, 0.0);
    }
    const double df = std::exp(-rate * tau);
    if (vol * std::sqrt(tau) < 1e-12) {
        const double fwd = s / df;
        const double intrinsic = call ? fwd - strike : strike - fwd;
        return df * std::max(intrinsic, 0.0);
    }
    const double sd = vol * std::sqrt(tau);
    const double d1 = (std::log(s / strike) + (rate + 0.5 * vol * vol) * tau) / sd;
    const double d2 = d1 - sd;
    if (call) return s * normal_cdf(d1) - strike * df * normal_cdf(d2);
    return strike * df * normal_cdf(-d2) - s * normal_cdf(-d1);
}

namespace {

/// One-dimensional expectation in z = ln x with Gauss-Legendre panels split
/// at the payoff kinks; each panel's integrand is smooth, so the 1e-6
/// closed-form agreement contract is met where plain Gauss-Hermite would
/// stall on the kink.
double eta_quadrature_1d(const RegimeModel& model, const Payoff& payoff, double tau, double s,
                         int i) {
    const double mean = std::log(s) + (model.r[i] - 0.5 * model.a[i](0, 0)) * tau;
    const double sd = std::sqrt(model.a[i](0, 0) * tau);
    const double z_lo = mean - 10.0 * sd, z_hi = mean + 10.0 * sd;

    std::vector<double> cuts{z_lo, z_hi};
    const double w = payoff.weights.size() > 0 ? payoff.weights[0] : 1.0;
    auto add_kink = [&](double basket) {
        if (basket <= 0.0) return;
        const double z = std::log(basket / w);
        if (z > z_lo && z < z_hi) cuts.push_back(z);
    };
    if (payoff.kind == PayoffKind::CustomTable)
        for (const auto& kv : payoff.table) add_kink(kv.first);
    else
        add_kink(payoff.strike);
    std::sort(cuts.begin(), cuts.end());

    const auto& gl = GaussLegendre::cached(48);
    const double inv_norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
    double acc = 0.0;
    Vec x(1);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        // subdivide long panels so the Gaussian factor is well resolved
        const int sub = std::max(1, static_cast<int>(std::ceil((cuts[c + 1] - cuts[c]) / sd)));
        for (int p = 0; p < sub; ++p) {
            const double a = cuts[c] + (cuts[c + 1] - cuts[c]) * p / sub;
            const double b = cuts[c] + (cuts[c + 1] - cuts[c]) * (p + 1) / sub;
            const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
                const double z = mid + half * gl.nodes[q];
                x[0] = std::exp(z);
                const double dev = (z - mean) / sd;
                acc += half * gl.weights[q] * evaluate_payoff(payoff, x) * inv_norm *
                       std::exp(-0.5 * dev * dev);
            }
        }
    }
    return std::exp(-model.r[i] * tau) * acc;
}

}  // namespace

double eta_quadrature(const RegimeModel& model, const Payoff& payoff, double horizon, double t,
                      const Vec& s, int i, int quad_order) {
    const double tau = horizon - t;
    if (tau <= 0.0) return evaluate_payoff(payoff, s);
    if (model.d > 3)
        throw QuadratureDimension("tensor quadrature supports d <= 3; use the MC pricer");
    if (model.d == 1) return eta_quadrature_1d(model, payoff, tau, s[0], i);
    Vec mean(model.d);
    for (int l = 0; l < model.d; ++l)
        mean[l] = std::log(s[l]) + (model.r[i] - 0.5 * model.a[i](l, l)) * tau;
    const Mat chol = std::sqrt(tau) * model.chol_a[i];
    GaussianExpectation quad(model.d, quad_order);
    const double expectation = quad.integrate(mean, chol, [&](const Vec& z) {
        Vec x = z.array().exp().matrix();
        return evaluate_payoff(payoff, x);
    });
    return std::exp(-model.r[i] * tau) * expectation;
}

double eta(const RegimeModel& model, const Payoff& payoff, double horizon, double t, const Vec& s,
           int i, int quad_order) {
    const double tau = horizon - t;
    if (tau <= 0.0) return evaluate_payoff(payoff, s);
    if (model.d == 1 &&
        (payoff.kind == PayoffKind::VanillaCall || payoff.kind == PayoffKind::VanillaPut)) {
        const bool call = payoff.kind == PayoffKind::VanillaCall;
        const double w = payoff.weights.size() > 0 ? payoff.weights[0] : 1.0;
        const double vol = std::sqrt(model.a[i](0, 0));
        // max(w s - K, 0) = w max(s - K/w, 0)
        return w * black_scholes(call, s[0], payoff.strike / w, model.r[i], vol, tau);
    }
    return eta_quadrature(model, payoff, horizon, t, s, i, quad_order);
}

}  // namespace tcert
