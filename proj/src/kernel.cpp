#include "tcert/kernel.hpp"

#include <cmath>

#include "tcert/gauss_hermite.hpp"

namespace tcert {

static void require_positive(const Vec& p, const char* name) {
    for (int l = 0; l < p.size(); ++l)
        if (p[l] <= 0.0)
            throw NonPositiveCoordinate(std::string(name) + " component " + std::to_string(l + 1) +
                                        " must be positive");
}

KernelParams::KernelParams(const RegimeModel& model, int regime_, double v_)
    : regime(regime_), v(v_) {
    if (v <= 0.0) throw DegenerateTime("elapsed time must be positive");
    cov = v * model.a[regime];
    chol = std::sqrt(v) * model.chol_a[regime];
    log_shift = Vec(model.d);
    for (int l = 0; l < model.d; ++l)
        log_shift[l] = (model.r[regime] - 0.5 * model.a[regime](l, l)) * v;
}

double log_transition_density(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                              double v) {
    if (v <= 0.0) throw DegenerateTime("elapsed time must be positive");
    require_positive(x, "x");
    require_positive(s, "s");
    const int d = model.d;
    // deviation of ln x from the shifted log mean, whitened by chol(v a)
    Vec w(d);
    for (int l = 0; l < d; ++l)
        w[l] = std::log(x[l] / s[l]) - (model.r[i] - 0.5 * model.a[i](l, l)) * v;
    const Mat& la = model.chol_a[i];
    const double sqv = std::sqrt(v);
    Vec y = la.triangularView<Eigen::Lower>().solve(w) / sqv;
    double log_det = 0.0;
    for (int l = 0; l < d; ++l) log_det += 2.0 * std::log(sqv * la(l, l));
    double log_x_prod = 0.0;
    for (int l = 0; l < d; ++l) log_x_prod += std::log(x[l]);
    return -0.5 * y.squaredNorm() - 0.5 * log_det - 0.5 * d * std::log(2.0 * M_PI) - log_x_prod;
}

double transition_density(const RegimeModel& model, const Vec& x, const Vec& s, int i, double v) {
    return std::exp(log_transition_density(model, x, s, i, v));
}

double moment_identity_residual(const RegimeModel& model, const Vec& s, int i, double v,
                                int quad_order) {
    if (v <= 0.0) throw DegenerateTime("elapsed time must be positive");
    require_positive(s, "s");
    const KernelParams kp(model, i, v);
    Vec mean = s.array().log().matrix() + kp.log_shift;
    GaussianExpectation quad(model.d, quad_order);
    const double integral = quad.integrate(mean, kp.chol, [](const Vec& z) {
        double sum = 1.0;
        for (int l = 0; l < z.size(); ++l) sum += std::exp(z[l]);
        return sum;
    });
    if (!std::isfinite(integral))
        throw QuadratureDivergence("moment quadrature produced non-finite values");
    double target = 1.0;
    for (int l = 0; l < model.d; ++l) target += s[l] * std::exp(model.r[i] * v);
    return std::abs(integral - target);
}

Vec sample_step(const RegimeModel& model, const Vec& s, int i, double v, rng::Xoshiro256pp& gen) {
    if (v <= 0.0) throw DegenerateTime("elapsed time must be positive");
    if (!model.validated || model.chol_a.empty())
        throw CholeskyFailure("no diffusion factor: validate the model first");
    const int d = model.d;
    Vec xi(d);
    for (int l = 0; l < d; ++l) xi[l] = gen.next_normal();
    const double sqv = std::sqrt(v);
    Vec x(d);
    for (int l = 0; l < d; ++l) {
        double diff = 0.0;
        for (int m = 0; m <= l; ++m) diff += model.chol_a[i](l, m) * xi[m];
        const double z =
            std::log(s[l]) + (model.r[i] - 0.5 * model.a[i](l, l)) * v + sqv * diff;
        x[l] = std::exp(z);
    }
    return x;
}

KernelDerivatives kernel_derivatives(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                                     double v) {
    if (v <= 0.0) throw DegenerateTime("elapsed time must be positive");
    require_positive(x, "x");
    require_positive(s, "s");
    const int d = model.d;
    const Mat& ainv = model.a_inv[i];
    Vec w(d), shift(d);
    for (int l = 0; l < d; ++l) {
        shift[l] = (model.r[i] - 0.5 * model.a[i](l, l)) * v;
        w[l] = std::log(x[l] / s[l]) - shift[l];
    }
    const Vec aw = ainv * w;

    KernelDerivatives out;
    // time derivative: determinant term, quadratic term, and drift-shift term
    out.g1 = -0.5 * d / v + 0.5 * w.dot(aw) / (v * v) + shift.dot(aw) / (v * v);

    out.g2 = Vec(d);
    for (int l = 0; l < d; ++l) out.g2[l] = aw[l] / (v * s[l]);

    out.dg2_ds = Mat(d, d);
    for (int l = 0; l < d; ++l)
        for (int m = 0; m < d; ++m) {
            double val = -ainv(m, l) / (v * s[l] * s[m]);
            if (l == m) val -= out.g2[l] / s[l];
            out.dg2_ds(l, m) = val;
        }
    return out;
}

double generator_identity_residual(const RegimeModel& model, const Vec& x, const Vec& s, int i,
                                   double v) {
    const KernelDerivatives kd = kernel_derivatives(model, x, s, i, v);
    const int d = model.d;
    double bracket = -kd.g1;
    for (int l = 0; l < d; ++l) bracket += model.r[i] * s[l] * kd.g2[l];
    for (int l = 0; l < d; ++l)
        for (int m = 0; m < d; ++m)
            bracket += 0.5 * s[l] * s[m] * model.a[i](l, m) *
                       (kd.dg2_ds(l, m) + kd.g2[l] * kd.g2[m]);
    return std::abs(bracket);
}

}  // namespace tcert
