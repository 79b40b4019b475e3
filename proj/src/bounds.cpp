#include "tcert/bounds.hpp"

#include <cmath>

namespace tcert {

double diffusion_gap(const RegimeModel& model, int l) {
    double gap = model.a[0](l, l) - 2.0 * model.r[0];
    for (int i = 1; i < model.k; ++i)
        gap = std::min(gap, model.a[i](l, l) - 2.0 * model.r[i]);
    return gap;
}

std::pair<double, double> growth_envelope(const RegimeModel& model, const GrowthBounds& growth,
                                          double horizon, double t, const Vec& s) {
    const double df = std::exp(-model.min_rate() * (horizon - t));
    return {-growth.k3 * df + growth.k4.dot(s), growth.k1 * df + growth.k2.dot(s)};
}

// ---------------------------------------------------------------------------
// far-field boundary error

namespace {

template <class Fn>
void for_each_facet_node(const TruncatedDomain& domain, int s_count, Fn&& fn) {
    const int d = static_cast<int>(domain.s_lo.size());
    for (int l = 0; l < d; ++l) {
        for (int side = 0; side < 2; ++side) {
            if (side == 0 && domain.s_lo[l] <= 0.0) continue;  // zero facets are not in Γ
            const double fixed = side == 0 ? domain.s_lo[l] : domain.s_hi[l];
            // sweep the transverse coordinates
            std::vector<int> idx(d, 0);
            for (;;) {
                Vec s(d);
                s[l] = fixed;
                for (int m = 0; m < d; ++m) {
                    if (m == l) continue;
                    s[m] = domain.s_lo[m] +
                           (domain.s_hi[m] - domain.s_lo[m]) * idx[m] / (s_count - 1);
                }
                fn(s);
                int m = d - 1;
                for (; m >= 0; --m) {
                    if (m == l) continue;
                    if (++idx[m] < s_count) break;
                    idx[m] = 0;
                }
                if (m < 0) break;
                if (d == 1) break;
            }
            if (d == 1) continue;
        }
    }
}

FarFieldBound far_bound_on_grid(const RegimeModel& model, const Payoff& payoff,
                                const GrowthBounds& growth, const BoundaryData& boundary,
                                const TruncatedDomain& domain, double t_lo, int t_count,
                                int s_count) {
    FarFieldBound out;
    const double T = domain.horizon;
    for (int tn = 0; tn < t_count; ++tn) {
        const double t = t_lo + (T - t_lo) * tn / (t_count - 1);
        for_each_facet_node(domain, s_count, [&](const Vec& s) {
            const auto [lower, upper] = growth_envelope(model, growth, T, t, s);
            for (int i = 0; i < model.k; ++i) {
                const double h = boundary.value(model, payoff, growth, T, t, s, i);
                const double e = std::max(std::abs(upper - h), std::abs(lower - h));
                out.sup = std::max(out.sup, e);
                out.sup_v1 = std::max(out.sup_v1, e / (1.0 + s.lpNorm<1>()));
            }
        });
    }
    return out;
}

}  // namespace

FarFieldBound far_boundary_bound(const RegimeModel& model, const Payoff& payoff,
                                 const GrowthBounds& growth, const BoundaryData& boundary,
                                 const TruncatedDomain& domain, const FarGridSpec& grid) {
    const int tc = std::max(2, grid.t_count);
    const int sc = std::max(2, grid.s_count);
    FarFieldBound base =
        far_bound_on_grid(model, payoff, growth, boundary, domain, grid.t_lo, tc, sc);
    // refinement re-check guards against a sup landing between grid nodes
    FarFieldBound fine =
        far_bound_on_grid(model, payoff, growth, boundary, domain, grid.t_lo, 4 * tc, 4 * sc);
    base.sup = std::max(base.sup, fine.sup);
    base.sup_v1 = std::max(base.sup_v1, fine.sup_v1);
    return base;
}

// ---------------------------------------------------------------------------
// supersolutions

double y_eval(const SupersolutionParams& params, const TruncatedDomain& domain, int l, double t,
              double s_l) {
    const double tau = domain.horizon + params.eps - t;
    const double lhat = std::log(s_l / (params.k * domain.s_hi[l]));
    return std::exp(-params.gamma * lhat * lhat / tau) / std::sqrt(tau);
}

double supersolution_residual(const SupersolutionParams& params, const RegimeModel& model,
                              const TruncatedDomain& domain, int l, double t, double s_l, int i) {
    const double tau = domain.horizon + params.eps - t;
    const double lhat = std::log(s_l / (params.k * domain.s_hi[l]));
    const double a = model.a[i](l, l);
    const double r = model.r[i];
    const double g = params.gamma;
    const double bracket = g * (2.0 * a * g - 1.0) * lhat * lhat +
                           g * (a - 2.0 * r) * tau * lhat + (0.5 - g * a - r * tau) * tau;
    return y_eval(params, domain, l, t, s_l) * bracket / (tau * tau);
}

namespace {

bool residual_nonpositive_on_grid(const SupersolutionParams& params, const RegimeModel& model,
                                  const TruncatedDomain& domain, int l, int nodes) {
    const double s_hi = domain.s_hi[l];
    const double s_lo = domain.s_lo[l] > 0.0 ? domain.s_lo[l] : s_hi * 1e-6;
    for (int ti = 0; ti < nodes; ++ti) {
        const double t = domain.horizon * (ti + 0.5) / nodes;
        for (int si = 0; si < nodes; ++si) {
            const double u =
                std::log(s_lo) + (std::log(s_hi) - std::log(s_lo)) * si / (nodes - 1);
            const double s_l = std::exp(u);
            for (int i = 0; i < model.k; ++i)
                if (supersolution_residual(params, model, domain, l, t, s_l, i) > 1e-12)
                    return false;
        }
    }
    return true;
}

}  // namespace

SupersolutionParams supersolution_params(const RegimeModel& model, int l,
                                         const TruncatedDomain& domain,
                                         std::optional<std::pair<double, Vec>> anchor) {
    SupersolutionParams p;
    p.gap = diffusion_gap(model, l);
    const double maxa = model.max_diffusion(l);

    // gaps at rounding distance from zero would overflow exp(maxa / D);
    // route them through the anchored branch like a true zero
    if (p.gap > 1e-10 * std::max(1.0, maxa)) {
        p.gamma = 1.0 / (2.0 * maxa);
        p.k = std::exp(maxa / p.gap);
        p.eps = std::log(p.k) / (maxa + std::abs(p.gap));
        return p;
    }

    // D_l <= 0: anchored construction
    p.anchored = true;
    const double T = domain.horizon;
    if (anchor) {
        p.t_hat = anchor->first;
        p.s_hat = anchor->second[l];
        if (p.t_hat < 0.0 || p.t_hat >= T || p.s_hat <= domain.s_lo[l] ||
            p.s_hat >= domain.s_hi[l] ||
            std::log(domain.s_hi[l] / p.s_hat) <= -p.gap * (T - p.t_hat))
            throw AnchorInfeasible("anchor violates ln(s_u/s_hat) > -D (T - t_hat)");
    } else {
        p.s_hat = 0.5 * (domain.s_lo[l] + domain.s_hi[l]);
        const double ratio = std::log(domain.s_hi[l] / p.s_hat);
        p.t_hat = 0.0;
        if (-p.gap > 0.0 && ratio <= 1.1 * (-p.gap) * T)
            p.t_hat = T - ratio / (1.1 * (-p.gap));
    }
    const double ratio = std::log(domain.s_hi[l] / p.s_hat);
    const double span = T - p.t_hat;
    const double cap1 = (1.0 + p.gap * span / ratio) / (2.0 * maxa);
    const double cap2 = span / (2.0 * ratio);
    p.gamma = 0.5 * std::min(cap1, cap2);

    for (double k = 2.0; k <= std::ldexp(1.0, 40); k *= 2.0) {
        p.k = k;
        p.eps = span * std::log(k) / ratio;
        if (residual_nonpositive_on_grid(p, model, domain, l, 64)) return p;
    }
    throw InvalidSupersolution("doubling search for k_l failed to certify the supersolution");
}

// ---------------------------------------------------------------------------
// decay factors

double psi_bar(const RegimeModel& model, int l, double t, double s_l,
               const TruncatedDomain& domain) {
    const double maxa = model.max_diffusion(l);
    const double gap = diffusion_gap(model, l);
    const double gap_pos = std::max(gap, 0.0);
    const double tau = domain.horizon - t;
    const double big_l = std::log(domain.s_hi[l] / s_l);
    const double num = -big_l * ((gap_pos / maxa) * big_l + 2.0) +
                       (maxa + std::abs(gap)) * tau;
    const double den = 2.0 * (gap_pos * tau + maxa / (maxa + gap_pos));
    return std::exp(num / den);
}

double psi_bar_proof_form(const RegimeModel& model, int l, double t, double s_l,
                          const TruncatedDomain& domain) {
    const SupersolutionParams p = supersolution_params(model, l, domain);
    const double tau = domain.horizon + p.eps - t;
    const double big_l = std::log(domain.s_hi[l] / s_l);
    const double log_k = std::log(p.k);
    // ratio of y at the point to its minimum on the far facet; the facet
    // minimum sits at one of the time endpoints
    const double at_start = std::exp(-p.gamma * big_l * (big_l + 2.0 * log_k) / tau);
    const double at_end = std::sqrt(p.eps / tau) *
                          std::exp(-p.gamma * (big_l + log_k) * (big_l + log_k) / tau +
                                   p.gamma * log_k * log_k / p.eps);
    return std::max(at_start, at_end);
}

double psi(const RegimeModel& model, int l, double t, double s_l, const TruncatedDomain& domain) {
    const double tau = domain.horizon - t;
    if (tau <= 0.0) return s_l >= domain.s_hi[l] ? 1.0 : 0.0;
    const double maxa = model.max_diffusion(l);
    const double gap = diffusion_gap(model, l);
    const double big_l = std::log(domain.s_hi[l] / s_l);
    return std::exp(-big_l * (big_l + std::min(0.0, gap) * tau) / (2.0 * maxa * tau));
}

bool in_domain_D(const RegimeModel& model, double t, const Vec& s, const TruncatedDomain& domain) {
    const double tau = domain.horizon - t;
    for (int l = 0; l < s.size(); ++l) {
        if (s[l] <= 0.0) continue;  // ln(s_u/s) -> +inf
        if (std::log(domain.s_hi[l] / s[l]) + diffusion_gap(model, l) * tau < 0.0) return false;
    }
    return true;
}

double psi_hat(const RegimeModel& model, int l, double t, const Vec& s,
               const TruncatedDomain& domain) {
    const double bar = psi_bar(model, l, t, s[l], domain);
    if (!in_domain_D(model, t, s, domain)) return bar;
    return std::min(psi(model, l, t, s[l], domain), bar);
}

double abstract_near_field(const RegimeModel& model,
                           const std::vector<SupersolutionParams>& params, const Vec& weights,
                           double boundary_ratio_sup, const TruncatedDomain& domain, double t,
                           const Vec& s) {
    const int d = static_cast<int>(params.size());
    for (int l = 0; l < d; ++l)
        if (!residual_nonpositive_on_grid(params[l], model, domain, l, 24))
            throw InvalidSupersolution("comparison function fails (∂_t + L) y <= 0 in dim " +
                                       std::to_string(l + 1));
    double sum = 0.0;
    for (int l = 0; l < d; ++l) sum += weights[l] * y_eval(params[l], domain, l, t, s[l]);
    return boundary_ratio_sup * sum;
}

// ---------------------------------------------------------------------------
// certification

BoundReport certify_eval(const RegimeModel& model, const Payoff& payoff,
                         const BoundaryData& boundary, const TruncatedDomain& domain, double t,
                         const Vec& s, const FarGridSpec& grid) {
    const GrowthBounds growth = payoff_growth_bounds(payoff, model.d);
    FarGridSpec g = grid;
    g.t_lo = t;
    const FarFieldBound far = far_boundary_bound(model, payoff, growth, boundary, domain, g);

    BoundReport report;
    const int d = model.d;
    report.psi = Vec(d);
    report.psi_bar = Vec(d);
    report.psi_hat = Vec(d);
    report.in_D = in_domain_D(model, t, s, domain);
    for (int l = 0; l < d; ++l) {
        report.psi[l] = psi(model, l, t, s[l], domain);
        report.psi_bar[l] = psi_bar(model, l, t, s[l], domain);
        report.psi_hat[l] = report.in_D ? std::min(report.psi[l], report.psi_bar[l])
                                        : report.psi_bar[l];
    }
    report.far_bound = far.sup;
    report.far_bound_v1 = far.sup_v1;
    report.certified = far.sup * report.psi_hat.sum();
    report.certified_bar_only = far.sup * report.psi_bar.sum();
    return report;
}

BoundReport certify_point(const RegimeModel& model, const Payoff& payoff,
                          const BoundaryData& boundary, const TruncatedDomain& domain, double t,
                          const Vec& s, int i, const FarGridSpec& grid) {
    if (i < 0 || i >= model.k) throw ConfigError("regime index out of range");
    if (t < 0.0 || t >= domain.horizon || !domain.strictly_inside(s))
        throw ProbeOutsideDomain("certification probe must be interior to [0,T) x R");
    return certify_eval(model, payoff, boundary, domain, t, s, grid);
}

SizingResult size_domain(const RegimeModel& model, const Payoff& payoff,
                         const BoundaryData& boundary, const TruncatedDomain& base_domain,
                         const ProbePoint& probe, double tolerance, const FarGridSpec& grid) {
    if (tolerance <= 0.0) throw ConfigError("sizing tolerance must be positive");
    if (probe.t < 0.0 || probe.t >= base_domain.horizon)
        throw ProbeOutsideDomain("sizing probe time must lie in [0, T)");
    for (int l = 0; l < probe.s.size(); ++l)
        if (probe.s[l] <= base_domain.s_lo[l])
            throw ProbeOutsideDomain("sizing probe must sit above the lower bounds");
    TruncatedDomain domain = base_domain;
    auto bound_at = [&](double c) {
        domain.s_hi = c * probe.s;
        return certify_eval(model, payoff, boundary, domain, probe.t, probe.s, grid).certified;
    };

    double lo = 1.0;
    double b_lo = bound_at(lo);
    SizingResult out;
    if (b_lo <= tolerance) {
        out.scale = lo;
        out.s_hi = probe.s;
        out.achieved = b_lo;
        return out;
    }
    double hi = lo, b_hi = b_lo;
    const double cap = std::ldexp(1.0, 20);
    while (b_hi > tolerance) {
        if (hi >= cap)
            throw ToleranceUnreachable("certified bound " + std::to_string(b_hi) +
                                       " above tolerance at the bracket cap 2^20");
        hi = std::min(cap, hi * 2.0);
        b_hi = bound_at(hi);
    }
    for (int iter = 0; iter < 60 && (hi - lo) > 1e-3 * hi; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (bound_at(mid) <= tolerance)
            hi = mid;
        else
            lo = mid;
    }
    out.scale = hi;
    out.s_hi = hi * probe.s;
    out.achieved = bound_at(hi);
    return out;
}

}  // namespace tcert
