#pragma once

#include <optional>

#include "tcert/fd.hpp"
#include "tcert/model.hpp"

namespace tcert {

/// Diffusion gap D_l = min_i ( a_ll(i) - 2 r(i) ); its sign selects the
/// supersolution parameter branch.
double diffusion_gap(const RegimeModel& model, int l);

/// Linear growth envelope of the un-truncated solution at (t, s):
///   lower = -k3 e^{-(min_i r(i))(T-t)} + k4·s,
///   upper =  k1 e^{-(min_i r(i))(T-t)} + k2·s.
std::pair<double, double> growth_envelope(const RegimeModel& model, const GrowthBounds& growth,
                                          double horizon, double t, const Vec& s);

/// Sampling resolution for boundary suprema. The sup is re-checked on a 4x
/// refined grid and the larger value is kept.
struct FarGridSpec {
    double t_lo = 0.0;
    int t_count = 64;
    int s_count = 33;  // per transverse dimension of each facet
};

struct FarFieldBound {
    double sup = 0.0;     // sup over Γ of max(|upper - h|, |lower - h|)
    double sup_v1 = 0.0;  // same, normalized by 1 + ||s||_1
};

/// Far-field boundary error: the worst-case distance between the imposed
/// data h and the growth envelope that brackets the true solution on Γ.
FarFieldBound far_boundary_bound(const RegimeModel& model, const Payoff& payoff,
                                 const GrowthBounds& growth, const BoundaryData& boundary,
                                 const TruncatedDomain& domain, const FarGridSpec& grid);

/// Parameters (ε_l, γ_l, k_l) of the comparison function
///   y_l(t,s) = (T+ε_l-t)^{-1/2} exp(-γ_l ln²(s_l/(k_l s_l^u)) / (T+ε_l-t)).
struct SupersolutionParams {
    double eps = 0.0;
    double gamma = 0.0;
    double k = 1.0;
    double gap = 0.0;        // D_l the parameters were built for
    bool anchored = false;   // true on the D_l <= 0 branch
    double t_hat = 0.0;
    double s_hat = 0.0;
};

/// Chooses supersolution parameters for dimension l. D_l > 0: the closed
/// forms γ = 1/(2 max_i a_ll), k = exp(max_i a_ll / D_l). D_l <= 0: requires
/// an anchor (t̂, ŝ) with ln(s_l^u/ŝ_l) > -D_l (T - t̂) (default: domain
/// midpoint, t̂ raised toward T until the inequality holds with 10% slack),
/// γ strictly below both admissible caps, and k found by doubling until the
/// residual check passes on a verification grid. Throws AnchorInfeasible for
/// a user anchor violating the inequality.
SupersolutionParams supersolution_params(const RegimeModel& model, int l,
                                         const TruncatedDomain& domain,
                                         std::optional<std::pair<double, Vec>> anchor = {});

/// y_l(t, s); positive, depends on time and the l-th coordinate only.
double y_eval(const SupersolutionParams& params, const TruncatedDomain& domain, int l, double t,
              double s_l);

/// (∂_t + L) y_l at (t, s, i) via the closed-form quadratic bracket in
/// ln(s_l/(k_l s_l^u)); nonpositive for admissible parameters.
double supersolution_residual(const SupersolutionParams& params, const RegimeModel& model,
                              const TruncatedDomain& domain, int l, double t, double s_l, int i);

/// Globally valid spatial decay factor (the regime-switching estimate).
double psi_bar(const RegimeModel& model, int l, double t, double s_l,
               const TruncatedDomain& domain);

/// Intermediate max-of-two-exponentials form of the decay factor, before the
/// final simplification; diagnostics only. Uses the constructive parameter
/// choices. On the positive-gap branch it is never larger than psi_bar; on
/// the anchored branch psi_bar is a parameter limit and may be smaller.
double psi_bar_proof_form(const RegimeModel& model, int l, double t, double s_l,
                          const TruncatedDomain& domain);

/// Literature decay factor, valid on the subdomain D only; the t -> T
/// singularity is resolved by its continuous limit (0 below s_l^u, 1 at it).
double psi(const RegimeModel& model, int l, double t, double s_l, const TruncatedDomain& domain);

/// Membership in D: ln(s_l^u / s_l) + D_l (T - t) >= 0 for every l.
bool in_domain_D(const RegimeModel& model, double t, const Vec& s, const TruncatedDomain& domain);

/// Combined estimate: min(psi, psi_bar) on D, psi_bar elsewhere.
double psi_hat(const RegimeModel& model, int l, double t, const Vec& s,
               const TruncatedDomain& domain);

/// Abstract interior estimate: boundary_ratio_sup · Σ_l C_l y_l(t, s).
/// Each y_l is re-verified to be a supersolution on a spot-check grid;
/// throws InvalidSupersolution on failure.
double abstract_near_field(const RegimeModel& model,
                           const std::vector<SupersolutionParams>& params, const Vec& weights,
                           double boundary_ratio_sup, const TruncatedDomain& domain, double t,
                           const Vec& s);

struct BoundReport {
    Vec psi;        // per dimension
    Vec psi_bar;
    Vec psi_hat;
    bool in_D = false;
    double far_bound = 0.0;
    double far_bound_v1 = 0.0;
    double certified = 0.0;           // far_bound * Σ psi_hat
    double certified_bar_only = 0.0;  // far_bound * Σ psi_bar
};

/// Certified interior truncation error at (t, s, i): the far-field boundary
/// bound taken over [t, T) × Γ times the summed decay factors. The probe
/// must be interior to [0, T) × R (ProbeOutsideDomain).
BoundReport certify_point(const RegimeModel& model, const Payoff& payoff,
                          const BoundaryData& boundary, const TruncatedDomain& domain, double t,
                          const Vec& s, int i, const FarGridSpec& grid = {});

/// Same evaluation without the interiority check (used for boundary-touching
/// sweeps such as domain sizing).
BoundReport certify_eval(const RegimeModel& model, const Payoff& payoff,
                         const BoundaryData& boundary, const TruncatedDomain& domain, double t,
                         const Vec& s, const FarGridSpec& grid = {});

struct SizingResult {
    double scale = 1.0;  // c with s^u = c * s_probe
    Vec s_hi;
    double achieved = 0.0;
};

/// Smallest uniform scale c >= 1 with s^u = c·s_probe whose certified bound
/// at the probe is within tolerance; doubling bracket then bisection on
/// [1, 2^20]. Throws ToleranceUnreachable (reporting the achieved bound) if
/// the bracket cap is insufficient.
SizingResult size_domain(const RegimeModel& model, const Payoff& payoff,
                         const BoundaryData& boundary, const TruncatedDomain& base_domain,
                         const ProbePoint& probe, double tolerance,
                         const FarGridSpec& grid = {});

}  // namespace tcert
